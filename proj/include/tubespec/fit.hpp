#pragma once

#include <utility>
#include <vector>

namespace tubespec {

struct OrderFit {
    double slope = 0.0;
    double intercept = 0.0;
    double halfwidth = 0.0;  // studentized half-width at the given confidence
    double confidence = 0.95;
    int points = 0;
    double lo() const { return slope - halfwidth; }
    double hi() const { return slope + halfwidth; }
};

// Least-squares slope of log(value) against log(eps).
OrderFit fit_order(const std::vector<std::pair<double, double>>& pairs, double confidence = 0.95);

}  // namespace tubespec
