#include "tubespec/fit.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "tubespec/errors.hpp"

namespace tubespec {

OrderFit fit_order(const std::vector<std::pair<double, double>>& pairs, double confidence) {
    const int n = static_cast<int>(pairs.size());
    if (n < 3) throw FitDomainError("at least 3 points are needed, got " + std::to_string(n));
    if (!(confidence > 0.0 && confidence < 1.0)) throw FitDomainError("confidence must lie in (0, 1)");
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
        const auto [e, v] = pairs[i];
        if (!(e > 0.0) || !(v > 0.0) || !std::isfinite(e) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "point " << i << " (" << e << ", " << v << ") is not positive";
            throw FitDomainError(os.str());
        }
        x[i] = std::log(e);
        y[i] = std::log(v);
    }
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw FitDomainError("all eps values coincide");
    OrderFit f;
    f.points = n;
    f.confidence = confidence;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        sse += r * r;
    }
    const double se = std::sqrt(sse / (n - 2) / sxx);
    boost::math::students_t dist(n - 2);
    f.halfwidth = boost::math::quantile(boost::math::complement(dist, 0.5 * (1.0 - confidence))) * se;
    return f;
}

}  // namespace tubespec
