#include <cmath>

#include <gtest/gtest.h>

#include "tubespec/errors.hpp"
#include "tubespec/fit.hpp"

using namespace tubespec;

namespace {
const std::vector<double> kEps = {0.2, 0.1, 0.05, 0.025};
}

TEST(FitOrder, ExactLinear) {
    std::vector<std::pair<double, double>> p;
    for (double e : kEps) p.emplace_back(e, e);
    const OrderFit f = fit_order(p);
    EXPECT_NEAR(f.slope, 1.0, 1e-12);
    EXPECT_NEAR(f.halfwidth, 0.0, 1e-10);
}

TEST(FitOrder, SyntheticSeries) {
    std::vector<std::pair<double, double>> p;
    for (double e : kEps) p.emplace_back(e, e * e + 0.01 * e * e * e);
    const OrderFit f = fit_order(p);
    EXPECT_GE(f.slope, 1.9);
    EXPECT_LE(f.slope, 2.1);
}

TEST(FitOrder, ConstantValues) {
    std::vector<std::pair<double, double>> p;
    for (double e : kEps) p.emplace_back(e, 3.0);
    EXPECT_NEAR(fit_order(p).slope, 0.0, 1e-12);
}

TEST(FitOrder, IntervalCoversNoisySlope) {
    std::vector<std::pair<double, double>> p;
    const double noise[] = {1.05, 0.97, 1.02, 0.99};
    for (int i = 0; i < 4; ++i) p.emplace_back(kEps[i], noise[i] * std::pow(kEps[i], 1.5));
    const OrderFit f = fit_order(p);
    EXPECT_GT(f.halfwidth, 0.0);
    EXPECT_LE(f.lo(), 1.5);
    EXPECT_GE(f.hi(), 1.5);
}

TEST(FitOrder, DomainErrors) {
    EXPECT_THROW(fit_order({{0.1, 1.0}, {0.05, 0.0}, {0.025, 1.0}}), FitDomainError);
    EXPECT_THROW(fit_order({{0.1, 1.0}, {0.05, 2.0}}), FitDomainError);
}
