#pragma once

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

// J0 by its power series, accurate to machine precision for |x| < 10.
inline double bessel_j0(double x) {
    double term = 1.0, sum = 1.0;
    const double q = -0.25 * x * x;
    for (int k = 1; k < 60; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
    }
    return sum;
}

// First zero of J0 by bisection on [2, 3].
inline double bessel_j0_root() {
    double a = 2.0, b = 3.0;
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (a + b);
        if (bessel_j0(a) * bessel_j0(m) <= 0.0) b = m; else a = m;
    }
    return 0.5 * (a + b);
}

inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// ||tau J1||^2 on (-1, 1) with J1 = cos(pi tau / 2), unit L2 norm.
inline double interval_second_moment() {
    const double pi = std::numbers::pi;
    return simpson([&](double t) { return t * t * std::pow(std::cos(0.5 * pi * t), 2); }, -1.0, 1.0, 20000);
}

}  // namespace oracle
