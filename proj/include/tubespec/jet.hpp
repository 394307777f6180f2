#pragma once

#include <array>
#include <cmath>

namespace tubespec {

// Truncated Taylor series in one variable: c[k] is the coefficient of x^k.
template <int N>
struct Jet {
    std::array<double, N> c{};

    Jet() = default;
    Jet(double v) { c[0] = v; }  // NOLINT: implicit lift of constants

    static Jet variable(double v) {
        Jet j(v);
        if constexpr (N > 1) j.c[1] = 1.0;
        return j;
    }
    double value() const { return c[0]; }

    Jet& operator+=(const Jet& o) {
        for (int k = 0; k < N; ++k) c[k] += o.c[k];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        for (int k = 0; k < N; ++k) c[k] -= o.c[k];
        return *this;
    }
    Jet& operator*=(const Jet& o) { return *this = *this * o; }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator-(Jet a) {
        for (auto& v : a.c) v = -v;
        return a;
    }
    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet r;
        for (int i = 0; i < N; ++i)
            for (int j = 0; i + j < N; ++j) r.c[i + j] += a.c[i] * b.c[j];
        return r;
    }
    friend Jet operator/(const Jet& a, const Jet& b) {
        Jet r;
        for (int k = 0; k < N; ++k) {
            double s = a.c[k];
            for (int j = 1; j <= k; ++j) s -= b.c[j] * r.c[k - j];
            r.c[k] = s / b.c[0];
        }
        return r;
    }
    friend bool operator<(const Jet& a, const Jet& b) { return a.c[0] < b.c[0]; }
    friend bool operator>(const Jet& a, const Jet& b) { return a.c[0] > b.c[0]; }
    friend bool operator<=(const Jet& a, const Jet& b) { return a.c[0] <= b.c[0]; }
    friend bool operator>=(const Jet& a, const Jet& b) { return a.c[0] >= b.c[0]; }
};

template <int N>
Jet<N> exp(const Jet<N>& a) {
    Jet<N> r;
    r.c[0] = std::exp(a.c[0]);
    for (int k = 1; k < N; ++k) {
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += j * a.c[j] * r.c[k - j];
        r.c[k] = s / k;
    }
    return r;
}

template <int N>
Jet<N> sqrt(const Jet<N>& a) {
    Jet<N> r;
    r.c[0] = std::sqrt(a.c[0]);
    for (int k = 1; k < N; ++k) {
        double s = a.c[k];
        for (int j = 1; j < k; ++j) s -= r.c[j] * r.c[k - j];
        r.c[k] = s / (2.0 * r.c[0]);
    }
    return r;
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Jet<N>& x) {
    return x.value();
}

}  // namespace tubespec
