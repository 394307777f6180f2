#include "tubespec/operator.hpp"

#include <cmath>

#include "tubespec/errors.hpp"

namespace tubespec {

RegimeParams RegimeParams::make(double eps, double delta, double K) {
    RegimeParams r;
    r.eps = eps;
    r.delta = delta;
    r.b = std::pow(eps, -delta);
    r.K = K;
    r.validate();
    return r;
}

void RegimeParams::validate() const {
    if (!(eps > 0)) throw ConfigError("epsilon must be positive");
    if (delta > 1.0 + 1e-12) throw ConfigError("delta > 1 is the semiclassical regime, outside scope");
}

SpCMat AssembledOperator::as_complex() const {
    if (is_complex) return cx;
    return re.cast<cplx>();
}

double AssembledOperator::symmetry_defect() const {
    if (is_complex) {
        SpCMat d = cx - SpCMat(cx.adjoint());
        double m = 0.0, s = 0.0;
        for (int k = 0; k < d.outerSize(); ++k)
            for (SpCMat::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
        for (int k = 0; k < cx.outerSize(); ++k)
            for (SpCMat::InnerIterator it(cx, k); it; ++it) s = std::max(s, std::abs(it.value()));
        return s > 0 ? m / s : m;
    }
    SpMat d = re - SpMat(re.transpose());
    double m = 0.0, s = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SpMat::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    for (int k = 0; k < re.outerSize(); ++k)
        for (SpMat::InnerIterator it(re, k); it; ++it) s = std::max(s, std::abs(it.value()));
    return s > 0 ? m / s : m;
}

CVec AssembledOperator::apply(const CVec& x) const {
    if (is_complex) return cx * x;
    return re.cast<cplx>() * x;
}

void AssembledOperator::add_shift(double c) {
    const Eigen::Index n = rows();
    if (is_complex) {
        SpCMat id(n, n);
        id.setIdentity();
        cx += cplx(c) * id;
    } else {
        SpMat id(n, n);
        id.setIdentity();
        re += c * id;
    }
    shift += c;
    threshold += c;
    sigma_hint += c;
}

}  // namespace tubespec
