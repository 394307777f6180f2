#pragma once

#include <string>
#include <vector>

#include "tubespec/types.hpp"

namespace tubespec {

struct RegimeParams {
    double eps = 1.0;
    double delta = 0.0;
    double b = 1.0;  // eps^{-delta} unless set explicitly
    double K = 0.0;

    static RegimeParams make(double eps, double delta, double K = 0.0);
    void validate() const;
};

// Tensor grid bookkeeping: unknown (ks, kt) lives at ks * nt + kt, where kt
// indexes the cross-section unknowns and ks the longitudinal nodes
// s_min + ks * ds.
struct TubeGrid {
    int ns = 1;
    double ds = 0.0;
    double s_min = 0.0;
    int nt = 1;
    double s(int ks) const { return s_min + ks * ds; }
    int size() const { return ns * nt; }
};

struct AssembledOperator {
    bool is_complex = false;
    SpMat re;
    SpCMat cx;
    Vec mass;  // diagonal mass; empty = identity

    std::string name;
    TubeGrid grid;
    double cell = 1.0;  // quadrature weight of one unknown
    std::vector<std::string> boundary;  // per face, "Dirichlet" or "Neumann"
    double shift = 0.0;                 // constant already added to the matrix
    RegimeParams regime;
    double threshold = 0.0;  // essential-spectrum threshold estimate (shift included)
    double sigma_hint = 0.0;  // a value below the spectrum, used as eigensolver shift
    std::string notes;

    Eigen::Index rows() const { return is_complex ? cx.rows() : re.rows(); }
    SpCMat as_complex() const;
    double symmetry_defect() const;

    CVec apply(const CVec& x) const;
    void add_shift(double c);
};

}  // namespace tubespec
