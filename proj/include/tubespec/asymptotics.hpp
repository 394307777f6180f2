#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tubespec/operators.hpp"

namespace tubespec {

// Discrete full 2D operator of the critical regime (b = 1/eps, no shift)
// written as sum_j eps^{j-2} L_j. The L_j are the Taylor coefficients in eps
// of the assembled matrix entries, so the truncated sum reproduces
// assemble_full_2d up to O(eps^{J_max - 1}).
struct SeriesOperator {
    SLattice lattice;
    const GridDomain* section = nullptr;
    int J_max = 0;
    std::vector<SpCMat> L;  // L[0] .. L[J_max]
    Vec fiber;              // Euclidean J1
    double lambda1 = 0.0;   // discrete transverse ground energy

    int ns() const { return lattice.grid.ns; }
    int nt() const { return lattice.grid.nt; }
    SpCMat evaluate(double eps) const;
    // E^* L_j E on the s-lattice.
    SpCMat projected(int j) const;
};

SeriesOperator expand_operator_2d(const TubeGeometry& geo, const GridDomain& section, int J_max,
                                  const AssemblyOptions& opt = {});

struct Quasimode {
    int J = 0;
    int n = 1;
    std::vector<double> gamma;  // gamma[j] multiplies eps^{j-2}
    std::vector<CVec> psi;      // psi[j] multiplies eps^j
    std::vector<CVec> f;        // longitudinal parts, psi[j] = f[j] (x) J1 + psi_perp[j]
    double fredholm_defect = 0.0;  // largest J1-projection left in a solved right-hand side
    double perp_defect = 0.0;      // largest <psi_perp, J1> over slices
    double spectral_gap = 0.0;     // distance of mu_n to the rest of the projected spectrum

    double Gamma(double eps) const;
    CVec Psi(double eps) const;
};

// Order-by-order solution of sum_{i+j=k} (L_i - gamma_i) psi_j = 0. Order 2
// is the eigenproblem of E^* L_2 E (mode n, 1-based); f_j is fixed at order
// j + 2 with <f_j, f_0> = 0, and set to zero when L_{j+2} is not available.
Quasimode build_quasimode(const SeriesOperator& series, int n, int J);

// eps^2 ||(L_full(eps) - Gamma_J) Psi_J|| / ||Psi_J|| with the unshifted full operator.
double quasimode_residual(const Quasimode& q, const TubeGeometry& geo, const GridDomain& section, double eps,
                          const AssemblyOptions& opt = {});

struct ExpansionRow {
    double eps;
    double lambda;      // full-operator eigenvalue (unshifted)
    double Gamma;       // truncated expansion
    double error;       // |lambda - Gamma|
    double overlap;     // modulus of the overlap with the previous eps
};

struct EigenvalueExpansion {
    int n = 1;
    int J = 2;
    int dim = 2;
    // (power of eps, coefficient): eps^{-2} lambda1, eps^{-1} 0, eps^0 mu_n, ...
    std::vector<std::pair<int, double>> coefficients;
    std::vector<ExpansionRow> rows;
    double slope = 0.0;         // fitted order of |lambda - Gamma|
    double scaled_slope = 0.0;  // fitted order of eps^2 |lambda - Gamma|
    std::string coefficient_source;
};

// Coefficients from the quasimode recursion (2D) and the verification sweep
// |lambda_n(eps) - Gamma_J(eps)| with modes tracked by eigenvector overlap.
EigenvalueExpansion eigenvalue_expansion(const TubeGeometry& geo, const GridDomain& section, int n, int J,
                                         const std::vector<double>& eps_list, const AssemblyOptions& opt = {},
                                         double min_overlap = 0.5);

// 3D, order 2 only: lambda1, 0, nu_n with nu_n from the effective operator at delta = 1.
EigenvalueExpansion eigenvalue_expansion_3d(const TubeGeometry& geo, const GridDomain& section, int n,
                                            const std::vector<double>& eps_list, const AssemblyOptions& opt = {},
                                            double min_overlap = 0.5);

void write_expansion_csv(const EigenvalueExpansion& e, std::ostream& os);

struct FormPair {
    Mat L1, L2;
    double eta = 0.0;  // ||L1^{-1/2} (L1 - L2) L2^{-1/2}||
};

FormPair make_form_pair(Mat L1, Mat L2);

struct FormPairReport {
    double resolvent_gap = 0.0;  // ||L1^{-1} - L2^{-1}||
    double eta = 0.0;
    double inv1 = 0.0, inv2 = 0.0;  // ||L1^{-1}||, ||L2^{-1}||
    // Slack of the bound eta ||L1^{-1}||^{1/2} ||L2^{-1}||^{1/2} established by the proof.
    double slack = 0.0;
    // Slack of eta ||L1^{-1}|| ||L2^{-1}|| as printed.
    double printed_slack = 0.0;
    int hypothesis_trials = 0;
    int hypothesis_failures = 0;
    double hypothesis_min_slack = 0.0;  // min of eta sqrt(Q1) sqrt(Q2) - |B1 - B2|, relative
};

FormPairReport check_form_resolvent_lemma(const FormPair& pair, int trials, std::uint64_t seed);

struct LemmaSuiteReport {
    int pairs = 0;
    int bound_failures = 0;
    int printed_failures = 0;
    int hypothesis_failures = 0;
    double min_slack = 0.0;
    double min_printed_slack = 0.0;
    int max_size = 0;
};

// Random SPD pairs of size 2..max_size (eigenvalues log-uniform in [lo, hi],
// Haar-like orthogonal factors from QR of Gaussian matrices).
LemmaSuiteReport run_lemma_suite(int pairs, int max_size, int trials, std::uint64_t seed, double lo = 0.05,
                                 double hi = 20.0);

}  // namespace tubespec
