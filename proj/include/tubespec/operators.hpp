#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "tubespec/eigensolver.hpp"
#include "tubespec/geometry.hpp"
#include "tubespec/operator.hpp"
#include "tubespec/xsection.hpp"

namespace tubespec {

enum class EndCondition { Dirichlet, Neumann };

// Source of the B^2 coefficient in the critical 2D effective operator.
// Measured: Galerkin projection of the discrete longitudinal square onto the
// J1 fiber (its continuum limit is the measured moment ||tau J1||^2).
// Moment: node potential ||tau J1||^2 B^2. Printed: (1/3 + 2/pi^2) B^2.
enum class EffectiveCoefficient { Measured, Moment, Printed };

// Realisation of the 3D effective operator.
enum class EffectivePath { Galerkin, Coefficients };

std::string to_string(EffectiveCoefficient c);
EffectiveCoefficient effective_coefficient_from_string(const std::string& s);
std::string to_string(EffectivePath p);

struct AssemblyOptions {
    double ds = 0.0;  // 0: the curve spacing
    double s_lo = std::numeric_limits<double>::quiet_NaN();  // NaN: -S
    double s_hi = std::numeric_limits<double>::quiet_NaN();  // NaN: +S
    EndCondition ends = EndCondition::Dirichlet;
    bool apply_shift = true;  // add -eps^{-2} lambda1 + K
    int max_unknowns = 300000;
    // Discrete gauge transform: chi(s_right) - chi(s_left) is added to every
    // longitudinal edge phase.
    std::function<double(double)> gauge_shift;
};

// Longitudinal lattice. Dirichlet: nodes s_lo + k ds, k = 1..n-1.
// Neumann: cell centres s_lo + (k + 1/2) ds, k = 0..n-1.
struct SLattice {
    TubeGrid grid;
    EndCondition ends = EndCondition::Dirichlet;
    double s_lo = 0.0, s_hi = 0.0;

    int edges() const { return ends == EndCondition::Dirichlet ? grid.ns + 1 : grid.ns - 1; }
    int left(int e) const { return ends == EndCondition::Dirichlet ? e - 1 : e; }
    int right(int e) const { return left(e) + 1; }
    double edge_s(int e) const { return grid.s(left(e)) + 0.5 * grid.ds; }
    std::vector<double> nodes() const;
    std::vector<double> edge_nodes() const;
};

SLattice make_lattice(const CurveProfile& curve, int nt, const AssemblyOptions& opt);

// 2 sup(kappa^2/4) + 1.
double default_K(const CurveProfile& curve);

// Grid-normalised discrete ground state data of the section (cached).
std::shared_ptr<const XSectionConstants> section_constants(const GridDomain& section);

// Coefficient arrays of the quadratic form
//   sum_e w_e |F_e (m u)|^2 + eps^{-2} sum_slices |transverse Peierls differences|^2 + <V u, u>
// from which every tube operator is assembled. F_e is the covariant
// longitudinal difference with a symmetric split of the edge phase plus the
// slice average of (-i theta' d_alpha + R).
struct TubeForm {
    SLattice lattice;
    const GridDomain* section = nullptr;
    double eps = 1.0;
    Mat m;             // ns x nt, h^{-1/2} at nodes
    Mat edge_weight;   // edges x nt, 1/h at edge midpoints
    Mat edge_phase;    // edges x nt
    Vec thetap;        // ns
    Mat R;             // ns x nt (empty: zero)
    Mat phase_x;       // ns x nt, phase of the +x transverse edge (empty: zero)
    Mat phase_y;       // ns x nt
    Mat V;             // ns x nt
    bool transverse = true;
};

SpCMat longitudinal_matrix(const TubeForm& f);
SpCMat transverse_matrix(const TubeForm& f);
AssembledOperator assemble_form(const TubeForm& f, const std::string& name);

AssembledOperator assemble_full_2d(const TubeGeometry& geo, const GridDomain& section,
                                   const RegimeParams& regime, const AssemblyOptions& opt = {});
AssembledOperator assemble_app_2d(const TubeGeometry& geo, const GridDomain& section,
                                  const RegimeParams& regime, const AssemblyOptions& opt = {});
AssembledOperator assemble_effective_2d(const TubeGeometry& geo, const GridDomain& section,
                                        const RegimeParams& regime, const XSectionConstants& constants,
                                        EffectiveCoefficient coef = EffectiveCoefficient::Measured,
                                        const AssemblyOptions& opt = {});
AssembledOperator assemble_full_3d(const TubeGeometry& geo, const GridDomain& section,
                                   const RegimeParams& regime, const AssemblyOptions& opt = {});
AssembledOperator assemble_effective_3d(const TubeGeometry& geo, const GridDomain& section,
                                        const RegimeParams& regime, const XSectionConstants& constants,
                                        EffectivePath path = EffectivePath::Galerkin,
                                        const AssemblyOptions& opt = {});

// E^* K E with E f = f (x) J1 (Euclidean-orthonormal fiber vector).
SpCMat fiber_projection(const SpCMat& K, const Vec& fiber, int ns);
// Euclidean fiber vector J1 * sqrt(cell) of a section.
Vec fiber_vector(const XSectionConstants& c, const GridDomain& section);

struct Spectrum {
    Vec values;
    CMat vectors;  // Euclidean-normalised
    Vec residuals;
    double threshold = 0.0;
    std::vector<bool> discrete;
    bool dense = false;
};

// k lowest eigenpairs. The shift defaults to the operator's sigma hint.
Spectrum smallest_eigenpairs(const AssembledOperator& op, int k, EigenOptions opt = {},
                             bool use_hint = true);

struct ResolventDistance {
    double value = 0.0;
    double error = 0.0;  // residual bound of the extremal Ritz pair
    int iterations = 0;
};

// || A^{-1} - E B^{-1} E^* || with E the J1 embedding when B is one-dimensional
// (fiber given), the identity when fiber is empty. Lanczos on the Hermitian
// difference with full reorthogonalisation.
ResolventDistance resolvent_distance(const AssembledOperator& A, const AssembledOperator& B,
                                     const Vec& fiber = Vec(), double rtol = 1e-3, int max_iter = 300,
                                     std::uint64_t seed = 0x5eed5eedULL);

// Header lines "# key: value" (rows, cols, nnz, shift, eps, delta, b, K,
// name), then "i j re im" per stored entry.
void write_triplets(const AssembledOperator& op, std::ostream& os);

struct SpectrumRow {
    double eps, delta, b, K;
    int n;
    double value, residual;
    bool discrete;
};
void write_spectrum_csv(const std::vector<SpectrumRow>& rows, std::ostream& os);
std::vector<SpectrumRow> spectrum_rows(const Spectrum& sp, const RegimeParams& regime);

}  // namespace tubespec
