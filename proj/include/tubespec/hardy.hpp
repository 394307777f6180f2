#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tubespec/operators.hpp"

namespace tubespec {

// Magnetic operator of the straight tube (eps = 1, intensity b) on
// Omega(R) = (-R, R) x omega, Dirichlet on the lateral boundary and Neumann on
// |s| = R.
struct SegmentProblem {
    double R = 0.0;
    double b = 0.0;
    AssembledOperator op;  // unshifted
    double lambda1 = 0.0;  // discrete lambda1(omega)
    double lambda_dn = 0.0;
    double field_max = 0.0;  // max |B| over the segment nodes
};

// geo must be a straight tube (zero curvature and twist) whose window covers [-R, R].
SegmentProblem assemble_segment(const TubeGeometry& geo, const GridDomain& section, double R, double b,
                                double ds = 0.0);

// Cutoff pair chi0 = sin(pi q / 2), chi1 = cos(pi q / 2) with q the cubic
// smoothstep from |s| = 1/2 to |s| = 1, so chi0^2 + chi1^2 = 1 exactly.
struct CutoffPair {
    double chi0(double s) const;
    double chi1(double s) const;
    double dchi0(double s) const;
    double dchi1(double s) const;
    // sup(|chi0'|^2 + |chi1'|^2) by sampling.
    double C(int samples = 20001) const;
};

struct HardyCertificate {
    double R = 0.0, L = 0.0, b = 0.0, ds = 0.0, h = 0.0;
    double lambda1 = 0.0;
    double lambda_dn = 0.0;
    double C = 0.0;
    double c_R = 0.0;
    double c_R_limit = 0.0;  // (1/4)(1 + C R^{-2})^{-1}
    double mu_min = 0.0;
    double mu_dense = std::numeric_limits<double>::quiet_NaN();  // coarse cross-check
    double margin = 0.0;     // mu_min - c_R
    double tolerance = 1e-8;
    bool pass = false;
    bool verified = false;
};

// Fills R, b, lambda1, lambda_dn, C, c_R and c_R_limit.
HardyCertificate hardy_constant(const TubeGeometry& geo, const GridDomain& section, double b, double R,
                                double ds = 0.0);

// Smallest mu of (H - lambda1) psi = mu W psi on (-L, L) x omega (Dirichlet),
// W = 1/(1 + s^2); requires L >= 4R. dense_check adds a dense solve of the
// same pencil when the problem is small enough.
HardyCertificate verify_hardy(const TubeGeometry& geo, const GridDomain& section, double b, double R, double L,
                              double ds = 0.0, bool dense_check = false);

void write_certificates_csv(const std::vector<HardyCertificate>& rows, std::ostream& os);

// (pi / (2L))^2 times the safety factor 2.
double truncation_budget(double L);

// Planar deformation Phi(s, t) = (s + E1(s), t + eps2(s)) of the straight
// strip, scaled by an amplitude. Shift functions are compactly supported bumps.
struct DeformationSpec {
    std::vector<Bump> E1;    // longitudinal shift
    std::vector<Bump> eps2;  // transverse shift
    double lo() const;
    double hi() const;
};

struct DeformationPoint {
    double amplitude = 0.0;
    double lowest = 0.0;
    double min_alpha = 1.0;
    bool below = false;  // lowest < lambda1 - budget
};

struct DeformationReport {
    double b = 0.0;
    double L = 0.0;
    double lambda1 = 0.0;
    double budget = 0.0;
    std::vector<DeformationPoint> points;
    bool pass = false;  // no point below lambda1 - budget
};

// Lowest eigenvalue of the Dirichlet magnetic Laplacian on the deformed strip
// for each amplitude. field is the ambient 2D field, b its intensity.
DeformationReport deformation_experiment(const GridDomain& section, const AmbientField& field, double b,
                                         const DeformationSpec& def, const std::vector<double>& amplitudes,
                                         double L, double ds);

struct LargeBPoint {
    double b = 0.0;
    double lowest = 0.0;
    bool below = false;
};

struct LargeBReport {
    double lambda1 = 0.0;
    double budget = 0.0;
    std::vector<LargeBPoint> points;
    bool crossed = false;
    double b0 = 0.0;          // first b from which every later point is above lambda1 - budget
    double trend_slope = 0.0;  // d lowest / d b over the last two points when not crossed
    bool monotone = true;
};

// Lowest eigenvalue of the eps = 1 full operator along the b schedule.
LargeBReport large_b_experiment(const TubeGeometry& geo, const GridDomain& section, const std::vector<double>& schedule,
                                double ds = 0.0);

}  // namespace tubespec
