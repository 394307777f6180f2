#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include "tubespec/grid.hpp"
#include "tubespec/operator.hpp"

namespace tubespec {

struct ModeSet {
    Vec values;
    Mat vectors;  // columns normalised in the grid inner product
    Vec residuals;
};

struct XSectionConstants {
    std::string descriptor;
    double h = 0.0;
    int dim = 1;

    double lambda1 = 0.0;
    double lambda2 = 0.0;
    Vec J1;
    double m2 = 0.0;   // <tau_2 J1, J1>
    double m3 = 0.0;   // <tau_3 J1, J1>
    double t22 = 0.0;  // <tau_2^2 J1, J1>
    double t23 = 0.0;  // <tau_2 tau_3 J1, J1>
    double t33 = 0.0;  // <tau_3^2 J1, J1>
    double second_moment = 0.0;  // ||tau J1||^2
    double p = 0.0;              // ||d_alpha J1||^2
    Vec rho;
    double kappa_mag = 0.0;      // <rho, d_alpha J1>
    double kappa_mag_energy = 0.0;  // <rho, (-Lap - lambda1) rho>
    double fredholm_defect = 0.0;   // <d_alpha J1, J1>
    double M = 0.0;              // second_moment/4 - kappa_mag
    double M_lattice = 0.0;      // same limit for the transverse Peierls form
};

AssembledOperator assemble_dirichlet_laplacian(const GridDomain& domain);

// Lowest k eigenpairs of a cross-section operator, normalised on the grid.
ModeSet lowest_modes(const AssembledOperator& op, int k, const GridDomain& domain);

// tau_3 d/dtau_2 - tau_2 d/dtau_3 by centred differences. A missing
// neighbour takes the value linearly extrapolated to zero at the boundary
// crossing, which is the zero extension on grid-aligned boundaries.
AssembledOperator angular_derivative(const GridDomain& domain);

// Solves (-Lap_h - lambda1) rho = d_alpha J1 with <rho, J1> = 0.
Vec solve_r_omega(const GridDomain& domain, const ModeSet& modes);

XSectionConstants compute_constants(const GridDomain& domain);

// Process-wide cache keyed by (descriptor, h). Persisted as a key/value text
// file: one "key = value" per line, records separated by "[record]".
class ConstantsCache {
public:
    static ConstantsCache& global();

    std::shared_ptr<const XSectionConstants> get(const GridDomain& domain);
    bool contains(const std::string& descriptor, double h) const;
    void clear();
    std::size_t size() const;
    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

    void save(const std::string& path) const;
    void load(const std::string& path);

    static std::string key(const std::string& descriptor, double h);

private:
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<const XSectionConstants>> entries_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
};

}  // namespace tubespec
