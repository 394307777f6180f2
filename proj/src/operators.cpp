#include "tubespec/operators.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "tubespec/errors.hpp"

namespace tubespec {

namespace {

using Trip = Eigen::Triplet<cplx>;

double section_rsum(const GridDomain& g) {
    double r = 0.0;
    for (int k = 0; k < g.size(); ++k) {
        r = std::max(r, std::abs(g.x(k)) + (g.dim == 2 ? std::abs(g.y(k)) : 0.0));
    }
    return r + g.h * (g.dim == 2 ? 2.0 : 1.0);
}

double section_rmax(const GridDomain& g) {
    double r = 0.0;
    for (int k = 0; k < g.size(); ++k) r = std::max(r, std::hypot(g.x(k), g.dim == 2 ? g.y(k) : 0.0));
    return r + g.h;
}

void check_curvature(const CurveProfile& c, const GridDomain& section, double eps) {
    const double prod = eps * section_rsum(section) * c.sup_kappa();
    if (!(prod < 1.0)) {
        std::ostringstream os;
        os << "eps * sup(|tau_2|+|tau_3|) * sup|kappa| = " << prod << " >= 1";
        throw TubeOverlapError(os.str());
    }
}

bool full_window(const CurveProfile& c, const SLattice& lat) {
    return lat.s_lo <= -c.S + 1e-12 && lat.s_hi >= c.S - 1e-12;
}

TubeForm base_form(const SLattice& lat, const GridDomain& section, double eps) {
    TubeForm f;
    f.lattice = lat;
    f.section = &section;
    f.eps = eps;
    const int ns = lat.grid.ns, nt = lat.grid.nt, ne = lat.edges();
    f.m = Mat::Ones(ns, nt);
    f.edge_weight = Mat::Ones(ne, nt);
    f.edge_phase = Mat::Zero(ne, nt);
    f.thetap = Vec::Zero(ns);
    f.V = Mat::Zero(ns, nt);
    return f;
}

void apply_gauge_shift(TubeForm& f, const AssemblyOptions& opt) {
    if (!opt.gauge_shift) return;
    const SLattice& lat = f.lattice;
    for (int e = 0; e < lat.edges(); ++e) {
        const double sl = lat.grid.s(lat.left(e)), sr = lat.grid.s(lat.right(e));
        const double d = opt.gauge_shift(sr) - opt.gauge_shift(sl);
        f.edge_phase.row(e).array() += d;
    }
}

AssembledOperator finish(AssembledOperator op, const RegimeParams& regime, double lambda1, double vmin,
                         const AssemblyOptions& opt) {
    const double e2 = 1.0 / (regime.eps * regime.eps);
    op.regime = regime;
    op.threshold = e2 * lambda1;
    op.sigma_hint = e2 * lambda1 + std::min(vmin, 0.0) - 1.0;
    if (opt.apply_shift) op.add_shift(-e2 * lambda1 + regime.K);
    return op;
}

void check_budget(const SLattice& lat, const AssemblyOptions& opt) {
    if (lat.grid.size() > opt.max_unknowns) {
        std::ostringstream os;
        os << lat.grid.size() << " unknowns exceed the budget of " << opt.max_unknowns
           << "; use a coarser s or cross-section grid";
        throw GridBudgetError(os.str());
    }
}

double min_entry(const Mat& V) { return V.size() ? V.minCoeff() : 0.0; }

}  // namespace

std::string to_string(EffectiveCoefficient c) {
    switch (c) {
        case EffectiveCoefficient::Measured:
            return "measured";
        case EffectiveCoefficient::Moment:
            return "moment";
        case EffectiveCoefficient::Printed:
            return "printed";
    }
    return "measured";
}

EffectiveCoefficient effective_coefficient_from_string(const std::string& s) {
    if (s == "measured") return EffectiveCoefficient::Measured;
    if (s == "moment") return EffectiveCoefficient::Moment;
    if (s == "printed") return EffectiveCoefficient::Printed;
    throw ConfigError("unknown effective coefficient source '" + s + "'");
}

std::string to_string(EffectivePath p) { return p == EffectivePath::Galerkin ? "galerkin" : "coefficients"; }

std::vector<double> SLattice::nodes() const {
    std::vector<double> s(grid.ns);
    for (int k = 0; k < grid.ns; ++k) s[k] = grid.s(k);
    return s;
}

std::vector<double> SLattice::edge_nodes() const {
    std::vector<double> s(edges());
    for (int e = 0; e < edges(); ++e) s[e] = edge_s(e);
    return s;
}

SLattice make_lattice(const CurveProfile& curve, int nt, const AssemblyOptions& opt) {
    SLattice lat;
    lat.ends = opt.ends;
    lat.s_lo = std::isnan(opt.s_lo) ? -curve.S : opt.s_lo;
    lat.s_hi = std::isnan(opt.s_hi) ? curve.S : opt.s_hi;
    if (!(lat.s_hi > lat.s_lo)) throw ConfigError("empty longitudinal window");
    const double ds0 = opt.ds > 0.0 ? opt.ds : curve.spacing();
    const int n = std::max(2, static_cast<int>(std::round((lat.s_hi - lat.s_lo) / ds0)));
    lat.grid.ds = (lat.s_hi - lat.s_lo) / n;
    lat.grid.nt = nt;
    if (opt.ends == EndCondition::Dirichlet) {
        lat.grid.ns = n - 1;
        lat.grid.s_min = lat.s_lo + lat.grid.ds;
    } else {
        lat.grid.ns = n;
        lat.grid.s_min = lat.s_lo + 0.5 * lat.grid.ds;
    }
    return lat;
}

double default_K(const CurveProfile& curve) {
    const double k = curve.sup_kappa();
    return 2.0 * k * k / 4.0 + 1.0;
}

std::shared_ptr<const XSectionConstants> section_constants(const GridDomain& section) {
    return ConstantsCache::global().get(section);
}

Vec fiber_vector(const XSectionConstants& c, const GridDomain& section) {
    return c.J1 * std::sqrt(section.cell());
}

SpCMat longitudinal_matrix(const TubeForm& f) {
    const SLattice& lat = f.lattice;
    const int ns = lat.grid.ns, nt = lat.grid.nt, ne = lat.edges();
    const double ds = lat.grid.ds;
    const bool twist = f.thetap.size() && f.thetap.cwiseAbs().maxCoeff() > 0.0;
    const bool hasR = f.R.size() > 0;
    SpMat D;
    if (twist) {
        if (f.section->dim != 2) throw NotApplicable("twist needs a 2D cross section");
        D = angular_derivative(*f.section).re;
    }
    std::vector<Trip> t;
    t.reserve(static_cast<size_t>(ne) * nt * (twist ? 12 : 2));
    // Row access of D (column-major storage) goes through the transpose.
    SpMat Dt;
    if (twist) Dt = D.transpose();
    for (int e = 0; e < ne; ++e) {
        const int L = lat.left(e), Rn = lat.right(e);
        for (int kt = 0; kt < nt; ++kt) {
            const int row = e * nt + kt;
            const double ph = f.edge_phase(e, kt);
            const cplx cl = std::polar(1.0, -0.5 * ph), cr = std::polar(1.0, 0.5 * ph);
            if (Rn < ns) t.emplace_back(row, Rn * nt + kt, -I * cr / ds);
            if (L >= 0) t.emplace_back(row, L * nt + kt, I * cl / ds);
            for (int side = 0; side < 2; ++side) {
                const int slice = side == 0 ? L : Rn;
                const cplx c = 0.5 * (side == 0 ? cl : cr);
                if (slice < 0 || slice >= ns) continue;
                // Slice term (-i theta' d_alpha + R) w at row kt.
                if (hasR && f.R(slice, kt) != 0.0) t.emplace_back(row, slice * nt + kt, c * f.R(slice, kt));
                if (twist && f.thetap(slice) != 0.0) {
                    for (SpMat::InnerIterator it(Dt, kt); it; ++it) {
                        t.emplace_back(row, slice * nt + static_cast<int>(it.row()),
                                       c * (-I) * f.thetap(slice) * it.value());
                    }
                }
            }
        }
    }
    SpCMat F(static_cast<Eigen::Index>(ne) * nt, static_cast<Eigen::Index>(ns) * nt);
    F.setFromTriplets(t.begin(), t.end());
    CVec mvec(static_cast<Eigen::Index>(ns) * nt), wvec(static_cast<Eigen::Index>(ne) * nt);
    for (int ks = 0; ks < ns; ++ks)
        for (int kt = 0; kt < nt; ++kt) mvec(ks * nt + kt) = f.m(ks, kt);
    for (int e = 0; e < ne; ++e)
        for (int kt = 0; kt < nt; ++kt) wvec(e * nt + kt) = f.edge_weight(e, kt);
    SpCMat FM = F * mvec.asDiagonal();
    SpCMat K = SpCMat(FM.adjoint()) * wvec.asDiagonal() * FM;
    return K;
}

SpCMat transverse_matrix(const TubeForm& f) {
    const SLattice& lat = f.lattice;
    const GridDomain& g = *f.section;
    const int ns = lat.grid.ns, nt = lat.grid.nt;
    const double e2 = 1.0 / (f.eps * f.eps), h = g.h;
    const int ndir = g.dim == 1 ? 2 : 4;
    std::vector<Trip> t;
    t.reserve(static_cast<size_t>(ns) * nt * (ndir + 1));
    for (int ks = 0; ks < ns; ++ks) {
        const int base = ks * nt;
        for (int k = 0; k < nt; ++k) {
            double diag = 0.0;
            for (int dir = 0; dir < ndir; ++dir) {
                const int m = g.neighbor(k, dir);
                if (m < 0) {
                    diag += e2 / (h * g.dist[k][dir]);
                    continue;
                }
                diag += e2 / (h * h);
                if (dir % 2 == 1) continue;  // each edge once, from its lower end
                double ph = 0.0;
                if (dir == 0 && f.phase_x.size()) ph = f.phase_x(ks, k);
                if (dir == 2 && f.phase_y.size()) ph = f.phase_y(ks, k);
                const cplx c = std::polar(e2 / (h * h), ph);
                t.emplace_back(base + k, base + m, -c);
                t.emplace_back(base + m, base + k, -std::conj(c));
            }
            t.emplace_back(base + k, base + k, diag);
        }
    }
    SpCMat T(static_cast<Eigen::Index>(ns) * nt, static_cast<Eigen::Index>(ns) * nt);
    T.setFromTriplets(t.begin(), t.end());
    return T;
}

AssembledOperator assemble_form(const TubeForm& f, const std::string& name) {
    const SLattice& lat = f.lattice;
    const int ns = lat.grid.ns, nt = lat.grid.nt;
    SpCMat K = longitudinal_matrix(f);
    if (f.transverse) K += transverse_matrix(f);
    CVec v(static_cast<Eigen::Index>(ns) * nt);
    for (int ks = 0; ks < ns; ++ks)
        for (int kt = 0; kt < nt; ++kt) v(ks * nt + kt) = f.V(ks, kt);
    SpCMat Vd(v.size(), v.size());
    Vd.setIdentity();
    Vd = v.asDiagonal() * Vd;
    K += Vd;
    K.prune(cplx(0.0));
    K.makeCompressed();

    AssembledOperator op;
    bool complex = false;
    for (int k = 0; k < K.outerSize() && !complex; ++k) {
        for (SpCMat::InnerIterator it(K, k); it; ++it) {
            if (it.value().imag() != 0.0) {
                complex = true;
                break;
            }
        }
    }
    op.is_complex = complex;
    if (complex) {
        op.cx = K;
    } else {
        op.re = K.real();
    }
    op.name = name;
    op.grid = lat.grid;
    op.cell = lat.grid.ds * (f.section ? f.section->cell() : 1.0);
    const std::string end = lat.ends == EndCondition::Dirichlet ? "Dirichlet" : "Neumann";
    op.boundary = {"s-: " + end, "s+: " + end, "section: Dirichlet"};
    return op;
}

AssembledOperator assemble_full_2d(const TubeGeometry& geo, const GridDomain& section,
                                   const RegimeParams& regime, const AssemblyOptions& opt) {
    regime.validate();
    if (geo.dim() != 2 || section.dim != 1) throw NotApplicable("assemble_full_2d needs a 2D tube");
    const CurveProfile& c = geo.curve();
    const double eps = regime.eps, b = regime.b;
    check_curvature(c, section, eps);
    const int nt = section.size();
    const SLattice lat = make_lattice(c, nt, opt);
    check_budget(lat, opt);
    if (full_window(c, lat)) geo.check_support(section_rmax(section) * eps);
    TubeForm f = base_form(lat, section, eps);
    const double ds = lat.grid.ds;
    for (int ks = 0; ks < lat.grid.ns; ++ks) {
        const double s = lat.grid.s(ks), k = c.k(s);
        for (int kt = 0; kt < nt; ++kt) {
            const double h = 1.0 - eps * section.x(kt) * k;
            f.m(ks, kt) = 1.0 / std::sqrt(h);
            f.V(ks, kt) = -k * k / (4.0 * h * h);
        }
    }
    const bool field = !geo.field().is_zero();
    for (int e = 0; e < lat.edges(); ++e) {
        const double s = lat.edge_s(e), k = c.k(s);
        for (int kt = 0; kt < nt; ++kt) {
            const double tau = section.x(kt);
            f.edge_weight(e, kt) = 1.0 / (1.0 - eps * tau * k);
            if (field) f.edge_phase(e, kt) = -b * geo.gauge_2d(s, eps * tau) * ds;
        }
    }
    apply_gauge_shift(f, opt);
    AssembledOperator op = assemble_form(f, "full-2d");
    const auto sc = section_constants(section);
    return finish(std::move(op), regime, sc->lambda1, min_entry(f.V), opt);
}

AssembledOperator assemble_app_2d(const TubeGeometry& geo, const GridDomain& section,
                                  const RegimeParams& regime, const AssemblyOptions& opt) {
    regime.validate();
    if (geo.dim() != 2 || section.dim != 1) throw NotApplicable("assemble_app_2d needs a 2D tube");
    const CurveProfile& c = geo.curve();
    const double eps = regime.eps;
    check_curvature(c, section, eps);
    const int nt = section.size();
    const SLattice lat = make_lattice(c, nt, opt);
    check_budget(lat, opt);
    if (full_window(c, lat)) geo.check_support(section_rmax(section) * eps);
    TubeForm f = base_form(lat, section, eps);
    const double ds = lat.grid.ds;
    for (int ks = 0; ks < lat.grid.ns; ++ks) {
        const double k = c.k(lat.grid.s(ks));
        f.V.row(ks).setConstant(-k * k / 4.0);
    }
    if (!geo.field().is_zero()) {
        const double coupling = regime.b * eps;  // eps^{1-delta}
        for (int e = 0; e < lat.edges(); ++e) {
            const double B = geo.field_2d(lat.edge_s(e), 0.0);
            for (int kt = 0; kt < nt; ++kt) f.edge_phase(e, kt) = -coupling * B * section.x(kt) * ds;
        }
    }
    apply_gauge_shift(f, opt);
    AssembledOperator op = assemble_form(f, "app-2d");
    const auto sc = section_constants(section);
    return finish(std::move(op), regime, sc->lambda1, min_entry(f.V), opt);
}

SpCMat fiber_projection(const SpCMat& K, const Vec& fiber, int ns) {
    const int nt = static_cast<int>(fiber.size());
    std::vector<Trip> t;
    t.reserve(static_cast<size_t>(ns) * nt);
    for (int ks = 0; ks < ns; ++ks)
        for (int kt = 0; kt < nt; ++kt)
            if (fiber(kt) != 0.0) t.emplace_back(ks * nt + kt, ks, fiber(kt));
    SpCMat E(static_cast<Eigen::Index>(ns) * nt, ns);
    E.setFromTriplets(t.begin(), t.end());
    SpCMat P = SpCMat(E.adjoint()) * K * E;
    P.prune(cplx(0.0), 1e-300);
    return P;
}

namespace {

AssembledOperator one_dimensional(const SLattice& lat, const SpCMat& K, const Vec& V, const RegimeParams& regime,
                                  const std::string& name, const AssemblyOptions& opt) {
    const int ns = lat.grid.ns;
    SpCMat A = K;
    SpCMat Vd(ns, ns);
    Vd.setIdentity();
    Vd = V.cast<cplx>().asDiagonal() * Vd;
    A += Vd;
    // Hermitian part removes round-off asymmetry of the projection.
    A = (0.5 * (A + SpCMat(A.adjoint()))).eval();
    A.prune(cplx(0.0));
    AssembledOperator op;
    bool complex = false;
    for (int k = 0; k < A.outerSize() && !complex; ++k)
        for (SpCMat::InnerIterator it(A, k); it; ++it)
            if (std::abs(it.value().imag()) > 1e-14 * std::abs(it.value())) complex = true;
    op.is_complex = complex;
    if (complex) {
        op.cx = A;
    } else {
        op.re = A.real();
    }
    op.name = name;
    op.grid = lat.grid;
    op.grid.nt = 1;
    op.cell = lat.grid.ds;
    const std::string end = lat.ends == EndCondition::Dirichlet ? "Dirichlet" : "Neumann";
    op.boundary = {"s-: " + end, "s+: " + end};
    op.regime = regime;
    op.threshold = 0.0;
    op.sigma_hint = std::min(V.minCoeff(), 0.0) - 1.0;
    if (opt.apply_shift) op.add_shift(regime.K);
    return op;
}

SpCMat plain_laplacian_1d(const SLattice& lat) {
    const int ns = lat.grid.ns;
    const double ds = lat.grid.ds;
    std::vector<Trip> t;
    for (int e = 0; e < lat.edges(); ++e) {
        const int L = lat.left(e), R = lat.right(e);
        if (L >= 0) t.emplace_back(L, L, 1.0 / (ds * ds));
        if (R < ns) t.emplace_back(R, R, 1.0 / (ds * ds));
        if (L >= 0 && R < ns) {
            t.emplace_back(L, R, -1.0 / (ds * ds));
            t.emplace_back(R, L, -1.0 / (ds * ds));
        }
    }
    SpCMat K(ns, ns);
    K.setFromTriplets(t.begin(), t.end());
    return K;
}

SpCMat peierls_1d(const SLattice& lat, const Vec& edge_phase) {
    const int ns = lat.grid.ns;
    const double ds = lat.grid.ds;
    std::vector<Trip> t;
    for (int e = 0; e < lat.edges(); ++e) {
        const int L = lat.left(e), R = lat.right(e);
        if (L >= 0) t.emplace_back(L, L, 1.0 / (ds * ds));
        if (R < ns) t.emplace_back(R, R, 1.0 / (ds * ds));
        if (L >= 0 && R < ns) {
            const cplx c = std::polar(1.0 / (ds * ds), edge_phase(e));
            t.emplace_back(L, R, -c);
            t.emplace_back(R, L, -std::conj(c));
        }
    }
    SpCMat K(ns, ns);
    K.setFromTriplets(t.begin(), t.end());
    return K;
}

}  // namespace

AssembledOperator assemble_effective_2d(const TubeGeometry& geo, const GridDomain& section,
                                        const RegimeParams& regime, const XSectionConstants& constants,
                                        EffectiveCoefficient coef, const AssemblyOptions& opt) {
    regime.validate();
    if (geo.dim() != 2 || section.dim != 1) throw NotApplicable("assemble_effective_2d needs a 2D tube");
    const CurveProfile& c = geo.curve();
    const SLattice lat = make_lattice(c, 1, opt);
    const int ns = lat.grid.ns;
    const double ds = lat.grid.ds;
    const bool critical = regime.delta >= 1.0 - 1e-12 && !geo.field().is_zero();
    Vec V(ns);
    for (int ks = 0; ks < ns; ++ks) {
        const double k = c.k(lat.grid.s(ks));
        V(ks) = -k * k / 4.0;
    }
    SpCMat K;
    std::string note = "delta < 1: -d_s^2 - kappa^2/4";
    if (!critical) {
        K = plain_laplacian_1d(lat);
    } else if (coef == EffectiveCoefficient::Measured) {
        SLattice l2 = lat;
        l2.grid.nt = section.size();
        TubeForm f = base_form(l2, section, 1.0);
        f.transverse = false;
        for (int e = 0; e < lat.edges(); ++e) {
            const double B = geo.field_2d(lat.edge_s(e), 0.0);
            for (int kt = 0; kt < section.size(); ++kt) f.edge_phase(e, kt) = -B * section.x(kt) * ds;
        }
        K = fiber_projection(longitudinal_matrix(f), fiber_vector(constants, section), ns);
        std::ostringstream os;
        os << "coefficient source: measured (Galerkin); ||tau J1||^2 = " << constants.second_moment
           << ", printed 1/3 + 2/pi^2 = " << (1.0 / 3.0 + 2.0 / (pi * pi));
        note = os.str();
    } else {
        const double cB = coef == EffectiveCoefficient::Moment ? constants.second_moment
                                                                : 1.0 / 3.0 + 2.0 / (pi * pi);
        K = plain_laplacian_1d(lat);
        for (int ks = 0; ks < ns; ++ks) {
            const double B = geo.field_2d(lat.grid.s(ks), 0.0);
            V(ks) += cB * B * B;
        }
        std::ostringstream os;
        os << "coefficient source: " << to_string(coef) << " c_B = " << cB
           << " (measured ||tau J1||^2 = " << constants.second_moment << ")";
        note = os.str();
    }
    AssembledOperator op = one_dimensional(lat, K, V, regime, "effective-2d", opt);
    op.notes = note;
    return op;
}

AssembledOperator assemble_full_3d(const TubeGeometry& geo, const GridDomain& section,
                                   const RegimeParams& regime, const AssemblyOptions& opt) {
    regime.validate();
    if (geo.dim() != 3 || section.dim != 2) throw NotApplicable("assemble_full_3d needs a 3D tube");
    const CurveProfile& c = geo.curve();
    const double eps = regime.eps, b = regime.b;
    check_curvature(c, section, eps);
    const int nt = section.size();
    const SLattice lat = make_lattice(c, nt, opt);
    check_budget(lat, opt);
    if (full_window(c, lat)) geo.check_support(section_rmax(section) * eps);
    TubeForm f = base_form(lat, section, eps);
    const int ns = lat.grid.ns;
    const double ds = lat.grid.ds, ht = section.h;
    const bool field = !geo.field().is_zero();
    const std::vector<double> sn = lat.nodes();
    const std::vector<double> se = lat.edge_nodes();
    Gauge3D gn, ge;
    if (field) {
        gn = gauge_3d(geo, eps, sn, section);
        ge.A1 = Mat::Zero(lat.edges(), nt);
        for (int e = 0; e < lat.edges(); ++e)
            for (int k = 0; k < nt; ++k) ge.A1(e, k) = geo.A1(se[e], eps * section.x(k), eps * section.y(k));
        f.R = Mat::Zero(ns, nt);
        f.phase_x = Mat::Zero(ns, nt);
        f.phase_y = Mat::Zero(ns, nt);
    }
    for (int ks = 0; ks < ns; ++ks) {
        const double s = sn[ks];
        const double k2 = c.k2(s) * c.k2(s) + c.k3(s) * c.k3(s);
        const double tp = c.thetap(s);
        f.thetap(ks) = tp;
        for (int k = 0; k < nt; ++k) {
            const double t2 = eps * section.x(k), t3 = eps * section.y(k);
            const double h = geo.h(s, t2, t3);
            f.m(ks, k) = 1.0 / std::sqrt(h);
            f.V(ks, k) = -k2 / (4.0 * h * h);
            if (!field) continue;
            const double h2 = -t2 * tp, h3 = t3 * tp;
            f.R(ks, k) = h3 * b * gn.A2(ks, k) + h2 * b * gn.A3(ks, k);
            const int mx = section.neighbor(k, 0), my = section.neighbor(k, 2);
            if (mx >= 0) f.phase_x(ks, k) = eps * b * 0.5 * (gn.A2(ks, k) + gn.A2(ks, mx)) * ht;
            if (my >= 0) f.phase_y(ks, k) = eps * b * 0.5 * (gn.A3(ks, k) + gn.A3(ks, my)) * ht;
        }
    }
    for (int e = 0; e < lat.edges(); ++e) {
        for (int k = 0; k < nt; ++k) {
            f.edge_weight(e, k) = 1.0 / geo.h(se[e], eps * section.x(k), eps * section.y(k));
            if (field) f.edge_phase(e, k) = b * ge.A1(e, k) * ds;
        }
    }
    apply_gauge_shift(f, opt);
    AssembledOperator op = assemble_form(f, "full-3d");
    const auto sc = section_constants(section);
    return finish(std::move(op), regime, sc->lambda1, min_entry(f.V), opt);
}

AssembledOperator assemble_effective_3d(const TubeGeometry& geo, const GridDomain& section,
                                        const RegimeParams& regime, const XSectionConstants& constants,
                                        EffectivePath path, const AssemblyOptions& opt) {
    regime.validate();
    if (geo.dim() != 3 || section.dim != 2) throw NotApplicable("assemble_effective_3d needs a 3D tube");
    const CurveProfile& c = geo.curve();
    const SLattice lat = make_lattice(c, 1, opt);
    const int ns = lat.grid.ns, nt = section.size();
    const double ds = lat.grid.ds;
    const bool critical = regime.delta >= 1.0 - 1e-12 && !geo.field().is_zero();
    const std::vector<double> sn = lat.nodes(), se = lat.edge_nodes();
    PulledField pn, pe;
    if (critical) {
        pn = pullback_field(geo, sn);
        pe = pullback_field(geo, se);
    }
    Vec V(ns);
    for (int ks = 0; ks < ns; ++ks) {
        const double s = sn[ks];
        V(ks) = -(c.k2(s) * c.k2(s) + c.k3(s) * c.k3(s)) / 4.0;
        if (critical) V(ks) += pn.B23[ks] * pn.B23[ks] * constants.M_lattice;
    }
    SpCMat K;
    if (path == EffectivePath::Galerkin) {
        SLattice l2 = lat;
        l2.grid.nt = nt;
        TubeForm f = base_form(l2, section, 1.0);
        f.transverse = false;
        for (int ks = 0; ks < ns; ++ks) f.thetap(ks) = c.thetap(sn[ks]);
        if (critical) {
            for (int e = 0; e < lat.edges(); ++e)
                for (int k = 0; k < nt; ++k)
                    f.edge_phase(e, k) = -(section.x(k) * pe.B12[e] + section.y(k) * pe.B13[e]) * ds;
        }
        K = fiber_projection(longitudinal_matrix(f), fiber_vector(constants, section), ns);
    } else {
        Vec ph = Vec::Zero(lat.edges());
        if (critical) {
            for (int e = 0; e < lat.edges(); ++e) ph(e) = -(pe.B12[e] * constants.m2 + pe.B13[e] * constants.m3) * ds;
        }
        K = peierls_1d(lat, ph);
        for (int ks = 0; ks < ns; ++ks) {
            const double tp = c.thetap(sn[ks]);
            V(ks) += tp * tp * constants.p;
            if (!critical) continue;
            const double b12 = pn.B12[ks], b13 = pn.B13[ks];
            const double a = -(b12 * constants.m2 + b13 * constants.m3);
            V(ks) += b12 * b12 * constants.t22 + 2.0 * b12 * b13 * constants.t23 + b13 * b13 * constants.t33 - a * a;
        }
    }
    AssembledOperator op = one_dimensional(lat, K, V, regime, "effective-3d", opt);
    std::ostringstream os;
    os << "path: " << to_string(path) << "; M(omega) = " << constants.M << ", lattice M = " << constants.M_lattice
       << ", p = " << constants.p;
    op.notes = os.str();
    return op;
}

Spectrum smallest_eigenpairs(const AssembledOperator& op, int k, EigenOptions opt, bool use_hint) {
    opt.k = k;
    if (use_hint) opt.sigma = op.sigma_hint;
    const Vec* mass = op.mass.size() ? &op.mass : nullptr;
    Spectrum sp;
    if (op.is_complex) {
        auto r = smallest_eigs<cplx>(op.cx, opt, mass);
        sp.values = r.values;
        sp.vectors = r.vectors;
        sp.residuals = r.residuals;
        sp.dense = r.dense;
    } else {
        auto r = smallest_eigs<double>(op.re, opt, mass);
        sp.values = r.values;
        sp.vectors = r.vectors.cast<cplx>();
        sp.residuals = r.residuals;
        sp.dense = r.dense;
    }
    sp.threshold = op.threshold;
    for (int i = 0; i < k; ++i) sp.discrete.push_back(sp.values(i) < op.threshold);
    return sp;
}

namespace {

template <class S>
ResolventDistance lanczos_distance(const SpMatT<S>& A, const SpMatT<S>& B, const Vec& fiber, double rtol,
                                   int max_iter, std::uint64_t seed) {
    const Eigen::Index n = A.rows();
    const bool embed = fiber.size() > 0;
    const int nt = embed ? static_cast<int>(fiber.size()) : 1;
    if (embed && B.rows() * nt != n) throw ConfigError("embedding size mismatch in resolvent_distance");
    if (!embed && B.rows() != n) throw ConfigError("operator size mismatch in resolvent_distance");
    ShiftInvert<S> fa(A, 0.0), fb(B, 0.0);
    auto apply = [&](const VecT<S>& x) -> VecT<S> {
        VecT<S> y = fa.solve(x);
        if (!embed) return y - fb.solve(x);
        VecT<S> p(B.rows());
        for (Eigen::Index ks = 0; ks < B.rows(); ++ks) p(ks) = fiber.cast<S>().dot(x.segment(ks * nt, nt));
        VecT<S> q = fb.solve(p);
        for (Eigen::Index ks = 0; ks < B.rows(); ++ks) y.segment(ks * nt, nt) -= q(ks) * fiber.cast<S>();
        return y;
    };
    std::mt19937_64 rng(seed);
    const int m = static_cast<int>(std::min<Eigen::Index>(max_iter, n));
    MatT<S> Q(n, m + 1);
    VecT<S> q = detail::random_vector<S>(n, rng);
    q.normalize();
    Q.col(0) = q;
    Vec alpha(m), beta(m);
    ResolventDistance out;
    double prev = 0.0;
    for (int j = 0; j < m; ++j) {
        VecT<S> w = apply(Q.col(j));
        alpha(j) = std::real(Q.col(j).dot(w));
        for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).adjoint() * w);
        beta(j) = w.norm();
        Mat T = Mat::Zero(j + 1, j + 1);
        for (int i = 0; i <= j; ++i) {
            T(i, i) = alpha(i);
            if (i < j) T(i, i + 1) = T(i + 1, i) = beta(i);
        }
        Eigen::SelfAdjointEigenSolver<Mat> es(T);
        Eigen::Index imax = 0;
        es.eigenvalues().cwiseAbs().maxCoeff(&imax);
        const double est = std::abs(es.eigenvalues()(imax));
        const double res = beta(j) * std::abs(es.eigenvectors()(j, imax));
        out.value = est;
        out.error = res;
        out.iterations = j + 1;
        if (est == 0.0 && beta(j) < 1e-300) return out;
        const bool converged = j >= 4 && res <= rtol * est * 1e-2 && std::abs(est - prev) <= rtol * 1e-3 * est;
        if (converged || beta(j) <= 1e-14 * std::max(est, 1e-300)) return out;
        prev = est;
        Q.col(j + 1) = w / beta(j);
    }
    return out;
}

}  // namespace

ResolventDistance resolvent_distance(const AssembledOperator& A, const AssembledOperator& B, const Vec& fiber,
                                     double rtol, int max_iter, std::uint64_t seed) {
    ResolventDistance r;
    if (!A.is_complex && !B.is_complex) {
        r = lanczos_distance<double>(A.re, B.re, fiber, rtol, max_iter, seed);
    } else {
        r = lanczos_distance<cplx>(A.as_complex(), B.as_complex(), fiber, rtol, max_iter, seed);
    }
    if (r.error > rtol * std::max(r.value, 1e-300) && r.iterations >= max_iter) {
        r = !A.is_complex && !B.is_complex
                ? lanczos_distance<double>(A.re, B.re, fiber, rtol, 2 * max_iter, seed)
                : lanczos_distance<cplx>(A.as_complex(), B.as_complex(), fiber, rtol, 2 * max_iter, seed);
    }
    return r;
}

void write_triplets(const AssembledOperator& op, std::ostream& os) {
    const SpCMat M = op.as_complex();
    os << std::setprecision(17);
    os << "# rows: " << M.rows() << "\n# cols: " << M.cols() << "\n# nnz: " << M.nonZeros() << "\n";
    os << "# shift: " << op.shift << "\n# eps: " << op.regime.eps << "\n# delta: " << op.regime.delta
       << "\n# b: " << op.regime.b << "\n# K: " << op.regime.K << "\n# name: " << op.name << "\n";
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpCMat::InnerIterator it(M, k); it; ++it)
            os << it.row() << " " << it.col() << " " << it.value().real() << " " << it.value().imag() << "\n";
}

std::vector<SpectrumRow> spectrum_rows(const Spectrum& sp, const RegimeParams& regime) {
    std::vector<SpectrumRow> rows;
    for (int i = 0; i < sp.values.size(); ++i) {
        rows.push_back({regime.eps, regime.delta, regime.b, regime.K, i + 1, sp.values(i), sp.residuals(i),
                        static_cast<bool>(sp.discrete[i])});
    }
    return rows;
}

void write_spectrum_csv(const std::vector<SpectrumRow>& rows, std::ostream& os) {
    os << "eps,delta,b,K,n,eigenvalue,residual,discrete\n" << std::setprecision(15);
    for (const auto& r : rows) {
        os << r.eps << "," << r.delta << "," << r.b << "," << r.K << "," << r.n << "," << r.value << ","
           << r.residual << "," << (r.discrete ? 1 : 0) << "\n";
    }
}

}  // namespace tubespec
