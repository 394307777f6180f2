#include "tubespec/hardy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "tubespec/errors.hpp"
#include "tubespec/jet.hpp"

namespace tubespec {

namespace {

void check_straight(const TubeGeometry& geo) {
    const CurveProfile& c = geo.curve();
    if (c.sup_kappa() > 0.0 || c.sup_thetap() > 0.0) throw ConfigError("the Hardy problems need a straight untwisted tube");
}

RegimeParams unit_regime(double b) {
    RegimeParams r = RegimeParams::make(1.0, 0.0, 0.0);
    r.b = b;
    return r;
}

AssembledOperator tube_operator(const TubeGeometry& geo, const GridDomain& section, double b,
                                const AssemblyOptions& opt) {
    const RegimeParams r = unit_regime(b);
    return geo.dim() == 2 ? assemble_full_2d(geo, section, r, opt) : assemble_full_3d(geo, section, r, opt);
}

double field_max_on(const TubeGeometry& geo, const GridDomain& section, const std::vector<double>& s) {
    if (geo.field().is_zero()) return 0.0;
    double m = 0.0;
    for (double x : s) {
        for (int k = 0; k < section.size(); ++k) {
            if (geo.dim() == 2) {
                m = std::max(m, std::abs(geo.field_2d(x, section.x(k))));
            } else {
                m = std::max(m, geo.curvilinear_field(x, section.x(k), section.y(k)).cwiseAbs().maxCoeff());
            }
        }
    }
    return m;
}

double smoothstep(double x) {
    const double t = std::clamp(2.0 * (std::abs(x) - 0.5), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

double dsmoothstep(double x) {
    const double a = std::abs(x);
    if (a <= 0.5 || a >= 1.0) return 0.0;
    const double t = 2.0 * (a - 0.5);
    return (x < 0 ? -1.0 : 1.0) * 2.0 * 6.0 * t * (1.0 - t);
}

double lowest(const AssembledOperator& op, double sigma) {
    EigenOptions eo;
    eo.sigma = sigma;
    return smallest_eigenpairs(op, 1, eo, false).values(0);
}

}  // namespace

SegmentProblem assemble_segment(const TubeGeometry& geo, const GridDomain& section, double R, double b, double ds) {
    check_straight(geo);
    if (!(R > 0.0) || R > geo.curve().S) throw ConfigError("segment half-length must lie in (0, S]");
    AssemblyOptions opt;
    opt.ds = ds;
    opt.s_lo = -R;
    opt.s_hi = R;
    opt.ends = EndCondition::Neumann;
    opt.apply_shift = false;
    SegmentProblem sp;
    sp.R = R;
    sp.b = b;
    sp.op = tube_operator(geo, section, b, opt);
    sp.lambda1 = section_constants(section)->lambda1;
    const SLattice lat = make_lattice(geo.curve(), section.size(), opt);
    sp.field_max = field_max_on(geo, section, lat.nodes());
    if (b != 0.0 && !(sp.field_max * std::abs(b) > 1e-14)) {
        throw ZeroFieldWarning("b B vanishes on the segment of half-length " + std::to_string(R) + "; c_R is 0");
    }
    sp.lambda_dn = lowest(sp.op, sp.lambda1 - 1.0);
    return sp;
}

double CutoffPair::chi0(double s) const { return std::sin(0.5 * pi * smoothstep(s)); }
double CutoffPair::chi1(double s) const { return std::cos(0.5 * pi * smoothstep(s)); }
double CutoffPair::dchi0(double s) const { return 0.5 * pi * dsmoothstep(s) * std::cos(0.5 * pi * smoothstep(s)); }
double CutoffPair::dchi1(double s) const { return -0.5 * pi * dsmoothstep(s) * std::sin(0.5 * pi * smoothstep(s)); }

double CutoffPair::C(int samples) const {
    double c = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double s = -1.5 + 3.0 * i / (samples - 1);
        c = std::max(c, dchi0(s) * dchi0(s) + dchi1(s) * dchi1(s));
    }
    return c;
}

HardyCertificate hardy_constant(const TubeGeometry& geo, const GridDomain& section, double b, double R, double ds) {
    HardyCertificate hc;
    hc.R = R;
    hc.b = b;
    hc.h = section.h;
    hc.C = CutoffPair{}.C();
    const double damp = 1.0 / (1.0 + hc.C / (R * R));
    hc.c_R_limit = 0.25 * damp;
    hc.lambda1 = section_constants(section)->lambda1;
    if (b == 0.0 || geo.field().is_zero()) {
        hc.lambda_dn = hc.lambda1;
        hc.c_R = 0.0;
        return hc;
    }
    const SegmentProblem sp = assemble_segment(geo, section, R, b, ds);
    hc.ds = sp.op.grid.ds;
    hc.lambda_dn = sp.lambda_dn;
    hc.c_R = damp * std::clamp(sp.lambda_dn - sp.lambda1, 0.0, 0.25);
    return hc;
}

HardyCertificate verify_hardy(const TubeGeometry& geo, const GridDomain& section, double b, double R, double L,
                              double ds, bool dense_check) {
    check_straight(geo);
    if (L < 4.0 * R) throw ConfigError("verify_hardy needs L >= 4R");
    if (L > geo.curve().S + 1e-12) throw ConfigError("L exceeds the tube window S");
    HardyCertificate hc = hardy_constant(geo, section, b, R, ds);
    hc.L = L;
    AssemblyOptions opt;
    opt.ds = ds;
    opt.s_lo = -L;
    opt.s_hi = L;
    opt.apply_shift = false;
    AssembledOperator op = tube_operator(geo, section, b, opt);
    op.add_shift(-hc.lambda1);
    const int ns = op.grid.ns, nt = op.grid.nt;
    hc.ds = op.grid.ds;
    op.mass.resize(static_cast<Eigen::Index>(ns) * nt);
    for (int ks = 0; ks < ns; ++ks) {
        const double s = op.grid.s(ks);
        op.mass.segment(static_cast<Eigen::Index>(ks) * nt, nt).setConstant(1.0 / (1.0 + s * s));
    }
    EigenOptions eo;
    eo.sigma = -1e-2;
    eo.force_sparse = true;
    hc.mu_min = smallest_eigenpairs(op, 1, eo, false).values(0);
    if (dense_check) {
        eo.force_sparse = false;
        eo.force_dense = true;
        hc.mu_dense = smallest_eigenpairs(op, 1, eo, false).values(0);
    }
    hc.margin = hc.mu_min - hc.c_R;
    hc.pass = hc.margin >= -hc.tolerance;
    hc.verified = true;
    return hc;
}

void write_certificates_csv(const std::vector<HardyCertificate>& rows, std::ostream& os) {
    os << "R,b,lambda_dn,C,c_R,mu_min,margin,pass\n";
    os.precision(12);
    for (const auto& r : rows) {
        os << r.R << "," << r.b << "," << r.lambda_dn << "," << r.C << "," << r.c_R << "," << r.mu_min << ","
           << r.margin << "," << (r.pass ? "true" : "false") << "\n";
    }
}

double truncation_budget(double L) {
    const double k = pi / (2.0 * L);
    return 2.0 * k * k;
}

double DeformationSpec::lo() const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto* list : {&E1, &eps2})
        for (const auto& b : *list)
            if (b.amplitude != 0.0) v = std::min(v, b.lo());
    return v;
}

double DeformationSpec::hi() const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto* list : {&E1, &eps2})
        for (const auto& b : *list)
            if (b.amplitude != 0.0) v = std::max(v, b.hi());
    return v;
}

namespace {

double dbump(const std::vector<Bump>& bumps, double s) {
    return bump_sum(bumps, Jet<2>::variable(s)).c[1];
}

// -int_0^t alpha B(s + a E1, u + a eps2) du by composite Simpson.
double deformed_gauge(const AmbientField& f, double x, double y0, double t, double alpha) {
    if (t == 0.0) return 0.0;
    const int n = 2 * std::max(4, static_cast<int>(std::ceil(std::abs(t) * 32.0)));
    const double hq = t / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * f.scalar(x, y0 + i * hq);
    }
    return -alpha * acc * hq / 3.0;
}

}  // namespace

DeformationReport deformation_experiment(const GridDomain& section, const AmbientField& field, double b,
                                         const DeformationSpec& def, const std::vector<double>& amplitudes,
                                         double L, double ds) {
    if (section.dim != 1) throw NotApplicable("deformation_experiment is planar (1D cross section)");
    if (amplitudes.empty()) throw ConfigError("empty amplitude schedule");
    if (def.lo() < -L || def.hi() > L) throw SupportTruncationError("deformation support leaves (-L, L)");
    const auto sc = section_constants(section);
    DeformationReport rep;
    rep.b = b;
    rep.L = L;
    rep.lambda1 = sc->lambda1;
    rep.budget = truncation_budget(L);
    const int n = std::max(2, static_cast<int>(std::round(2.0 * L / ds)));
    const double h = 2.0 * L / n;
    const int ns = n - 1, nt = section.size();
    const Eigen::Index N = static_cast<Eigen::Index>(ns) * nt;
    const SpMat T0 = assemble_dirichlet_laplacian(section).re;
    const double ht = section.h;
    rep.pass = true;
    for (double a : amplitudes) {
        auto alpha = [&](double s) { return 1.0 + a * dbump(def.E1, s); };
        auto beta = [&](double s) { return a * dbump(def.eps2, s); };
        DeformationPoint pt;
        pt.amplitude = a;
        for (int i = 0; i <= 4 * n; ++i) pt.min_alpha = std::min(pt.min_alpha, alpha(-L + 2.0 * L * i / (4 * n)));
        if (!(pt.min_alpha > 0.0)) {
            std::ostringstream os;
            os << "amplitude " << a << " gives 1 + E1' = " << pt.min_alpha << " <= 0";
            throw DeformationTooLarge(os.str());
        }
        std::vector<Eigen::Triplet<cplx>> t;
        Vec mass(N);
        for (int ks = 0; ks < ns; ++ks) {
            const double s = -L + (ks + 1) * h, al = alpha(s);
            mass.segment(static_cast<Eigen::Index>(ks) * nt, nt).setConstant(al);
            for (int k = 0; k < T0.outerSize(); ++k)
                for (SpMat::InnerIterator it(T0, k); it; ++it)
                    t.emplace_back(ks * nt + it.row(), ks * nt + it.col(), al * it.value());
        }
        // Rows (g1 - beta g2) at s-edge midpoints, weight 1/alpha.
        for (int e = 0; e <= ns; ++e) {
            const int Lf = e - 1, Rt = e;
            const double s = -L + (e + 0.5) * h, al = alpha(s), be = beta(s);
            const double x = s + a * bump_sum(def.E1, s), y0 = a * bump_sum(def.eps2, s);
            for (int kt = 0; kt < nt; ++kt) {
                const double phase = field.is_zero() ? 0.0 : b * deformed_gauge(field, x, y0, section.x(kt), al) * h;
                const cplx cr = std::polar(1.0, 0.5 * phase), cl = std::polar(1.0, -0.5 * phase);
                std::vector<std::pair<Eigen::Index, cplx>> row;
                auto add_slice = [&](int slice, cplx c) {
                    if (slice < 0 || slice >= ns) return;
                    for (int dir : {0, 1}) {
                        const int m = section.neighbor(kt, dir);
                        if (m < 0) continue;
                        const double sg = dir == 0 ? 1.0 : -1.0;
                        // -beta * (-i) * 1/2 * c * d_tau, d_tau centred
                        row.emplace_back(static_cast<Eigen::Index>(slice) * nt + m, -be * (-I) * 0.5 * c * sg / (2.0 * ht));
                    }
                };
                if (Rt < ns) row.emplace_back(static_cast<Eigen::Index>(Rt) * nt + kt, -I * cr / h);
                if (Lf >= 0) row.emplace_back(static_cast<Eigen::Index>(Lf) * nt + kt, I * cl / h);
                if (be != 0.0) {
                    add_slice(Lf, cl);
                    add_slice(Rt, cr);
                }
                for (const auto& [p, vp] : row)
                    for (const auto& [q, vq] : row) t.emplace_back(p, q, std::conj(vp) * vq / al);
            }
        }
        SpCMat K(N, N);
        K.setFromTriplets(t.begin(), t.end());
        K.prune(cplx(0.0));
        AssembledOperator op;
        op.is_complex = true;
        op.cx = K;
        op.mass = mass;
        op.grid.ns = ns;
        op.grid.nt = nt;
        op.grid.ds = h;
        op.grid.s_min = -L + h;
        op.name = "deformed-strip";
        pt.lowest = lowest(op, rep.lambda1 - 1.0);
        pt.below = pt.lowest < rep.lambda1 - rep.budget;
        if (pt.below) rep.pass = false;
        rep.points.push_back(pt);
    }
    return rep;
}

LargeBReport large_b_experiment(const TubeGeometry& geo, const GridDomain& section, const std::vector<double>& schedule,
                                double ds) {
    if (schedule.empty()) throw ConfigError("empty b schedule");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (!(schedule[i] > schedule[i - 1])) throw ConfigError("b schedule must be increasing");
    LargeBReport rep;
    rep.lambda1 = section_constants(section)->lambda1;
    rep.budget = truncation_budget(geo.curve().S);
    AssemblyOptions opt;
    opt.ds = ds;
    opt.apply_shift = false;
    for (double b : schedule) {
        const AssembledOperator op = tube_operator(geo, section, b, opt);
        LargeBPoint p;
        p.b = b;
        p.lowest = smallest_eigenpairs(op, 1).values(0);
        p.below = p.lowest < rep.lambda1 - rep.budget;
        if (!rep.points.empty() && p.lowest < rep.points.back().lowest - 1e-9) rep.monotone = false;
        rep.points.push_back(p);
    }
    int first = -1;
    for (int i = static_cast<int>(rep.points.size()) - 1; i >= 0 && !rep.points[i].below; --i) first = i;
    if (first >= 0) {
        rep.crossed = true;
        rep.b0 = rep.points[first].b;
    } else if (rep.points.size() >= 2) {
        const auto& p = rep.points[rep.points.size() - 2];
        const auto& q = rep.points.back();
        rep.trend_slope = (q.lowest - p.lowest) / (q.b - p.b);
    }
    return rep;
}

}  // namespace tubespec
