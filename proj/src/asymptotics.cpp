#include "tubespec/asymptotics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "tubespec/errors.hpp"
#include "tubespec/fit.hpp"
#include "tubespec/jet.hpp"

namespace tubespec {

namespace {

constexpr int kOrders = 3;  // eps^0 .. eps^2 of the longitudinal part
using RJ = Jet<kOrders>;

struct CJet {
    std::array<cplx, kOrders> c{};
};

CJet operator*(const CJet& a, const CJet& b) {
    CJet r;
    for (int i = 0; i < kOrders; ++i)
        for (int j = 0; i + j < kOrders; ++j) r.c[i + j] += a.c[i] * b.c[j];
    return r;
}

CJet lift(const RJ& a, cplx f) {
    CJet r;
    for (int k = 0; k < kOrders; ++k) r.c[k] = f * a.c[k];
    return r;
}

CJet conj(const CJet& a) {
    CJet r;
    for (int k = 0; k < kOrders; ++k) r.c[k] = std::conj(a.c[k]);
    return r;
}

// exp(i x) for a real jet x.
CJet expi(const RJ& x) {
    RJ c, s;
    c.c[0] = std::cos(x.c[0]);
    s.c[0] = std::sin(x.c[0]);
    for (int k = 1; k < kOrders; ++k) {
        double dc = 0.0, dsn = 0.0;
        for (int j = 1; j <= k; ++j) {
            dc -= j * x.c[j] * s.c[k - j];
            dsn += j * x.c[j] * c.c[k - j];
        }
        c.c[k] = dc / k;
        s.c[k] = dsn / k;
    }
    CJet r;
    for (int k = 0; k < kOrders; ++k) r.c[k] = cplx(c.c[k], s.c[k]);
    return r;
}

// Bordered solves against a fixed vector: (A - a) x = r, <c, x> = 0.
template <class S>
class BorderedSolver {
public:
    BorderedSolver(const MatT<S>& A, double a, const VecT<S>& c) {
        const Eigen::Index n = A.rows();
        MatT<S> M = MatT<S>::Zero(n + 1, n + 1);
        M.topLeftCorner(n, n) = A;
        M.topLeftCorner(n, n).diagonal().array() -= S(a);
        M.block(0, n, n, 1) = c;
        M.block(n, 0, 1, n) = c.adjoint();
        M_ = M;
        lu_.compute(M);
    }
    VecT<S> solve(const VecT<S>& r) const {
        const Eigen::Index n = r.size();
        VecT<S> rhs = VecT<S>::Zero(n + 1);
        rhs.head(n) = r;
        VecT<S> x = lu_.solve(rhs);
        x += lu_.solve(rhs - M_ * x);
        return x.head(n);
    }

private:
    MatT<S> M_;
    Eigen::PartialPivLU<MatT<S>> lu_;
};

CVec embed(const CVec& f, const Vec& fiber) {
    const Eigen::Index ns = f.size(), nt = fiber.size();
    CVec out(ns * nt);
    for (Eigen::Index k = 0; k < ns; ++k) out.segment(k * nt, nt) = f(k) * fiber.cast<cplx>();
    return out;
}

CVec project(const CVec& x, const Vec& fiber) {
    const Eigen::Index nt = fiber.size(), ns = x.size() / nt;
    CVec p(ns);
    for (Eigen::Index k = 0; k < ns; ++k) p(k) = fiber.cast<cplx>().dot(x.segment(k * nt, nt));
    return p;
}

void fix_phase(CVec& v) {
    Eigen::Index i = 0;
    v.cwiseAbs().maxCoeff(&i);
    if (std::abs(v(i)) > 0.0) v *= std::conj(v(i)) / std::abs(v(i));
}

}  // namespace

SpCMat SeriesOperator::evaluate(double eps) const {
    SpCMat A = L[0] * cplx(1.0 / (eps * eps));
    for (int j = 2; j <= J_max; ++j) A += L[j] * cplx(std::pow(eps, j - 2));
    return A;
}

SpCMat SeriesOperator::projected(int j) const { return fiber_projection(L[j], fiber, ns()); }

SeriesOperator expand_operator_2d(const TubeGeometry& geo, const GridDomain& section, int J_max,
                                  const AssemblyOptions& opt) {
    if (geo.dim() != 2 || section.dim != 1) throw NotApplicable("expand_operator_2d needs a 2D tube");
    if (J_max > 4) throw NotImplemented("series tables stop at J_max = 4, got " + std::to_string(J_max));
    if (J_max < 2) throw ConfigError("J_max must be at least 2");
    if (opt.ends != EndCondition::Dirichlet) throw ConfigError("expand_operator_2d uses Dirichlet ends");
    const CurveProfile& c = geo.curve();
    const int nt = section.size();
    SeriesOperator so;
    so.section = &section;
    so.J_max = J_max;
    so.lattice = make_lattice(c, nt, opt);
    const SLattice& lat = so.lattice;
    const int ns = lat.grid.ns, ne = lat.edges();
    const double ds = lat.grid.ds;
    const auto sc = section_constants(section);
    so.lambda1 = sc->lambda1;
    so.fiber = fiber_vector(*sc, section);
    const bool field = !geo.field().is_zero();

    const RJ e = RJ::variable(0.0);
    std::vector<RJ> m(static_cast<size_t>(ns) * nt), V(static_cast<size_t>(ns) * nt);
    for (int ks = 0; ks < ns; ++ks) {
        const double k = c.k(lat.grid.s(ks));
        for (int kt = 0; kt < nt; ++kt) {
            const RJ h = RJ(1.0) - e * RJ(section.x(kt) * k);
            m[ks * nt + kt] = RJ(1.0) / sqrt(h);
            V[ks * nt + kt] = RJ(-k * k / 4.0) / (h * h);
        }
    }
    std::vector<std::vector<Eigen::Triplet<cplx>>> trips(kOrders);
    for (int ed = 0; ed < ne; ++ed) {
        const double s = lat.edge_s(ed), k = c.k(s);
        std::array<double, 5> bt{};
        if (field) bt = geo.field_taylor_2d(s);
        double shift = 0.0;
        if (opt.gauge_shift) shift = opt.gauge_shift(lat.grid.s(lat.right(ed))) - opt.gauge_shift(lat.grid.s(lat.left(ed)));
        const int Lf = lat.left(ed), Rt = lat.right(ed);
        for (int kt = 0; kt < nt; ++kt) {
            const double tau = section.x(kt);
            const RJ w = RJ(1.0) / (RJ(1.0) - e * RJ(tau * k));
            RJ ph(shift);
            for (int p = 0; p < kOrders; ++p) {
                const double alpha = (bt[p] - (p > 0 ? k * bt[p - 1] : 0.0)) / (p + 1);
                ph.c[p] += -ds * alpha * std::pow(tau, p + 1);
            }
            const CJet cr = expi(RJ(0.5) * ph), cl = expi(RJ(-0.5) * ph);
            std::vector<std::pair<int, CJet>> row;
            if (Rt < ns) row.emplace_back(Rt * nt + kt, lift(m[Rt * nt + kt], -I / ds) * cr);
            if (Lf >= 0) row.emplace_back(Lf * nt + kt, lift(m[Lf * nt + kt], I / ds) * cl);
            const CJet wc = lift(w, 1.0);
            for (const auto& [p, ap] : row) {
                const CJet left = conj(ap) * wc;
                for (const auto& [q, aq] : row) {
                    const CJet v = left * aq;
                    for (int o = 0; o < kOrders; ++o)
                        if (v.c[o] != cplx(0.0)) trips[o].emplace_back(p, q, v.c[o]);
                }
            }
        }
    }
    const Eigen::Index n = static_cast<Eigen::Index>(ns) * nt;
    for (int ks = 0; ks < ns; ++ks)
        for (int kt = 0; kt < nt; ++kt)
            for (int o = 0; o < kOrders; ++o)
                if (V[ks * nt + kt].c[o] != 0.0) trips[o].emplace_back(ks * nt + kt, ks * nt + kt, V[ks * nt + kt].c[o]);

    TubeForm tf;
    tf.lattice = lat;
    tf.section = &section;
    tf.eps = 1.0;
    so.L.assign(J_max + 1, SpCMat(n, n));
    so.L[0] = transverse_matrix(tf);
    for (int j = 2; j <= J_max; ++j) {
        so.L[j].setFromTriplets(trips[j - 2].begin(), trips[j - 2].end());
        so.L[j].makeCompressed();
    }
    return so;
}

double Quasimode::Gamma(double eps) const {
    double g = 0.0;
    for (int j = 0; j <= J; ++j) g += gamma[j] * std::pow(eps, j - 2);
    return g;
}

CVec Quasimode::Psi(double eps) const {
    CVec p = psi[0];
    for (int j = 1; j <= J; ++j) p += std::pow(eps, j) * psi[j];
    return p;
}

Quasimode build_quasimode(const SeriesOperator& series, int n, int J) {
    if (J < 2) throw ConfigError("quasimode order J must be at least 2");
    if (J > series.J_max) throw NotImplemented("quasimode order exceeds the series order");
    if (n < 1) throw ConfigError("mode index n is 1-based");
    const int ns = series.ns(), nt = series.nt();
    const Vec& fib = series.fiber;
    const CMat T = CMat(series.projected(2));
    Eigen::SelfAdjointEigenSolver<CMat> es(T);
    if (es.info() != Eigen::Success) throw EigensolverDiverged("projected order-2 operator");
    const Vec& ev = es.eigenvalues();
    if (n > ev.size() || !(ev(n - 1) < 0.0)) {
        std::ostringstream os;
        os << "the projected order-2 operator has no discrete eigenvalue number " << n << " below 0";
        if (n <= ev.size()) os << " (value " << ev(n - 1) << ")";
        throw NoDiscreteMode(os.str());
    }
    const double mu = ev(n - 1);
    double gap = std::numeric_limits<double>::infinity();
    if (n > 1) gap = std::min(gap, mu - ev(n - 2));
    if (n < ev.size()) gap = std::min(gap, ev(n) - mu);
    if (gap < 1e-6) throw DegenerateModeError("mu_" + std::to_string(n) + " has a neighbour at distance " + std::to_string(gap));

    Quasimode q;
    q.J = J;
    q.n = n;
    q.spectral_gap = gap;
    CVec f0 = es.eigenvectors().col(n - 1);
    f0.normalize();
    fix_phase(f0);

    // Transverse block and its bordered solver.
    const Mat T0 = Mat(SpMat(series.L[0].real()).topLeftCorner(nt, nt));
    const BorderedSolver<double> tsolve(T0, series.lambda1, fib);
    const BorderedSolver<cplx> lsolve(T, mu, f0);
    auto perp_solve = [&](const CVec& r, double& defect) {
        CVec out(r.size());
        for (int ks = 0; ks < ns; ++ks) {
            CVec seg = r.segment(ks * nt, nt);
            const cplx a = fib.cast<cplx>().dot(seg);
            defect = std::max(defect, std::abs(a) / std::max(1.0, seg.norm()));
            seg -= a * fib.cast<cplx>();
            const Vec xr = tsolve.solve(seg.real()), xi = tsolve.solve(seg.imag());
            out.segment(ks * nt, nt) = xr.cast<cplx>() + I * xi.cast<cplx>();
        }
        return out;
    };

    const int kmax = std::min(J + 2, series.J_max);
    std::vector<double> gam(kmax + 1, 0.0);
    std::vector<CVec> perp(J + 1, CVec::Zero(static_cast<Eigen::Index>(ns) * nt));
    std::vector<CVec> f(J + 1, CVec::Zero(ns));
    gam[0] = series.lambda1;
    gam[1] = 0.0;
    gam[2] = mu;
    f[0] = f0;
    auto full = [&](int j) { return CVec(perp[j] + embed(f[j], fib)); };

    for (int k = 2; k <= kmax; ++k) {
        if (k >= 3) {
            const int j = k - 2;
            CVec acc = series.L[2] * perp[j];
            for (int i = 3; i <= k; ++i) acc += series.L[i] * full(k - i);
            CVec g = project(acc, fib);
            for (int i = 3; i < k; ++i) g -= gam[i] * f[k - i];
            gam[k] = f0.dot(g).real();
            if (j <= J) {
                f[j] = -lsolve.solve(g - gam[k] * f0);
            }
        }
        if (k > J) continue;
        CVec rhs = CVec::Zero(static_cast<Eigen::Index>(ns) * nt);
        for (int i = 2; i <= k; ++i) rhs -= series.L[i] * full(k - i) - gam[i] * full(k - i);
        perp[k] = perp_solve(rhs, q.fredholm_defect);
    }
    for (int j = 0; j <= J; ++j) {
        for (int ks = 0; ks < ns; ++ks)
            q.perp_defect = std::max(q.perp_defect, std::abs(fib.cast<cplx>().dot(perp[j].segment(ks * nt, nt))));
    }
    q.gamma.assign(gam.begin(), gam.begin() + J + 1);
    for (int j = 0; j <= J; ++j) {
        q.f.push_back(f[j]);
        q.psi.push_back(full(j));
    }
    return q;
}

double quasimode_residual(const Quasimode& q, const TubeGeometry& geo, const GridDomain& section, double eps,
                          const AssemblyOptions& opt) {
    AssemblyOptions o = opt;
    o.apply_shift = false;
    const AssembledOperator A = assemble_full_2d(geo, section, RegimeParams::make(eps, 1.0, 0.0), o);
    const CVec psi = q.Psi(eps);
    if (psi.size() != A.rows()) throw ConfigError("quasimode and operator grids differ");
    const CVec r = A.apply(psi) - q.Gamma(eps) * psi;
    return eps * eps * r.norm() / psi.norm();
}

namespace {

struct Tracked {
    double value;
    CVec vector;
    double overlap;
};

Tracked track(const AssembledOperator& A, int k, const CVec& reference, double min_overlap, double eps) {
    const Spectrum sp = smallest_eigenpairs(A, k);
    const CVec ref = reference.normalized();
    int best = -1;
    double bo = -1.0;
    std::ostringstream diag;
    for (int i = 0; i < sp.values.size(); ++i) {
        const double o = std::abs(ref.dot(sp.vectors.col(i).normalized()));
        diag << " " << sp.values(i) << ":" << o;
        if (o > bo) {
            bo = o;
            best = i;
        }
    }
    if (bo < min_overlap) {
        std::ostringstream os;
        os << "at eps = " << eps << " the best overlap is " << bo << " (eigenvalue:overlap" << diag.str() << ")";
        throw ModeTrackingError(os.str());
    }
    return {sp.values(best), sp.vectors.col(best), bo};
}

std::vector<double> checked_eps(const std::vector<double>& eps_list) {
    if (eps_list.empty()) throw ConfigError("empty eps list");
    for (std::size_t i = 1; i < eps_list.size(); ++i)
        if (!(eps_list[i] < eps_list[i - 1])) throw ConfigError("eps list must be strictly decreasing");
    return eps_list;
}

void finish_fit(EigenvalueExpansion& ex) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : ex.rows)
        if (r.error > 0.0) pts.emplace_back(r.eps, r.error);
    if (pts.size() < 3) return;
    ex.slope = fit_order(pts).slope;
    for (auto& p : pts) p.second *= p.first * p.first;
    ex.scaled_slope = fit_order(pts).slope;
}

}  // namespace

EigenvalueExpansion eigenvalue_expansion(const TubeGeometry& geo, const GridDomain& section, int n, int J,
                                         const std::vector<double>& eps_list, const AssemblyOptions& opt,
                                         double min_overlap) {
    const auto eps = checked_eps(eps_list);
    const SeriesOperator series = expand_operator_2d(geo, section, std::min(4, J + 2), opt);
    const Quasimode q = build_quasimode(series, n, J);
    EigenvalueExpansion ex;
    ex.n = n;
    ex.J = J;
    ex.dim = 2;
    ex.coefficient_source = "measured (projected discrete longitudinal form)";
    for (int j = 0; j <= J; ++j) ex.coefficients.emplace_back(j - 2, q.gamma[j]);
    AssemblyOptions o = opt;
    o.apply_shift = false;
    CVec ref;
    for (double e : eps) {
        const AssembledOperator A = assemble_full_2d(geo, section, RegimeParams::make(e, 1.0, 0.0), o);
        const Tracked t = track(A, n + 2, ref.size() ? ref : q.Psi(e), min_overlap, e);
        ref = t.vector;
        const double G = q.Gamma(e);
        ex.rows.push_back({e, t.value, G, std::abs(t.value - G), t.overlap});
    }
    finish_fit(ex);
    return ex;
}

EigenvalueExpansion eigenvalue_expansion_3d(const TubeGeometry& geo, const GridDomain& section, int n,
                                            const std::vector<double>& eps_list, const AssemblyOptions& opt,
                                            double min_overlap) {
    const auto eps = checked_eps(eps_list);
    if (n < 1) throw ConfigError("mode index n is 1-based");
    const auto sc = section_constants(section);
    AssemblyOptions o = opt;
    o.apply_shift = false;
    const AssembledOperator B = assemble_effective_3d(geo, section, RegimeParams::make(eps.front(), 1.0, 0.0), *sc,
                                                      EffectivePath::Galerkin, o);
    const Spectrum sb = smallest_eigenpairs(B, n + 1);
    const double nu = sb.values(n - 1);
    if (!(nu < 0.0)) throw NoDiscreteMode("the 3D effective operator has no eigenvalue number " + std::to_string(n) + " below 0");
    EigenvalueExpansion ex;
    ex.n = n;
    ex.J = 2;
    ex.dim = 3;
    ex.coefficient_source = "Galerkin effective operator, lattice axial moment";
    ex.coefficients = {{-2, sc->lambda1}, {-1, 0.0}, {0, nu}};
    CVec ref = embed(sb.vectors.col(n - 1), fiber_vector(*sc, section));
    for (double e : eps) {
        const AssembledOperator A = assemble_full_3d(geo, section, RegimeParams::make(e, 1.0, 0.0), o);
        const Tracked t = track(A, n + 2, ref, min_overlap, e);
        ref = t.vector;
        const double G = sc->lambda1 / (e * e) + nu;
        ex.rows.push_back({e, t.value, G, std::abs(t.value - G), t.overlap});
    }
    finish_fit(ex);
    return ex;
}

void write_expansion_csv(const EigenvalueExpansion& e, std::ostream& os) {
    os << "n,j,gamma\n";
    os.precision(15);
    for (const auto& [j, g] : e.coefficients) os << e.n << "," << j << "," << g << "\n";
    os << "# dim: " << e.dim << "\n# order: " << e.J << "\n# coefficient source: " << e.coefficient_source << "\n";
    os << "# j is the power of eps\n";
}

FormPair make_form_pair(Mat L1, Mat L2) {
    if (L1.rows() != L1.cols() || L2.rows() != L2.cols() || L1.rows() != L2.rows() || L1.rows() == 0)
        throw InvalidFormPair("operators must be square of equal size");
    for (const Mat* M : {&L1, &L2}) {
        const double asym = (*M - M->transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-12 * std::max(1.0, M->cwiseAbs().maxCoeff())) throw InvalidFormPair("operator is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat> e1(L1), e2(L2);
    if (!(e1.eigenvalues().minCoeff() > 0.0) || !(e2.eigenvalues().minCoeff() > 0.0))
        throw InvalidFormPair("operator is not positive definite");
    const Mat i1 = e1.eigenvectors() * e1.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * e1.eigenvectors().transpose();
    const Mat i2 = e2.eigenvectors() * e2.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * e2.eigenvectors().transpose();
    FormPair p;
    p.eta = Eigen::JacobiSVD<Mat>(i1 * (L1 - L2) * i2).singularValues()(0);
    p.L1 = std::move(L1);
    p.L2 = std::move(L2);
    return p;
}

FormPairReport check_form_resolvent_lemma(const FormPair& pair, int trials, std::uint64_t seed) {
    FormPairReport r;
    r.eta = pair.eta;
    Eigen::SelfAdjointEigenSolver<Mat> e1(pair.L1), e2(pair.L2);
    if (!(e1.eigenvalues()(0) > 0.0) || !(e2.eigenvalues()(0) > 0.0)) throw InvalidFormPair("operator is not positive definite");
    r.inv1 = 1.0 / e1.eigenvalues()(0);
    r.inv2 = 1.0 / e2.eigenvalues()(0);
    const Mat d = pair.L1.inverse() - pair.L2.inverse();
    r.resolvent_gap = Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (d + d.transpose()), Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .cwiseAbs()
                          .maxCoeff();
    const double bound = r.eta * std::sqrt(r.inv1 * r.inv2);
    const double printed = r.eta * r.inv1 * r.inv2;
    const double tol = 1e-10 * std::max(bound, r.resolvent_gap);
    r.slack = bound - r.resolvent_gap + tol;
    r.printed_slack = printed - r.resolvent_gap + tol;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    const Eigen::Index n = pair.L1.rows();
    const Mat D = pair.L1 - pair.L2;
    r.hypothesis_min_slack = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        Vec phi(n), psi(n);
        for (Eigen::Index i = 0; i < n; ++i) phi(i) = N(rng);
        for (Eigen::Index i = 0; i < n; ++i) psi(i) = N(rng);
        const double lhs = std::abs(psi.dot(D * phi));
        const double rhs = pair.eta * std::sqrt(psi.dot(pair.L1 * psi)) * std::sqrt(phi.dot(pair.L2 * phi));
        const double s = (rhs - lhs) / std::max(rhs, 1e-300);
        ++r.hypothesis_trials;
        if (s < -1e-10) ++r.hypothesis_failures;
        r.hypothesis_min_slack = std::min(r.hypothesis_min_slack, s);
    }
    return r;
}

LemmaSuiteReport run_lemma_suite(int pairs, int max_size, int trials, std::uint64_t seed, double lo, double hi) {
    if (pairs < 1 || max_size < 2 || !(lo > 0.0) || !(hi > lo)) throw ConfigError("invalid lemma suite parameters");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> U(std::log(lo), std::log(hi));
    auto orthogonal = [&](int n) {
        Mat G(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) G(i, j) = N(rng);
        return Mat(Eigen::HouseholderQR<Mat>(G).householderQ());
    };
    auto spd = [&](int n) {
        Vec l(n);
        for (int i = 0; i < n; ++i) l(i) = std::exp(U(rng));
        const Mat Q = orthogonal(n);
        const Mat A = Q * l.asDiagonal() * Q.transpose();
        return Mat(0.5 * (A + A.transpose()));
    };
    LemmaSuiteReport rep;
    rep.min_slack = rep.min_printed_slack = std::numeric_limits<double>::infinity();
    for (int p = 0; p < pairs; ++p) {
        const int n = pairs == 1 ? max_size : 2 + static_cast<int>((static_cast<long>(max_size - 2) * p) / (pairs - 1));
        Mat L1 = spd(n), L2;
        if (p % 2 == 0) {
            L2 = spd(n);
        } else {
            Eigen::SelfAdjointEigenSolver<Mat> es(L1);
            const Mat h = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
            Mat W(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) W(i, j) = N(rng);
            W = Mat(0.5 * (W + W.transpose()));
            const double wn = Eigen::SelfAdjointEigenSolver<Mat>(W, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
            const Mat P = Mat::Identity(n, n) + (0.3 / wn) * W;
            L2 = h * P * h;
            L2 = Mat(0.5 * (L2 + L2.transpose()));
        }
        const FormPair fp = make_form_pair(std::move(L1), std::move(L2));
        const FormPairReport r = check_form_resolvent_lemma(fp, trials, seed + 7919ULL * (p + 1));
        ++rep.pairs;
        rep.max_size = std::max(rep.max_size, n);
        if (r.slack < 0.0) ++rep.bound_failures;
        if (r.printed_slack < 0.0) ++rep.printed_failures;
        rep.hypothesis_failures += r.hypothesis_failures;
        rep.min_slack = std::min(rep.min_slack, r.slack);
        rep.min_printed_slack = std::min(rep.min_printed_slack, r.printed_slack);
    }
    return rep;
}

}  // namespace tubespec
