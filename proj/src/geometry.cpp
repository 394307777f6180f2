#include "tubespec/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tubespec/errors.hpp"

namespace tubespec {

namespace {


template <class F>
void for_all_bumps(const CurveProfile& c, F&& f) {
    for (const auto* v : {&c.kappa, &c.kappa2, &c.kappa3, &c.theta_prime}) {
        for (const auto& b : *v) {
            if (b.amplitude != 0.0) f(b);
        }
    }
}

double sample_sup(const CurveProfile& c, double (*g)(const CurveProfile&, double)) {
    double m = 0.0;
    const int n = 8000;
    for (int i = 0; i <= n; ++i) {
        const double s = -c.S + 2.0 * c.S * i / n;
        m = std::max(m, g(c, s));
    }
    // Bump maxima sit at their centres.
    for_all_bumps(c, [&](const Bump& b) { m = std::max(m, g(c, b.center)); });
    return m;
}

struct State {
    Vec3 gamma, T, M2, M3;
    double theta = 0.0;
};

State rhs(const CurveProfile& c, double s, const State& y) {
    const double k2 = c.dim == 2 ? c.k(s) : c.k2(s);
    const double k3 = c.dim == 2 ? 0.0 : c.k3(s);
    State d;
    d.gamma = y.T;
    d.T = k2 * y.M2 + k3 * y.M3;
    d.M2 = -k2 * y.T;
    d.M3 = -k3 * y.T;
    d.theta = c.dim == 2 ? 0.0 : c.thetap(s);
    return d;
}

State axpy(const State& y, double a, const State& d) {
    State r;
    r.gamma = y.gamma + a * d.gamma;
    r.T = y.T + a * d.T;
    r.M2 = y.M2 + a * d.M2;
    r.M3 = y.M3 + a * d.M3;
    r.theta = y.theta + a * d.theta;
    return r;
}

State rk4_step(const CurveProfile& c, double s, const State& y, double h) {
    const State k1 = rhs(c, s, y);
    const State k2 = rhs(c, s + 0.5 * h, axpy(y, 0.5 * h, k1));
    const State k3 = rhs(c, s + 0.5 * h, axpy(y, 0.5 * h, k2));
    const State k4 = rhs(c, s + h, axpy(y, h, k3));
    State r = y;
    r.gamma += h / 6.0 * (k1.gamma + 2.0 * k2.gamma + 2.0 * k3.gamma + k4.gamma);
    r.T += h / 6.0 * (k1.T + 2.0 * k2.T + 2.0 * k3.T + k4.T);
    r.M2 += h / 6.0 * (k1.M2 + 2.0 * k2.M2 + 2.0 * k3.M2 + k4.M2);
    r.M3 += h / 6.0 * (k1.M3 + 2.0 * k2.M3 + 2.0 * k3.M3 + k4.M3);
    r.theta += h / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta);
    return r;
}

double gram_defect(const Vec3& T, const Vec3& M2, const Vec3& M3) {
    Mat3 F;
    F << T, M2, M3;
    return (F.transpose() * F - Mat3::Identity()).cwiseAbs().maxCoeff();
}

// Cubic Hermite on [0, 1] with endpoint values and scaled slopes.
template <class V>
V hermite(const V& y0, const V& d0, const V& y1, const V& d1, double u, double h) {
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * h * d0 + (-2 * u3 + 3 * u2) * y1 +
           (u3 - u2) * h * d1;
}

double min_bump_width(const std::vector<Bump>& v) {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& b : v) {
        if (b.amplitude != 0.0) w = std::min(w, b.width);
    }
    return w;
}

double simpson_rule(double a, double b, double step, const std::function<double(double)>& f) {
    if (a == b) return 0.0;
    int n = static_cast<int>(std::ceil(std::abs(b - a) / step));
    n = std::max(2, n + (n % 2));
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return acc * h / 3.0;
}

}  // namespace

double CurveProfile::kappa_sq(double s) const {
    if (dim == 2) return k(s) * k(s);
    return k2(s) * k2(s) + k3(s) * k3(s);
}

double CurveProfile::sup_kappa() const {
    return sample_sup(*this, [](const CurveProfile& c, double s) { return std::sqrt(c.kappa_sq(s)); });
}

double CurveProfile::sup_thetap() const {
    return sample_sup(*this, [](const CurveProfile& c, double s) { return std::abs(c.thetap(s)); });
}

bool CurveProfile::has_support() const {
    bool any = false;
    for_all_bumps(*this, [&](const Bump&) { any = true; });
    return any;
}

double CurveProfile::support_lo() const {
    double lo = std::numeric_limits<double>::infinity();
    for_all_bumps(*this, [&](const Bump& b) { lo = std::min(lo, b.lo()); });
    return lo;
}

double CurveProfile::support_hi() const {
    double hi = -std::numeric_limits<double>::infinity();
    for_all_bumps(*this, [&](const Bump& b) { hi = std::max(hi, b.hi()); });
    return hi;
}

double CurveProfile::spacing() const {
    const double n = std::max(2.0, std::round(2.0 * S / ds));
    return 2.0 * S / n;
}

int CurveProfile::ns() const { return static_cast<int>(std::round(2.0 * S / spacing())) - 1; }

Vec3 Frame::e2() const { return std::cos(theta) * M2 + std::sin(theta) * M3; }
Vec3 Frame::e3() const { return -std::sin(theta) * M2 + std::cos(theta) * M3; }

Frame FrameTrajectory::at(double s) const {
    const int n = samples();
    double u = (s - s0) / step;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, n - 2);
    u -= i;
    const double sa = s0 + i * step, sb = sa + step;
    State ya{gamma[i], T[i], M2[i], M3[i], theta[i]};
    State yb{gamma[i + 1], T[i + 1], M2[i + 1], M3[i + 1], theta[i + 1]};
    const State da = rhs(curve, sa, ya), db = rhs(curve, sb, yb);
    Frame f;
    f.gamma = hermite(ya.gamma, da.gamma, yb.gamma, db.gamma, u, step);
    f.T = hermite(ya.T, da.T, yb.T, db.T, u, step);
    f.M2 = hermite(ya.M2, da.M2, yb.M2, db.M2, u, step);
    f.M3 = hermite(ya.M3, da.M3, yb.M3, db.M3, u, step);
    f.theta = hermite(ya.theta, da.theta, yb.theta, db.theta, u, step);
    f.k2 = dim == 2 ? curve.k(s) : curve.k2(s);
    f.k3 = dim == 2 ? 0.0 : curve.k3(s);
    f.thetap = dim == 2 ? 0.0 : curve.thetap(s);
    return f;
}

FrameTrajectory integrate_frame(const CurveProfile& curve) {
    if (curve.dim != 2 && curve.dim != 3) throw ConfigError("curve dimension must be 2 or 3");
    if (!(curve.S > 0.0) || !(curve.ds > 0.0)) throw ConfigError("curve window and spacing must be positive");
    FrameTrajectory tr;
    tr.dim = curve.dim;
    tr.curve = curve;
    tr.s0 = -curve.S;
    tr.step = 0.5 * curve.spacing();
    const int n = static_cast<int>(std::round(2.0 * curve.S / tr.step)) + 1;
    const int sub = 4;
    State y{Vec3(-curve.S, 0.0, 0.0), Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), 0.0};
    tr.gamma.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (i > 0) {
            const double sa = tr.s0 + (i - 1) * tr.step;
            for (int k = 0; k < sub; ++k) y = rk4_step(curve, sa + k * tr.step / sub, y, tr.step / sub);
        }
        tr.gamma.push_back(y.gamma);
        tr.T.push_back(y.T);
        tr.M2.push_back(y.M2);
        tr.M3.push_back(y.M3);
        tr.theta.push_back(y.theta);
        tr.gram_defect = std::max(tr.gram_defect, gram_defect(y.T, y.M2, y.M3));
    }
    if (tr.gram_defect > 1e-7) {
        std::ostringstream os;
        os << "frame Gram defect " << tr.gram_defect << " exceeds 1e-7; reduce ds";
        throw FrameDriftError(os.str());
    }
    return tr;
}

bool AmbientField::is_zero() const {
    if (family == FieldFamily::Zero) return true;
    if (family == FieldFamily::FrameAligned) {
        for (const auto* v : {&along23, &along13, &along12}) {
            for (const auto& b : *v) {
                if (b.amplitude != 0.0) return false;
            }
        }
        return true;
    }
    return amplitude == 0.0;
}

double AmbientField::feature_size() const {
    switch (family) {
        case FieldFamily::Zero:
            return std::numeric_limits<double>::infinity();
        case FieldFamily::Bump:
            return radius;
        case FieldFamily::Plateau:
            return radius - inner;
        case FieldFamily::FrameAligned:
            return std::min({min_bump_width(along23), min_bump_width(along13), min_bump_width(along12)});
    }
    return radius;
}

double AmbientField::support_radius() const {
    if (family == FieldFamily::Zero || family == FieldFamily::FrameAligned) return 0.0;
    return radius;
}

TubeDiagnostics validate_tube(const TubeSpec& tube, const FrameTrajectory& frame) {
    TubeDiagnostics d;
    double rsum = 1.0, rmax = 1.0;
    if (tube.section) {
        const GridDomain& g = *tube.section;
        rsum = 0.0;
        rmax = 0.0;
        for (int k = 0; k < g.size(); ++k) {
            const double a = std::abs(g.x(k)), b = g.dim == 2 ? std::abs(g.y(k)) : 0.0;
            rsum = std::max(rsum, a + b);
            rmax = std::max(rmax, std::hypot(a, b));
        }
        // Extend to the boundary rather than the last interior node.
        rsum += g.h * (g.dim == 2 ? 2.0 : 1.0);
        rmax += g.h;
    }
    const double supk = tube.curve.sup_kappa();
    d.curvature_product = tube.eps * rsum * supk;
    if (!(d.curvature_product < 1.0)) {
        std::ostringstream os;
        os << "eps * sup(|tau_2|+|tau_3|) * sup|kappa| = " << d.curvature_product << " >= 1";
        throw TubeOverlapError(os.str());
    }
    const double diam = 2.0 * tube.eps * rmax;
    const double sep = std::max(2.0 * diam, supk > 0.0 ? M_PI / supk : 0.0);
    const int n = frame.samples();
    const int stride = std::max(1, static_cast<int>(std::round(0.25 * diam / frame.step)));
    d.min_distance = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; i += stride) {
        for (int j = i + stride; j < n; j += stride) {
            if ((j - i) * frame.step <= sep) continue;
            const double dist = (frame.gamma[i] - frame.gamma[j]).norm();
            d.min_distance = std::min(d.min_distance, dist);
        }
    }
    if (d.min_distance < diam) {
        d.status = "warn";
        std::ostringstream os;
        os << "axis points " << d.min_distance << " apart (tube diameter " << diam
           << "); Phi may not be injective";
        d.messages.push_back(os.str());
    }
    return d;
}

TubeGeometry::TubeGeometry(const CurveProfile& curve, AmbientField field)
    : frame_(integrate_frame(curve)), field_(std::move(field)) {
    field_.dim = curve.dim;
    qstep_ = std::min(qstep_, field_.feature_size() / 4.0);
}

void TubeGeometry::set_quadrature_step(double step) {
    if (!(step > 0.0) || step > field_.feature_size() / 4.0) {
        std::ostringstream os;
        os << "quadrature step " << step << " coarser than a quarter of the field feature size "
           << field_.feature_size();
        throw QuadratureResolutionError(os.str());
    }
    qstep_ = step;
}

double TubeGeometry::simpson(double a, double b, const std::function<double(double)>& f) const {
    return simpson_rule(a, b, qstep_, f);
}

Vec3 TubeGeometry::phi(double s, double t2, double t3) const {
    const Frame f = frame_.at(s);
    return f.gamma + t2 * f.e2() + t3 * f.e3();
}

double TubeGeometry::h(double s, double t2, double t3) const {
    const Frame f = frame_.at(s);
    const double c = std::cos(f.theta), sn = std::sin(f.theta);
    return 1.0 - t2 * (f.k2 * c + f.k3 * sn) - t3 * (-f.k2 * sn + f.k3 * c);
}

double TubeGeometry::h2(double s, double t2, double) const { return -t2 * curve().thetap(s); }
double TubeGeometry::h3(double s, double, double t3) const { return t3 * curve().thetap(s); }

Mat3 TubeGeometry::dphi(double s, double t2, double t3) const {
    const Frame f = frame_.at(s);
    const Vec3 e2 = f.e2(), e3 = f.e3();
    Mat3 D;
    D.col(0) = h(s, t2, t3) * f.T - h2(s, t2, t3) * e3 - h3(s, t2, t3) * e2;
    D.col(1) = e2;
    D.col(2) = e3;
    return D;
}

double TubeGeometry::field_2d(double s, double t) const {
    if (field_.family == FieldFamily::FrameAligned) return bump_sum(field_.along23, s);
    const Vec3 x = phi(s, t);
    return field_.scalar(x.x(), x.y());
}

double TubeGeometry::gauge_2d(double s, double t) const {
    if (field_.is_zero()) return 0.0;
    const double k = curve().k(s);
    return simpson(0.0, t, [&](double u) { return (1.0 - u * k) * field_2d(s, u); });
}

std::array<double, 5> TubeGeometry::field_taylor_2d(double s) const {
    std::array<double, 5> out{};
    if (field_.family == FieldFamily::FrameAligned) {
        out[0] = bump_sum(field_.along23, s);
        return out;
    }
    const Frame f = frame_.at(s);
    using J = Jet<5>;
    const J t = J::variable(0.0);
    const J x = J(f.gamma.x()) + t * J(f.M2.x());
    const J y = J(f.gamma.y()) + t * J(f.M2.y());
    const J b = field_.scalar(x, y);
    for (int k = 0; k < 5; ++k) out[k] = b.c[k];
    return out;
}

Vec3 TubeGeometry::curvilinear_field(double s, double t2, double t3) const {
    if (field_.family == FieldFamily::FrameAligned) {
        return Vec3(bump_sum(field_.along23, s), bump_sum(field_.along13, s), bump_sum(field_.along12, s));
    }
    if (field_.is_zero()) return Vec3::Zero();
    const Vec3 x = phi(s, t2, t3);
    const auto B = field_.vector(x.x(), x.y(), x.z());
    const Mat3 D = dphi(s, t2, t3);
    // tCom(D) B = det(D) D^{-1} B, whose components are (B23, -B13, B12).
    const Vec3 v = D.determinant() * D.lu().solve(Vec3(B[0], B[1], B[2]));
    return Vec3(v(0), -v(1), v(2));
}

double TubeGeometry::dB23_axis(double s) const {
    if (field_.family == FieldFamily::FrameAligned) {
        const Jet<2> b = bump_sum(field_.along23, Jet<2>::variable(s));
        return b.c[1];
    }
    if (field_.is_zero()) return 0.0;
    const Frame f = frame_.at(s);
    using J = Jet<2>;
    const J u = J::variable(0.0);
    const auto B = field_.vector(J(f.gamma.x()) + u * J(f.T.x()), J(f.gamma.y()) + u * J(f.T.y()),
                                 J(f.gamma.z()) + u * J(f.T.z()));
    const Vec3 B0(B[0].c[0], B[1].c[0], B[2].c[0]);
    const Vec3 dB(B[0].c[1], B[1].c[1], B[2].c[1]);
    const Vec3 dT = f.k2 * f.M2 + f.k3 * f.M3;
    return dB.dot(f.T) + B0.dot(dT);
}

double TubeGeometry::A1(double s, double t2, double t3) const {
    if (field_.is_zero()) return 0.0;
    const double i12 = simpson(0.0, t2, [&](double u) { return curvilinear_field(s, u, t3)(2); });
    const double i13 = simpson(0.0, t3, [&](double u) { return curvilinear_field(s, 0.0, u)(1); });
    return -0.5 * t2 * t3 * dB23_axis(s) - i12 - i13;
}

double TubeGeometry::A2(double s, double, double t3) const {
    if (field_.is_zero()) return 0.0;
    return -0.5 * t3 * curvilinear_field(s, 0.0, 0.0)(0);
}

double TubeGeometry::A3(double s, double t2, double t3) const {
    if (field_.is_zero()) return 0.0;
    const double i23 = simpson(0.0, t2, [&](double u) { return curvilinear_field(s, u, t3)(0); });
    return -0.5 * t2 * curvilinear_field(s, 0.0, 0.0)(0) + i23;
}

void TubeGeometry::check_support(double rmax) const {
    const CurveProfile& c = curve();
    const double half = 0.5 * c.S;
    if (c.has_support() && (c.support_lo() < -half || c.support_hi() > half)) {
        std::ostringstream os;
        os << "curvature/twist support [" << c.support_lo() << ", " << c.support_hi()
           << "] leaves [-S/2, S/2] with S = " << c.S;
        throw SupportTruncationError(os.str());
    }
    if (field_.is_zero()) return;
    if (field_.family == FieldFamily::FrameAligned) {
        for (const auto* v : {&field_.along23, &field_.along13, &field_.along12}) {
            for (const auto& b : *v) {
                if (b.amplitude != 0.0 && (b.lo() < -half || b.hi() > half)) {
                    throw SupportTruncationError("frame-aligned field support leaves [-S/2, S/2]");
                }
            }
        }
        return;
    }
    const double R = field_.support_radius();
    for (int i = 0; i < frame_.samples(); ++i) {
        const double s = frame_.s0 + i * frame_.step;
        if (std::abs(s) < half) continue;
        Vec3 d = frame_.gamma[i] - field_.center;
        if (dim() == 2) d.z() = 0.0;
        if (d.norm() < R + rmax) {
            std::ostringstream os;
            os << "field support reaches the tube at s = " << s << ", outside [-S/2, S/2]";
            throw SupportTruncationError(os.str());
        }
    }
}

PulledField pullback_field(const TubeGeometry& geo, const std::vector<double>& s_nodes) {
    if (geo.dim() != 3) throw NotApplicable("pullback_field needs a 3D tube");
    PulledField p;
    p.s = s_nodes;
    for (double s : s_nodes) {
        const Vec3 b = geo.curvilinear_field(s, 0.0, 0.0);
        p.B23.push_back(b(0));
        p.B13.push_back(b(1));
        p.B12.push_back(b(2));
        p.dB23.push_back(geo.dB23_axis(s));
    }
    return p;
}

Mat gauge_2d(const TubeGeometry& geo, double eps, const std::vector<double>& s_nodes,
             const std::vector<double>& tau_nodes) {
    Mat A(s_nodes.size(), tau_nodes.size());
    for (std::size_t i = 0; i < s_nodes.size(); ++i) {
        for (std::size_t j = 0; j < tau_nodes.size(); ++j) A(i, j) = geo.gauge_2d(s_nodes[i], eps * tau_nodes[j]);
    }
    return A;
}

Gauge3D gauge_3d(const TubeGeometry& geo, double eps, const std::vector<double>& s_nodes,
                 const GridDomain& section) {
    if (geo.dim() != 3 || section.dim != 2) throw NotApplicable("gauge_3d needs a 3D tube and a 2D section");
    Gauge3D g;
    const int ns = static_cast<int>(s_nodes.size()), nt = section.size();
    g.A1 = Mat::Zero(ns, nt);
    g.A2 = Mat::Zero(ns, nt);
    g.A3 = Mat::Zero(ns, nt);
    if (geo.field().is_zero()) return g;
    for (int i = 0; i < ns; ++i) {
        for (int k = 0; k < nt; ++k) {
            const double t2 = eps * section.x(k), t3 = eps * section.y(k);
            g.A1(i, k) = geo.A1(s_nodes[i], t2, t3);
            g.A2(i, k) = geo.A2(s_nodes[i], t2, t3);
            g.A3(i, k) = geo.A3(s_nodes[i], t2, t3);
        }
    }
    return g;
}

}  // namespace tubespec
