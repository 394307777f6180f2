#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tubespec/grid.hpp"
#include "tubespec/jet.hpp"
#include "tubespec/types.hpp"

namespace tubespec {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Smooth compactly supported profile on q = x^2: exp(1 - 1/(1-q)) for q < 1.
template <class T>
T bump_profile(const T& q) {
    using std::exp;
    if (!(q < T(1.0))) return T(0.0);
    return exp(T(1.0) - T(1.0) / (T(1.0) - q));
}

// C-infinity step: 0 for x <= 0, 1 for x >= 1.
template <class T>
T smooth_step(const T& x) {
    using std::exp;
    if (!(x > T(0.0))) return T(0.0);
    if (!(x < T(1.0))) return T(1.0);
    const T a = exp(T(-1.0) / x);
    const T b = exp(T(-1.0) / (T(1.0) - x));
    return a / (a + b);
}

struct Bump {
    double center = 0.0;
    double width = 1.0;
    double amplitude = 0.0;

    template <class T>
    T operator()(const T& s) const {
        const T x = (s - T(center)) * T(1.0 / width);
        return T(amplitude) * bump_profile(x * x);
    }
    double lo() const { return center - width; }
    double hi() const { return center + width; }
};

template <class T>
T bump_sum(const std::vector<Bump>& bumps, const T& s) {
    T r(0.0);
    for (const auto& b : bumps) r += b(s);
    return r;
}

struct CurveProfile {
    int dim = 2;
    std::vector<Bump> kappa;        // 2D signed curvature
    std::vector<Bump> kappa2;       // 3D Tang-frame curvatures
    std::vector<Bump> kappa3;
    std::vector<Bump> theta_prime;  // 3D twist rate
    double S = 8.0;                 // arc-length window [-S, S]
    double ds = 0.05;

    double k(double s) const { return bump_sum(kappa, s); }
    double k2(double s) const { return bump_sum(kappa2, s); }
    double k3(double s) const { return bump_sum(kappa3, s); }
    double thetap(double s) const { return bump_sum(theta_prime, s); }
    double kappa_sq(double s) const;
    double sup_kappa() const;
    double sup_thetap() const;
    bool has_support() const;
    double support_lo() const;
    double support_hi() const;
    int ns() const;          // interior s-nodes -S + k*spacing(), k = 1..ns
    double spacing() const;  // 2S / round(2S / ds)
};

struct Frame {
    Vec3 gamma, T, M2, M3;
    double theta = 0.0;
    double k2 = 0.0, k3 = 0.0, thetap = 0.0;
    // Rotated normals e2 = cos(theta) M2 + sin(theta) M3, e3 = -sin M2 + cos M3.
    Vec3 e2() const;
    Vec3 e3() const;
};

// Samples at s0 + i * step with step = ds / 2. 2D curves live in the z = 0
// plane with M2 = nu (det(gamma', nu) = 1) and M3 = e_z.
struct FrameTrajectory {
    int dim = 2;
    double s0 = 0.0;
    double step = 0.0;
    std::vector<Vec3> gamma, T, M2, M3;
    std::vector<double> theta;
    double gram_defect = 0.0;
    CurveProfile curve;

    Frame at(double s) const;
    int samples() const { return static_cast<int>(gamma.size()); }
};

FrameTrajectory integrate_frame(const CurveProfile& curve);

enum class FieldFamily { Zero, Bump, Plateau, FrameAligned };

// 2D: scalar B = amplitude * profile(|x - c|) (or a bump sum in s for the
// frame-aligned family). 3D: B = curl(psi * (u x (x - c)) / 2), which is
// divergence free, compactly supported and equal to u where psi = 1; the
// frame-aligned family prescribes (B23, B13, B12) as bump sums in s,
// constant over the cross section.
struct AmbientField {
    int dim = 2;
    FieldFamily family = FieldFamily::Zero;
    Vec3 center = Vec3::Zero();
    Vec3 u = Vec3(0.0, 0.0, 1.0);
    double amplitude = 1.0;
    double radius = 1.0;
    double inner = 0.5;  // plateau radius
    std::vector<Bump> along23, along13, along12;  // frame-aligned profiles (2D uses along23)

    bool is_zero() const;
    double feature_size() const;
    double support_radius() const;

    template <class T>
    T scalar(const T& x, const T& y) const;
    template <class T>
    std::array<T, 3> vector(const T& x, const T& y, const T& z) const;
};

// Profile value psi and g = psi'(r)/r as a function of r^2.
template <class T>
std::array<T, 2> field_profile(const AmbientField& f, const T& r2) {
    using std::sqrt;
    const double R = f.radius;
    if (f.family == FieldFamily::Bump) {
        const T q = r2 * T(1.0 / (R * R));
        if (!(q < T(1.0))) return {T(0.0), T(0.0)};
        const T psi = bump_profile(q);
        const T om = T(1.0) - q;
        const T dpsi_dq = T(-1.0) * psi / (om * om);
        return {psi, T(2.0 / (R * R)) * dpsi_dq};
    }
    if (f.family == FieldFamily::Plateau) {
        if (!(r2 > T(f.inner * f.inner))) return {T(1.0), T(0.0)};
        if (!(r2 < T(R * R))) return {T(0.0), T(0.0)};
        const T r = sqrt(r2);
        const double w = R - f.inner;
        const T x = (T(R) - r) * T(1.0 / w);
        const T psi = smooth_step(x);
        using std::exp;
        const T a = exp(T(-1.0) / x);
        const T b = exp(T(-1.0) / (T(1.0) - x));
        const T da = a / (x * x);
        const T db = T(-1.0) * b / ((T(1.0) - x) * (T(1.0) - x));
        const T dS = (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
        const T dpsi_dr = T(-1.0 / w) * dS;
        return {psi, dpsi_dr / r};
    }
    return {T(0.0), T(0.0)};
}

template <class T>
T AmbientField::scalar(const T& x, const T& y) const {
    if (family == FieldFamily::Zero || family == FieldFamily::FrameAligned) return T(0.0);
    const T dx = x - T(center.x());
    const T dy = y - T(center.y());
    return T(amplitude) * field_profile(*this, dx * dx + dy * dy)[0];
}

template <class T>
std::array<T, 3> AmbientField::vector(const T& x, const T& y, const T& z) const {
    if (family == FieldFamily::Zero || family == FieldFamily::FrameAligned) return {T(0.0), T(0.0), T(0.0)};
    const T r[3] = {x - T(center.x()), y - T(center.y()), z - T(center.z())};
    const T r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    const auto pg = field_profile(*this, r2);
    const T ru = r[0] * T(u.x()) + r[1] * T(u.y()) + r[2] * T(u.z());
    std::array<T, 3> out;
    for (int i = 0; i < 3; ++i) {
        out[i] = T(amplitude) * (pg[0] * T(u(i)) + T(0.5) * pg[1] * (T(u(i)) * r2 - r[i] * ru));
    }
    return out;
}

struct TubeSpec {
    CurveProfile curve;
    std::shared_ptr<const GridDomain> section;
    double eps = 0.1;
    double delta = 1.0;
    double b = 10.0;
};

struct TubeDiagnostics {
    std::string status = "pass";  // pass | warn
    double curvature_product = 0.0;
    double min_distance = 0.0;
    std::vector<std::string> messages;
};

// Hard-checks the curvature bound (TubeOverlapError), soft-checks global
// overlap by sampling the axis.
TubeDiagnostics validate_tube(const TubeSpec& tube, const FrameTrajectory& frame);

// Curvilinear geometry of the unscaled tube Phi(s, t) together with an
// ambient field: field samples along Phi, the pulled-back 2-form and the
// gauges. Lengths t are unscaled (t = eps * tau).
class TubeGeometry {
public:
    TubeGeometry(const CurveProfile& curve, AmbientField field);

    const FrameTrajectory& frame() const { return frame_; }
    const AmbientField& field() const { return field_; }
    const CurveProfile& curve() const { return frame_.curve; }
    int dim() const { return frame_.dim; }

    // Quadrature step for the gauge integrals; checked against the field's
    // feature size.
    void set_quadrature_step(double step);
    double quadrature_step() const { return qstep_; }

    Vec3 phi(double s, double t2, double t3 = 0.0) const;
    Mat3 dphi(double s, double t2, double t3 = 0.0) const;
    double h(double s, double t2, double t3) const;
    double h2(double s, double t2, double t3) const;
    double h3(double s, double t2, double t3) const;

    // 2D: field at Phi(s, t) and gauge A1 = int_0^t (1 - t' kappa) B(Phi(s, t')) dt'.
    double field_2d(double s, double t) const;
    double gauge_2d(double s, double t) const;
    // Taylor coefficients of t -> B(Phi(s, t)) at t = 0, orders 0..4.
    std::array<double, 5> field_taylor_2d(double s) const;

    // 3D: (B23, B13, B12) of t-Com(DPhi) B at (s, t2, t3) and on the axis.
    Vec3 curvilinear_field(double s, double t2, double t3) const;
    double dB23_axis(double s) const;
    double A1(double s, double t2, double t3) const;
    double A2(double s, double t2, double t3) const;
    double A3(double s, double t2, double t3) const;

    // Throws SupportTruncationError unless curvature, twist and field vanish
    // on the tube for |s| >= S/2 (cross-section radius rmax in t units).
    void check_support(double rmax) const;

private:
    double simpson(double a, double b, const std::function<double(double)>& f) const;

    FrameTrajectory frame_;
    AmbientField field_;
    double qstep_ = 1e-2;
};

struct PulledField {
    std::vector<double> s;
    std::vector<double> B23, B13, B12, dB23;
};

// On-axis components on the given s-nodes.
PulledField pullback_field(const TubeGeometry& geo, const std::vector<double>& s_nodes);

// A1(s_i, eps * tau_j) for the 2D tube.
Mat gauge_2d(const TubeGeometry& geo, double eps, const std::vector<double>& s_nodes,
             const std::vector<double>& tau_nodes);

struct Gauge3D {
    Mat A1, A2, A3;  // rows: s-nodes, columns: cross-section unknowns
};

Gauge3D gauge_3d(const TubeGeometry& geo, double eps, const std::vector<double>& s_nodes,
                 const GridDomain& section);

}  // namespace tubespec
