#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "tubespec/errors.hpp"
#include "tubespec/operators.hpp"

using namespace tubespec;

namespace {

CurveProfile bent(double S = 6, double ds = 0.05) {
    CurveProfile c;
    c.dim = 2;
    c.S = S;
    c.ds = ds;
    c.kappa = {{0.0, 1.5, 1.6}};
    return c;
}

AmbientField bump2d() {
    AmbientField f;
    f.dim = 2;
    f.family = FieldFamily::Bump;
    f.center = Vec3(0, 0.3, 0);
    f.radius = 2;
    return f;
}

CurveProfile twisted() {
    CurveProfile c;
    c.dim = 3;
    c.S = 6;
    c.ds = 0.2;
    c.kappa2 = {{0.0, 1.5, 0.6}};
    c.theta_prime = {{0.5, 1.5, 0.5}};
    return c;
}

AmbientField bump3d() {
    AmbientField f;
    f.dim = 3;
    f.family = FieldFamily::Bump;
    f.center = Vec3(0.3, 0.2, 0.1);
    f.radius = 2.5;
    f.u = Vec3(1, 0.5, 0.3).normalized();
    return f;
}

double lowest(const AssembledOperator& op) { return smallest_eigenpairs(op, 1).values(0); }

}  // namespace

TEST(Operators, FreeEffectiveOperatorIsBoxMode) {
    CurveProfile c;
    c.dim = 2;
    c.S = 6;
    c.ds = 0.01;
    const TubeGeometry g(c, AmbientField{});
    const GridDomain sec = make_interval(-1, 1, 0.05);
    const auto k = section_constants(sec);
    const RegimeParams r = RegimeParams::make(0.1, 0.0, 1.0);
    const double l = lowest(assemble_effective_2d(g, sec, r, *k)) - 1.0;
    const double exact = std::pow(pi / 12.0, 2);
    EXPECT_NEAR(l, exact, 1e-4 * exact);
}

TEST(Operators, BentTubeHasDiscreteSpectrumBelowThreshold) {
    const TubeGeometry g(bent(), AmbientField{});
    const GridDomain sec = make_interval(-1, 1, 0.05);
    const auto k = section_constants(sec);
    const RegimeParams r = RegimeParams::make(0.1, 0.0, default_K(bent()));
    EXPECT_LT(lowest(assemble_effective_2d(g, sec, r, *k)) - r.K, 0.0);
}

TEST(Operators, Hermiticity) {
    const GridDomain iv = make_interval(-1, 1, 0.05);
    const GridDomain sq = make_rectangle(-1, 1, -1, 1, 0.25);
    const TubeGeometry g2(bent(), bump2d());
    const TubeGeometry g3(twisted(), bump3d());
    for (double delta : {0.0, 0.5, 1.0}) {
        const RegimeParams r = RegimeParams::make(0.1, delta, 1.0);
        for (const AssembledOperator& op :
             {assemble_full_2d(g2, iv, r), assemble_app_2d(g2, iv, r),
              assemble_effective_2d(g2, iv, r, *section_constants(iv)), assemble_full_3d(g3, sq, r),
              assemble_effective_3d(g3, sq, r, *section_constants(sq))}) {
            EXPECT_LE(op.symmetry_defect(), 1e-12) << op.name << " delta=" << delta;
        }
    }
}

TEST(Operators, DenseAndSparseAgree) {
    CurveProfile c = bent(6, 0.24);
    const TubeGeometry g(c, bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.1);  // 50 x 19 unknowns
    const AssembledOperator op = assemble_full_2d(g, sec, RegimeParams::make(0.2, 1.0, 2.0));
    EigenOptions d, s;
    d.force_dense = true;
    s.force_sparse = true;
    const Spectrum a = smallest_eigenpairs(op, 3, d), b = smallest_eigenpairs(op, 3, s);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a.values(i), b.values(i), 1e-9);
}

TEST(Operators, GaugeCovariance2D) {
    const TubeGeometry g(bent(), bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.05);
    const RegimeParams r = RegimeParams::make(0.1, 1.0, 3.0);
    AssemblyOptions o;
    o.gauge_shift = [](double s) { return 0.7 * std::sin(1.3 * s) + 0.2 * s * s; };
    const Spectrum a = smallest_eigenpairs(assemble_full_2d(g, sec, r), 3);
    const Spectrum b = smallest_eigenpairs(assemble_full_2d(g, sec, r, o), 3);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a.values(i), b.values(i), 1e-6);
}

TEST(Operators, DiamagneticMonotonicity) {
    CurveProfile c;
    c.dim = 2;
    c.S = 6;
    c.ds = 0.1;
    const TubeGeometry g(c, bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.1);
    AssemblyOptions o;
    o.apply_shift = false;
    RegimeParams r = RegimeParams::make(1.0, 0.0, 0.0);
    double prev = -1.0;
    for (double b : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        r.b = b;
        const double l = lowest(assemble_full_2d(g, sec, r, o));
        EXPECT_GE(l, prev - 1e-10) << "b=" << b;
        prev = l;
    }
}

TEST(Operators, ThreeDimensionalPathsAgree) {
    const TubeGeometry g(twisted(), bump3d());
    const GridDomain sq = make_rectangle(-1, 1, -1, 1, 0.25);
    const auto k = section_constants(sq);
    for (double delta : {0.0, 1.0}) {
        const RegimeParams r = RegimeParams::make(0.1, delta, default_K(twisted()));
        const double a = lowest(assemble_effective_3d(g, sq, r, *k, EffectivePath::Galerkin));
        const double b = lowest(assemble_effective_3d(g, sq, r, *k, EffectivePath::Coefficients));
        EXPECT_NEAR(a, b, 1e-3) << "delta=" << delta;
    }
}

TEST(Operators, TwistRaisesEnergyOnSquareNotOnDisk) {
    CurveProfile c;
    c.dim = 3;
    c.S = 6;
    c.ds = 0.2;
    CurveProfile ct = c;
    ct.theta_prime = {{0.0, 1.5, 1.0}};
    const RegimeParams r = RegimeParams::make(0.1, 0.0, 1.0);
    const GridDomain sq = make_rectangle(-1, 1, -1, 1, 0.25);
    const GridDomain dk = make_disk(1.0, 0.2);
    const TubeGeometry g0(c, AmbientField{}), gt(ct, AmbientField{});
    EXPECT_GT(lowest(assemble_full_3d(gt, sq, r)) - lowest(assemble_full_3d(g0, sq, r)), 1e-3);
    EXPECT_LT(std::abs(lowest(assemble_full_3d(gt, dk, r)) - lowest(assemble_full_3d(g0, dk, r))), 1e-3);
}

TEST(Operators, ResolventDistanceOfIdenticalOperatorsVanishes) {
    const TubeGeometry g(bent(), bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.1);
    const AssembledOperator a = assemble_full_2d(g, sec, RegimeParams::make(0.1, 0.5, 3.0));
    EXPECT_LT(resolvent_distance(a, a).value, 1e-12);
}

TEST(Operators, ResolventDistanceShrinksWithEps) {
    const TubeGeometry g(bent(), bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.05);
    const auto k = section_constants(sec);
    const Vec fiber = fiber_vector(*k, sec);
    double prev = INFINITY;
    for (double eps : {0.2, 0.1}) {
        const RegimeParams r = RegimeParams::make(eps, 0.0, default_K(bent()));
        const double d =
            resolvent_distance(assemble_full_2d(g, sec, r), assemble_effective_2d(g, sec, r, *k), fiber).value;
        EXPECT_LT(d, prev);
        prev = d;
    }
}

TEST(Operators, FiberEmbeddingIsIsometry) {
    const GridDomain sq = make_rectangle(-1, 1, -1, 1, 0.2);
    EXPECT_NEAR(fiber_vector(*section_constants(sq), sq).norm(), 1.0, 1e-12);
}

TEST(Operators, TripletExportHeader) {
    const TubeGeometry g(bent(), AmbientField{});
    const GridDomain sec = make_interval(-1, 1, 0.5);
    const AssembledOperator op = assemble_full_2d(g, sec, RegimeParams::make(0.2, 0.0, 2.0));
    std::ostringstream os;
    write_triplets(op, os);
    const std::string s = os.str();
    EXPECT_NE(s.find("# rows: " + std::to_string(op.rows())), std::string::npos);
    EXPECT_NE(s.find("# nnz:"), std::string::npos);
    EXPECT_NE(s.find("# shift:"), std::string::npos);
}

TEST(Operators, RegimeValidation) {
    EXPECT_THROW(RegimeParams::make(0.1, 1.5), ConfigError);
    EXPECT_THROW(RegimeParams::make(0.0, 0.5), ConfigError);
    EXPECT_NEAR(RegimeParams::make(0.01, 0.5).b, 10.0, 1e-12);
}
