#include <cmath>

#include <gtest/gtest.h>

#include "tubespec/errors.hpp"
#include "tubespec/hardy.hpp"

using namespace tubespec;

namespace {

CurveProfile straight(double S) {
    CurveProfile c;
    c.dim = 2;
    c.S = S;
    c.ds = 0.1;
    return c;
}

AmbientField bump(double radius) {
    AmbientField f;
    f.dim = 2;
    f.family = FieldFamily::Bump;
    f.radius = radius;
    return f;
}

}  // namespace

TEST(Cutoff, PartitionOfUnityAndConstant) {
    const CutoffPair c;
    for (double s = -1.2; s <= 1.2; s += 0.013) {
        EXPECT_NEAR(c.chi0(s) * c.chi0(s) + c.chi1(s) * c.chi1(s), 1.0, 1e-14);
    }
    EXPECT_NEAR(c.chi0(0.2), 0.0, 1e-15);
    EXPECT_NEAR(c.chi1(1.1), 0.0, 1e-15);
    EXPECT_NEAR(c.C(), std::pow(1.5 * pi, 2), 1e-6);
}

TEST(Segment, ZeroFieldGivesSectionEnergy) {
    const TubeGeometry g(straight(10), AmbientField{});
    const GridDomain sec = make_interval(-1, 1, 0.1);
    const SegmentProblem sp = assemble_segment(g, sec, 2.0, 0.0, 0.1);
    EXPECT_NEAR(sp.lambda_dn, sp.lambda1, 1e-6);
    EXPECT_EQ(hardy_constant(g, sec, 0.0, 2.0, 0.1).c_R, 0.0);
}

TEST(Segment, FieldRaisesEnergy) {
    const TubeGeometry g(straight(10), bump(2));
    const GridDomain sec = make_interval(-1, 1, 0.1);
    const SegmentProblem sp = assemble_segment(g, sec, 2.0, 1.0, 0.1);
    EXPECT_GT(sp.lambda_dn - sp.lambda1, 1e-3);
}

TEST(Segment, VanishingFieldWarns) {
    AmbientField f = bump(1);
    f.center = Vec3(6, 0, 0);
    const TubeGeometry g(straight(10), f);
    EXPECT_THROW(assemble_segment(g, make_interval(-1, 1, 0.1), 2.0, 1.0, 0.1), ZeroFieldWarning);
}

TEST(Hardy, CertificatePassesAndDenseAgrees) {
    const TubeGeometry g(straight(8), bump(2));
    const GridDomain sec = make_interval(-1, 1, 0.25);
    const HardyCertificate c = verify_hardy(g, sec, 1.0, 2.0, 8.0, 0.25, true);
    EXPECT_TRUE(c.pass);
    EXPECT_LE(c.c_R, 0.25);
    EXPECT_LE(c.c_R, c.c_R_limit + 1e-15);
    EXPECT_NEAR(c.mu_min, c.mu_dense, 1e-8);
}

TEST(Hardy, SmallFieldQuadraticLaw) {
    const TubeGeometry g(straight(10), bump(2));
    const GridDomain sec = make_interval(-1, 1, 0.1);
    const double a = hardy_constant(g, sec, 0.05, 2.0, 0.1).c_R / 0.0025;
    const double b = hardy_constant(g, sec, 0.1, 2.0, 0.1).c_R / 0.01;
    EXPECT_LT(std::abs(a - b) / b, 0.25);
}

TEST(Hardy, ShortPencilRejected) {
    const TubeGeometry g(straight(10), bump(2));
    EXPECT_THROW(verify_hardy(g, make_interval(-1, 1, 0.1), 1.0, 2.0, 6.0, 0.1), ConfigError);
}

TEST(Hardy, BentTubeRejected) {
    CurveProfile c = straight(10);
    c.kappa = {{0.0, 1.0, 0.5}};
    const TubeGeometry g(c, bump(2));
    EXPECT_THROW(assemble_segment(g, make_interval(-1, 1, 0.1), 2.0, 1.0), ConfigError);
}

TEST(Deformation, LongitudinalReparametrisationIsIsospectral) {
    DeformationSpec d;
    d.E1 = {{0.0, 2.0, 0.4}};
    const DeformationReport r =
        deformation_experiment(make_interval(-1, 1, 0.1), bump(3), 1.0, d, {0.0, 1.0}, 10.0, 0.05);
    ASSERT_EQ(r.points.size(), 2u);
    EXPECT_NEAR(r.points[0].lowest, r.points[1].lowest, 1e-6);
}

TEST(Deformation, SmallShearStaysAboveThreshold) {
    DeformationSpec d;
    d.eps2 = {{0.0, 2.0, 0.3}};
    const DeformationReport r =
        deformation_experiment(make_interval(-1, 1, 0.1), bump(3), 1.0, d, {0.0, 0.5, 1.0}, 10.0, 0.1);
    EXPECT_TRUE(r.pass);
}

TEST(Deformation, FoldedMapRejected) {
    DeformationSpec d;
    d.E1 = {{0.0, 0.2, 1.0}};
    EXPECT_THROW(deformation_experiment(make_interval(-1, 1, 0.2), bump(3), 1.0, d, {1.0}, 10.0, 0.05),
                 DeformationTooLarge);
}

TEST(LargeB, CrossingFoundOnBentTube) {
    CurveProfile c = straight(20);
    c.kappa = {{0.0, 3.0, 0.9}};
    const TubeGeometry g(c, bump(4));
    const LargeBReport r = large_b_experiment(g, make_interval(-1, 1, 0.1), {0.0, 1.0, 2.0, 4.0}, 0.1);
    EXPECT_TRUE(r.points.front().below);
    EXPECT_TRUE(r.crossed);
    EXPECT_TRUE(r.monotone);
    EXPECT_GT(r.b0, 0.0);
    EXPECT_THROW(large_b_experiment(g, make_interval(-1, 1, 0.1), {1.0, 0.5}, 0.1), ConfigError);
}
