#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "tubespec/asymptotics.hpp"
#include "tubespec/errors.hpp"

using namespace tubespec;

namespace {

CurveProfile bent() {
    CurveProfile c;
    c.dim = 2;
    c.S = 6;
    c.ds = 0.1;
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

double max_abs(const SpCMat& m) {
    double r = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpCMat::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
    return r;
}

}  // namespace

TEST(Series, StraightFieldFreeTubeHasOnlyL0AndL2) {
    CurveProfile c = bent();
    c.kappa.clear();
    const TubeGeometry g(c, AmbientField{});
    const GridDomain sec = make_interval(-1, 1, 0.1);
    const SeriesOperator s = expand_operator_2d(g, sec, 4);
    EXPECT_LT(max_abs(s.L[1]), 1e-14);
    EXPECT_LT(max_abs(s.L[3]), 1e-14);
    EXPECT_LT(max_abs(s.L[4]), 1e-14);
    EXPECT_GT(max_abs(s.L[2]), 1.0);
}

TEST(Series, L1VanishesOnBentMagneticTube) {
    const TubeGeometry g(bent(), bump2d());
    const SeriesOperator s = expand_operator_2d(g, make_interval(-1, 1, 0.1), 3);
    EXPECT_LT(max_abs(s.L[1]), 1e-12);
}

TEST(Series, TruncatedSumMatchesFullOperator) {
    const TubeGeometry g(bent(), bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.1);
    const SeriesOperator s = expand_operator_2d(g, sec, 4);
    AssemblyOptions o;
    o.apply_shift = false;
    std::vector<double> diff;
    for (double eps : {0.1, 0.05}) {
        RegimeParams r = RegimeParams::make(eps, 1.0, 0.0);
        const SpCMat full = assemble_full_2d(g, sec, r, o).as_complex();
        diff.push_back(max_abs(SpCMat(full - s.evaluate(eps))));
    }
    // Remainder O(eps^3) entrywise.
    EXPECT_GT(diff[0] / diff[1], 6.0);
}

TEST(Series, OrderLimit) {
    const TubeGeometry g(bent(), bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.1);
    EXPECT_THROW(expand_operator_2d(g, sec, 5), NotImplemented);
    EXPECT_THROW(expand_operator_2d(g, sec, 1), ConfigError);
}

TEST(Quasimode, LeadingCoefficientsAndOrthogonality) {
    const TubeGeometry g(bent(), bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.05);
    const SeriesOperator s = expand_operator_2d(g, sec, 4);
    const Quasimode q = build_quasimode(s, 1, 2);
    EXPECT_NEAR(q.gamma[0], section_constants(sec)->lambda1, 1e-12);
    EXPECT_NEAR(q.gamma[0], pi * pi / 4, 2e-3);
    EXPECT_NEAR(q.gamma[1], 0.0, 1e-12);
    EXPECT_LT(q.gamma[2], 0.0);
    EXPECT_LT(q.perp_defect, 1e-10);
    EXPECT_LT(q.fredholm_defect, 1e-10);
}

TEST(Quasimode, ResidualDecreasesFasterForHigherOrder) {
    const TubeGeometry g(bent(), bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.05);
    const SeriesOperator s = expand_operator_2d(g, sec, 4);
    const Quasimode q2 = build_quasimode(s, 1, 2);
    const double a = quasimode_residual(q2, g, sec, 0.1), b = quasimode_residual(q2, g, sec, 0.05);
    EXPECT_GT(std::log2(a / b), 2.5);
}

TEST(Quasimode, StraightFieldFreeTubeHasNoBoundState) {
    CurveProfile c = bent();
    c.kappa.clear();
    const TubeGeometry g(c, AmbientField{});
    const SeriesOperator s = expand_operator_2d(g, make_interval(-1, 1, 0.1), 3);
    EXPECT_THROW(build_quasimode(s, 1, 2), NoDiscreteMode);
}

TEST(Expansion, CoefficientTableAndTracking) {
    const TubeGeometry g(bent(), bump2d());
    const GridDomain sec = make_interval(-1, 1, 0.05);
    const EigenvalueExpansion e = eigenvalue_expansion(g, sec, 1, 2, {0.2, 0.1, 0.05});
    ASSERT_GE(e.coefficients.size(), 3u);
    EXPECT_EQ(e.coefficients[0].first, -2);
    EXPECT_EQ(e.coefficients[1].first, -1);
    EXPECT_DOUBLE_EQ(e.coefficients[1].second, 0.0);
    for (const auto& r : e.rows) EXPECT_GT(r.overlap, 0.9);
    std::ostringstream os;
    write_expansion_csv(e, os);
    EXPECT_EQ(os.str().rfind("n,j,gamma\n", 0), 0u);
    EXPECT_THROW(eigenvalue_expansion(g, sec, 1, 2, {0.1, 0.2, 0.05}), ConfigError);
}

TEST(FormLemma, ScalarPairShowsPrintedFormFails) {
    const FormPair p = make_form_pair(4.0 * Mat::Identity(3, 3), 8.0 * Mat::Identity(3, 3));
    const FormPairReport r = check_form_resolvent_lemma(p, 50, 7);
    // ||L1^-1 - L2^-1|| = 1/8; eta = 1/sqrt(2).
    EXPECT_NEAR(r.resolvent_gap, 0.125, 1e-12);
    EXPECT_NEAR(r.eta, 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_GE(r.slack, -1e-12);
    EXPECT_LT(r.printed_slack, 0.0);
    EXPECT_EQ(r.hypothesis_failures, 0);
}

TEST(FormLemma, RandomSuiteHoldsProvenBound) {
    const LemmaSuiteReport r = run_lemma_suite(10, 30, 100, 11);
    EXPECT_EQ(r.pairs, 10);
    EXPECT_EQ(r.bound_failures, 0);
    EXPECT_EQ(r.hypothesis_failures, 0);
    EXPECT_GE(r.min_slack, 0.0);
}

TEST(FormLemma, RejectsIndefinitePair) {
    Mat a = Mat::Identity(2, 2);
    Mat b = Mat::Identity(2, 2);
    b(1, 1) = -1.0;
    EXPECT_THROW(make_form_pair(a, b), InvalidFormPair);
    Mat c(2, 2);
    c << 1, 0.5, 0, 1;
    EXPECT_THROW(make_form_pair(a, c), InvalidFormPair);
}
