#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tubespec/errors.hpp"
#include "tubespec/xsection.hpp"

using namespace tubespec;

TEST(BesselOracle, RootMatchesTabulatedValue) {
    EXPECT_NEAR(oracle::bessel_j0_root(), 2.404825557695773, 1e-12);
}

TEST(XSection, IntervalGroundEnergy) {
    const GridDomain d = make_interval(-1, 1, 1.0 / 100);
    const auto c = compute_constants(d);
    EXPECT_NEAR(c.lambda1, pi * pi / 4, 1e-3 * pi * pi / 4);
}

TEST(XSection, SquareGroundEnergy) {
    const GridDomain d = make_rectangle(-1, 1, -1, 1, 1.0 / 30);
    const auto c = compute_constants(d);
    EXPECT_NEAR(c.lambda1, pi * pi / 2, 1e-2 * pi * pi / 2);
}

TEST(XSection, DiskGroundEnergyAgainstBesselRoot) {
    const double j = oracle::bessel_j0_root();
    const auto c = compute_constants(make_disk(1.0, 1.0 / 40));
    EXPECT_NEAR(c.lambda1, j * j, 1e-2 * j * j);
}

TEST(XSection, IntervalModesAreSineModes) {
    const GridDomain d = make_interval(-1, 1, 1.0 / 100);
    const ModeSet m = lowest_modes(assemble_dirichlet_laplacian(d), 2, d);
    EXPECT_NEAR(m.values(0), pi * pi / 4, 1e-3);
    EXPECT_NEAR(m.values(1), pi * pi, 4e-3);
    EXPECT_NEAR(d.norm(m.vectors.col(0)), 1.0, 1e-12);
    EXPECT_GT(m.vectors.col(0).minCoeff(), -1e-12);
}

TEST(XSection, SquareDegeneratePair) {
    const GridDomain d = make_rectangle(-1, 1, -1, 1, 1.0 / 16);
    const ModeSet m = lowest_modes(assemble_dirichlet_laplacian(d), 3, d);
    EXPECT_NEAR(m.values(1), m.values(2), 1e-6 * m.values(1));
}

TEST(XSection, DiskGroundStateIsRadial) {
    const GridDomain d = make_disk(1.0, 1.0 / 30);
    const ModeSet m = lowest_modes(assemble_dirichlet_laplacian(d), 1, d);
    // Nodes related by a symmetry of the square lattice carry equal values.
    std::map<std::pair<long, long>, std::pair<double, double>> range;
    for (int k = 0; k < d.size(); ++k) {
        const long i = std::labs(std::lround(d.x(k) / d.h)), j = std::labs(std::lround(d.y(k) / d.h));
        const std::pair<long, long> key{std::min(i, j), std::max(i, j)};
        auto [it, fresh] = range.try_emplace(key, m.vectors(k, 0), m.vectors(k, 0));
        it->second.first = std::min(it->second.first, m.vectors(k, 0));
        it->second.second = std::max(it->second.second, m.vectors(k, 0));
    }
    double worst = 0.0;
    for (const auto& [key, r] : range) worst = std::max(worst, r.second - r.first);
    EXPECT_LT(worst, 1e-6);
}

TEST(XSection, SecondMomentAgainstQuadrature) {
    const auto c = compute_constants(make_interval(-1, 1, 1.0 / 160));
    EXPECT_NEAR(c.second_moment, oracle::interval_second_moment(), 1e-5);
    EXPECT_NEAR(c.second_moment, 1.0 / 3.0 - 2.0 / (pi * pi), 1e-5);
}

TEST(XSection, DiskAngularConstantsVanish) {
    const auto c = compute_constants(make_disk(1.0, 1.0 / 80));
    EXPECT_LE(c.p, 1e-6);
    EXPECT_LE(std::abs(c.kappa_mag), 1e-6);
    EXPECT_GE(c.kappa_mag, -1e-12);
}

TEST(XSection, SquareMagneticConstants) {
    const auto c = compute_constants(make_rectangle(-1, 1, -1, 1, 1.0 / 12));
    EXPECT_GT(c.p, 1e-2);
    EXPECT_GE(c.kappa_mag, 0.0);
    EXPECT_LT(std::abs(c.fredholm_defect), 1e-12);
    EXPECT_NEAR(c.M, c.second_moment / 4 - c.kappa_mag, 1e-14);
    EXPECT_NEAR(c.M_lattice, c.M, 5e-3);
}

TEST(XSection, AngularDerivativeAntisymmetricOnGridAlignedShapes) {
    const GridDomain d = make_rectangle(-1, 1, -1, 1, 1.0 / 8);
    const AssembledOperator D = angular_derivative(d);
    const SpMat S = D.re + SpMat(D.re.transpose());
    EXPECT_LT(S.coeffs().size() ? S.coeffs().cwiseAbs().maxCoeff() : 0.0, 1e-12);
}

TEST(XSection, MaskFileRoundTrip) {
    const GridDomain d = make_rectangle(-1, 1, -1, 1, 0.25);
    const std::string path = ::testing::TempDir() + "/mask.txt";
    write_mask_file(d, path);
    const GridDomain e = read_mask_file(path);
    EXPECT_EQ(e.size(), d.size());
    EXPECT_NEAR(compute_constants(e).lambda1, compute_constants(d).lambda1, 1e-10);
}

TEST(XSection, DescriptorErrors) {
    EXPECT_THROW(make_domain("hexagon", 0.1), ConfigError);
    EXPECT_THROW(make_domain("rectangle:1", 0.1), ConfigError);
}

TEST(XSection, DisconnectedMaskRejected) {
    const std::vector<char> rows = {1, 1, 0, 1, 1,
                                    1, 1, 0, 1, 1};
    EXPECT_THROW(check_domain(make_polygon_mask(5, 2, rows, 0.2)), DomainNotConnected);
}

TEST(ConstantsCache, SaveLoadRoundTrip) {
    auto& cache = ConstantsCache::global();
    const GridDomain d = make_rectangle(-1, 1, -1, 1, 0.25);
    const auto a = cache.get(d);
    const std::string path = ::testing::TempDir() + "/constants.cache";
    cache.save(path);
    cache.clear();
    EXPECT_FALSE(cache.contains(d.descriptor, d.h));
    cache.load(path);
    EXPECT_TRUE(cache.contains(d.descriptor, d.h));
    const std::size_t hits = cache.hits();
    const auto b = cache.get(d);
    EXPECT_EQ(cache.hits(), hits + 1);
    EXPECT_DOUBLE_EQ(a->lambda1, b->lambda1);
    EXPECT_DOUBLE_EQ(a->kappa_mag, b->kappa_mag);
    EXPECT_DOUBLE_EQ(a->M_lattice, b->M_lattice);
    EXPECT_LT((a->J1 - b->J1).norm(), 1e-14);
}
