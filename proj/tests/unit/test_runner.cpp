#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "tubespec/errors.hpp"
#include "tubespec/runner.hpp"

using namespace tubespec;
using nlohmann::json;

namespace {

json xsection_config(const std::string& out) {
    return {{"schema_version", 1},
            {"kind", "xsection"},
            {"name", "xs"},
            {"sections", {"interval", "square"}},
            {"solver", {{"h", {0.25, 0.125}}}},
            {"output", out}};
}

json nrc_config() {
    return {{"schema_version", 1},
            {"kind", "nrc-sweep"},
            {"curve", {{"dim", 2}, {"S", 6}, {"ds", 0.1}, {"kappa", {{{"center", 0}, {"width", 1.5}, {"amplitude", 1.6}}}}}},
            {"section", "interval"},
            {"regime", {{"eps", {0.2, 0.1, 0.05}}, {"delta", {0, 1}}}},
            {"solver", {{"h", 0.1}}}};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Config, EmptyEpsListRejected) {
    json j = nrc_config();
    j["regime"]["eps"] = json::array();
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, EpsMustDecrease) {
    json j = nrc_config();
    j["regime"]["eps"] = {0.1, 0.2, 0.05};
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, SchemaVersionRequired) {
    json j = nrc_config();
    j.erase("schema_version");
    EXPECT_THROW(parse_config(j), ConfigError);
    j["schema_version"] = 2;
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, UnknownKeysRejected) {
    json j = nrc_config();
    j["solver"]["hh"] = 0.1;
    EXPECT_THROW(parse_config(j), ConfigError);
    j = nrc_config();
    j["expect"] = {{"limit_tol", 0.1}};
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, SectionMustMatchDimension) {
    json j = nrc_config();
    j["section"] = "disk";
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, DeltaAboveOneRejected) {
    json j = nrc_config();
    j["regime"]["delta"] = {1.5};
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, ParsesFixtures) {
    const ExperimentConfig c = parse_config(nrc_config());
    EXPECT_EQ(c.kind, ExperimentKind::NrcSweep);
    ASSERT_EQ(c.curve.kappa.size(), 1u);
    EXPECT_DOUBLE_EQ(c.curve.kappa[0].amplitude, 1.6);
    EXPECT_DOUBLE_EQ(c.K_value(), default_K(c.curve));
    EXPECT_EQ(c.coefficient, EffectiveCoefficient::Measured);
}

TEST(Table, CsvWithFooter) {
    ResultTable t;
    t.name = "t";
    t.columns = {"a", "b", "c"};
    t.add_row({0.1, std::int64_t(3), std::string("x")});
    t.add_footer("slope", 2.0);
    std::ostringstream os;
    t.write_csv(os);
    EXPECT_EQ(os.str(), "a,b,c\n0.1,3,x\n# slope: 2\n");
    EXPECT_THROW(t.add_row({1.0}), Error);
    EXPECT_DOUBLE_EQ(t.number(0, "b"), 3.0);
}

TEST(Table, NumbersRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 2.4674011002723395, 1e-300}) {
        EXPECT_EQ(std::stod(format_number(v)), v);
    }
}

TEST(Plot, SvgIsWellFormed) {
    Plot p{"t", "x", "y", true, true, {{"a", {{0.1, 1e-3}, {0.05, 2.5e-4}}}, {"b", {{0.1, -1.0}}}}};
    std::ostringstream os;
    write_svg(p, os);
    const std::string s = os.str();
    EXPECT_EQ(s.rfind("<svg", 0), 0u);
    EXPECT_NE(s.find("</svg>"), std::string::npos);
    EXPECT_NE(s.find("<polyline"), std::string::npos);
}

TEST(Pool, RunsEveryIndexAndPropagatesErrors) {
    std::vector<int> hit(50, 0);
    parallel_for(50, 4, [&](int i) { hit[static_cast<std::size_t>(i)] += 1; });
    for (int h : hit) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, 3, [](int i) {
                     if (i == 4) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}

TEST(Run, XSectionIsReproducibleAcrossThreadCounts) {
    const auto dir = std::filesystem::path(::testing::TempDir()) / "runner_xs";
    std::filesystem::remove_all(dir);
    RunOptions one, four;
    four.threads = 4;
    run(parse_config(xsection_config((dir / "a").string())), one);
    run(parse_config(xsection_config((dir / "b").string())), four);
    const std::string a = slurp(dir / "a" / "xs_xsection.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir / "b" / "xs_xsection.csv"));
    const json m = json::parse(slurp(dir / "a" / "xs_manifest.json"));
    EXPECT_EQ(m["config"]["kind"], "xsection");
    EXPECT_TRUE(m.contains("versions"));
    EXPECT_TRUE(m["cache"].contains("hits"));
    EXPECT_TRUE(std::filesystem::exists(dir / "a" / "xs_plot0.svg"));
}

TEST(Run, NrcSweepReportsOrders) {
    json j = nrc_config();
    j["expect"] = {{"order_factor", 0.8}};
    RunOptions o;
    o.write_artifacts = false;
    o.threads = 2;
    const RunResult r = run(parse_config(j), o);
    ASSERT_EQ(r.tables.size(), 1u);
    EXPECT_EQ(r.tables[0].rows.size(), 6u);
    EXPECT_EQ(r.checks.size(), 2u);
    EXPECT_TRUE(r.pass());
}

TEST(Run, FailingPointIsIdentified) {
    json j = nrc_config();
    j["regime"]["eps"] = {0.9, 0.5, 0.2};  // eps sup|kappa| >= 1 at the first point
    RunOptions o;
    o.write_artifacts = false;
    try {
        run(parse_config(j), o);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("eps=0.9"), std::string::npos) << e.what();
    }
}
