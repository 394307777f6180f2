#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tubespec/asymptotics.hpp"
#include "tubespec/hardy.hpp"
#include "tubespec/operators.hpp"

namespace tubespec {

inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind { XSection, Full2D, Full3D, Effective, NrcSweep, Asymptotics, Hardy, Stability };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct SolverSettings {
    std::vector<double> h{0.05};  // cross-section spacings; several enable Richardson / resolution checks
    double ds = 0.0;              // 0: curve.ds
    double L = 0.0;               // Hardy pencil half length, 0: 5 R
    std::vector<double> R{2.0};   // Hardy segment half lengths
    int k = 1;                    // eigenpairs per point
    double tol = 1e-10;
    int dense_threshold = 400;
    bool dense_check = false;
    double min_overlap = 0.5;
};

struct AsymptoticsSettings {
    int n = 1;
    int J = 3;
    std::vector<int> residual_orders{2, 3};
    int lemma_pairs = 0;  // 0: no lemma suite
    int lemma_max_size = 200;
    int lemma_trials = 1000;
};

struct StabilitySettings {
    bool bent_free = true;  // lowest eigenvalue of the eps = 1 tube at b = 0
    std::optional<DeformationSpec> deformation;
    std::vector<double> amplitudes;
    double deformation_b = 1.0;
    std::vector<double> large_b;  // b schedule for the large-b experiment
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    ExperimentKind kind = ExperimentKind::XSection;
    std::string name;
    CurveProfile curve;
    AmbientField field;
    std::vector<std::string> sections{"interval"};
    std::vector<double> eps;
    std::vector<double> delta{1.0};
    std::vector<double> b;
    std::optional<double> K;
    EffectiveCoefficient coefficient = EffectiveCoefficient::Measured;
    EffectivePath path = EffectivePath::Galerkin;
    SolverSettings solver;
    AsymptoticsSettings asymptotics;
    StabilitySettings stability;
    std::uint64_t seed = 0x5eed5eedULL;
    std::string output_dir = "out";
    std::string cache_file;  // empty: no persistent constants cache
    bool export_operators = false;
    std::map<std::string, double> expect;  // acceptance thresholds, checked after the run
    nlohmann::json source;                 // config as read, echoed in the manifest

    double K_value() const;
};

// Throws ConfigError on schema violations, unknown keys or inconsistent values.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& c);

using Cell = std::variant<double, std::int64_t, std::string>;

struct ResultTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::pair<std::string, std::string>> footer;

    void add_row(std::vector<Cell> row);
    void add_footer(const std::string& key, const std::string& value);
    void add_footer(const std::string& key, double value);
    double number(std::size_t row, const std::string& column) const;
    void write_csv(std::ostream& os) const;
};

// Round-trip decimal form used for every number written by the runner.
std::string format_number(double v);

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct Plot {
    std::string title;
    std::string xlabel, ylabel;
    bool logx = false, logy = false;
    std::vector<PlotSeries> series;
};

// Minimal SVG: frame, ticks at decades (log) or 5 even steps (linear), one
// polyline with markers per series and a legend.
void write_svg(const Plot& plot, std::ostream& os);

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct RunResult {
    std::vector<ResultTable> tables;
    std::vector<Plot> plots;
    std::vector<Check> checks;
    std::size_t cache_hits = 0, cache_misses = 0;
    double seconds = 0.0;
    bool pass() const;
};

struct RunOptions {
    int threads = 1;
    bool write_artifacts = true;
    std::ostream* log = nullptr;
};

// Runs the experiment and, unless disabled, writes <out>/<name>_<table>.csv,
// one SVG per plot and <out>/<name>_manifest.json. A failing sweep point raises the
// module error prefixed with the point; tables finished before are flushed.
RunResult run(const ExperimentConfig& config, const RunOptions& opt = {});

// Dynamic-scheduling pool: workers take point indices from a shared counter.
// The first exception (lowest index) is rethrown after all workers stop.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

}  // namespace tubespec
