#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tubespec/errors.hpp"
#include "tubespec/runner.hpp"
#include "tubespec/xsection.hpp"

namespace {

enum Exit { kPass = 0, kComputation = 1, kConfig = 2, kCheck = 3 };

struct Globals {
    std::string config;
    std::string out;
    int threads = 1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool quiet = false;
};

int run_kind(const Globals& g, tubespec::ExperimentKind kind) {
    using namespace tubespec;
    if (g.config.empty()) {
        std::cerr << "error: --config is required\n";
        return kConfig;
    }
    ExperimentConfig cfg;
    try {
        cfg = load_config(g.config);
        if (cfg.kind != kind) {
            throw ConfigError("config kind '" + to_string(cfg.kind) + "' does not match subcommand '" +
                              to_string(kind) + "'");
        }
        if (!g.out.empty()) cfg.output_dir = g.out;
        if (g.seed_set) {
            cfg.seed = g.seed;
            cfg.source["seed"] = g.seed;
        }
        validate(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    }
    RunResult r;
    try {
        RunOptions opt;
        opt.threads = g.threads;
        opt.log = g.quiet ? nullptr : &std::cerr;
        r = run(cfg, opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "computation error: " << e.what() << "\n";
        return kComputation;
    }
    std::cout << std::setprecision(6);
    for (const auto& c : r.checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.value << " (threshold " << c.threshold
                  << ")\n";
    }
    std::cout << "wrote " << cfg.output_dir << " in " << r.seconds << " s (cache hits " << r.cache_hits
              << ", misses " << r.cache_misses << ")\n";
    return r.pass() ? kPass : kCheck;
}

int cache_inspect(const std::string& path) {
    using namespace tubespec;
    auto& cache = ConstantsCache::global();
    try {
        if (!std::filesystem::exists(path)) {
            std::cout << path << ": no cache file\n";
            return kPass;
        }
        cache.load(path);
    } catch (const std::exception& e) {
        std::cerr << "cache error: " << e.what() << "\n";
        return kComputation;
    }
    std::cout << path << ": " << cache.size() << " record(s)\n";
    std::ifstream is(path);
    std::string line;
    std::string descriptor, h, lambda1;
    auto flush = [&] {
        if (!descriptor.empty()) std::cout << "  " << descriptor << " h=" << h << " lambda1=" << lambda1 << "\n";
        descriptor.clear();
    };
    while (std::getline(is, line)) {
        if (line == "[record]") flush();
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
        if (key == "descriptor") descriptor = value;
        if (key == "h") h = value;
        if (key == "lambda1") lambda1 = value;
    }
    flush();
    return kPass;
}

}  // namespace

int main(int argc, char** argv) {
    using tubespec::ExperimentKind;
    CLI::App app{"tubespec: spectral experiments on thin magnetic waveguides"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "experiment config (JSON)");
    app.add_option("--out", g.out, "output directory (overrides the config)");
    app.add_option("--threads", g.threads, "worker threads for sweep points")->check(CLI::PositiveNumber);
    auto* seed = app.add_option("--seed", g.seed, "random seed (overrides the config)");
    app.add_flag("--quiet", g.quiet, "no progress log");

    const std::pair<const char*, ExperimentKind> kinds[] = {
        {"xsection", ExperimentKind::XSection},   {"full2d", ExperimentKind::Full2D},
        {"full3d", ExperimentKind::Full3D},       {"effective", ExperimentKind::Effective},
        {"nrc-sweep", ExperimentKind::NrcSweep},  {"asymptotics", ExperimentKind::Asymptotics},
        {"hardy", ExperimentKind::Hardy},         {"stability", ExperimentKind::Stability},
    };
    int code = kPass;
    for (const auto& [name, kind] : kinds) {
        auto* sub = app.add_subcommand(name, std::string("run a ") + name + " experiment");
        sub->callback([&, kind = kind] {
            g.seed_set = seed->count() > 0;
            code = run_kind(g, kind);
        });
    }
    auto* cache = app.add_subcommand("cache", "inspect or clear the cross-section constants cache");
    cache->require_subcommand(1);
    std::string cache_path = "tubespec_constants.cache";
    cache->add_option("--file", cache_path, "cache file");
    cache->add_subcommand("inspect", "list cached records")->callback([&] { code = cache_inspect(cache_path); });
    cache->add_subcommand("clear", "delete the cache file")->callback([&] {
        std::error_code ec;
        const bool removed = std::filesystem::remove(cache_path, ec);
        if (ec) {
            std::cerr << "cache error: " << ec.message() << "\n";
            code = kComputation;
            return;
        }
        std::cout << cache_path << (removed ? ": removed\n" : ": no cache file\n");
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kPass : kConfig;
    }
    return code;
}
