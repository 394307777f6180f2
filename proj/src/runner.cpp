#include "tubespec/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "tubespec/errors.hpp"
#include "tubespec/fit.hpp"
#include "tubespec/xsection.hpp"

namespace tubespec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<ExperimentKind, std::string>> kKindNames = {
    {ExperimentKind::XSection, "xsection"},       {ExperimentKind::Full2D, "full2d"},
    {ExperimentKind::Full3D, "full3d"},           {ExperimentKind::Effective, "effective"},
    {ExperimentKind::NrcSweep, "nrc-sweep"},      {ExperimentKind::Asymptotics, "asymptotics"},
    {ExperimentKind::Hardy, "hardy"},             {ExperimentKind::Stability, "stability"},
};

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

std::vector<Bump> parse_bumps(const json& j, const std::string& where) {
    std::vector<Bump> out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw ConfigError(where + " must be a list of bumps");
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        check_keys(j[i], w, {"center", "width", "amplitude"});
        Bump b;
        b.center = get(j[i], "center", w, 0.0);
        b.width = get(j[i], "width", w, 1.0);
        b.amplitude = get(j[i], "amplitude", w, 0.0);
        if (!(b.width > 0.0)) throw ConfigError(w + ".width must be positive");
        out.push_back(b);
    }
    return out;
}

json bumps_json(const std::vector<Bump>& v) {
    json a = json::array();
    for (const auto& b : v) a.push_back({{"center", b.center}, {"width", b.width}, {"amplitude", b.amplitude}});
    return a;
}

Vec3 parse_vec3(const json& j, const std::string& where, Vec3 fallback) {
    if (j.is_null()) return fallback;
    if (!j.is_array() || j.size() < 2 || j.size() > 3) throw ConfigError(where + " must have 2 or 3 entries");
    Vec3 v = Vec3::Zero();
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
    return v;
}

FieldFamily family_from_string(const std::string& s) {
    if (s == "zero") return FieldFamily::Zero;
    if (s == "bump") return FieldFamily::Bump;
    if (s == "plateau") return FieldFamily::Plateau;
    if (s == "frame-aligned") return FieldFamily::FrameAligned;
    throw ConfigError("unknown field family '" + s + "'");
}

std::string family_name(FieldFamily f) {
    switch (f) {
        case FieldFamily::Zero: return "zero";
        case FieldFamily::Bump: return "bump";
        case FieldFamily::Plateau: return "plateau";
        case FieldFamily::FrameAligned: return "frame-aligned";
    }
    return "zero";
}

EffectivePath path_from_string(const std::string& s) {
    if (s == "galerkin") return EffectivePath::Galerkin;
    if (s == "coefficients") return EffectivePath::Coefficients;
    throw ConfigError("unknown effective path '" + s + "'");
}

std::vector<double> doubles(const json& j, const std::string& key, const std::string& where,
                            std::vector<double> fallback) {
    return get(j, key, where, fallback);
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

void need_expect(const ExperimentConfig& c, const std::set<std::string>& allowed) {
    for (const auto& [k, v] : c.expect)
        if (!allowed.count(k)) throw ConfigError("expect key '" + k + "' does not apply to " + to_string(c.kind));
}

}  // namespace

std::string to_string(ExperimentKind k) {
    for (const auto& [kind, name] : kKindNames)
        if (kind == k) return name;
    return "xsection";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    for (const auto& [kind, name] : kKindNames)
        if (name == s) return kind;
    throw ConfigError("unknown experiment kind '" + s + "'");
}

double ExperimentConfig::K_value() const { return K ? *K : default_K(curve); }

ExperimentConfig parse_config(const json& j) {
    check_keys(j, "config",
               {"schema_version", "kind", "name", "curve", "field", "section", "sections", "regime", "effective",
                "solver", "asymptotics", "stability", "seed", "output", "cache", "export_operators", "expect"});
    ExperimentConfig c;
    c.source = j;
    if (!j.contains("schema_version")) throw ConfigError("missing schema_version");
    c.schema_version = get(j, "schema_version", "config", 0);
    if (c.schema_version != kSchemaVersion) {
        throw ConfigError("schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                          std::to_string(kSchemaVersion) + ")");
    }
    if (!j.contains("kind")) throw ConfigError("missing kind");
    c.kind = experiment_kind_from_string(get<std::string>(j, "kind", "config", ""));
    c.name = get<std::string>(j, "name", "config", to_string(c.kind));

    if (j.contains("curve")) {
        const json& cj = j["curve"];
        check_keys(cj, "curve", {"dim", "S", "ds", "kappa", "kappa2", "kappa3", "theta_prime"});
        c.curve.dim = get(cj, "dim", "curve", 2);
        c.curve.S = get(cj, "S", "curve", c.curve.S);
        c.curve.ds = get(cj, "ds", "curve", c.curve.ds);
        c.curve.kappa = parse_bumps(cj.value("kappa", json()), "curve.kappa");
        c.curve.kappa2 = parse_bumps(cj.value("kappa2", json()), "curve.kappa2");
        c.curve.kappa3 = parse_bumps(cj.value("kappa3", json()), "curve.kappa3");
        c.curve.theta_prime = parse_bumps(cj.value("theta_prime", json()), "curve.theta_prime");
    }
    c.field.dim = c.curve.dim;
    if (j.contains("field")) {
        const json& fj = j["field"];
        check_keys(fj, "field", {"family", "center", "u", "amplitude", "radius", "inner", "along23", "along13",
                                 "along12"});
        c.field.family = family_from_string(get<std::string>(fj, "family", "field", "zero"));
        c.field.center = parse_vec3(fj.value("center", json()), "field.center", Vec3::Zero());
        c.field.u = parse_vec3(fj.value("u", json()), "field.u", Vec3(0.0, 0.0, 1.0));
        if (c.field.u.norm() == 0.0) throw ConfigError("field.u must be nonzero");
        c.field.u.normalize();
        c.field.amplitude = get(fj, "amplitude", "field", 1.0);
        c.field.radius = get(fj, "radius", "field", 1.0);
        c.field.inner = get(fj, "inner", "field", 0.5);
        c.field.along23 = parse_bumps(fj.value("along23", json()), "field.along23");
        c.field.along13 = parse_bumps(fj.value("along13", json()), "field.along13");
        c.field.along12 = parse_bumps(fj.value("along12", json()), "field.along12");
    }
    if (j.contains("section") && j.contains("sections")) throw ConfigError("give either section or sections");
    if (j.contains("section")) c.sections = {get<std::string>(j, "section", "config", "")};
    if (j.contains("sections")) c.sections = get<std::vector<std::string>>(j, "sections", "config", {});

    if (j.contains("regime")) {
        const json& rj = j["regime"];
        check_keys(rj, "regime", {"eps", "delta", "b", "K"});
        c.eps = doubles(rj, "eps", "regime", {});
        c.delta = doubles(rj, "delta", "regime", c.delta);
        c.b = doubles(rj, "b", "regime", {});
        if (rj.contains("K") && !rj["K"].is_null()) c.K = rj["K"].get<double>();
    }
    if (j.contains("effective")) {
        const json& ej = j["effective"];
        check_keys(ej, "effective", {"coefficient", "path"});
        c.coefficient = effective_coefficient_from_string(get<std::string>(ej, "coefficient", "effective", "measured"));
        c.path = path_from_string(get<std::string>(ej, "path", "effective", "galerkin"));
    }
    if (j.contains("solver")) {
        const json& sj = j["solver"];
        check_keys(sj, "solver", {"h", "ds", "L", "R", "k", "tol", "dense_threshold", "dense_check", "min_overlap"});
        SolverSettings& s = c.solver;
        if (sj.contains("h")) s.h = sj["h"].is_array() ? sj["h"].get<std::vector<double>>()
                                                       : std::vector<double>{sj["h"].get<double>()};
        s.ds = get(sj, "ds", "solver", s.ds);
        s.L = get(sj, "L", "solver", s.L);
        if (sj.contains("R")) s.R = sj["R"].is_array() ? sj["R"].get<std::vector<double>>()
                                                       : std::vector<double>{sj["R"].get<double>()};
        s.k = get(sj, "k", "solver", s.k);
        s.tol = get(sj, "tol", "solver", s.tol);
        s.dense_threshold = get(sj, "dense_threshold", "solver", s.dense_threshold);
        s.dense_check = get(sj, "dense_check", "solver", s.dense_check);
        s.min_overlap = get(sj, "min_overlap", "solver", s.min_overlap);
    }
    if (j.contains("asymptotics")) {
        const json& aj = j["asymptotics"];
        check_keys(aj, "asymptotics", {"n", "J", "residual_orders", "lemma"});
        AsymptoticsSettings& a = c.asymptotics;
        a.n = get(aj, "n", "asymptotics", a.n);
        a.J = get(aj, "J", "asymptotics", a.J);
        a.residual_orders = get(aj, "residual_orders", "asymptotics", a.residual_orders);
        if (aj.contains("lemma")) {
            const json& lj = aj["lemma"];
            check_keys(lj, "asymptotics.lemma", {"pairs", "max_size", "trials"});
            a.lemma_pairs = get(lj, "pairs", "asymptotics.lemma", 100);
            a.lemma_max_size = get(lj, "max_size", "asymptotics.lemma", a.lemma_max_size);
            a.lemma_trials = get(lj, "trials", "asymptotics.lemma", a.lemma_trials);
        }
    }
    if (j.contains("stability")) {
        const json& tj = j["stability"];
        check_keys(tj, "stability", {"bent_free", "deformation", "large_b"});
        StabilitySettings& st = c.stability;
        st.bent_free = get(tj, "bent_free", "stability", st.bent_free);
        if (tj.contains("deformation")) {
            const json& dj = tj["deformation"];
            check_keys(dj, "stability.deformation", {"E1", "eps2", "amplitudes", "b"});
            DeformationSpec d;
            d.E1 = parse_bumps(dj.value("E1", json()), "stability.deformation.E1");
            d.eps2 = parse_bumps(dj.value("eps2", json()), "stability.deformation.eps2");
            st.deformation = d;
            st.amplitudes = doubles(dj, "amplitudes", "stability.deformation", {});
            st.deformation_b = get(dj, "b", "stability.deformation", st.deformation_b);
        }
        st.large_b = doubles(tj, "large_b", "stability", {});
    }
    c.seed = get<std::uint64_t>(j, "seed", "config", c.seed);
    c.output_dir = get<std::string>(j, "output", "config", c.output_dir);
    c.cache_file = get<std::string>(j, "cache", "config", "");
    c.export_operators = get(j, "export_operators", "config", false);
    if (j.contains("expect")) {
        check_keys(j["expect"], "expect",
                   {"reference", "rel_tol", "max_p", "max_kappa_mag", "second_moment_ref", "second_moment_tol",
                    "max_residual", "order_factor", "min_order", "min_order_leading", "min_order_expansion",
                    "residual_margin", "min_margin", "small_b_variation", "limit_tol", "max_seconds"});
        for (const auto& [k, v] : j["expect"].items()) c.expect[k] = v.get<double>();
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

void validate(const ExperimentConfig& c) {
    if (c.curve.dim != 2 && c.curve.dim != 3) throw ConfigError("curve.dim must be 2 or 3");
    if (!(c.curve.S > 0.0) || !(c.curve.ds > 0.0)) throw ConfigError("curve.S and curve.ds must be positive");
    if (c.curve.dim == 2 && (!c.curve.kappa2.empty() || !c.curve.kappa3.empty() || !c.curve.theta_prime.empty()))
        throw ConfigError("kappa2, kappa3 and theta_prime are 3D data");
    if (c.curve.dim == 3 && !c.curve.kappa.empty()) throw ConfigError("kappa is 2D data; use kappa2/kappa3");
    if (c.sections.empty()) throw ConfigError("no cross section given");
    if (c.solver.h.empty()) throw ConfigError("solver.h is empty");
    for (double h : c.solver.h)
        if (!(h > 0.0 && h < 1.0)) throw ConfigError("solver.h entries must lie in (0, 1)");
    for (const auto& s : c.sections) {
        if (s.rfind("mask:", 0) == 0) {
            if (!fs::exists(s.substr(5))) throw ConfigError("mask file '" + s.substr(5) + "' not found");
            continue;
        }
        const bool one_d = s == "interval";
        const bool known = one_d || s == "square" || s == "disk" || s.rfind("rectangle:", 0) == 0 ||
                           s.rfind("disk:", 0) == 0;
        if (!known) throw ConfigError("unknown cross-section descriptor '" + s + "'");
        if (c.kind != ExperimentKind::XSection && one_d != (c.curve.dim == 2))
            throw ConfigError("cross section '" + s + "' does not match curve.dim");
    }
    if (c.solver.k < 1) throw ConfigError("solver.k must be at least 1");
    if (c.K && *c.K < 2.0 * 0.25 * c.curve.sup_kappa() * c.curve.sup_kappa())
        throw ConfigError("K must be at least 2 sup(kappa^2 / 4)");
    for (double d : c.delta)
        if (d > 1.0 + 1e-12) throw ConfigError("delta > 1 is outside scope");

    const bool sweep = c.kind == ExperimentKind::NrcSweep || c.kind == ExperimentKind::Asymptotics ||
                       c.kind == ExperimentKind::Full2D || c.kind == ExperimentKind::Full3D ||
                       c.kind == ExperimentKind::Effective;
    if (sweep) {
        if (c.eps.empty()) throw ConfigError("regime.eps is empty");
        for (double e : c.eps)
            if (!(e > 0.0)) throw ConfigError("regime.eps entries must be positive");
        if (!strictly_decreasing(c.eps)) throw ConfigError("regime.eps must be strictly decreasing");
        if (c.delta.empty()) throw ConfigError("regime.delta is empty");
    }
    if ((c.kind == ExperimentKind::NrcSweep || c.kind == ExperimentKind::Asymptotics) && c.eps.size() < 3)
        throw ConfigError("slope fits need at least 3 eps values");
    if (c.kind == ExperimentKind::Full2D && c.curve.dim != 2) throw ConfigError("full2d needs curve.dim = 2");
    if (c.kind == ExperimentKind::Full3D && c.curve.dim != 3) throw ConfigError("full3d needs curve.dim = 3");
    if (c.kind == ExperimentKind::Asymptotics) {
        const auto& a = c.asymptotics;
        if (a.n < 1) throw ConfigError("asymptotics.n must be at least 1");
        if (c.curve.dim == 2 && (a.J < 2 || a.J > 4)) throw ConfigError("asymptotics.J must lie in 2..4");
        for (int J : a.residual_orders)
            if (J < 2 || J > 4) throw ConfigError("residual orders must lie in 2..4");
        if (c.curve.dim == 3 && !a.residual_orders.empty()) throw ConfigError("quasimodes are 2D only");
    }
    if (c.kind == ExperimentKind::Hardy) {
        if (c.b.empty()) throw ConfigError("regime.b is empty");
        if (c.curve.sup_kappa() > 0.0 || c.curve.sup_thetap() > 0.0)
            throw ConfigError("hardy needs a straight untwisted curve");
        for (double R : c.solver.R) {
            const double L = c.solver.L > 0.0 ? c.solver.L : 5.0 * R;
            if (L < 4.0 * R) throw ConfigError("solver.L must be at least 4 R");
            if (L > c.curve.S + 1e-12) throw ConfigError("solver.L exceeds curve.S");
        }
    }
    if (c.kind == ExperimentKind::Stability) {
        const auto& st = c.stability;
        if (st.deformation && st.amplitudes.empty()) throw ConfigError("stability.deformation.amplitudes is empty");
        if (st.deformation && c.curve.dim != 2) throw ConfigError("deformations are planar");
        for (std::size_t i = 1; i < st.large_b.size(); ++i)
            if (!(st.large_b[i] > st.large_b[i - 1])) throw ConfigError("stability.large_b must be increasing");
    }
    switch (c.kind) {
        case ExperimentKind::XSection:
            need_expect(c, {"reference", "rel_tol", "max_p", "max_kappa_mag", "second_moment_ref",
                            "second_moment_tol", "max_seconds"});
            break;
        case ExperimentKind::Full2D:
        case ExperimentKind::Full3D:
        case ExperimentKind::Effective: need_expect(c, {"max_residual", "max_seconds"}); break;
        case ExperimentKind::NrcSweep: need_expect(c, {"order_factor", "min_order", "max_seconds"}); break;
        case ExperimentKind::Asymptotics:
            need_expect(c, {"min_order_leading", "min_order_expansion", "residual_margin", "max_seconds"});
            break;
        case ExperimentKind::Hardy:
            need_expect(c, {"min_margin", "small_b_variation", "limit_tol", "max_seconds"});
            break;
        case ExperimentKind::Stability: need_expect(c, {"max_seconds"}); break;
    }
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void ResultTable::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
        throw Error("table " + name + ": row has " + std::to_string(row.size()) + " cells for " +
                    std::to_string(columns.size()) + " columns");
    }
    rows.push_back(std::move(row));
}

void ResultTable::add_footer(const std::string& key, const std::string& value) { footer.emplace_back(key, value); }

void ResultTable::add_footer(const std::string& key, double value) { footer.emplace_back(key, format_number(value)); }

double ResultTable::number(std::size_t row, const std::string& column) const {
    const auto it = std::find(columns.begin(), columns.end(), column);
    if (it == columns.end()) throw Error("table " + name + " has no column " + column);
    const Cell& c = rows.at(row)[static_cast<std::size_t>(it - columns.begin())];
    if (const double* d = std::get_if<double>(&c)) return *d;
    if (const std::int64_t* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    throw Error("table " + name + ": column " + column + " is not numeric");
}

void ResultTable::write_csv(std::ostream& os) const {
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) os << ",";
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>) {
                        os << format_number(v);
                    } else {
                        os << v;
                    }
                },
                r[i]);
        }
        os << "\n";
    }
    for (const auto& [k, v] : footer) os << "# " << k << ": " << v << "\n";
}

void write_svg(const Plot& plot, std::ostream& os) {
    const double W = 640, H = 420, ml = 70, mr = 170, mt = 40, mb = 55;
    const double pw = W - ml - mr, ph = H - mt - mb;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    auto tx = [&](double v) { return plot.logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return plot.logy ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!plot.logx || x > 0) && (!plot.logy || y > 0);
    };
    for (const auto& s : plot.series)
        for (const auto& [x, y] : s.points) {
            if (!usable(x, y)) continue;
            x0 = std::min(x0, tx(x));
            x1 = std::max(x1, tx(x));
            y0 = std::min(y0, ty(y));
            y1 = std::max(y1, ty(y));
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (plot.logx) x0 = std::floor(x0), x1 = std::ceil(x1);
    if (plot.logy) y0 = std::floor(y0), y1 = std::ceil(y1);
    if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-300) y0 -= 0.5, y1 += 0.5;
    auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return mt + ph - (ty(v) - y0) / (y1 - y0) * ph; };
    auto f = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.2f", v);
        return std::string(b);
    };
    auto label = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.3g", v);
        return std::string(b);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << f(ml + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"13\">" << plot.title
       << "</text>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    auto ticks = [](double a, double b, bool log) {
        std::vector<double> t;
        if (log) {
            for (double e = a; e <= b + 1e-9; e += 1.0) t.push_back(e);
        } else {
            for (int i = 0; i <= 5; ++i) t.push_back(a + (b - a) * i / 5.0);
        }
        return t;
    };
    for (double t : ticks(x0, x1, plot.logx)) {
        const double X = ml + (t - x0) / (x1 - x0) * pw;
        os << "<line x1=\"" << f(X) << "\" y1=\"" << f(mt + ph) << "\" x2=\"" << f(X) << "\" y2=\"" << f(mt + ph + 5)
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << f(X) << "\" y=\"" << f(mt + ph + 18) << "\" text-anchor=\"middle\">"
           << label(plot.logx ? std::pow(10.0, t) : t) << "</text>\n";
    }
    for (double t : ticks(y0, y1, plot.logy)) {
        const double Y = mt + ph - (t - y0) / (y1 - y0) * ph;
        os << "<line x1=\"" << f(ml - 5) << "\" y1=\"" << f(Y) << "\" x2=\"" << f(ml) << "\" y2=\"" << f(Y)
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << f(ml - 8) << "\" y=\"" << f(Y + 4) << "\" text-anchor=\"end\">"
           << label(plot.logy ? std::pow(10.0, t) : t) << "</text>\n";
    }
    os << "<text x=\"" << f(ml + pw / 2) << "\" y=\"" << f(H - 12) << "\" text-anchor=\"middle\">" << plot.xlabel
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << f(mt + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << f(mt + ph / 2) << ")\">" << plot.ylabel << "</text>\n";
    for (std::size_t i = 0; i < plot.series.size(); ++i) {
        const auto& s = plot.series[i];
        const char* col = colors[i % 7];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (const auto& [x, y] : s.points) {
            if (!usable(x, y)) continue;
            os << (first ? "" : " ") << f(px(x)) << "," << f(py(y));
            first = false;
        }
        os << "\"/>\n";
        for (const auto& [x, y] : s.points) {
            if (!usable(x, y)) continue;
            os << "<circle cx=\"" << f(px(x)) << "\" cy=\"" << f(py(y)) << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
        }
        const double ly = mt + 14 + 16 * static_cast<double>(i);
        os << "<line x1=\"" << f(ml + pw + 12) << "\" y1=\"" << f(ly - 4) << "\" x2=\"" << f(ml + pw + 32)
           << "\" y2=\"" << f(ly - 4) << "\" stroke=\"" << col << "\" stroke-width=\"1.5\"/>\n";
        os << "<text x=\"" << f(ml + pw + 36) << "\" y=\"" << f(ly) << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
}

bool RunResult::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    if (n <= 0) return;
    const int nt = std::max(1, std::min(threads, n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
                failed = true;
            }
        }
    };
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace {

struct Context {
    const ExperimentConfig& cfg;
    const RunOptions& opt;
    RunResult& result;
    std::mutex io;

    void log(const std::string& msg) {
        if (!opt.log) return;
        std::lock_guard<std::mutex> lock(io);
        *opt.log << msg << std::endl;
    }
    void check(const std::string& name, double value, double threshold, bool pass) {
        result.checks.push_back({name, value, threshold, pass});
    }
    double ds() const { return cfg.solver.ds; }
    AssemblyOptions assembly() const {
        AssemblyOptions a;
        a.ds = cfg.solver.ds;
        return a;
    }
    EigenOptions eigen() const {
        EigenOptions e;
        e.tol = cfg.solver.tol;
        e.dense_threshold = cfg.solver.dense_threshold;
        e.seed = cfg.seed;
        return e;
    }
};

std::string point_label(double eps, double delta) {
    return "eps=" + format_number(eps) + " delta=" + format_number(delta);
}

template <class F>
auto at_point(const std::string& label, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(std::string("[") + label + "] " + e.what());
    }
}

void add_common_footer(ResultTable& t, const ExperimentConfig& c) {
    t.add_footer("kind", to_string(c.kind));
    t.add_footer("schema_version", std::to_string(c.schema_version));
    t.add_footer("seed", std::to_string(c.seed));
}

GridDomain section_at(const std::string& descriptor, double h) {
    GridDomain d = make_domain(descriptor, h);
    check_domain(d);
    return d;
}

double relative_spread(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return (*hi - *lo) / std::max(std::abs(*hi), 1e-300);
}

void run_xsection(Context& ctx) {
    const auto& c = ctx.cfg;
    ResultTable t;
    t.name = "xsection";
    t.columns = {"section", "h", "unknowns", "lambda1", "lambda2", "second_moment", "p", "kappa_mag", "M",
                 "M_lattice", "fredholm_defect"};
    struct Row {
        std::string section;
        double h = 0.0;
        int unknowns = 0;
        XSectionConstants k;
    };
    std::vector<std::pair<std::string, double>> pts;
    for (const auto& s : c.sections)
        for (double h : c.solver.h) pts.emplace_back(s, h);
    std::vector<Row> rows(pts.size());
    parallel_for(static_cast<int>(pts.size()), ctx.opt.threads, [&](int i) {
        const auto& [s, h] = pts[static_cast<std::size_t>(i)];
        at_point(s + " h=" + format_number(h), [&] {
            const GridDomain d = section_at(s, h);
            Row& r = rows[static_cast<std::size_t>(i)];
            r.section = s;
            r.h = h;
            r.unknowns = d.size();
            r.k = *section_constants(d);
            ctx.log("xsection " + s + " h=" + format_number(h) + " lambda1=" + format_number(r.k.lambda1));
        });
    });
    for (const auto& r : rows) {
        t.add_row({r.section, r.h, std::int64_t(r.unknowns), r.k.lambda1, r.k.lambda2, r.k.second_moment, r.k.p,
                   r.k.kappa_mag, r.k.M, r.k.M_lattice, r.k.fredholm_defect});
    }
    Plot plot{"lowest Dirichlet eigenvalue", "h", "lambda1", true, false, {}};
    for (const auto& s : c.sections) {
        std::vector<const Row*> sr;
        for (const auto& r : rows)
            if (r.section == s) sr.push_back(&r);
        std::sort(sr.begin(), sr.end(), [](const Row* a, const Row* b) { return a->h > b->h; });
        PlotSeries ps{s, {}};
        for (const Row* r : sr) ps.points.emplace_back(r->h, r->k.lambda1);
        plot.series.push_back(ps);
        double best = sr.back()->k.lambda1;
        if (sr.size() >= 2) {
            const Row& a = *sr[sr.size() - 2];
            const Row& b = *sr.back();
            const double q = (a.h / b.h) * (a.h / b.h);
            best = (q * b.k.lambda1 - a.k.lambda1) / (q - 1.0);
            t.add_footer(s + " richardson_lambda1", best);
        }
        if (s == "interval") {
            t.add_footer("interval printed_coefficient", 1.0 / 3.0 + 2.0 / (pi * pi));
            t.add_footer("interval measured_coefficient", sr.back()->k.second_moment);
            t.add_footer("interval coefficient_discrepancy", 1.0 / 3.0 + 2.0 / (pi * pi) - sr.back()->k.second_moment);
        }
        if (c.expect.count("reference") && c.sections.size() == 1) {
            const double ref = c.expect.at("reference");
            const double rel = std::abs(best - ref) / std::abs(ref);
            const double tol = c.expect.count("rel_tol") ? c.expect.at("rel_tol") : 1e-3;
            ctx.check(s + " lambda1 relative error", rel, tol, rel <= tol);
        }
        const Row& fine = *sr.back();
        if (c.expect.count("max_p"))
            ctx.check(s + " p", fine.k.p, c.expect.at("max_p"), fine.k.p <= c.expect.at("max_p"));
        if (c.expect.count("max_kappa_mag")) {
            const double v = fine.k.kappa_mag;
            ctx.check(s + " kappa_mag", v, c.expect.at("max_kappa_mag"),
                      std::abs(v) <= c.expect.at("max_kappa_mag") && v >= -1e-12);
        }
        if (c.expect.count("second_moment_ref")) {
            const double err = std::abs(fine.k.second_moment - c.expect.at("second_moment_ref"));
            const double tol = c.expect.count("second_moment_tol") ? c.expect.at("second_moment_tol") : 1e-5;
            ctx.check(s + " second moment", err, tol, err <= tol);
        }
    }
    add_common_footer(t, c);
    ctx.result.tables.push_back(std::move(t));
    ctx.result.plots.push_back(plot);
}

AssembledOperator assemble_kind(const ExperimentConfig& c, ExperimentKind kind, const TubeGeometry& geo,
                                const GridDomain& section, const RegimeParams& r, const AssemblyOptions& a) {
    if (kind == ExperimentKind::Full2D) return assemble_full_2d(geo, section, r, a);
    if (kind == ExperimentKind::Full3D) return assemble_full_3d(geo, section, r, a);
    const auto k = section_constants(section);
    return c.curve.dim == 2 ? assemble_effective_2d(geo, section, r, *k, c.coefficient, a)
                            : assemble_effective_3d(geo, section, r, *k, c.path, a);
}

void run_spectrum(Context& ctx) {
    const auto& c = ctx.cfg;
    const TubeGeometry geo(c.curve, c.field);
    const GridDomain section = section_at(c.sections.front(), c.solver.h.front());
    struct Point {
        double eps, delta;
    };
    std::vector<Point> pts;
    for (double d : c.delta)
        for (double e : c.eps) pts.push_back({e, d});
    std::vector<std::vector<SpectrumRow>> out(pts.size());
    std::vector<std::string> notes(pts.size());
    const double K = c.K_value();
    parallel_for(static_cast<int>(pts.size()), ctx.opt.threads, [&](int i) {
        const Point p = pts[static_cast<std::size_t>(i)];
        at_point(point_label(p.eps, p.delta), [&] {
            const RegimeParams r = RegimeParams::make(p.eps, p.delta, K);
            const AssembledOperator op = assemble_kind(c, c.kind, geo, section, r, ctx.assembly());
            EigenOptions eo = ctx.eigen();
            const Spectrum sp = smallest_eigenpairs(op, c.solver.k, eo);
            out[static_cast<std::size_t>(i)] = spectrum_rows(sp, r);
            notes[static_cast<std::size_t>(i)] = op.notes;
            if (c.export_operators) {
                std::lock_guard<std::mutex> lock(ctx.io);
                fs::create_directories(c.output_dir);
                std::ofstream os(fs::path(c.output_dir) /
                                 (c.name + "_operator_" + std::to_string(i) + ".txt"));
                write_triplets(op, os);
            }
            ctx.log(to_string(c.kind) + " " + point_label(p.eps, p.delta) + " lowest=" +
                    format_number(sp.values(0) - K));
        });
    });
    ResultTable t;
    t.name = "spectrum";
    t.columns = {"eps", "delta", "b", "K", "n", "eigenvalue", "residual", "discrete"};
    Plot plot{"lowest eigenvalues (shift removed)", "eps", "eigenvalue - K", true, false, {}};
    double worst = 0.0;
    for (double d : c.delta) {
        PlotSeries ps{"delta=" + format_number(d), {}};
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (pts[i].delta != d) continue;
            for (const auto& r : out[i]) {
                t.add_row({r.eps, r.delta, r.b, r.K, std::int64_t(r.n), r.value, r.residual,
                           std::string(r.discrete ? "true" : "false")});
                worst = std::max(worst, r.residual);
                if (r.n == 1) ps.points.emplace_back(r.eps, r.value - r.K);
            }
        }
        plot.series.push_back(ps);
    }
    t.add_footer("section", c.sections.front());
    t.add_footer("h", c.solver.h.front());
    if (c.kind == ExperimentKind::Effective) {
        t.add_footer("effective_coefficient", to_string(c.coefficient));
        t.add_footer("effective_path", to_string(c.path));
    }
    if (!notes.empty()) t.add_footer("operator_notes", notes.back());
    t.add_footer("max_residual", worst);
    add_common_footer(t, c);
    if (c.expect.count("max_residual"))
        ctx.check("eigen residuals", worst, c.expect.at("max_residual"), worst <= c.expect.at("max_residual"));
    ctx.result.tables.push_back(std::move(t));
    ctx.result.plots.push_back(plot);
}

void run_nrc(Context& ctx) {
    const auto& c = ctx.cfg;
    const TubeGeometry geo(c.curve, c.field);
    const GridDomain section = section_at(c.sections.front(), c.solver.h.front());
    const auto k = section_constants(section);
    const Vec fiber = fiber_vector(*k, section);
    const double K = c.K_value();
    struct Point {
        double eps, delta;
        ResolventDistance d;
    };
    std::vector<Point> pts;
    for (double d : c.delta)
        for (double e : c.eps) pts.push_back({e, d, {}});
    parallel_for(static_cast<int>(pts.size()), ctx.opt.threads, [&](int i) {
        Point& p = pts[static_cast<std::size_t>(i)];
        at_point(point_label(p.eps, p.delta), [&] {
            const RegimeParams r = RegimeParams::make(p.eps, p.delta, K);
            const ExperimentKind full = c.curve.dim == 2 ? ExperimentKind::Full2D : ExperimentKind::Full3D;
            const AssembledOperator A = assemble_kind(c, full, geo, section, r, ctx.assembly());
            const AssembledOperator B = assemble_kind(c, ExperimentKind::Effective, geo, section, r, ctx.assembly());
            p.d = resolvent_distance(A, B, fiber, 1e-3, 300, c.seed);
            ctx.log("nrc " + point_label(p.eps, p.delta) + " distance=" + format_number(p.d.value));
        });
    });
    ResultTable t;
    t.name = "nrc";
    t.columns = {"eps", "delta", "b", "K", "distance", "error", "iterations"};
    Plot plot{"resolvent distance", "eps", "distance", true, true, {}};
    for (double d : c.delta) {
        std::vector<std::pair<double, double>> pairs;
        for (const auto& p : pts) {
            if (p.delta != d) continue;
            t.add_row({p.eps, p.delta, std::pow(p.eps, -p.delta), K, p.d.value, p.d.error,
                       std::int64_t(p.d.iterations)});
            pairs.emplace_back(p.eps, p.d.value);
        }
        plot.series.push_back({"delta=" + format_number(d), pairs});
        const OrderFit f = fit_order(pairs);
        const std::string key = "delta=" + format_number(d);
        t.add_footer(key + " slope", f.slope);
        t.add_footer(key + " slope_halfwidth95", f.halfwidth);
        double threshold = -INFINITY;
        if (c.expect.count("min_order")) threshold = c.expect.at("min_order");
        if (c.expect.count("order_factor")) threshold = c.expect.at("order_factor") * (d < 1.0 ? 1.0 - d : 1.0);
        if (std::isfinite(threshold)) ctx.check("nrc order " + key, f.slope, threshold, f.slope >= threshold);
    }
    t.add_footer("section", c.sections.front());
    t.add_footer("h", c.solver.h.front());
    t.add_footer("effective_coefficient", to_string(c.coefficient));
    t.add_footer("effective_path", to_string(c.path));
    t.add_footer("lambda1", k->lambda1);
    t.add_footer("second_moment", k->second_moment);
    t.add_footer("M_lattice", k->M_lattice);
    add_common_footer(t, c);
    ctx.result.tables.push_back(std::move(t));
    ctx.result.plots.push_back(plot);
}

void run_asymptotics(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto& a = c.asymptotics;
    const TubeGeometry geo(c.curve, c.field);
    const GridDomain section = section_at(c.sections.front(), c.solver.h.front());
    const AssemblyOptions ao = ctx.assembly();

    if (!c.eps.empty()) {
        const EigenvalueExpansion ex =
            at_point("expansion n=" + std::to_string(a.n), [&] {
                return c.curve.dim == 2
                           ? eigenvalue_expansion(geo, section, a.n, a.J, c.eps, ao, c.solver.min_overlap)
                           : eigenvalue_expansion_3d(geo, section, a.n, c.eps, ao, c.solver.min_overlap);
            });
        ResultTable coef;
        coef.name = "coefficients";
        coef.columns = {"n", "j", "gamma"};
        for (const auto& [j, g] : ex.coefficients) coef.add_row({std::int64_t(ex.n), std::int64_t(j), g});
        coef.add_footer("coefficient_source", ex.coefficient_source);
        coef.add_footer("continuum_gamma_-2", pi * pi / 4.0);
        coef.add_footer("section", c.sections.front());
        coef.add_footer("h", c.solver.h.front());
        add_common_footer(coef, c);
        ctx.result.tables.push_back(std::move(coef));

        ResultTable rows;
        rows.name = "expansion";
        rows.columns = {"eps", "n", "J", "lambda", "Gamma", "error", "scaled_leading_error", "overlap"};
        const double g0 = ex.coefficients.front().second;
        std::vector<std::pair<double, double>> lead, rest;
        for (const auto& r : ex.rows) {
            const double sl = std::abs(r.eps * r.eps * r.lambda - g0);
            rows.add_row({r.eps, std::int64_t(ex.n), std::int64_t(ex.J), r.lambda, r.Gamma, r.error, sl, r.overlap});
            lead.emplace_back(r.eps, sl);
            rest.emplace_back(r.eps, r.error);
        }
        const OrderFit fl = fit_order(lead);
        rows.add_footer("slope_error", ex.slope);
        rows.add_footer("slope_scaled_error", ex.scaled_slope);
        rows.add_footer("slope_leading", fl.slope);
        add_common_footer(rows, c);
        if (c.expect.count("min_order_leading")) {
            const double th = c.expect.at("min_order_leading");
            ctx.check("leading order eps^2 lambda", fl.slope, th, fl.slope >= th);
        }
        if (c.expect.count("min_order_expansion")) {
            const double th = c.expect.at("min_order_expansion");
            ctx.check("expansion remainder order", ex.slope, th, ex.slope >= th);
        }
        ctx.result.plots.push_back({"eigenvalue expansion error", "eps", "error", true, true,
                                    {{"eps^2 lambda - gamma_-2", lead}, {"lambda - Gamma_J", rest}}});
        ctx.result.tables.push_back(std::move(rows));
    }

    if (!a.residual_orders.empty()) {
        const int jmax = std::min(4, *std::max_element(a.residual_orders.begin(), a.residual_orders.end()) + 2);
        const SeriesOperator series = expand_operator_2d(geo, section, jmax, ao);
        ResultTable t;
        t.name = "residuals";
        t.columns = {"eps", "n", "J", "residual", "raw_residual"};
        Plot plot{"quasimode residual", "eps", "eps^2 residual", true, true, {}};
        for (int J : a.residual_orders) {
            const Quasimode q = at_point("quasimode J=" + std::to_string(J), [&] { return build_quasimode(series, a.n, J); });
            std::vector<double> res(c.eps.size());
            parallel_for(static_cast<int>(c.eps.size()), ctx.opt.threads, [&](int i) {
                const double e = c.eps[static_cast<std::size_t>(i)];
                res[static_cast<std::size_t>(i)] = at_point("quasimode J=" + std::to_string(J) + " eps=" + format_number(e),
                                                           [&] { return quasimode_residual(q, geo, section, e, ao); });
            });
            std::vector<std::pair<double, double>> pairs, raw;
            for (std::size_t i = 0; i < c.eps.size(); ++i) {
                const double e = c.eps[i];
                t.add_row({e, std::int64_t(a.n), std::int64_t(J), res[i], res[i] / (e * e)});
                pairs.emplace_back(e, res[i]);
                raw.emplace_back(e, res[i] / (e * e));
            }
            const OrderFit f = fit_order(pairs);
            const OrderFit fr = fit_order(raw);
            t.add_footer("J=" + std::to_string(J) + " slope", f.slope);
            t.add_footer("J=" + std::to_string(J) + " slope_halfwidth95", f.halfwidth);
            t.add_footer("J=" + std::to_string(J) + " raw_slope", fr.slope);
            t.add_footer("J=" + std::to_string(J) + " fredholm_defect", q.fredholm_defect);
            t.add_footer("J=" + std::to_string(J) + " perp_defect", q.perp_defect);
            plot.series.push_back({"J=" + std::to_string(J), pairs});
            if (c.expect.count("residual_margin")) {
                const double th = J + c.expect.at("residual_margin");
                ctx.check("quasimode order J=" + std::to_string(J), f.slope, th, f.slope >= th);
            }
        }
        t.add_footer("residual_scaling", "eps^2 ||(L - Gamma_J) Psi_J|| / ||Psi_J||");
        add_common_footer(t, c);
        ctx.result.tables.push_back(std::move(t));
        ctx.result.plots.push_back(plot);
    }

    if (a.lemma_pairs > 0) {
        const LemmaSuiteReport rep = run_lemma_suite(a.lemma_pairs, a.lemma_max_size, a.lemma_trials, c.seed);
        ResultTable t;
        t.name = "lemma";
        t.columns = {"pairs", "max_size", "bound_failures", "printed_failures", "hypothesis_failures", "min_slack",
                     "min_printed_slack"};
        t.add_row({std::int64_t(rep.pairs), std::int64_t(rep.max_size), std::int64_t(rep.bound_failures),
                   std::int64_t(rep.printed_failures), std::int64_t(rep.hypothesis_failures), rep.min_slack,
                   rep.min_printed_slack});
        t.add_footer("bound", "eta ||L1^-1||^(1/2) ||L2^-1||^(1/2)");
        add_common_footer(t, c);
        ctx.check("resolvent bound failures", rep.bound_failures, 0, rep.bound_failures == 0 && rep.min_slack >= 0);
        ctx.check("form hypothesis failures", rep.hypothesis_failures, 0, rep.hypothesis_failures == 0);
        ctx.result.tables.push_back(std::move(t));
    }
}

void run_hardy(Context& ctx) {
    const auto& c = ctx.cfg;
    const TubeGeometry geo(c.curve, c.field);
    struct Point {
        std::string section;
        double h, R, b;
        HardyCertificate cert;
    };
    std::vector<Point> pts;
    for (const auto& s : c.sections)
        for (double h : c.solver.h)
            for (double R : c.solver.R)
                for (double b : c.b) pts.push_back({s, h, R, b, {}});
    parallel_for(static_cast<int>(pts.size()), ctx.opt.threads, [&](int i) {
        Point& p = pts[static_cast<std::size_t>(i)];
        at_point(p.section + " h=" + format_number(p.h) + " R=" + format_number(p.R) + " b=" + format_number(p.b), [&] {
            const GridDomain section = section_at(p.section, p.h);
            const double L = c.solver.L > 0.0 ? c.solver.L : 5.0 * p.R;
            p.cert = verify_hardy(geo, section, p.b, p.R, L, c.solver.ds, c.solver.dense_check);
            ctx.log("hardy " + p.section + " h=" + format_number(p.h) + " b=" + format_number(p.b) +
                    " c_R=" + format_number(p.cert.c_R) + " mu_min=" + format_number(p.cert.mu_min));
        });
    });
    ResultTable t;
    t.name = "certificates";
    t.columns = {"section", "h", "ds", "L", "R", "b", "lambda1", "lambda_dn", "C", "c_R", "c_R_limit", "mu_min",
                 "mu_dense", "margin", "pass"};
    Plot plot{"Hardy constant", "b", "value", true, true, {}};
    const double min_margin = c.expect.count("min_margin") ? c.expect.at("min_margin") : 0.0;
    bool all_pass = true;
    double worst = INFINITY;
    for (const auto& s : c.sections)
        for (double h : c.solver.h)
            for (double R : c.solver.R) {
                PlotSeries cr{"c_R " + s + " h=" + format_number(h), {}};
                PlotSeries mu{"mu_min " + s + " h=" + format_number(h), {}};
                std::vector<const HardyCertificate*> small, all;
                for (const auto& p : pts) {
                    if (p.section != s || p.h != h || p.R != R) continue;
                    const auto& r = p.cert;
                    t.add_row({s, h, r.ds, r.L, r.R, r.b, r.lambda1, r.lambda_dn, r.C, r.c_R, r.c_R_limit, r.mu_min,
                               r.mu_dense, r.margin, std::string(r.pass ? "true" : "false")});
                    cr.points.emplace_back(r.b, r.c_R);
                    mu.points.emplace_back(r.b, r.mu_min);
                    all_pass = all_pass && r.pass && r.margin >= min_margin - r.tolerance && r.c_R <= 0.25;
                    worst = std::min(worst, r.margin);
                    if (r.b > 0.0 && r.b <= 0.1 + 1e-12) small.push_back(&r);
                    all.push_back(&r);
                }
                plot.series.push_back(cr);
                plot.series.push_back(mu);
                const std::string key = s + " h=" + format_number(h) + " R=" + format_number(R);
                if (small.size() >= 2) {
                    std::vector<double> q;
                    for (const auto* r : small) q.push_back(r->c_R / (r->b * r->b));
                    const double spread = relative_spread(q);
                    t.add_footer(key + " small_b_spread", spread);
                    if (c.expect.count("small_b_variation"))
                        ctx.check("small-b law " + key, spread, c.expect.at("small_b_variation"),
                                  spread < c.expect.at("small_b_variation"));
                }
                if (!all.empty()) {
                    const auto* top = *std::max_element(all.begin(), all.end(),
                                                        [](const auto* x, const auto* y) { return x->b < y->b; });
                    const double gap = std::abs(top->c_R - top->c_R_limit) / top->c_R_limit;
                    t.add_footer(key + " limit_gap", gap);
                    if (c.expect.count("limit_tol"))
                        ctx.check("large-b limit " + key, gap, c.expect.at("limit_tol"), gap <= c.expect.at("limit_tol"));
                }
            }
    t.add_footer("cutoff", "chi0 = sin(pi q / 2), chi1 = cos(pi q / 2), q cubic smoothstep on 1/2 <= |s| <= 1");
    t.add_footer("weight", "1 / (1 + s^2)");
    add_common_footer(t, c);
    if (c.expect.count("min_margin")) ctx.check("certificates", worst, min_margin, all_pass);
    ctx.result.tables.push_back(std::move(t));
    ctx.result.plots.push_back(plot);
}

void run_stability(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto& st = c.stability;
    const GridDomain section = section_at(c.sections.front(), c.solver.h.front());
    const double lambda1 = section_constants(section)->lambda1;
    const double budget = truncation_budget(c.curve.S);
    ResultTable t;
    t.name = "stability";
    t.columns = {"experiment", "parameter", "value", "lowest", "lambda1", "budget", "below"};
    auto row = [&](const std::string& exp, const std::string& par, double v, double low, bool below) {
        t.add_row({exp, par, v, low, lambda1, budget, std::string(below ? "true" : "false")});
    };
    if (st.bent_free) {
        AmbientField none;
        none.dim = c.curve.dim;
        const TubeGeometry geo(c.curve, none);
        AssemblyOptions ao = ctx.assembly();
        ao.apply_shift = false;
        RegimeParams r = RegimeParams::make(1.0, 0.0, 0.0);
        r.b = 0.0;
        const double low = at_point("bent b=0", [&] {
            const AssembledOperator op =
                c.curve.dim == 2 ? assemble_full_2d(geo, section, r, ao) : assemble_full_3d(geo, section, r, ao);
            return smallest_eigenpairs(op, 1, ctx.eigen()).values(0);
        });
        const bool below = low < lambda1 - budget;
        row("bent-free", "b", 0.0, low, below);
        ctx.check("bent tube bound state below lambda1 - budget", lambda1 - low, budget, below);
    }
    if (st.deformation) {
        const DeformationReport rep = at_point("deformation", [&] {
            return deformation_experiment(section, c.field, st.deformation_b, *st.deformation, st.amplitudes, c.curve.S,
                                          c.solver.ds > 0.0 ? c.solver.ds : c.curve.ds);
        });
        PlotSeries ps{"b=" + format_number(st.deformation_b), {}};
        for (const auto& p : rep.points) {
            row("deformation", "amplitude", p.amplitude, p.lowest, p.below);
            ps.points.emplace_back(p.amplitude, p.lowest - lambda1);
        }
        ctx.result.plots.push_back({"deformed tube", "amplitude", "lowest - lambda1", false, false, {ps}});
        double worst = INFINITY;
        for (const auto& p : rep.points) worst = std::min(worst, p.lowest - (lambda1 - budget));
        ctx.check("deformation stays above lambda1 - budget", worst, 0.0, rep.pass);
    }
    if (!st.large_b.empty()) {
        const TubeGeometry geo(c.curve, c.field);
        LargeBReport rep = at_point("large-b", [&] { return large_b_experiment(geo, section, st.large_b, c.solver.ds); });
        PlotSeries ps{"lowest - lambda1", {}};
        for (const auto& p : rep.points) {
            row("large-b", "b", p.b, p.lowest, p.below);
            ps.points.emplace_back(p.b, p.lowest - lambda1);
        }
        ctx.result.plots.push_back({"large-b ground energy", "b", "lowest - lambda1", false, false, {ps}});
        t.add_footer("large_b crossed", rep.crossed ? "true" : "false");
        t.add_footer("large_b b0", rep.b0);
        t.add_footer("large_b monotone", rep.monotone ? "true" : "false");
        if (!rep.crossed) t.add_footer("large_b trend_slope", rep.trend_slope);
        bool ok = rep.crossed;
        double at2 = NAN;
        if (rep.crossed) {
            const double b2 = 2.0 * rep.b0;
            const auto it = std::find_if(rep.points.begin(), rep.points.end(),
                                         [&](const LargeBPoint& p) { return std::abs(p.b - b2) < 1e-12; });
            if (it != rep.points.end()) {
                at2 = it->lowest;
            } else if (b2 > 0.0) {
                at2 = large_b_experiment(geo, section, {b2}, c.solver.ds).points.front().lowest;
                row("large-b", "b", b2, at2, at2 < lambda1 - budget);
            } else {
                at2 = rep.points.front().lowest;
            }
            ok = at2 >= lambda1 - budget;
        }
        ctx.check("crossing intensity found and 2 b0 above lambda1 - budget", rep.b0, 0.0, ok);
    }
    t.add_footer("section", c.sections.front());
    t.add_footer("h", c.solver.h.front());
    t.add_footer("window_S", c.curve.S);
    add_common_footer(t, c);
    ctx.result.tables.push_back(std::move(t));
}

json manifest(const ExperimentConfig& c, const RunResult& r, const std::vector<std::string>& files,
              const RunOptions& opt) {
    json m;
    m["config"] = c.source;
    m["kind"] = to_string(c.kind);
    m["name"] = c.name;
    m["schema_version"] = c.schema_version;
    m["seed"] = c.seed;
    m["threads"] = opt.threads;
    m["versions"] = {{"tubespec", "1.0.0"},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"compiler", __VERSION__}};
    m["resolved"] = {{"K", c.K_value()},
                     {"curve", {{"dim", c.curve.dim},
                                {"S", c.curve.S},
                                {"ds", c.curve.ds},
                                {"kappa", bumps_json(c.curve.kappa)},
                                {"kappa2", bumps_json(c.curve.kappa2)},
                                {"kappa3", bumps_json(c.curve.kappa3)},
                                {"theta_prime", bumps_json(c.curve.theta_prime)}}},
                     {"field", {{"family", family_name(c.field.family)},
                                {"center", {c.field.center.x(), c.field.center.y(), c.field.center.z()}},
                                {"u", {c.field.u.x(), c.field.u.y(), c.field.u.z()}},
                                {"amplitude", c.field.amplitude},
                                {"radius", c.field.radius},
                                {"inner", c.field.inner}}},
                     {"effective_coefficient", to_string(c.coefficient)},
                     {"effective_path", to_string(c.path)}};
    m["cache"] = {{"file", c.cache_file}, {"hits", r.cache_hits}, {"misses", r.cache_misses}};
    m["outputs"] = files;
    json checks = json::array();
    for (const auto& ch : r.checks)
        checks.push_back({{"name", ch.name}, {"value", ch.value}, {"threshold", ch.threshold}, {"pass", ch.pass}});
    m["checks"] = checks;
    m["pass"] = r.pass();
    return m;
}

std::vector<std::string> write_artifacts(const ExperimentConfig& c, const RunResult& r) {
    fs::create_directories(c.output_dir);
    std::vector<std::string> files;
    for (const auto& t : r.tables) {
        const fs::path p = fs::path(c.output_dir) / (c.name + "_" + t.name + ".csv");
        std::ofstream os(p);
        t.write_csv(os);
        files.push_back(p.filename().string());
    }
    for (std::size_t i = 0; i < r.plots.size(); ++i) {
        const fs::path p = fs::path(c.output_dir) / (c.name + "_plot" + std::to_string(i) + ".svg");
        std::ofstream os(p);
        write_svg(r.plots[i], os);
        files.push_back(p.filename().string());
    }
    return files;
}

}  // namespace

RunResult run(const ExperimentConfig& config, const RunOptions& opt) {
    validate(config);
    RunResult result;
    Context ctx{config, opt, result, {}};
    auto& cache = ConstantsCache::global();
    if (!config.cache_file.empty() && fs::exists(config.cache_file)) cache.load(config.cache_file);
    const std::size_t h0 = cache.hits(), m0 = cache.misses();
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
        result.cache_hits = cache.hits() - h0;
        result.cache_misses = cache.misses() - m0;
        result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (config.expect.count("max_seconds")) {
            const double lim = config.expect.at("max_seconds");
            result.checks.push_back({"runtime", result.seconds, lim, result.seconds <= lim});
        }
        if (!config.cache_file.empty()) {
            const fs::path parent = fs::path(config.cache_file).parent_path();
            if (!parent.empty()) fs::create_directories(parent);
            cache.save(config.cache_file);
        }
        if (opt.write_artifacts) {
            const auto files = write_artifacts(config, result);
            std::ofstream os(fs::path(config.output_dir) / (config.name + "_manifest.json"));
            os << manifest(config, result, files, opt).dump(2) << "\n";
        }
    };
    try {
        switch (config.kind) {
            case ExperimentKind::XSection: run_xsection(ctx); break;
            case ExperimentKind::Full2D:
            case ExperimentKind::Full3D:
            case ExperimentKind::Effective: run_spectrum(ctx); break;
            case ExperimentKind::NrcSweep: run_nrc(ctx); break;
            case ExperimentKind::Asymptotics: run_asymptotics(ctx); break;
            case ExperimentKind::Hardy: run_hardy(ctx); break;
            case ExperimentKind::Stability: run_stability(ctx); break;
        }
    } catch (...) {
        finish();
        throw;
    }
    finish();
    return result;
}

}  // namespace tubespec
