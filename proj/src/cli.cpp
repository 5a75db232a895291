#include "aniso/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aniso/anisotropy.hpp"
#include "aniso/errors.hpp"
#include "aniso/geometry.hpp"
#include "aniso/harness.hpp"
#include "aniso/io.hpp"
#include "aniso/solver.hpp"
#include "aniso/svg.hpp"
#include "aniso/wulff.hpp"

namespace aniso {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
    }
}

double get_number(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError("missing \"" + key + "\" in " + where);
    if (!j.at(key).is_number()) throw ConfigError("\"" + key + "\" in " + where + " must be a number");
    return j.at(key).get<double>();
}

double number_or(const json& j, const std::string& key, double fallback, const std::string& where) {
    return j.contains(key) ? get_number(j, key, where) : fallback;
}

int int_or(const json& j, const std::string& key, int fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw ConfigError("\"" + key + "\" in " + where + " must be an integer");
    return j.at(key).get<int>();
}

std::vector<double> number_list(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) return {};
    const json& v = j.at(key);
    if (!v.is_array()) throw ConfigError("\"" + key + "\" in " + where + " must be an array of numbers");
    std::vector<double> out;
    for (const json& x : v) {
        if (!x.is_number()) throw ConfigError("\"" + key + "\" in " + where + " must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

json anisotropy_to_json(const Anisotropy& a) {
    return std::visit(
        [](const auto& f) -> json {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, family::Isotropic>) {
                return {{"family", "isotropic"}};
            } else if constexpr (std::is_same_v<F, family::MFold>) {
                return {{"family", "m_fold"}, {"beta", f.beta}, {"m", f.m}, {"theta0", f.theta0}};
            } else if constexpr (std::is_same_v<F, family::PiecewiseBgn>) {
                return {{"family", "piecewise_bgn"}};
            } else if constexpr (std::is_same_v<F, family::RegularizedCrystalline>) {
                return {{"family", "regularized_crystalline"}, {"eps", f.eps}, {"m", f.m}};
            } else {
                throw ConfigError("user-defined anisotropies cannot be serialized");
            }
        },
        a.family());
}

Anisotropy anisotropy_from_json(const json& j) {
    const std::string where = "anisotropy";
    if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) {
        throw ConfigError("anisotropy needs a \"family\" string");
    }
    const std::string fam = j.at("family").get<std::string>();
    try {
        if (fam == "isotropic") {
            check_keys(j, {"family"}, where);
            return Anisotropy::isotropic();
        }
        if (fam == "m_fold") {
            check_keys(j, {"family", "beta", "m", "theta0"}, where);
            return Anisotropy::m_fold(get_number(j, "beta", where), int_or(j, "m", 3, where),
                                      number_or(j, "theta0", 0.0, where));
        }
        if (fam == "piecewise_bgn") {
            check_keys(j, {"family"}, where);
            return Anisotropy::piecewise_bgn();
        }
        if (fam == "regularized_crystalline") {
            check_keys(j, {"family", "eps", "m"}, where);
            return Anisotropy::regularized_crystalline(get_number(j, "eps", where), int_or(j, "m", 1, where));
        }
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("invalid anisotropy: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid anisotropy: ") + e.what());
    }
    throw ConfigError("unknown anisotropy family \"" + fam + "\"");
}

json k_policy_to_json(const KPolicy& p) {
    json j{{"kind", to_string(p.kind)}};
    switch (p.kind) {
        case KPolicy::Kind::auto_k0:
        case KPolicy::Kind::closed_form_K: j["samples"] = p.samples; break;
        case KPolicy::Kind::constant: j["value"] = p.constant; break;
        case KPolicy::Kind::profile_file: j["file"] = p.file.string(); break;
    }
    j["shift"] = p.shift;
    return j;
}

KPolicy k_policy_from_json(const json& j, const fs::path& base) {
    const std::string where = "k_policy";
    check_keys(j, {"kind", "samples", "value", "shift", "file"}, where);
    if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError("k_policy needs a \"kind\" string");
    const std::string kind = j.at("kind").get<std::string>();
    KPolicy p;
    const int samples = int_or(j, "samples", 129, where);
    if (samples < 2) throw ConfigError("k_policy samples must be >= 2");
    p.samples = static_cast<std::size_t>(samples);
    p.shift = number_or(j, "shift", 0.0, where);
    if (kind == "auto_k0") {
        p.kind = KPolicy::Kind::auto_k0;
        if (p.samples < 21) throw ConfigError("auto_k0 needs at least 21 samples");
    } else if (kind == "closed_form_K") {
        p.kind = KPolicy::Kind::closed_form_K;
    } else if (kind == "constant") {
        p.kind = KPolicy::Kind::constant;
        p.constant = get_number(j, "value", where);
        if (!(p.constant >= 0.0)) throw ConfigError("constant k must be >= 0");
    } else if (kind == "profile_file") {
        p.kind = KPolicy::Kind::profile_file;
        if (!j.contains("file") || !j.at("file").is_string()) throw ConfigError("profile_file needs \"file\"");
        const fs::path f = j.at("file").get<std::string>();
        p.file = f.is_absolute() ? f : base / f;
    } else {
        throw ConfigError("unknown k_policy kind \"" + kind + "\"");
    }
    if (!(p.shift >= 0.0) && p.kind != KPolicy::Kind::constant) throw ConfigError("k_policy shift must be >= 0");
    return p;
}

std::string k_label(const KPolicy& p) {
    std::ostringstream os;
    switch (p.kind) {
        case KPolicy::Kind::auto_k0: os << "k0"; break;
        case KPolicy::Kind::closed_form_K: os << "K"; break;
        case KPolicy::Kind::constant: os << "const" << p.constant; break;
        case KPolicy::Kind::profile_file: os << "file"; break;
    }
    if (p.shift != 0.0) os << "_plus" << p.shift;
    return os.str();
}

// Output files are addressed by relative names inside the output directory.
class OutputDir {
public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) {}

    void write(const std::string& name, std::string_view content) const {
        const fs::path rel(name);
        if (rel.is_absolute() || rel.empty()) throw ContractViolation("output names must be relative");
        for (const auto& part : rel) {
            if (part == "..") throw ContractViolation("output names must stay inside the output directory");
        }
        write_file_atomic(root_ / rel, content);
        written_.push_back(rel.generic_string());
    }

    [[nodiscard]] const fs::path& root() const { return root_; }
    [[nodiscard]] const std::vector<std::string>& written() const { return written_; }

private:
    fs::path root_;
    mutable std::vector<std::string> written_;
};

struct Context {
    std::string command;
    json config;
    fs::path config_dir;
    fs::path out_dir;
    unsigned threads = 0;
    bool paper_scale = false;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;
};

// Merge the preset (if named) under the explicit keys.
json with_preset(const json& cfg, bool paper_scale) {
    if (!cfg.contains("preset")) return cfg;
    if (!cfg.at("preset").is_string()) throw ConfigError("\"preset\" must be a string");
    const ExperimentSpec s = preset_experiment(cfg.at("preset").get<std::string>(), paper_scale);
    json base;
    base["anisotropy"] = anisotropy_to_json(s.anisotropy);
    base["k_policy"] = k_policy_to_json(s.k_policy);
    base["shape"] = {{"type", "ellipse"}, {"a", s.a_semi}, {"b", s.b_semi}};
    if (s.kind == ExperimentSpec::Kind::simulate) {
        base["N"] = s.n;
        base["tau"] = s.tau;
        base["t_end"] = s.t_end;
        // Preset snapshot times past an overridden t_end are dropped.
        const double t_end = cfg.contains("t_end") && cfg.at("t_end").is_number() ? cfg.at("t_end").get<double>() : s.t_end;
        std::vector<double> snaps;
        for (double t : s.snapshot_times) {
            if (t <= t_end) snaps.push_back(t);
        }
        base["snapshot_times"] = snaps;
    } else {
        base["h_list"] = s.h_list;
        base["t_eval"] = s.t_eval;
        base["ref_h"] = s.ref_h;
        base["ref_tau"] = s.ref_tau;
        base["tau_list"] = s.tau_list;
    }
    for (const auto& [key, value] : cfg.items()) {
        if (key != "preset") base[key] = value;
    }
    base["preset"] = cfg.at("preset");
    return base;
}

PolygonalCurve initial_shape(const json& shape, std::size_t n, const fs::path& base) {
    const std::string where = "shape";
    if (!shape.is_object() || !shape.contains("type") || !shape.at("type").is_string()) {
        throw ConfigError("shape needs a \"type\" string");
    }
    const std::string type = shape.at("type").get<std::string>();
    if (type == "ellipse") {
        check_keys(shape, {"type", "a", "b"}, where);
        const double a = number_or(shape, "a", 2.0, where);
        const double b = number_or(shape, "b", 0.5, where);
        if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("ellipse semi-axes must be positive");
        return make_ellipse(a, b, n);
    }
    if (type == "csv") {
        check_keys(shape, {"type", "file"}, where);
        if (!shape.contains("file") || !shape.at("file").is_string()) throw ConfigError("csv shape needs \"file\"");
        fs::path f = shape.at("file").get<std::string>();
        if (!f.is_absolute()) f = base / f;
        try {
            return read_curve_csv(f);
        } catch (const std::exception& e) {
            throw ConfigError("cannot read shape file: " + std::string(e.what()));
        }
    }
    throw ConfigError("unknown shape type \"" + type + "\"");
}

std::size_t resolve_n(const json& cfg) {
    const bool has_n = cfg.contains("N");
    const bool has_h = cfg.contains("h");
    if (!has_n && !has_h) return 64;
    std::size_t n = 0;
    if (has_n) {
        if (!cfg.at("N").is_number_integer() || cfg.at("N").get<long long>() < 3) {
            throw ConfigError("\"N\" must be an integer >= 3");
        }
        n = cfg.at("N").get<std::size_t>();
    }
    if (has_h) {
        const double h = get_number(cfg, "h", "config");
        if (!(h > 0.0)) throw ConfigError("\"h\" must be positive");
        const double nn = std::round(1.0 / h);
        if (nn < 3.0 || std::abs(nn * h - 1.0) > 1e-12) throw ConfigError("\"h\" must satisfy h = 1/N for integer N >= 3");
        if (has_n && static_cast<std::size_t>(nn) != n) throw ConfigError("\"h\" and \"N\" disagree (h must be 1/N)");
        n = static_cast<std::size_t>(nn);
    }
    return n;
}

double resolve_tau(const json& cfg, std::size_t n) {
    if (!cfg.contains("tau")) throw ConfigError("missing \"tau\" (a number or \"h2\")");
    const json& t = cfg.at("tau");
    double tau = 0.0;
    if (t.is_string()) {
        if (t.get<std::string>() != "h2") throw ConfigError("\"tau\" string must be \"h2\"");
        const double h = 1.0 / static_cast<double>(n);
        tau = h * h;
    } else if (t.is_number()) {
        tau = t.get<double>();
    } else {
        throw ConfigError("\"tau\" must be a number or \"h2\"");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("\"tau\" must be positive");
    return tau;
}

KPolicy resolve_policy(const json& cfg, const fs::path& base) {
    if (!cfg.contains("k_policy")) return KPolicy::k0();
    return k_policy_from_json(cfg.at("k_policy"), base);
}

// ---------------------------------------------------------------- plots

const SvgStyle kRed{"#d62728", 2.0, "", "none", 1.0};
const SvgStyle kBlue{"#1f77b4", 2.0, "", "none", 1.0};
const SvgStyle kDashed{"#000000", 1.0, "5,4", "none", 1.0};

std::vector<Vec2> closed_loop(const std::vector<Vec2>& v) {
    std::vector<Vec2> out = v;
    if (!out.empty()) out.push_back(out.front());
    return out;
}

std::string curves_svg(const PolygonalCurve& c0, const std::vector<const PolygonalCurve*>& mid,
                       const PolygonalCurve& last) {
    SvgCanvas svg(640, 640);
    std::vector<Vec2> all = c0.vertices();
    for (const auto* c : mid) all.insert(all.end(), c->vertices().begin(), c->vertices().end());
    all.insert(all.end(), last.vertices().begin(), last.vertices().end());
    svg.fit(all, true);
    svg.axes("x", "y");
    for (const auto* c : mid) svg.polyline(closed_loop(c->vertices()), kDashed);
    svg.polyline(closed_loop(c0.vertices()), kRed);
    svg.polyline(closed_loop(last.vertices()), kBlue);
    svg.legend(0, "initial", kRed);
    svg.legend(1, "intermediate", kDashed);
    svg.legend(2, "final", kBlue);
    return svg.str();
}

// ---------------------------------------------------------------- commands

struct Stability {
    bool holds;
    double margin;
};

int cmd_simulate(const Context& ctx) {
    const json cfg = with_preset(ctx.config, false);
    check_keys(cfg, {"command", "preset", "anisotropy", "shape", "N", "h", "tau", "t_end", "k_policy",
                     "snapshot_times", "newton_tol", "newton_max_iter", "equilibrium", "output_dir", "seed"},
               "simulate config");
    if (!cfg.contains("anisotropy")) throw ConfigError("missing \"anisotropy\"");
    const Anisotropy a = anisotropy_from_json(cfg.at("anisotropy"));
    const std::size_t n = resolve_n(cfg);
    const double tau = resolve_tau(cfg, n);
    const double t_end = get_number(cfg, "t_end", "simulate config");
    if (!(t_end > 0.0)) throw ConfigError("\"t_end\" must be positive");
    std::vector<double> snaps = number_list(cfg, "snapshot_times", "simulate config");
    for (double s : snaps) {
        if (!(s >= 0.0) || s > t_end * (1.0 + 1e-12)) throw ConfigError("snapshot times must lie in [0, t_end]");
    }
    KPolicy policy = resolve_policy(cfg, ctx.config_dir);
    const json shape = cfg.contains("shape") ? cfg.at("shape") : json{{"type", "ellipse"}, {"a", 2.0}, {"b", 0.5}};
    const PolygonalCurve c0 = initial_shape(shape, n, ctx.config_dir);

    std::size_t window = 200;
    double eq_tol = 1e-7;
    if (cfg.contains("equilibrium")) {
        const json& e = cfg.at("equilibrium");
        check_keys(e, {"window", "rel_tol"}, "equilibrium");
        const int w = int_or(e, "window", 200, "equilibrium");
        if (w < 2) throw ConfigError("equilibrium window must be >= 2");
        window = static_cast<std::size_t>(w);
        eq_tol = number_or(e, "rel_tol", 1e-7, "equilibrium");
    }

    const StabilityCheck sc = stability_condition(a);
    std::vector<std::string> warnings;
    if (!sc.holds) {
        std::ostringstream os;
        os << "stability condition 3 gamma(theta) - gamma(theta - pi) >= 0 violated (margin " << sc.margin
           << " at theta=" << sc.argmin << "); energy decay is not guaranteed";
        warnings.push_back(os.str());
        if (policy.kind == KPolicy::Kind::auto_k0) {
            policy.kind = KPolicy::Kind::closed_form_K;
            warnings.emplace_back("k0 is undefined; using the closed-form bound K instead");
        }
        for (const auto& w : warnings) *ctx.err << "warning: " << w << '\n';
    }

    SchemeConfig scheme;
    scheme.tau = tau;
    scheme.anisotropy = a;
    scheme.newton_tol = number_or(cfg, "newton_tol", 1e-12, "simulate config");
    scheme.newton_max_iter = int_or(cfg, "newton_max_iter", 50, "simulate config");
    try {
        scheme.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
    scheme.k_profile = resolve_k_policy(policy, a);

    *ctx.out << "simulate: " << a.name() << ", N=" << n << ", tau=" << tau << ", t_end=" << t_end << ", "
             << step_count(t_end, tau) << " steps\n";
    const Trajectory traj = evolve(c0, scheme, t_end, snaps);

    const OutputDir out(ctx.out_dir);
    out.write("metrics.csv", traj.metrics_csv());
    const StructureReport rep = structure_report(traj);
    out.write("report.csv", rep.csv());
    out.write("k_profile.csv", profile_csv(scheme.k_profile));
    json snap_list = json::array();
    std::vector<const PolygonalCurve*> mid;
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        const Snapshot& s = traj.snapshots[i];
        std::ostringstream name;
        name << "snapshots/snapshot_" << std::setw(3) << std::setfill('0') << i << ".csv";
        out.write(name.str(), curve_csv(s.curve));
        snap_list.push_back({{"file", name.str()}, {"requested_t", s.requested_t}, {"t", s.t}, {"step", s.step}});
        if (s.step != 0 && s.step + 1 != traj.rows.size()) mid.push_back(&s.curve);
    }
    out.write("final_curve.csv", curve_csv(traj.final_curve));
    out.write("curves.svg", curves_svg(c0, mid, traj.final_curve));

    const Equilibrium eq = detect_equilibrium(traj, window, eq_tol);
    json resolved;
    resolved["command"] = "simulate";
    resolved["anisotropy"] = cfg.at("anisotropy");
    resolved["shape"] = shape;
    resolved["N"] = n;
    resolved["tau"] = tau;
    resolved["t_end"] = t_end;
    resolved["k_policy"] = k_policy_to_json(policy);
    resolved["snapshot_times"] = snaps;
    resolved["newton_tol"] = scheme.newton_tol;
    resolved["newton_max_iter"] = scheme.newton_max_iter;
    resolved["equilibrium"] = {{"window", window}, {"rel_tol", eq_tol}};
    if (cfg.contains("seed")) resolved["seed"] = cfg.at("seed");

    json summary = json::parse(summary_json(rep, eq));
    const MetricRow& last = traj.rows.back();
    summary["final_area"] = last.area;
    summary["final_energy_abs"] = last.energy;
    summary["final_mesh_ratio"] = last.mesh_ratio;
    summary["steps"] = traj.rows.size() - 1;
    summary["stability_condition"] = {{"holds", sc.holds}, {"margin", sc.margin}, {"argmin", sc.argmin}};
    summary["warnings"] = warnings;
    summary["initial_nodes"] = "uniform in the parametric angle";
    summary["snapshots"] = snap_list;
    summary["config"] = resolved;
    if (cfg.contains("preset")) summary["preset"] = cfg.at("preset");
    out.write("summary.json", summary.dump(2) + "\n");
    *ctx.out << "energy monotone: " << (rep.energy_monotone ? "true" : "false")
             << ", max |dA/A0| = " << rep.max_abs_area_loss << '\n';
    return kExitOk;
}

SvgCanvas loglog_plot(const std::vector<std::pair<std::string, std::vector<Vec2>>>& series, const std::string& xlabel,
                      const std::string& ylabel) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    SvgCanvas svg(640, 480);
    std::vector<Vec2> all;
    for (const auto& [_, pts] : series) all.insert(all.end(), pts.begin(), pts.end());
    svg.fit(all, false);
    svg.axes(xlabel, ylabel);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const SvgStyle st{colors[i % 6], 1.8, "", "none", 1.0};
        svg.polyline(series[i].second, st);
        svg.legend(static_cast<int>(i), series[i].first, st);
    }
    return svg;
}

std::vector<std::pair<std::string, std::vector<Vec2>>> table_series(const ConvergenceTable& t, bool by_tau) {
    std::vector<std::pair<std::string, std::vector<Vec2>>> out;
    std::vector<double> times;
    for (const auto& r : t.rows) {
        if (times.empty() || times.back() != r.t) times.push_back(r.t);
    }
    for (double tv : times) {
        std::vector<Vec2> pts;
        for (const auto& r : t.at_time(tv)) {
            if (r.error > 0.0) pts.push_back({std::log2(by_tau ? r.tau : r.h), std::log2(r.error)});
        }
        std::ostringstream os;
        os << "t = " << tv;
        out.emplace_back(os.str(), pts);
    }
    return out;
}

json table_json(const ConvergenceTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        rows.push_back({{"h", r.h}, {"tau", r.tau}, {"t", r.t}, {"error", r.error},
                        {"order", r.order ? json(*r.order) : json(nullptr)}});
    }
    return rows;
}

int cmd_converge(const Context& ctx) {
    const json cfg = with_preset(ctx.config, ctx.paper_scale);
    check_keys(cfg, {"command", "preset", "anisotropy", "shape", "k_policy", "k_choices", "h_list", "t_eval", "ref_h",
                     "ref_tau", "tau_list", "temporal_h", "newton_tol", "newton_max_iter", "output_dir", "seed"},
               "converge config");
    if (!cfg.contains("anisotropy")) throw ConfigError("missing \"anisotropy\"");
    const Anisotropy a = anisotropy_from_json(cfg.at("anisotropy"));
    const std::vector<double> h_list = number_list(cfg, "h_list", "converge config");
    if (h_list.empty()) throw ConfigError("\"h_list\" must be a non-empty array");
    std::vector<double> t_eval = number_list(cfg, "t_eval", "converge config");
    if (t_eval.empty()) t_eval = {0.125, 0.25, 0.5};
    double ref_h = number_or(cfg, "ref_h", 1.0 / 128.0, "converge config");
    double ref_tau = number_or(cfg, "ref_tau", std::ldexp(1.0, -14), "converge config");
    if (ctx.paper_scale) {
        ref_h = 1.0 / 256.0;
        ref_tau = std::ldexp(1.0, -16);
    }
    const std::vector<double> tau_list = number_list(cfg, "tau_list", "converge config");
    const double temporal_h = ctx.paper_scale ? ref_h : number_or(cfg, "temporal_h", ref_h, "converge config");

    StudyOptions opts;
    opts.threads = ctx.threads;
    opts.newton_tol = number_or(cfg, "newton_tol", 1e-12, "converge config");
    opts.newton_max_iter = int_or(cfg, "newton_max_iter", 50, "converge config");
    if (cfg.contains("shape")) {
        const json& s = cfg.at("shape");
        check_keys(s, {"type", "a", "b"}, "shape");
        if (s.value("type", "ellipse") != "ellipse") throw ConfigError("convergence studies use an ellipse shape");
        opts.a_semi = number_or(s, "a", 2.0, "shape");
        opts.b_semi = number_or(s, "b", 0.5, "shape");
    }

    std::vector<KPolicy> policies{resolve_policy(cfg, ctx.config_dir)};
    if (cfg.contains("k_choices")) {
        if (!cfg.at("k_choices").is_array()) throw ConfigError("\"k_choices\" must be an array of k policies");
        policies.clear();
        for (const json& p : cfg.at("k_choices")) policies.push_back(k_policy_from_json(p, ctx.config_dir));
        if (policies.empty()) throw ConfigError("\"k_choices\" must not be empty");
    }

    const OutputDir out(ctx.out_dir);
    json summary;
    json studies = json::array();
    std::vector<std::pair<std::string, std::vector<Vec2>>> plot;
    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
        const KPolicy& pol = policies[pi];
        const StabilizingProfile k = resolve_k_policy(pol, a);
        const std::string label = k_label(pol);
        *ctx.out << "converge: " << a.name() << ", k=" << label << ", " << h_list.size() << " cells vs (" << ref_h
                 << ", " << ref_tau << ")\n";
        ConvergenceTable table;
        try {
            table = convergence_study(a, k, h_list, t_eval, ref_h, ref_tau, opts);
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
        const std::string suffix = policies.size() == 1 ? "" : "_" + label;
        out.write("convergence" + suffix + ".csv", table.csv());
        json entry{{"k_policy", k_policy_to_json(pol)}, {"label", label}, {"spatial", table_json(table)}};
        for (auto& s : table_series(table, false)) plot.emplace_back(label + ", " + s.first, std::move(s.second));
        if (!tau_list.empty()) {
            ConvergenceTable temporal;
            try {
                temporal = temporal_study(a, k, temporal_h, tau_list, t_eval, ref_tau, opts);
            } catch (const ContractViolation& e) {
                throw ConfigError(e.what());
            }
            out.write("temporal" + suffix + ".csv", temporal.csv());
            entry["temporal"] = table_json(temporal);
            entry["temporal_h"] = temporal_h;
            const SvgCanvas tsvg = loglog_plot(table_series(temporal, true), "log2 tau", "log2 error");
            out.write("temporal" + suffix + ".svg", tsvg.str());
        }
        studies.push_back(entry);
    }
    out.write("convergence.svg", loglog_plot(plot, "log2 h", "log2 error").str());

    json resolved = cfg;
    resolved["command"] = "converge";
    resolved["ref_h"] = ref_h;
    resolved["ref_tau"] = ref_tau;
    resolved["t_eval"] = t_eval;
    summary["config"] = resolved;
    summary["t_eval"] = t_eval;
    summary["reference"] = {{"h", ref_h}, {"tau", ref_tau}, {"paper_scale", ctx.paper_scale}};
    summary["studies"] = studies;
    out.write("summary.json", summary.dump(2) + "\n");
    return kExitOk;
}

int cmd_k0(const Context& ctx) {
    const json& cfg = ctx.config;
    check_keys(cfg, {"command", "anisotropy", "samples", "phi_grid", "tol", "output_dir", "seed"}, "k0 config");
    if (!cfg.contains("anisotropy")) throw ConfigError("missing \"anisotropy\"");
    const Anisotropy a = anisotropy_from_json(cfg.at("anisotropy"));
    const int samples = int_or(cfg, "samples", 21, "k0 config");
    if (samples < 21) throw ConfigError("\"samples\" must be >= 21");
    K0Options opts;
    const int grid = int_or(cfg, "phi_grid", 4096, "k0 config");
    if (grid < 1024) throw ConfigError("\"phi_grid\" must be >= 1024");
    opts.phi_grid = static_cast<std::size_t>(grid);
    opts.tol = number_or(cfg, "tol", 1e-10, "k0 config");
    if (!(opts.tol > 0.0)) throw ConfigError("\"tol\" must be positive");

    const StabilityCheck sc = stability_condition(a);
    if (!sc.holds) {
        std::ostringstream os;
        os << "energy stability condition 3 gamma(theta) - gamma(theta - pi) >= 0 is violated for " << a.name()
           << " (margin " << sc.margin << " at theta=" << sc.argmin << "); k0 is undefined";
        throw StabilityViolation(os.str());
    }
    const StabilizingProfile k0 = k0_profile(a, static_cast<std::size_t>(samples), opts);
    std::string csv = "theta,k0,K\n";
    std::vector<Vec2> k0_pts;
    std::vector<Vec2> k_pts;
    json rows = json::array();
    for (const auto& s : k0.samples()) {
        const double big_k = k0_upper_bound(a, s.theta);
        if (s.k > big_k) {
            std::ostringstream os;
            os << "k0 = " << s.k << " exceeds the bound K = " << big_k << " at theta=" << s.theta;
            throw InconsistencyError(os.str());
        }
        csv += format_double(s.theta) + ',' + format_double(s.k) + ',' + format_double(big_k) + '\n';
        k0_pts.push_back({s.theta, s.k});
        k_pts.push_back({s.theta, big_k});
        rows.push_back({{"theta", s.theta}, {"k0", s.k}, {"K", big_k}});
    }
    const OutputDir out(ctx.out_dir);
    out.write("k0.csv", csv);
    SvgCanvas svg(640, 480);
    std::vector<Vec2> all = k0_pts;
    all.insert(all.end(), k_pts.begin(), k_pts.end());
    all.push_back({-kPi, 0.0});
    svg.fit(all, false);
    svg.axes("theta", "k");
    svg.polyline(k0_pts, kBlue);
    svg.polyline(k_pts, kRed);
    svg.legend(0, "k0(theta)", kBlue);
    svg.legend(1, "K(theta)", kRed);
    out.write("k0.svg", svg.str());
    json summary{{"anisotropy", anisotropy_to_json(a)},
                 {"samples", samples},
                 {"phi_grid", opts.phi_grid},
                 {"tol", opts.tol},
                 {"stability_margin", sc.margin},
                 {"k0_le_K", true},
                 {"rows", rows}};
    summary["config"] = cfg;
    out.write("summary.json", summary.dump(2) + "\n");
    *ctx.out << "k0: " << a.name() << ", " << samples << " samples, k0 <= K everywhere\n";
    return kExitOk;
}

int cmd_wulff(const Context& ctx) {
    const json& cfg = ctx.config;
    check_keys(cfg, {"command", "anisotropy", "samples", "sigma", "output_dir", "seed"}, "wulff config");
    if (!cfg.contains("anisotropy")) throw ConfigError("missing \"anisotropy\"");
    const Anisotropy a = anisotropy_from_json(cfg.at("anisotropy"));
    const int samples = int_or(cfg, "samples", 4096, "wulff config");
    if (samples < 1024) throw ConfigError("\"samples\" must be >= 1024");
    const auto n = static_cast<std::size_t>(samples);
    WulffEnvelope env = wulff_envelope(a, n);
    std::optional<double> sigma;
    if (cfg.contains("sigma") && !cfg.at("sigma").is_null()) {
        sigma = get_number(cfg, "sigma", "wulff config");
        env.sigma = sigma;
    }
    const std::vector<AngleInterval> mask = stability_mask(a, n);

    const OutputDir out(ctx.out_dir);
    out.write("envelope.csv", env.csv());

    SvgCanvas svg(640, 640);
    std::vector<Vec2> all;
    std::vector<Vec2> gamma_plot;
    for (const auto& s : env.samples) {
        all.push_back(s.point);
        gamma_plot.push_back(a.gamma(s.theta) * unit_normal(s.theta));
    }
    all.insert(all.end(), gamma_plot.begin(), gamma_plot.end());
    svg.fit(all, true);
    svg.axes("x", "y");

    std::vector<WulffRegion> regions;
    if (sigma) {
        regions = winterbottom(a, *sigma, n);
        static const char* fills[] = {"#2ca02c", "#1f77b4", "#9467bd", "#ff7f0e"};
        for (std::size_t i = 0; i < regions.size(); ++i) {
            svg.polyline(regions[i].vertices, SvgStyle{fills[i % 4], 0.5, "", fills[i % 4], 0.35}, true);
        }
        out.write("regions.csv", regions_csv(regions));
    }
    svg.polyline(closed_loop(gamma_plot), SvgStyle{"#999999", 1.0, "2,3", "none", 1.0});
    // Stable arcs solid, unstable arcs dashed.
    const std::size_t ns = env.samples.size();
    for (std::size_t i = 0; i < ns;) {
        const bool st = env.samples[i].stable;
        std::vector<Vec2> run{env.samples[i].point};
        std::size_t j = i;
        while (j < ns && env.samples[j].stable == st) {
            run.push_back(env.samples[(j + 1) % ns].point);
            ++j;
        }
        svg.polyline(run, st ? SvgStyle{"#000000", 1.5, "", "none", 1.0} : SvgStyle{"#d62728", 1.0, "4,3", "none", 1.0});
        i = j;
    }
    if (sigma) {
        double xmin = 0.0, xmax = 0.0;
        for (Vec2 p : all) {
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
        }
        svg.polyline(std::vector<Vec2>{{xmin, *sigma}, {xmax, *sigma}}, SvgStyle{"#8c564b", 2.0, "", "none", 1.0});
    }
    svg.legend(0, "gamma-plot", SvgStyle{"#999999", 1.0, "2,3", "none", 1.0});
    svg.legend(1, "stable envelope", SvgStyle{"#000000", 1.5, "", "none", 1.0});
    svg.legend(2, "unstable arcs", SvgStyle{"#d62728", 1.0, "4,3", "none", 1.0});
    if (sigma) svg.legend(3, "substrate y = sigma", SvgStyle{"#8c564b", 2.0, "", "none", 1.0});
    out.write("wulff.svg", svg.str());

    json mask_json = json::array();
    for (const auto& m : mask) mask_json.push_back({{"lo", m.lo}, {"hi", m.hi}});
    json region_json = json::array();
    for (const auto& r : regions) region_json.push_back({{"area", r.area}, {"vertices", r.vertices.size()}});
    json summary{{"anisotropy", anisotropy_to_json(a)},
                 {"samples", samples},
                 {"stable_intervals", mask_json},
                 {"sigma", sigma ? json(*sigma) : json(nullptr)},
                 {"regions", region_json}};
    summary["config"] = cfg;
    out.write("summary.json", summary.dump(2) + "\n");
    *ctx.out << "wulff: " << a.name() << ", " << mask.size() << " stable interval(s)";
    if (sigma) *ctx.out << ", " << regions.size() << " region(s)";
    *ctx.out << '\n';
    return kExitOk;
}

unsigned threads_from_env() {
    const char* v = std::getenv("ANISO_FLOW_THREADS");
    if (!v || !*v) return 0;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 0) throw ConfigError("ANISO_FLOW_THREADS must be a non-negative integer");
    return static_cast<unsigned>(n);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Anisotropic surface diffusion of closed curves"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    int threads = -1;
    bool paper_scale = false;
    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "evolve a closed curve and write metrics, snapshots and plots"},
        {"converge", "spatial and temporal convergence tables against a reference run"},
        {"k0", "minimal stabilizing function and its closed-form bound"},
        {"wulff", "Wulff envelope, stable orientations and substrate truncation"},
    };
    for (const auto& [name, about] : commands) {
        CLI::App* sub = app.add_subcommand(name, about);
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
        sub->add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
        sub->add_flag("--paper-scale", paper_scale, "use the (2^-8, 2^-16) reference mesh");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        out << o.str();
        err << er.str();
        return code == 0 ? kExitOk : kExitUsage;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    Context ctx;
    ctx.command = command;
    ctx.out = &out;
    ctx.err = &err;
    ctx.paper_scale = paper_scale;
    try {
        std::string text;
        try {
            text = read_file(config_path);
        } catch (const std::exception& e) {
            throw ConfigError("cannot read config: " + std::string(e.what()));
        }
        try {
            ctx.config = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("config is not valid JSON: " + std::string(e.what()));
        }
        if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
        if (ctx.config.contains("command")) {
            if (!ctx.config.at("command").is_string() || ctx.config.at("command").get<std::string>() != command) {
                throw ConfigError("config \"command\" does not match the subcommand \"" + command + "\"");
            }
        }
        ctx.config_dir = fs::path(config_path).parent_path();
        if (!out_dir.empty()) {
            ctx.out_dir = out_dir;
        } else if (ctx.config.contains("output_dir")) {
            if (!ctx.config.at("output_dir").is_string()) throw ConfigError("\"output_dir\" must be a string");
            const fs::path p = ctx.config.at("output_dir").get<std::string>();
            ctx.out_dir = p.is_absolute() ? p : ctx.config_dir / p;
        } else {
            ctx.out_dir = "aniso_flow_out";
        }
        ctx.threads = threads >= 0 ? static_cast<unsigned>(threads) : threads_from_env();

        if (command == "simulate") return cmd_simulate(ctx);
        if (command == "converge") return cmd_converge(ctx);
        if (command == "k0") return cmd_k0(ctx);
        return cmd_wulff(ctx);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const StabilityViolation& e) {
        err << "theory error: " << e.what() << '\n';
        return kExitTheory;
    } catch (const InconsistencyError& e) {
        err << "theory error: " << e.what() << '\n';
        return kExitTheory;
    } catch (const StepFailure& e) {
        err << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const StudyFailure& e) {
        err << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const DegenerateMeshError& e) {
        err << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const ContractViolation& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitSolver;
    }
}

}  // namespace aniso
