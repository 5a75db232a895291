#include "aniso/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "aniso/errors.hpp"
#include "aniso/geometry.hpp"
#include "aniso/io.hpp"

namespace aniso {

std::string to_string(KPolicy::Kind k) {
    switch (k) {
        case KPolicy::Kind::auto_k0: return "auto_k0";
        case KPolicy::Kind::closed_form_K: return "closed_form_K";
        case KPolicy::Kind::constant: return "constant";
        case KPolicy::Kind::profile_file: return "profile_file";
    }
    return "unknown";
}

namespace {

StabilizingProfile shifted(const StabilizingProfile& p, double shift) {
    if (shift == 0.0) return p;
    if (p.samples().empty()) return StabilizingProfile::constant(p(0.0) + shift);
    std::vector<StabilizingProfile::Sample> s = p.samples();
    for (auto& v : s) v.k += shift;
    return StabilizingProfile(std::move(s), p.source());
}

}  // namespace

StabilizingProfile resolve_k_policy(const KPolicy& p, const Anisotropy& a) {
    if (!std::isfinite(p.shift)) throw ContractViolation("k-policy shift must be finite");
    switch (p.kind) {
        case KPolicy::Kind::auto_k0: return shifted(k0_profile(a, p.samples), p.shift);
        case KPolicy::Kind::closed_form_K: return shifted(upper_bound_profile(a, p.samples), p.shift);
        case KPolicy::Kind::constant: return StabilizingProfile::constant(p.constant + p.shift);
        case KPolicy::Kind::profile_file: return shifted(read_profile_csv(p.file), p.shift);
    }
    throw ContractViolation("unknown k-policy");
}

StabilizingProfile read_profile_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty profile file " + path.string());
    if (line.rfind("theta", 0) != 0) throw ConfigError("profile file must start with a \"theta,k\" header");
    std::vector<StabilizingProfile::Sample> samples;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("malformed profile row: " + line);
        try {
            samples.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::exception&) {
            throw ConfigError("malformed profile row: " + line);
        }
    }
    return StabilizingProfile(std::move(samples), ProfileSource::user);
}

std::string profile_csv(const StabilizingProfile& p) {
    std::string out = "theta,k\n";
    for (const auto& s : p.samples()) out += format_double(s.theta) + ',' + format_double(s.k) + '\n';
    return out;
}

std::string ConvergenceTable::csv() const {
    std::string out = "h,tau,t,error,order\n";
    for (const ConvergenceRow& r : rows) {
        out += format_double(r.h) + ',' + format_double(r.tau) + ',' + format_double(r.t) + ',' +
               format_double(r.error) + ',' + (r.order ? format_double(*r.order) : std::string()) + '\n';
    }
    return out;
}

std::vector<ConvergenceRow> ConvergenceTable::at_time(double t) const {
    std::vector<ConvergenceRow> out;
    for (const ConvergenceRow& r : rows) {
        if (r.t == t) out.push_back(r);
    }
    return out;
}

std::vector<double> ConvergenceTable::orders(double t) const {
    std::vector<double> out;
    for (const ConvergenceRow& r : at_time(t)) {
        if (r.order) out.push_back(*r.order);
    }
    return out;
}

namespace {

// Runs jobs[0..n) on up to `threads` workers; the first exception (lowest
// index) is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& job) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::size_t vertices_for(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ContractViolation("mesh size must be positive");
    const double n = std::round(1.0 / h);
    if (n < 3.0 || std::abs(n * h - 1.0) > 1e-12) throw ContractViolation("1/h must be an integer >= 3");
    return static_cast<std::size_t>(n);
}

void check_times(std::span<const double> t_eval, double tau) {
    if (t_eval.empty()) throw ContractViolation("at least one evaluation time is required");
    for (double t : t_eval) {
        if (!(t > 0.0) || !std::isfinite(t)) throw ContractViolation("evaluation times must be positive");
        const double r = t / tau;
        if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
            std::ostringstream os;
            os << "evaluation time " << t << " is not a multiple of tau = " << tau;
            throw ContractViolation(os.str());
        }
    }
}

struct Cell {
    double h;
    double tau;
};

// Snapshots of each cell at t_eval (in t_eval order).
std::vector<std::vector<PolygonalCurve>> run_cells(const Anisotropy& a, const StabilizingProfile& k,
                                                   const std::vector<Cell>& cells, std::span<const double> t_eval,
                                                   const StudyOptions& opts) {
    const double t_end = *std::max_element(t_eval.begin(), t_eval.end());
    std::vector<std::vector<PolygonalCurve>> out(cells.size());
    parallel_for(cells.size(), opts.threads, [&](std::size_t i) {
        const Cell& c = cells[i];
        SchemeConfig cfg;
        cfg.tau = c.tau;
        cfg.newton_tol = opts.newton_tol;
        cfg.newton_max_iter = opts.newton_max_iter;
        cfg.k_profile = k;
        cfg.anisotropy = a;
        try {
            const Trajectory tr = evolve(make_ellipse(opts.a_semi, opts.b_semi, vertices_for(c.h)), cfg, t_end, t_eval);
            std::vector<PolygonalCurve> snaps;
            for (double t : t_eval) snaps.push_back(tr.snapshot_near(t)->curve);
            out[i] = std::move(snaps);
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "cell h=" << c.h << " tau=" << c.tau << " failed: " << e.what();
            throw StudyFailure(os.str());
        }
    });
    return out;
}

std::vector<double> sorted_times(std::span<const double> t_eval) {
    std::vector<double> t(t_eval.begin(), t_eval.end());
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

}  // namespace

ConvergenceTable convergence_study(const Anisotropy& a, const StabilizingProfile& k, std::span<const double> h_list,
                                   std::span<const double> t_eval, double ref_h, double ref_tau,
                                   const StudyOptions& opts) {
    if (h_list.empty()) throw ContractViolation("h_list must not be empty");
    std::vector<double> hs(h_list.begin(), h_list.end());
    std::sort(hs.begin(), hs.end(), std::greater<>());
    if (std::adjacent_find(hs.begin(), hs.end()) != hs.end()) throw ContractViolation("h_list has duplicates");
    if (!(ref_h < hs.back() / 2.0)) throw ContractViolation("reference mesh must satisfy ref_h < min(h) / 2");
    if (!(ref_tau > 0.0)) throw ContractViolation("reference tau must be positive");
    const std::vector<double> times = sorted_times(t_eval);

    std::vector<Cell> cells{{ref_h, ref_tau}};
    for (double h : hs) {
        vertices_for(h);
        cells.push_back({h, h * h});
    }
    for (const Cell& c : cells) check_times(times, c.tau);
    const auto snaps = run_cells(a, k, cells, times, opts);

    ConvergenceTable table;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::optional<double> prev_e;
        double prev_h = 0.0;
        for (std::size_t ci = 1; ci < cells.size(); ++ci) {
            const double e = manifold_distance(snaps[ci][ti], snaps[0][ti]);
            ConvergenceRow row{cells[ci].h, cells[ci].tau, times[ti], e, std::nullopt};
            if (prev_e) row.order = std::log(*prev_e / e) / std::log(prev_h / cells[ci].h);
            table.rows.push_back(row);
            prev_e = e;
            prev_h = cells[ci].h;
        }
    }
    return table;
}

ConvergenceTable temporal_study(const Anisotropy& a, const StabilizingProfile& k, double h,
                                std::span<const double> tau_list, std::span<const double> t_eval, double ref_tau,
                                const StudyOptions& opts) {
    if (tau_list.empty()) throw ContractViolation("tau_list must not be empty");
    vertices_for(h);
    std::vector<double> taus(tau_list.begin(), tau_list.end());
    std::sort(taus.begin(), taus.end(), std::greater<>());
    if (std::adjacent_find(taus.begin(), taus.end()) != taus.end()) throw ContractViolation("tau_list has duplicates");
    if (!(ref_tau > 0.0) || ref_tau > taus.back()) throw ContractViolation("reference tau must be <= min(tau)");
    const std::vector<double> times = sorted_times(t_eval);

    std::vector<Cell> cells{{h, ref_tau}};
    for (double tau : taus) cells.push_back({h, tau});
    for (const Cell& c : cells) check_times(times, c.tau);
    const auto snaps = run_cells(a, k, cells, times, opts);

    ConvergenceTable table;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::optional<double> prev_e;
        double prev_tau = 0.0;
        for (std::size_t ci = 1; ci < cells.size(); ++ci) {
            const double e = manifold_distance(snaps[ci][ti], snaps[0][ti]);
            ConvergenceRow row{h, cells[ci].tau, times[ti], e, std::nullopt};
            if (prev_e) row.order = std::log(*prev_e / e) / std::log(prev_tau / cells[ci].tau);
            table.rows.push_back(row);
            prev_e = e;
            prev_tau = cells[ci].tau;
        }
    }
    return table;
}

StructureReport structure_report(const Trajectory& traj) {
    if (traj.rows.empty()) throw ContractViolation("structure_report: empty trajectory");
    StructureReport r;
    const double a0 = traj.rows.front().area;
    const double w0 = traj.rows.front().energy;
    r.min_energy = r.max_energy = 1.0;
    for (std::size_t i = 0; i < traj.rows.size(); ++i) {
        const MetricRow& m = traj.rows[i];
        r.t.push_back(m.t);
        r.area_loss.push_back((m.area - a0) / a0);
        r.energy.push_back(m.energy / w0);
        r.mesh_ratio.push_back(m.mesh_ratio);
        r.newton_iters.push_back(m.newton_iters);
        r.max_abs_area_loss = std::max(r.max_abs_area_loss, std::abs(r.area_loss.back()));
        r.min_energy = std::min(r.min_energy, r.energy.back());
        r.max_energy = std::max(r.max_energy, r.energy.back());
        r.max_mesh_ratio = std::max(r.max_mesh_ratio, m.mesh_ratio);
        r.max_newton_iters = std::max(r.max_newton_iters, m.newton_iters);
        if (i > 0 && m.energy > traj.rows[i - 1].energy * (1.0 + kEnergySlack) && r.energy_monotone) {
            r.energy_monotone = false;
            r.first_energy_increase = i;
        }
    }
    r.final_mesh_ratio = traj.rows.back().mesh_ratio;
    return r;
}

std::string StructureReport::csv() const {
    std::string out = "t,area_loss,energy,mesh_ratio,newton_iters\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        out += format_double(t[i]) + ',' + format_double(area_loss[i]) + ',' + format_double(energy[i]) + ',' +
               format_double(mesh_ratio[i]) + ',' + std::to_string(newton_iters[i]) + '\n';
    }
    return out;
}

Equilibrium detect_equilibrium(const Trajectory& traj, std::size_t window, double rel_tol) {
    if (window < 2) throw ContractViolation("detect_equilibrium: window must be >= 2");
    const auto& rows = traj.rows;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    for (std::size_t i = window - 1; i < rows.size(); ++i) {
        const std::size_t j = i + 1 - window;
        double de = 0.0;
        double dr = 0.0;
        for (std::size_t l = j; l <= i; ++l) {
            de = std::max(de, rel(rows[l].energy, rows[j].energy));
            dr = std::max(dr, rel(rows[l].mesh_ratio, rows[j].mesh_ratio));
        }
        if (de <= rel_tol && dr <= rel_tol) return {true, rows[i].t, i};
    }
    return {};
}

std::string summary_json(const StructureReport& r, const Equilibrium& eq) {
    nlohmann::json j;
    j["max_abs_area_loss"] = r.max_abs_area_loss;
    j["min_energy"] = r.min_energy;
    j["max_energy"] = r.max_energy;
    j["final_energy"] = r.energy.empty() ? 1.0 : r.energy.back();
    j["max_mesh_ratio"] = r.max_mesh_ratio;
    j["final_mesh_ratio"] = r.final_mesh_ratio;
    j["max_newton_iters"] = r.max_newton_iters;
    j["energy_monotone"] = r.energy_monotone;
    j["first_energy_increase"] =
        r.first_energy_increase ? nlohmann::json(*r.first_energy_increase) : nlohmann::json(nullptr);
    j["equilibrium_reached"] = eq.reached;
    j["t_eq"] = eq.reached ? nlohmann::json(eq.t_eq) : nlohmann::json(nullptr);
    return j.dump(2);
}

std::vector<std::string> preset_names() {
    return {"case1_halfbeta",
            "case2_bgn",
            "fourfold_tenth",
            "regularized_crystalline_eps01_m7",
            "convergence_case1",
            "convergence_case2"};
}

ExperimentSpec preset_experiment(const std::string& name, bool paper_scale) {
    ExperimentSpec s;
    s.name = name;
    s.n = 64;
    s.tau = 1.0 / 4096.0;
    s.k_policy = KPolicy::k0();
    s.t_end = 2.0;
    s.snapshot_times = {0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0};
    if (name == "case1_halfbeta") {
        s.anisotropy = Anisotropy::m_fold(0.5, 3);
    } else if (name == "case2_bgn") {
        s.anisotropy = Anisotropy::piecewise_bgn();
    } else if (name == "fourfold_tenth") {
        s.anisotropy = Anisotropy::m_fold(0.1, 4);
    } else if (name == "regularized_crystalline_eps01_m7") {
        s.anisotropy = Anisotropy::regularized_crystalline(0.1, 7);
    } else if (name == "convergence_case1" || name == "convergence_case2") {
        s.kind = ExperimentSpec::Kind::converge;
        s.anisotropy = name == "convergence_case1" ? Anisotropy::m_fold(1.0 / 9.0, 3) : Anisotropy::piecewise_bgn();
        s.snapshot_times.clear();
        s.t_end = 0.5;
        s.h_list = {0.125, 0.0625, 0.03125};
        s.t_eval = {0.125, 0.25, 0.5};
        s.ref_h = paper_scale ? 1.0 / 256.0 : 1.0 / 128.0;
        s.ref_tau = paper_scale ? std::ldexp(1.0, -16) : std::ldexp(1.0, -14);
        s.tau_list = {std::ldexp(1.0, -6), std::ldexp(1.0, -7), std::ldexp(1.0, -8), std::ldexp(1.0, -9),
                      std::ldexp(1.0, -10)};
    } else {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset \"" + name + "\" (known: " + known + ")");
    }
    return s;
}

}  // namespace aniso
