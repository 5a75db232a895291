#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aniso/anisotropy.hpp"
#include "aniso/solver.hpp"

namespace aniso {

// How k(theta) is chosen for a run.
struct KPolicy {
    enum class Kind { auto_k0, closed_form_K, constant, profile_file };
    Kind kind = Kind::auto_k0;
    std::size_t samples = 129;  // auto_k0 / closed_form_K nodes on [-pi, pi]
    double constant = 0.0;      // Kind::constant
    double shift = 0.0;         // added to every node, e.g. k0 + 1
    std::filesystem::path file; // Kind::profile_file, CSV "theta,k"

    [[nodiscard]] static KPolicy k0(std::size_t samples = 129) { return {Kind::auto_k0, samples, 0.0, 0.0, {}}; }
};

[[nodiscard]] std::string to_string(KPolicy::Kind k);

// Throws StabilityViolation for auto_k0 when the condition fails, and
// ContractViolation / ConfigError for malformed policies or files.
[[nodiscard]] StabilizingProfile resolve_k_policy(const KPolicy& p, const Anisotropy& a);
[[nodiscard]] StabilizingProfile read_profile_csv(const std::filesystem::path& path);
[[nodiscard]] std::string profile_csv(const StabilizingProfile& p);

struct ConvergenceRow {
    double h = 0.0;
    double tau = 0.0;
    double t = 0.0;
    double error = 0.0;
    std::optional<double> order;  // empty for the first row of each t
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;  // grouped by t ascending, then refinement order

    // "h,tau,t,error,order"; the order field is left empty where undefined.
    [[nodiscard]] std::string csv() const;
    [[nodiscard]] std::vector<ConvergenceRow> at_time(double t) const;
    [[nodiscard]] std::vector<double> orders(double t) const;
};

struct StudyOptions {
    double a_semi = 2.0;
    double b_semi = 0.5;
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
    unsigned threads = 0;  // 0: hardware concurrency
};

// Errors of the tau = h^2 runs for each h against a (ref_h, ref_tau)
// reference from the same ellipse, at each t_eval. Orders
// log(e_prev / e) / log(h_prev / h) between adjacent h. Cells run in parallel;
// the table is assembled by (t, h) so repeated studies are bit-identical.
// Requires ref_h < min(h_list) / 2, 1/h integral, and every t_eval a
// multiple of every tau. A failed cell throws StudyFailure naming the cell.
[[nodiscard]] ConvergenceTable convergence_study(const Anisotropy& a, const StabilizingProfile& k,
                                                 std::span<const double> h_list, std::span<const double> t_eval,
                                                 double ref_h, double ref_tau, const StudyOptions& opts = {});

// Fixed h, errors of each tau in tau_list against ref_tau at the same h.
// Orders log(e_prev / e) / log(tau_prev / tau).
[[nodiscard]] ConvergenceTable temporal_study(const Anisotropy& a, const StabilizingProfile& k, double h,
                                              std::span<const double> tau_list, std::span<const double> t_eval,
                                              double ref_tau, const StudyOptions& opts = {});

struct StudyFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StructureReport {
    std::vector<double> t;
    std::vector<double> area_loss;     // (A^m - A^0) / A^0
    std::vector<double> energy;        // W^m / W^0
    std::vector<double> mesh_ratio;
    std::vector<int> newton_iters;

    double max_abs_area_loss = 0.0;
    double min_energy = 0.0;
    double max_energy = 0.0;
    double max_mesh_ratio = 0.0;
    double final_mesh_ratio = 0.0;
    int max_newton_iters = 0;
    bool energy_monotone = true;  // no step with W^{m+1} > W^m (1 + 1e-12)
    std::optional<std::size_t> first_energy_increase;

    [[nodiscard]] std::string csv() const;  // "t,area_loss,energy,mesh_ratio,newton_iters"
};

inline constexpr double kEnergySlack = 1e-12;

[[nodiscard]] StructureReport structure_report(const Trajectory& traj);

struct Equilibrium {
    bool reached = false;
    double t_eq = 0.0;
    std::size_t row = 0;
};

// First row i >= window - 1 where both energy and mesh ratio change by at
// most rel_tol (relative) across rows [i - window + 1, i].
[[nodiscard]] Equilibrium detect_equilibrium(const Trajectory& traj, std::size_t window, double rel_tol);

// JSON object with the report extrema and flags plus the equilibrium result.
[[nodiscard]] std::string summary_json(const StructureReport& r, const Equilibrium& eq);

// A named run: ellipse 4 x 1, h = 2^-6, tau = h^2,
// auto-k0 (simulation presets), or a convergence grid (study presets).
struct ExperimentSpec {
    enum class Kind { simulate, converge };
    std::string name;
    Kind kind = Kind::simulate;
    Anisotropy anisotropy = Anisotropy::isotropic();
    KPolicy k_policy;
    double a_semi = 2.0;
    double b_semi = 0.5;
    std::size_t n = 64;
    double tau = 1.0 / 4096.0;
    double t_end = 0.5;
    std::vector<double> snapshot_times;
    std::vector<double> h_list;
    std::vector<double> t_eval;
    double ref_h = 0.0;
    double ref_tau = 0.0;
    std::vector<double> tau_list;  // temporal part of a convergence preset
};

[[nodiscard]] std::vector<std::string> preset_names();
// Throws ConfigError for an unknown name. paper_scale switches convergence
// presets to the (2^-8, 2^-16) reference.
[[nodiscard]] ExperimentSpec preset_experiment(const std::string& name, bool paper_scale = false);

}  // namespace aniso
