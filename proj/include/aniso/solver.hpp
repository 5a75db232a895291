#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "aniso/anisotropy.hpp"
#include "aniso/geometry.hpp"

namespace aniso {

struct SchemeConfig {
    double tau = 0.0;
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
    StabilizingProfile k_profile = StabilizingProfile::constant(0.0);
    Anisotropy anisotropy = Anisotropy::isotropic();

    void validate() const;
};

// Some data living on a polygon: one value per vertex (continuous piecewise
// linear) or one value per edge (piecewise constant).
struct Sampled {
    enum class Kind { nodal, edge };
    Kind kind;
    std::span<const double> values;

    static Sampled nodal(std::span<const double> v) { return {Kind::nodal, v}; }
    static Sampled edge(std::span<const double> v) { return {Kind::edge, v}; }
};

// (f, g)^h = sum_j |h_j|/2 [(fg)(rho_j-) + (fg)(rho_{j-1}+)]. Edge-valued
// data uses the edge value at both endpoints.
[[nodiscard]] double mass_lumped_inner(const PolygonalCurve& c, Sampled f, Sampled g);

// Per-edge (f(rho_j) - f(rho_{j-1})) / |h_j|.
[[nodiscard]] std::vector<double> discrete_ds(const PolygonalCurve& c, std::span<const double> f_nodal);
[[nodiscard]] std::vector<Vec2> discrete_ds(const PolygonalCurve& c, std::span<const Vec2> f_nodal);

// n^{m+1/2} = -(1/(2|d_rho X^m|)) (d_rho X^m + d_rho X^{m+1})^perp per edge.
// Not normalized.
[[nodiscard]] std::vector<Vec2> midstep_normal(const PolygonalCurve& c_old, std::span<const Vec2> x_new);

// Unknown and residual layout for the step system. Unknowns:
//   [x_0, y_0, x_1, y_1, ..., x_{N-1}, y_{N-1}, mu_0, ..., mu_{N-1}]
// Residual rows: N rows testing the kinematic equation (scaled by tau) with nodal hats,
// then 2N rows (x and y component per vertex, interleaved) testing the
// curvature equation with vector hats.
struct SystemLayout {
    std::size_t n;
    [[nodiscard]] std::size_t size() const { return 3 * n; }
    [[nodiscard]] std::size_t x(std::size_t i, int comp) const { return 2 * i + static_cast<std::size_t>(comp); }
    [[nodiscard]] std::size_t mu(std::size_t i) const { return 2 * n + i; }
    [[nodiscard]] std::size_t row_kinematic(std::size_t i) const { return i; }
    [[nodiscard]] std::size_t row_curvature(std::size_t i, int comp) const {
        return n + 2 * i + static_cast<std::size_t>(comp);
    }
};

enum class NormalMode {
    midstep,  // n^{m+1/2}, depends on the unknown positions
    frozen,   // n^m, gives the linear predictor system
};

struct Assembled {
    Eigen::VectorXd residual;
    Eigen::SparseMatrix<double> jacobian;
};

// Everything the step system freezes on Gamma^m: lengths, old edge vectors,
// and Zhat_k(theta_j^m) with k taken from the profile.
class StepOperator {
public:
    StepOperator(const PolygonalCurve& c_old, const SchemeConfig& cfg, NormalMode mode = NormalMode::midstep);

    [[nodiscard]] const SystemLayout& layout() const { return layout_; }
    [[nodiscard]] Eigen::VectorXd pack(std::span<const Vec2> x, std::span<const double> mu) const;
    void unpack(const Eigen::VectorXd& z, std::vector<Vec2>& x, std::vector<double>& mu) const;

    [[nodiscard]] Eigen::VectorXd residual(const Eigen::VectorXd& z) const;
    [[nodiscard]] Assembled assemble(const Eigen::VectorXd& z) const;

    [[nodiscard]] const std::vector<Mat2>& energy_matrices() const { return z_; }

private:
    [[nodiscard]] Assembled assemble_impl(const Eigen::VectorXd& z, bool with_jacobian) const;

    SystemLayout layout_;
    NormalMode mode_;
    double tau_;
    std::vector<Vec2> x_old_;
    std::vector<Vec2> h_old_;
    std::vector<double> len_old_;
    std::vector<Mat2> z_;
};

[[nodiscard]] Assembled assemble_residual_and_jacobian(const PolygonalCurve& c_old, std::span<const Vec2> x_guess,
                                                       std::span<const double> mu_guess, const SchemeConfig& cfg);

struct StepResult {
    PolygonalCurve curve;
    std::vector<double> mu;
    int newton_iters = 0;
    double residual = 0.0;
};

// Solves the linear system with n^{m+1/2} replaced by n^m. Used to seed mu
// before the first Newton step.
[[nodiscard]] StepResult frozen_normal_step(const PolygonalCurve& c_old, const SchemeConfig& cfg);

// One step of the scheme by joint Newton on (X^{m+1}, mu^{m+1}) from the
// guess (X^m, mu_prev). An empty mu_prev triggers the frozen-normal
// pre-solve. Newton stops when the residual or the update is <= newton_tol
// in max-norm (at least one update is always taken). Throws StepFailure when
// newton_max_iter is exhausted.
[[nodiscard]] StepResult time_step(const PolygonalCurve& c_old, std::span<const double> mu_prev,
                                   const SchemeConfig& cfg);

struct MetricRow {
    double t = 0.0;
    double area = 0.0;
    double energy = 0.0;
    double mesh_ratio = 0.0;
    int newton_iters = 0;
};

struct Snapshot {
    double requested_t = 0.0;
    double t = 0.0;
    std::size_t step = 0;
    PolygonalCurve curve;
};

struct Trajectory {
    std::vector<MetricRow> rows;
    std::vector<Snapshot> snapshots;
    PolygonalCurve final_curve;
    std::vector<double> final_mu;

    [[nodiscard]] std::string metrics_csv() const;
    [[nodiscard]] const Snapshot* snapshot_near(double t) const;
};

// Number of uniform steps used to reach t_end: ceil(t_end / tau) with a
// 1e-9 relative allowance for representable ratios.
[[nodiscard]] std::size_t step_count(double t_end, double tau);

// Called after every accepted step with (step index, time, result).
using StepObserver = std::function<void(std::size_t, double, const StepResult&)>;

// Repeated time_step to t_end. Snapshots are taken at the step nearest each
// requested time (t = 0 included when requested). From the second step on,
// Newton starts from 2X^m - X^{m-1} when that guess has the smaller residual,
// falling back to X^m. Step failures are rethrown as StepFailure annotated
// with the step index and time.
[[nodiscard]] Trajectory evolve(const PolygonalCurve& c0, const SchemeConfig& cfg, double t_end,
                                std::span<const double> snapshot_times = {}, const StepObserver& observer = {});

}  // namespace aniso
