#include "aniso/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseLU>

#include "aniso/errors.hpp"
#include "aniso/io.hpp"

namespace aniso {

void SchemeConfig::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ContractViolation("time step tau must be positive");
    if (!(newton_tol > 0.0)) throw ContractViolation("newton_tol must be positive");
    if (newton_max_iter < 1) throw ContractViolation("newton_max_iter must be >= 1");
}

double mass_lumped_inner(const PolygonalCurve& c, Sampled f, Sampled g) {
    const std::size_t n = c.size();
    if (f.values.size() != n || g.values.size() != n) {
        throw ContractViolation("mass_lumped_inner: sample count must equal the number of vertices/edges");
    }
    // Value of the sampled function on edge j at its start / end vertex.
    auto at = [n](const Sampled& s, std::size_t j, bool end) {
        if (s.kind == Sampled::Kind::edge) return s.values[j];
        return s.values[end ? (j + 1) % n : j];
    };
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double len = norm(c.edge(j));
        sum += 0.5 * len * (at(f, j, true) * at(g, j, true) + at(f, j, false) * at(g, j, false));
    }
    return sum;
}

namespace {

template <class T>
std::vector<T> ds_impl(const PolygonalCurve& c, std::span<const T> f) {
    const std::size_t n = c.size();
    if (f.size() != n) throw ContractViolation("discrete_ds: one value per vertex required");
    std::vector<T> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double len = norm(c.edge(j));
        if (!(len > 0.0)) throw DegenerateMeshError("zero-length edge " + std::to_string(j));
        out[j] = (f[(j + 1) % n] - f[j]) / len;
    }
    return out;
}

}  // namespace

std::vector<double> discrete_ds(const PolygonalCurve& c, std::span<const double> f) { return ds_impl(c, f); }
std::vector<Vec2> discrete_ds(const PolygonalCurve& c, std::span<const Vec2> f) { return ds_impl(c, f); }

std::vector<Vec2> midstep_normal(const PolygonalCurve& c_old, std::span<const Vec2> x_new) {
    const std::size_t n = c_old.size();
    if (x_new.size() != n) throw ContractViolation("midstep_normal: one position per vertex required");
    std::vector<Vec2> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Vec2 h_old = c_old.edge(j);
        const double len = norm(h_old);
        if (!(len > 0.0)) throw DegenerateMeshError("zero-length edge " + std::to_string(j));
        const Vec2 h_new = x_new[(j + 1) % n] - x_new[j];
        out[j] = -perp(h_old + h_new) / (2.0 * len);
    }
    return out;
}

StepOperator::StepOperator(const PolygonalCurve& c_old, const SchemeConfig& cfg, NormalMode mode)
    : layout_{c_old.size()}, mode_(mode), tau_(cfg.tau), x_old_(c_old.vertices()) {
    cfg.validate();
    const std::size_t n = c_old.size();
    h_old_.resize(n);
    len_old_.resize(n);
    z_.resize(n);
    for (std::size_t e = 0; e < n; ++e) {
        const Vec2 h = c_old.edge(e);
        const double len = norm(h);
        if (!(len > 0.0)) throw DegenerateMeshError("zero-length edge " + std::to_string(e));
        const double theta = std::atan2(h.y, h.x);
        h_old_[e] = h;
        len_old_[e] = len;
        z_[e] = surface_energy_matrix(cfg.anisotropy.eval(theta), theta, cfg.k_profile(theta));
    }
}

Eigen::VectorXd StepOperator::pack(std::span<const Vec2> x, std::span<const double> mu) const {
    const std::size_t n = layout_.n;
    if (x.size() != n || mu.size() != n) throw ContractViolation("pack: size mismatch");
    Eigen::VectorXd z(layout_.size());
    for (std::size_t i = 0; i < n; ++i) {
        z[layout_.x(i, 0)] = x[i].x;
        z[layout_.x(i, 1)] = x[i].y;
        z[layout_.mu(i)] = mu[i];
    }
    return z;
}

void StepOperator::unpack(const Eigen::VectorXd& z, std::vector<Vec2>& x, std::vector<double>& mu) const {
    const std::size_t n = layout_.n;
    x.resize(n);
    mu.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = {z[layout_.x(i, 0)], z[layout_.x(i, 1)]};
        mu[i] = z[layout_.mu(i)];
    }
}

namespace {

struct EdgeTerms {
    std::vector<Vec2> w;      // |h_e^m| n_e, normal weight per edge
    std::vector<Vec2> flux;   // Zhat_e h_e^{new} / |h_e^m|
    std::vector<double> dmu;  // (mu_{e+1} - mu_e) / |h_e^m|
};

}  // namespace

Eigen::VectorXd StepOperator::residual(const Eigen::VectorXd& z) const {
    return assemble_impl(z, false).residual;
}

Assembled StepOperator::assemble(const Eigen::VectorXd& z) const { return assemble_impl(z, true); }

Assembled StepOperator::assemble_impl(const Eigen::VectorXd& z, bool with_jacobian) const {
    const std::size_t n = layout_.n;
    const SystemLayout& L = layout_;
    if (static_cast<std::size_t>(z.size()) != L.size()) throw ContractViolation("assemble: state size mismatch");

    auto X = [&](std::size_t i) { return Vec2{z[L.x(i, 0)], z[L.x(i, 1)]}; };
    auto mu = [&](std::size_t i) { return z[L.mu(i)]; };

    EdgeTerms et;
    et.w.resize(n);
    et.flux.resize(n);
    et.dmu.resize(n);
    for (std::size_t e = 0; e < n; ++e) {
        const std::size_t e1 = (e + 1) % n;
        const Vec2 h_new = X(e1) - X(e);
        et.w[e] = mode_ == NormalMode::midstep ? 0.5 * rot90(h_old_[e] + h_new) : rot90(h_old_[e]);
        et.flux[e] = z_[e] * h_new / len_old_[e];
        et.dmu[e] = (mu(e1) - mu(e)) / len_old_[e];
    }

    Assembled out;
    out.residual.resize(static_cast<Eigen::Index>(L.size()));
    std::vector<Eigen::Triplet<double>> trip;
    if (with_jacobian) trip.reserve(n * 33);
    auto add = [&](std::size_t r, std::size_t c, double v) {
        if (with_jacobian) trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
    };

    const bool midstep = mode_ == NormalMode::midstep;
    const double tau = tau_;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ep = (i + n - 1) % n;  // edge ending at i
        const std::size_t en = i;                // edge starting at i
        const std::size_t ip = ep;
        const std::size_t in = (i + 1) % n;
        const Vec2 wi = 0.5 * (et.w[ep] + et.w[en]);
        const Vec2 d = X(i) - x_old_[i];
        const double lp = len_old_[ep];
        const double ln = len_old_[en];

        // Kinematic row, multiplied through by tau:
        // (n . (X - X^m), phi_i)^h + tau (d_s mu, d_s phi_i)^h
        const std::size_t r1 = L.row_kinematic(i);
        out.residual[static_cast<Eigen::Index>(r1)] = dot(wi, d) + tau * (et.dmu[ep] - et.dmu[en]);
        add(r1, L.x(i, 0), wi.x);
        add(r1, L.x(i, 1), wi.y);
        if (midstep) {
            // dW_i/dX_{i+1} = J/4, dW_i/dX_{i-1} = -J/4, with d^T J = (d_y, -d_x).
            const double q = 0.25;
            add(r1, L.x(in, 0), q * d.y);
            add(r1, L.x(in, 1), -q * d.x);
            add(r1, L.x(ip, 0), -q * d.y);
            add(r1, L.x(ip, 1), q * d.x);
        }
        add(r1, L.mu(ip), -tau / lp);
        add(r1, L.mu(i), tau / lp + tau / ln);
        add(r1, L.mu(in), -tau / ln);

        // Curvature rows: (mu n, omega_i)^h - (Zhat d_s X, d_s omega_i)^h
        const Vec2 r2 = mu(i) * wi - et.flux[ep] + et.flux[en];
        const Mat2& zp = z_[ep];
        const Mat2& zn = z_[en];
        const double mi = mu(i);
        for (int comp = 0; comp < 2; ++comp) {
            const std::size_t row = L.row_curvature(i, comp);
            out.residual[static_cast<Eigen::Index>(row)] = comp == 0 ? r2.x : r2.y;
            const double zp0 = comp == 0 ? zp.a00 : zp.a10;
            const double zp1 = comp == 0 ? zp.a01 : zp.a11;
            const double zn0 = comp == 0 ? zn.a00 : zn.a10;
            const double zn1 = comp == 0 ? zn.a01 : zn.a11;
            add(row, L.mu(i), comp == 0 ? wi.x : wi.y);
            add(row, L.x(ip, 0), zp0 / lp);
            add(row, L.x(ip, 1), zp1 / lp);
            add(row, L.x(i, 0), -zp0 / lp - zn0 / ln);
            add(row, L.x(i, 1), -zp1 / lp - zn1 / ln);
            add(row, L.x(in, 0), zn0 / ln);
            add(row, L.x(in, 1), zn1 / ln);
            if (midstep) {
                // mu_i dW_i/dX_{i+-1} = +-(mu_i/4) J, J = [[0, -1], [1, 0]].
                const double q = 0.25 * mi;
                const double j0 = comp == 0 ? 0.0 : 1.0;
                const double j1 = comp == 0 ? -1.0 : 0.0;
                add(row, L.x(in, 0), q * j0);
                add(row, L.x(in, 1), q * j1);
                add(row, L.x(ip, 0), -q * j0);
                add(row, L.x(ip, 1), -q * j1);
            }
        }
    }
    for (Eigen::Index k = 0; k < out.residual.size(); ++k) {
        if (!std::isfinite(out.residual[k])) throw DegenerateMeshError("non-finite residual entry");
    }
    if (with_jacobian) {
        const auto dim = static_cast<Eigen::Index>(L.size());
        out.jacobian.resize(dim, dim);
        out.jacobian.setFromTriplets(trip.begin(), trip.end());
    }
    return out;
}

Assembled assemble_residual_and_jacobian(const PolygonalCurve& c_old, std::span<const Vec2> x_guess,
                                         std::span<const double> mu_guess, const SchemeConfig& cfg) {
    StepOperator op(c_old, cfg);
    return op.assemble(op.pack(x_guess, mu_guess));
}

namespace {

using Lu = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Newton on the step system. `lu` keeps its symbolic analysis between calls
// while the pattern (N) is unchanged. Stops when the residual or the update
// reaches newton_tol in max-norm.

StepResult newton(const StepOperator& op, Eigen::VectorXd z, const SchemeConfig& cfg, Lu& lu, bool& analyzed) {
    double res = 0.0;
    int it = 0;
    while (true) {
        Assembled sys = op.assemble(z);
        if (!analyzed) {
            lu.analyzePattern(sys.jacobian);
            analyzed = true;
        }
        lu.factorize(sys.jacobian);
        if (lu.info() != Eigen::Success) {
            throw StepFailure("singular Newton matrix: " + lu.lastErrorMessage(), max_abs(sys.residual), it);
        }
        const Eigen::VectorXd delta = lu.solve(sys.residual);
        z -= delta;
        ++it;
        res = max_abs(op.residual(z));
        if (!std::isfinite(res)) throw StepFailure("Newton produced a non-finite residual", res, it);
        if (res <= cfg.newton_tol || max_abs(delta) <= cfg.newton_tol) break;
        if (it >= cfg.newton_max_iter) {
            std::ostringstream os;
            os << "Newton did not converge in " << it << " iterations (residual " << res << ")";
            throw StepFailure(os.str(), res, it);
        }
    }
    std::vector<Vec2> x;
    std::vector<double> mu;
    op.unpack(z, x, mu);
    return StepResult{PolygonalCurve(std::move(x)), std::move(mu), it, res};
}

StepResult frozen_step_impl(const PolygonalCurve& c_old, const SchemeConfig& cfg, Lu& lu) {
    StepOperator op(c_old, cfg, NormalMode::frozen);
    const std::vector<double> mu0(c_old.size(), 0.0);
    bool analyzed = false;
    return newton(op, op.pack(c_old.vertices(), mu0), cfg, lu, analyzed);
}

// x_prev (X^{m-1}, optional) enables the extrapolated guess 2X^m - X^{m-1};
// it is used only when its residual is smaller than that of X^m, and the
// plain guess is retried if Newton fails from it.
StepResult time_step_impl(const PolygonalCurve& c_old, std::span<const double> mu_prev,
                          std::span<const Vec2> x_prev, const SchemeConfig& cfg, Lu& lu, bool& analyzed) {
    std::vector<double> seed;
    if (mu_prev.empty()) {
        Lu pre;
        seed = frozen_step_impl(c_old, cfg, pre).mu;
        mu_prev = seed;
    }
    StepOperator op(c_old, cfg, NormalMode::midstep);
    const Eigen::VectorXd plain = op.pack(c_old.vertices(), mu_prev);
    if (x_prev.size() == c_old.size()) {
        std::vector<Vec2> guess(c_old.vertices());
        for (std::size_t i = 0; i < guess.size(); ++i) guess[i] = 2.0 * guess[i] - x_prev[i];
        const Eigen::VectorXd extrap = op.pack(guess, mu_prev);
        if (max_abs(op.residual(extrap)) < max_abs(op.residual(plain))) {
            try {
                return newton(op, extrap, cfg, lu, analyzed);
            } catch (const StepFailure&) {
            }
        }
    }
    return newton(op, plain, cfg, lu, analyzed);
}

}  // namespace

StepResult frozen_normal_step(const PolygonalCurve& c_old, const SchemeConfig& cfg) {
    Lu lu;
    return frozen_step_impl(c_old, cfg, lu);
}

StepResult time_step(const PolygonalCurve& c_old, std::span<const double> mu_prev, const SchemeConfig& cfg) {
    Lu lu;
    bool analyzed = false;
    return time_step_impl(c_old, mu_prev, {}, cfg, lu, analyzed);
}

std::size_t step_count(double t_end, double tau) {
    if (!(t_end > 0.0)) throw ContractViolation("t_end must be positive");
    if (!(tau > 0.0)) throw ContractViolation("tau must be positive");
    const double ratio = t_end / tau;
    const double r = std::round(ratio);
    if (std::abs(ratio - r) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(ratio));
}

std::string Trajectory::metrics_csv() const {
    std::string out = "t,area,energy,mesh_ratio,newton_iters\n";
    for (const MetricRow& r : rows) {
        out += format_double(r.t) + ',' + format_double(r.area) + ',' + format_double(r.energy) + ',' +
               format_double(r.mesh_ratio) + ',' + std::to_string(r.newton_iters) + '\n';
    }
    return out;
}

const Snapshot* Trajectory::snapshot_near(double t) const {
    const Snapshot* best = nullptr;
    for (const Snapshot& s : snapshots) {
        if (!best || std::abs(s.requested_t - t) < std::abs(best->requested_t - t)) best = &s;
    }
    return best;
}

Trajectory evolve(const PolygonalCurve& c0, const SchemeConfig& cfg, double t_end,
                  std::span<const double> snapshot_times, const StepObserver& observer) {
    cfg.validate();
    const std::size_t steps = step_count(t_end, cfg.tau);
    const Anisotropy& a = cfg.anisotropy;

    // Requested snapshot -> nearest step index.
    std::vector<std::pair<std::size_t, double>> wanted;
    for (double ts : snapshot_times) {
        if (!std::isfinite(ts) || ts < 0.0) throw ContractViolation("snapshot times must be finite and >= 0");
        const auto idx = static_cast<std::size_t>(std::min<double>(std::round(ts / cfg.tau), static_cast<double>(steps)));
        wanted.emplace_back(idx, ts);
    }
    std::sort(wanted.begin(), wanted.end());

    Trajectory traj{{}, {}, c0, {}};
    traj.rows.reserve(steps + 1);
    traj.rows.push_back({0.0, enclosed_area(c0), total_energy(c0, a), weighted_mesh_ratio(c0, a), 0});
    std::size_t next_snap = 0;
    auto take_snapshots = [&](std::size_t step, double t, const PolygonalCurve& c) {
        while (next_snap < wanted.size() && wanted[next_snap].first == step) {
            traj.snapshots.push_back({wanted[next_snap].second, t, step, c});
            ++next_snap;
        }
    };
    take_snapshots(0, 0.0, c0);

    Lu lu;
    bool analyzed = false;
    PolygonalCurve cur = c0;
    std::vector<Vec2> prev;
    std::vector<double> mu;
    for (std::size_t m = 0; m < steps; ++m) {
        const double t = static_cast<double>(m + 1) * cfg.tau;
        StepResult r = [&] {
            try {
                return time_step_impl(cur, mu, prev, cfg, lu, analyzed);
            } catch (const StepFailure& f) {
                std::ostringstream os;
                os << "step " << m + 1 << " (t=" << t << "): " << f.what();
                throw StepFailure(os.str(), f.residual, f.iters);
            } catch (const std::exception& e) {
                std::ostringstream os;
                os << "step " << m + 1 << " (t=" << t << "): " << e.what();
                throw StepFailure(os.str(), std::numeric_limits<double>::quiet_NaN(), 0);
            }
        }();
        traj.rows.push_back({t, enclosed_area(r.curve), total_energy(r.curve, a),
                             weighted_mesh_ratio(r.curve, a), r.newton_iters});
        take_snapshots(m + 1, t, r.curve);
        if (observer) observer(m + 1, t, r);
        prev = cur.vertices();
        cur = r.curve;
        mu = std::move(r.mu);
    }
    traj.final_curve = cur;
    traj.final_mu = std::move(mu);
    return traj;
}

}  // namespace aniso
