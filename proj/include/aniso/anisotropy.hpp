#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "aniso/vec2.hpp"

namespace aniso {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Reduce an angle modulo 2*pi into [-pi, pi).
double wrap_angle(double theta);

inline Vec2 unit_tangent(double theta) { return {std::cos(theta), std::sin(theta)}; }
inline Vec2 unit_normal(double theta) { return {-std::sin(theta), std::cos(theta)}; }

struct GammaValues {
    double value = 0.0;   // gamma(theta)
    double d1 = 0.0;      // gamma'(theta)
    double d2 = 0.0;      // gamma''(theta)
};

namespace family {
struct Isotropic {};
// 1 + beta cos(m (theta - theta0))
struct MFold {
    double beta = 0.0;
    int m = 1;
    double theta0 = 0.0;
};
// sqrt((5/2 + 3/2 sgn(n1)) n1^2 + n2^2), n = (-sin theta, cos theta), sgn(0) = +1.
struct PiecewiseBgn {};
// 1 + sqrt(eps^2 + (1 - eps^2) sin^2(m theta / 2))
struct RegularizedCrystalline {
    double eps = 0.1;
    int m = 1;
};
struct User {
    std::function<double(double)> gamma;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
    std::string label;
};
}  // namespace family

enum class Regularity { smooth, piecewise_c2 };

// Surface energy density gamma(theta) with derivatives. Immutable after
// construction; copies share the (stateless) family description.
class Anisotropy {
public:
    using Family = std::variant<family::Isotropic, family::MFold, family::PiecewiseBgn,
                                family::RegularizedCrystalline, family::User>;

    static Anisotropy isotropic();
    static Anisotropy m_fold(double beta, int m, double theta0 = 0.0);
    static Anisotropy piecewise_bgn();
    static Anisotropy regularized_crystalline(double eps, int m);
    static Anisotropy user(std::function<double(double)> gamma, std::function<double(double)> d1,
                           std::function<double(double)> d2, std::string label = "user");

    // Throws DomainError for non-finite theta, EvaluationError for non-finite
    // user output.
    [[nodiscard]] GammaValues eval(double theta) const;
    [[nodiscard]] double gamma(double theta) const { return eval(theta).value; }

    [[nodiscard]] const Family& family() const { return *family_; }
    [[nodiscard]] Regularity regularity() const;
    [[nodiscard]] std::string name() const;

    // Largest |gamma''| seen on the 2^14-point scan, without safety factor.
    [[nodiscard]] double observed_sup_d2() const { return observed_sup_d2_; }
    // observed_sup_d2() * 1.001; the constant used by the closed-form bound.
    [[nodiscard]] double sup_d2() const { return observed_sup_d2_ * 1.001; }

private:
    explicit Anisotropy(Family f);

    std::shared_ptr<const Family> family_;
    double observed_sup_d2_ = 0.0;
};

inline constexpr std::size_t kSupScanSamples = std::size_t{1} << 14;

[[nodiscard]] GammaValues gamma_eval(const Anisotropy& a, double theta);

struct StabilityCheck {
    bool holds = false;
    double margin = 0.0;    // min over grid of 3 gamma(theta) - gamma(theta - pi)
    double argmin = 0.0;
};

// Requires grid_size >= 64.
[[nodiscard]] StabilityCheck stability_condition(const Anisotropy& a, std::size_t grid_size = 4096);

// Zhat_k(theta) = gamma I + gamma' L_theta + k n n^T.
[[nodiscard]] Mat2 surface_energy_matrix(const Anisotropy& a, double theta, double k);
[[nodiscard]] Mat2 surface_energy_matrix(const GammaValues& g, double theta, double k);

[[nodiscard]] double aux_P(const Anisotropy& a, double alpha, double phi, double theta);
[[nodiscard]] double aux_Q(const Anisotropy& a, double phi, double theta);

// (pi^2 / 8)(5 sup|gamma''| + 5 |gamma'(theta)| + gamma(theta)). Rejects a
// sup_gamma2 below the scanned supremum.
[[nodiscard]] double amplitude_A(const Anisotropy& a, double theta, double sup_gamma2);

// K(theta) = [A^2 + 4 gamma A + 4 gamma'^2] / (4 gamma).
[[nodiscard]] double k0_upper_bound(const Anisotropy& a, double theta);
[[nodiscard]] double k0_upper_bound(const Anisotropy& a, double theta, double sup_gamma2);

struct K0Options {
    std::size_t phi_grid = 4096;
    double tol = 1e-10;
};

// Smallest alpha >= 0 with 4 gamma P_alpha >= Q^2 for all phi: bisection on
// [0, K(theta)] over a uniform phi grid, then golden-section refinement of the
// grid's local maxima of the alpha each phi requires.
[[nodiscard]] double solve_k0(const Anisotropy& a, double theta, K0Options opts = {});

struct K0Solution {
    double k0 = 0.0;
    double binding_phi = 0.0;  // phi where the constraint is active; NaN when k0 = 0
};
[[nodiscard]] K0Solution solve_k0_detailed(const Anisotropy& a, double theta, K0Options opts = {});

enum class ProfileSource { solved_k0, closed_form_K, constant, user };

// Piecewise-linear, 2*pi-periodic k(theta) sampled on [-pi, pi].
class StabilizingProfile {
public:
    struct Sample {
        double theta;
        double k;
    };

    StabilizingProfile() = default;
    // Samples must be strictly increasing in theta and span exactly [-pi, pi];
    // the last value is forced equal to the first.
    StabilizingProfile(std::vector<Sample> samples, ProfileSource source);

    static StabilizingProfile constant(double k);

    [[nodiscard]] double operator()(double theta) const;
    [[nodiscard]] const std::vector<Sample>& samples() const { return samples_; }
    [[nodiscard]] ProfileSource source() const { return source_; }

private:
    std::vector<Sample> samples_;
    ProfileSource source_ = ProfileSource::constant;
    double constant_ = 0.0;
};

[[nodiscard]] const char* to_string(ProfileSource s);

// Uniform theta_j = -pi + 2 pi j / (n - 1); n >= 21.
[[nodiscard]] StabilizingProfile k0_profile(const Anisotropy& a, std::size_t n_samples = 21,
                                            K0Options opts = {});
[[nodiscard]] StabilizingProfile upper_bound_profile(const Anisotropy& a, std::size_t n_samples = 21);

}  // namespace aniso
