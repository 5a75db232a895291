#include "aniso/anisotropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "aniso/errors.hpp"

namespace aniso {

double wrap_angle(double theta) {
    double r = std::remainder(theta, kTwoPi);
    if (r >= kPi) r -= kTwoPi;
    return r;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

GammaValues eval_family(const Anisotropy::Family& f, double theta) {
    return std::visit(
        overloaded{
            [](const family::Isotropic&) { return GammaValues{1.0, 0.0, 0.0}; },
            [theta](const family::MFold& p) {
                const double arg = p.m * (theta - p.theta0);
                const double c = std::cos(arg);
                const double s = std::sin(arg);
                const double m = p.m;
                return GammaValues{1.0 + p.beta * c, -p.beta * m * s, -p.beta * m * m * c};
            },
            [theta](const family::PiecewiseBgn&) {
                const double s = std::sin(theta);
                const double c = std::cos(theta);
                const double n1 = -s;
                // sgn(0) = +1
                const double coef = n1 >= 0.0 ? 4.0 : 1.0;
                const double g = std::sqrt(coef * s * s + c * c);
                const double g1 = (coef - 1.0) * s * c / g;
                const double g2 = ((coef - 1.0) * (c * c - s * s) - g1 * g1) / g;
                return GammaValues{g, g1, g2};
            },
            [theta](const family::RegularizedCrystalline& p) {
                const double m = p.m;
                const double e2 = p.eps * p.eps;
                const double s = std::sin(0.5 * m * theta);
                const double g = e2 + (1.0 - e2) * s * s;
                const double g1 = (1.0 - e2) * 0.5 * m * std::sin(m * theta);
                const double g2 = (1.0 - e2) * 0.5 * m * m * std::cos(m * theta);
                const double r = std::sqrt(g);
                return GammaValues{1.0 + r, g1 / (2.0 * r), g2 / (2.0 * r) - g1 * g1 / (4.0 * g * r)};
            },
            [theta](const family::User& u) {
                GammaValues v{u.gamma(theta), u.d1(theta), u.d2(theta)};
                if (!std::isfinite(v.value) || !std::isfinite(v.d1) || !std::isfinite(v.d2)) {
                    throw EvaluationError("user anisotropy '" + u.label +
                                          "' returned a non-finite value");
                }
                return v;
            },
        },
        f);
}

}  // namespace

Anisotropy::Anisotropy(Family f) : family_(std::make_shared<const Family>(std::move(f))) {
    double sup = 0.0;
    for (std::size_t j = 0; j < kSupScanSamples; ++j) {
        const double theta = -kPi + kTwoPi * static_cast<double>(j) / kSupScanSamples;
        const GammaValues v = eval(theta);
        if (!(v.value > 0.0)) {
            std::ostringstream os;
            os << "surface energy density is not positive at theta=" << theta << " (" << v.value << ")";
            throw DomainError(os.str());
        }
        sup = std::max(sup, std::abs(v.d2));
    }
    observed_sup_d2_ = sup;
}

Anisotropy Anisotropy::isotropic() { return Anisotropy(family::Isotropic{}); }

Anisotropy Anisotropy::m_fold(double beta, int m, double theta0) {
    if (m < 1) throw ContractViolation("m-fold anisotropy needs m >= 1");
    if (!std::isfinite(beta) || !std::isfinite(theta0)) throw DomainError("non-finite m-fold parameter");
    return Anisotropy(family::MFold{beta, m, theta0});
}

Anisotropy Anisotropy::piecewise_bgn() { return Anisotropy(family::PiecewiseBgn{}); }

Anisotropy Anisotropy::regularized_crystalline(double eps, int m) {
    if (m < 1) throw ContractViolation("regularized crystalline anisotropy needs m >= 1");
    if (!(eps > 0.0) || !(eps <= 1.0)) throw DomainError("regularized crystalline needs 0 < eps <= 1");
    return Anisotropy(family::RegularizedCrystalline{eps, m});
}

Anisotropy Anisotropy::user(std::function<double(double)> gamma, std::function<double(double)> d1,
                            std::function<double(double)> d2, std::string label) {
    if (!gamma || !d1 || !d2) throw ContractViolation("user anisotropy needs gamma, gamma', gamma''");
    return Anisotropy(family::User{std::move(gamma), std::move(d1), std::move(d2), std::move(label)});
}

GammaValues Anisotropy::eval(double theta) const {
    if (!std::isfinite(theta)) throw DomainError("non-finite angle");
    return eval_family(*family_, wrap_angle(theta));
}

Regularity Anisotropy::regularity() const {
    return std::holds_alternative<family::PiecewiseBgn>(*family_) ? Regularity::piecewise_c2
                                                                   : Regularity::smooth;
}

std::string Anisotropy::name() const {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const family::Isotropic&) { os << "isotropic"; },
                   [&](const family::MFold& p) {
                       os << "m_fold(beta=" << p.beta << ",m=" << p.m << ",theta0=" << p.theta0 << ")";
                   },
                   [&](const family::PiecewiseBgn&) { os << "piecewise_bgn"; },
                   [&](const family::RegularizedCrystalline& p) {
                       os << "regularized_crystalline(eps=" << p.eps << ",m=" << p.m << ")";
                   },
                   [&](const family::User& u) { os << u.label; },
               },
               *family_);
    return os.str();
}

GammaValues gamma_eval(const Anisotropy& a, double theta) { return a.eval(theta); }

StabilityCheck stability_condition(const Anisotropy& a, std::size_t grid_size) {
    if (grid_size < 64) throw ContractViolation("stability_condition needs grid_size >= 64");
    StabilityCheck out;
    out.margin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid_size; ++j) {
        const double theta = -kPi + kTwoPi * static_cast<double>(j) / grid_size;
        const double m = 3.0 * a.gamma(theta) - a.gamma(theta - kPi);
        if (m < out.margin) {
            out.margin = m;
            out.argmin = theta;
        }
    }
    out.holds = out.margin >= -1e-12;
    return out;
}

Mat2 surface_energy_matrix(const GammaValues& g, double theta, double k) {
    if (!(k >= 0.0)) throw ContractViolation("stabilizing function must be non-negative");
    const double s2 = std::sin(2.0 * theta);
    const double c2 = std::cos(2.0 * theta);
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    Mat2 z;
    z.a00 = g.value - g.d1 * s2 + k * s * s;
    z.a01 = g.d1 * c2 - k * c * s;
    z.a10 = z.a01;
    z.a11 = g.value + g.d1 * s2 + k * c * c;
    return z;
}

Mat2 surface_energy_matrix(const Anisotropy& a, double theta, double k) {
    return surface_energy_matrix(a.eval(theta), theta, k);
}

double aux_P(const Anisotropy& a, double alpha, double phi, double theta) {
    const GammaValues g = a.eval(theta);
    const double s = std::sin(phi);
    return g.value - g.d1 * std::sin(2.0 * phi) + alpha * s * s;
}

double aux_Q(const Anisotropy& a, double phi, double theta) {
    const GammaValues g = a.eval(theta);
    return a.gamma(theta - phi) + g.value * std::cos(phi) - g.d1 * std::sin(phi);
}

double amplitude_A(const Anisotropy& a, double theta, double sup_gamma2) {
    if (sup_gamma2 < a.observed_sup_d2()) {
        throw ContractViolation("sup_gamma2 is below the scanned supremum of |gamma''|");
    }
    const GammaValues g = a.eval(theta);
    return kPi * kPi / 8.0 * (5.0 * sup_gamma2 + 5.0 * std::abs(g.d1) + g.value);
}

double k0_upper_bound(const Anisotropy& a, double theta, double sup_gamma2) {
    const GammaValues g = a.eval(theta);
    if (!(g.value > 0.0)) throw DomainError("k0 bound needs gamma(theta) > 0");
    const double amp = amplitude_A(a, theta, sup_gamma2);
    return (amp * amp + 4.0 * g.value * amp + 4.0 * g.d1 * g.d1) / (4.0 * g.value);
}

double k0_upper_bound(const Anisotropy& a, double theta) { return k0_upper_bound(a, theta, a.sup_d2()); }

K0Solution solve_k0_detailed(const Anisotropy& a, double theta, K0Options opts) {
    if (opts.phi_grid < 1024) throw ContractViolation("solve_k0 needs phi_grid >= 1024");
    if (!(opts.tol > 0.0)) throw ContractViolation("solve_k0 needs tol > 0");

    const GammaValues g = a.eval(theta);
    const std::size_t n = opts.phi_grid;
    auto terms = [&](double phi, double& base, double& slope, double& q) {
        const double s = std::sin(phi);
        const double p0 = g.value - g.d1 * std::sin(2.0 * phi);
        q = a.gamma(theta - phi) + g.value * std::cos(phi) - g.d1 * s;
        base = 4.0 * g.value * p0 - q * q;
        slope = 4.0 * g.value * s * s;
    };
    // Smallest alpha that satisfies the inequality at a single phi. Close to
    // phi = 0 the ratio is lost to cancellation; the limit below covers it.
    constexpr double kMinSin = 3e-3;
    auto required = [&](double phi) {
        double base, slope, q;
        terms(phi, base, slope, q);
        if (std::abs(std::sin(phi)) < kMinSin) return -std::numeric_limits<double>::infinity();
        return -base / slope;
    };

    // Per grid point: 4 gamma P_0 - Q^2, the coefficient 4 gamma sin^2(phi), and a
    // round-off allowance.
    std::vector<double> phis(n), base(n), slope(n), slack(n);
    for (std::size_t i = 0; i < n; ++i) {
        phis[i] = -kPi + kTwoPi * static_cast<double>(i) / n;
        double q;
        terms(phis[i], base[i], slope[i], q);
        slack[i] = 4e-15 * (1.0 + q * q);
    }
    auto feasible = [&](double alpha) {
        for (std::size_t i = 0; i < n; ++i) {
            if (base[i] + alpha * slope[i] < -slack[i]) return false;
        }
        return true;
    };

    if (feasible(0.0)) return {0.0, std::numeric_limits<double>::quiet_NaN()};
    const double bound = k0_upper_bound(a, theta);
    double hi = bound * (1.0 + 1e-6);
    if (!feasible(hi)) {
        std::ostringstream os;
        os << "k0 infeasible at the closed-form bound K=" << bound << " for theta=" << theta
           << " (" << a.name() << ")";
        throw InconsistencyError(os.str());
    }
    double lo = 0.0;
    while (hi - lo > opts.tol) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }

    // The binding phi generally falls between grid points: refine every
    // significant local maximum of the required alpha by golden section.
    std::vector<double> req(n);
    double rmax = -std::numeric_limits<double>::infinity();
    std::size_t imax = 0;
    for (std::size_t i = 0; i < n; ++i) {
        req[i] = std::abs(std::sin(phis[i])) < kMinSin ? -std::numeric_limits<double>::infinity()
                                                        : -base[i] / slope[i];
        if (req[i] > rmax) {
            rmax = req[i];
            imax = i;
        }
    }
    double best = rmax;
    double best_phi = phis[imax];
    const double step = kTwoPi / n;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = req[i];
        if (!(r >= 0.5 * rmax) || r < req[(i + n - 1) % n] || r < req[(i + 1) % n]) continue;
        double x0 = phis[i] - step;
        double x1 = phis[i] + step;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = x1 - gr * (x1 - x0);
        double d = x0 + gr * (x1 - x0);
        double fc = required(c);
        double fd = required(d);
        for (int it = 0; it < 80; ++it) {
            if (fc > fd) {
                x1 = d;
                d = c;
                fd = fc;
                c = x1 - gr * (x1 - x0);
                fc = required(c);
            } else {
                x0 = c;
                c = d;
                fc = fd;
                d = x0 + gr * (x1 - x0);
                fd = required(d);
            }
        }
        const double xm = 0.5 * (x0 + x1);
        const double fm = required(xm);
        if (fm > best) {
            best = fm;
            best_phi = xm;
        }
    }
    // phi -> 0 limit, where 4 gamma P_0 - Q^2 and sin^2 phi both vanish to
    // second order. One-sided gamma'' covers piecewise densities.
    for (double side : {-1e-9, 1e-9}) {
        const double g2 = a.eval(theta - side).d2;
        const double lim = (4.0 * g.d1 * g.d1 + 2.0 * g.value * (g2 - g.value)) / (4.0 * g.value);
        if (lim > best) {
            best = lim;
            best_phi = 0.0;
        }
    }
    const double k0 = std::max(hi, best);
    if (k0 > bound * (1.0 + 1e-6)) {
        std::ostringstream os;
        os << "k0 = " << k0 << " exceeds the closed-form bound K=" << bound << " for theta=" << theta << " ("
           << a.name() << ")";
        throw InconsistencyError(os.str());
    }
    return {k0, wrap_angle(best_phi)};
}

double solve_k0(const Anisotropy& a, double theta, K0Options opts) { return solve_k0_detailed(a, theta, opts).k0; }

StabilizingProfile::StabilizingProfile(std::vector<Sample> samples, ProfileSource source)
    : samples_(std::move(samples)), source_(source) {
    if (samples_.size() < 2) throw ContractViolation("profile needs at least two samples");
    if (std::abs(samples_.front().theta + kPi) > 1e-12 || std::abs(samples_.back().theta - kPi) > 1e-12) {
        throw ContractViolation("profile samples must span [-pi, pi]");
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (!(samples_[i].k >= 0.0) || !std::isfinite(samples_[i].k)) {
            throw ContractViolation("profile values must be finite and non-negative");
        }
        if (i > 0 && !(samples_[i].theta > samples_[i - 1].theta)) {
            throw ContractViolation("profile angles must be strictly increasing");
        }
    }
    samples_.front().theta = -kPi;
    samples_.back().theta = kPi;
    samples_.back().k = samples_.front().k;
}

StabilizingProfile StabilizingProfile::constant(double k) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw ContractViolation("constant k must be finite and >= 0");
    StabilizingProfile p;
    p.constant_ = k;
    p.source_ = ProfileSource::constant;
    return p;
}

double StabilizingProfile::operator()(double theta) const {
    if (samples_.empty()) return constant_;
    const double t = wrap_angle(theta);
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double v, const Sample& s) { return v < s.theta; });
    if (it == samples_.begin()) return samples_.front().k;
    if (it == samples_.end()) return samples_.back().k;
    const Sample& b = *it;
    const Sample& l = *(it - 1);
    const double w = (t - l.theta) / (b.theta - l.theta);
    return l.k + w * (b.k - l.k);
}

const char* to_string(ProfileSource s) {
    switch (s) {
        case ProfileSource::solved_k0: return "solved_k0";
        case ProfileSource::closed_form_K: return "closed_form_K";
        case ProfileSource::constant: return "constant";
        case ProfileSource::user: return "user";
    }
    return "unknown";
}

namespace {

std::vector<double> profile_angles(std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t j = 0; j < n; ++j) t[j] = -kPi + kTwoPi * static_cast<double>(j) / (n - 1);
    t.back() = kPi;
    return t;
}

}  // namespace

StabilizingProfile k0_profile(const Anisotropy& a, std::size_t n_samples, K0Options opts) {
    if (n_samples < 21) throw ContractViolation("k0_profile needs at least 21 samples");
    const StabilityCheck sc = stability_condition(a);
    if (!sc.holds) {
        std::ostringstream os;
        os << "energy stability condition 3 gamma(theta) - gamma(theta - pi) >= 0 fails for " << a.name()
           << ": margin " << sc.margin << " at theta=" << sc.argmin;
        throw StabilityViolation(os.str());
    }
    std::vector<StabilizingProfile::Sample> samples;
    samples.reserve(n_samples);
    for (double theta : profile_angles(n_samples)) samples.push_back({theta, solve_k0(a, theta, opts)});
    return StabilizingProfile(std::move(samples), ProfileSource::solved_k0);
}

StabilizingProfile upper_bound_profile(const Anisotropy& a, std::size_t n_samples) {
    if (n_samples < 2) throw ContractViolation("upper_bound_profile needs at least two samples");
    std::vector<StabilizingProfile::Sample> samples;
    samples.reserve(n_samples);
    for (double theta : profile_angles(n_samples)) samples.push_back({theta, k0_upper_bound(a, theta)});
    return StabilizingProfile(std::move(samples), ProfileSource::closed_form_K);
}

}  // namespace aniso
