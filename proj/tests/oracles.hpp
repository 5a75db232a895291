#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "aniso/anisotropy.hpp"
#include "aniso/vec2.hpp"

namespace oracle {

using aniso::Vec2;

// Even-odd crossing test, independent of the library's geometry code.
inline bool inside(std::span<const Vec2> poly, Vec2 p) {
    bool in = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2 a = poly[i];
        const Vec2 b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) in = !in;
        }
    }
    return in;
}

struct GridResult {
    double value;
    double cell_area;
};

// Crossing abscissae of the horizontal line at height y with the polygon
// edges, using the same half-open rule as inside().
inline std::vector<double> row_crossings(std::span<const Vec2> poly, double y) {
    std::vector<double> xs;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2 a = poly[i];
        const Vec2 b = poly[j];
        if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    return xs;
}

// Symmetric-difference area by midpoint counting on an n x n grid over the
// joint bounding box. Each row is classified by its crossing list, which
// gives the same cell verdicts as calling inside() per cell center.
inline GridResult grid_symmetric_difference(std::span<const Vec2> p, std::span<const Vec2> q, int n = 2048) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (auto s : {p, q}) {
        for (Vec2 v : s) {
            x0 = std::min(x0, v.x);
            x1 = std::max(x1, v.x);
            y0 = std::min(y0, v.y);
            y1 = std::max(y1, v.y);
        }
    }
    const double dx = (x1 - x0) / n;
    const double dy = (y1 - y0) / n;
    std::int64_t count = 0;
    for (int j = 0; j < n; ++j) {
        const double y = y0 + (j + 0.5) * dy;
        const auto xp = row_crossings(p, y);
        const auto xq = row_crossings(q, y);
        std::size_t ip = 0, iq = 0;
        for (int i = 0; i < n; ++i) {
            const double x = x0 + (i + 0.5) * dx;
            while (ip < xp.size() && xp[ip] <= x) ++ip;
            while (iq < xq.size() && xq[iq] <= x) ++iq;
            if (((xp.size() - ip) & 1u) != ((xq.size() - iq) & 1u)) ++count;
        }
    }
    return {static_cast<double>(count) * dx * dy, dx * dy};
}

inline double polygon_perimeter(std::span<const Vec2> p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Vec2 d = p[(i + 1) % p.size()] - p[i];
        s += std::hypot(d.x, d.y);
    }
    return s;
}

// Random convex polygon: sorted random angles on a perturbed ellipse.
inline std::vector<Vec2> random_convex(std::mt19937_64& rng, int n_min = 5, int n_max = 16) {
    std::uniform_int_distribution<int> nd(n_min, n_max);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = nd(rng);
    std::vector<double> ang(n);
    for (double& a : ang) a = 2.0 * aniso::kPi * u(rng);
    std::sort(ang.begin(), ang.end());
    const double rx = 0.5 + u(rng);
    const double ry = 0.5 + u(rng);
    const Vec2 c{u(rng) - 0.5, u(rng) - 0.5};
    const double rot = 2.0 * aniso::kPi * u(rng);
    std::vector<Vec2> out;
    for (double a : ang) {
        const Vec2 e{rx * std::cos(a), ry * std::sin(a)};
        out.push_back({c.x + std::cos(rot) * e.x - std::sin(rot) * e.y, c.y + std::sin(rot) * e.x + std::cos(rot) * e.y});
    }
    return out;
}

inline std::vector<Vec2> circle(Vec2 c, double r, std::size_t n) {
    std::vector<Vec2> out;
    for (std::size_t j = 0; j < n; ++j) {
        const double t = 2.0 * aniso::kPi * static_cast<double>(j) / static_cast<double>(n);
        out.push_back({c.x + r * std::cos(t), c.y + r * std::sin(t)});
    }
    return out;
}

// Closed forms for 1 + beta cos(m (theta - theta0)).
struct MFoldExact {
    double beta;
    int m;
    double theta0 = 0.0;
    [[nodiscard]] double g(double t) const { return 1.0 + beta * std::cos(m * (t - theta0)); }
    [[nodiscard]] double d1(double t) const { return -beta * m * std::sin(m * (t - theta0)); }
    [[nodiscard]] double d2(double t) const { return -beta * m * m * std::cos(m * (t - theta0)); }
};

inline std::vector<aniso::Anisotropy> smooth_families() {
    using aniso::Anisotropy;
    return {Anisotropy::isotropic(),
            Anisotropy::m_fold(1.0 / 9.0, 3),
            Anisotropy::m_fold(0.5, 3),
            Anisotropy::m_fold(0.1, 4),
            Anisotropy::m_fold(0.3, 3, -aniso::kPi / 6.0),
            Anisotropy::regularized_crystalline(0.1, 7)};
}

inline std::vector<aniso::Anisotropy> all_families() {
    auto v = smooth_families();
    v.push_back(aniso::Anisotropy::piecewise_bgn());
    return v;
}

}  // namespace oracle
