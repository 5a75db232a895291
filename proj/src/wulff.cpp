#include "aniso/wulff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <utility>

#include "aniso/errors.hpp"
#include "aniso/io.hpp"

namespace aniso {

std::string WulffEnvelope::csv() const {
    std::string out = "theta,x,y,stable\n";
    for (const EnvelopeSample& s : samples) {
        out += format_double(s.theta) + ',' + format_double(s.point.x) + ',' + format_double(s.point.y) + ',' +
               (s.stable ? "1" : "0") + '\n';
    }
    return out;
}

namespace {

Vec2 envelope_point(const GammaValues& g, double theta) {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    return {-g.value * s - g.d1 * c, g.value * c - g.d1 * s};
}

double stiffness(const Anisotropy& a, double theta) {
    const GammaValues g = a.eval(theta);
    return g.value + g.d2;
}

double sample_angle(std::size_t i, std::size_t n) {
    return -kPi + kTwoPi * static_cast<double>(i) / static_cast<double>(n);
}

}  // namespace

WulffEnvelope wulff_envelope(const Anisotropy& a, std::size_t n_samples) {
    if (n_samples < 256) throw ContractViolation("wulff_envelope needs at least 256 samples");
    WulffEnvelope env;
    env.samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double theta = sample_angle(i, n_samples);
        const GammaValues g = a.eval(theta);
        env.samples.push_back({theta, envelope_point(g, theta), g.value + g.d2 >= -kStableSlack});
    }
    return env;
}

bool AngleInterval::contains(double theta) const {
    double t = wrap_angle(theta);
    if (t < lo) t += kTwoPi;
    return t <= hi;
}

std::vector<AngleInterval> stability_mask(const Anisotropy& a, std::size_t n_samples) {
    if (n_samples < 1024) throw ContractViolation("stability_mask needs at least 1024 samples");
    std::vector<char> flag(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) flag[i] = stiffness(a, sample_angle(i, n_samples)) >= -kStableSlack;

    const bool all = std::all_of(flag.begin(), flag.end(), [](char f) { return f != 0; });
    if (all) return {{-kPi, kPi}};
    if (std::none_of(flag.begin(), flag.end(), [](char f) { return f != 0; })) return {};

    // Crossing between sample i (flag f) and i+1 (flag !f), located by bisection.
    const double dt = kTwoPi / static_cast<double>(n_samples);
    auto edge = [&](std::size_t i) {
        double lo = sample_angle(i, n_samples);
        double hi = lo + dt;
        const bool lo_stable = flag[i] != 0;
        for (int k = 0; k < 60; ++k) {
            const double mid = 0.5 * (lo + hi);
            if ((stiffness(a, mid) >= -kStableSlack) == lo_stable) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };

    // Start just after an unstable -> stable transition so runs do not wrap.
    std::size_t start = 0;
    while (!(flag[start] == 0 && flag[(start + 1) % n_samples] != 0)) ++start;
    std::vector<AngleInterval> out;
    const double origin = sample_angle(start, n_samples);
    double lo = 0.0;
    for (std::size_t step = 0; step < n_samples; ++step) {
        const std::size_t i = (start + step) % n_samples;
        const std::size_t j = (i + 1) % n_samples;
        // Crossing position measured continuously from the start sample.
        auto unwrapped = [&] { return origin + static_cast<double>(step) * dt + (edge(i) - sample_angle(i, n_samples)); };
        if (flag[i] == 0 && flag[j] != 0) lo = unwrapped();
        if (flag[i] != 0 && flag[j] == 0) {
            const double hi = unwrapped();
            const double l = wrap_angle(lo);
            out.push_back({l, l + (hi - lo)});
        }
    }
    std::sort(out.begin(), out.end(), [](const AngleInterval& x, const AngleInterval& y) { return x.lo < y.lo; });
    return out;
}

namespace {

struct Segment {
    Vec2 p;
    Vec2 q;
    bool substrate;
    std::vector<double> cuts;  // parameters in [0, 1]
};

// Point deduplication on a tolerance grid.
class NodeTable {
public:
    explicit NodeTable(double tol) : tol_(tol) {}

    std::size_t id(Vec2 v) {
        const auto key = cell(v);
        for (long dx = -1; dx <= 1; ++dx) {
            for (long dy = -1; dy <= 1; ++dy) {
                auto it = grid_.find({key.first + dx, key.second + dy});
                if (it == grid_.end()) continue;
                for (std::size_t k : it->second) {
                    if (norm(points_[k] - v) <= tol_) return k;
                }
            }
        }
        points_.push_back(v);
        grid_[key].push_back(points_.size() - 1);
        return points_.size() - 1;
    }

    [[nodiscard]] const std::vector<Vec2>& points() const { return points_; }

private:
    std::pair<long, long> cell(Vec2 v) const {
        return {static_cast<long>(std::floor(v.x / tol_)), static_cast<long>(std::floor(v.y / tol_))};
    }

    double tol_;
    std::vector<Vec2> points_;
    std::map<std::pair<long, long>, std::vector<std::size_t>> grid_;
};

void intersect_all(std::vector<Segment>& segs) {
    std::vector<std::size_t> order(segs.size());
    std::iota(order.begin(), order.end(), 0);
    auto xmin = [&](std::size_t i) { return std::min(segs[i].p.x, segs[i].q.x); };
    auto xmax = [&](std::size_t i) { return std::max(segs[i].p.x, segs[i].q.x); };
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return xmin(i) < xmin(j); });
    constexpr double e = 1e-12;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const std::size_t i = order[oi];
        const Segment& a = segs[i];
        const Vec2 r = a.q - a.p;
        const double ymin_a = std::min(a.p.y, a.q.y);
        const double ymax_a = std::max(a.p.y, a.q.y);
        for (std::size_t oj = oi + 1; oj < order.size() && xmin(order[oj]) <= xmax(i) + e; ++oj) {
            const std::size_t j = order[oj];
            const Segment& b = segs[j];
            if (std::max(b.p.y, b.q.y) < ymin_a - e || std::min(b.p.y, b.q.y) > ymax_a + e) continue;
            const Vec2 s = b.q - b.p;
            const double d = cross(r, s);
            if (std::abs(d) <= 1e-14 * norm(r) * norm(s)) continue;
            const Vec2 w = b.p - a.p;
            const double t = cross(w, s) / d;
            const double u = cross(w, r) / d;
            if (t < -e || t > 1.0 + e || u < -e || u > 1.0 + e) continue;
            segs[i].cuts.push_back(std::clamp(t, 0.0, 1.0));
            segs[j].cuts.push_back(std::clamp(u, 0.0, 1.0));
        }
    }
}

struct Edge {
    std::size_t u;
    std::size_t v;
    bool substrate;
};

}  // namespace

std::vector<WulffRegion> winterbottom(const Anisotropy& a, double sigma, std::size_t n_samples) {
    if (!std::isfinite(sigma)) throw ContractViolation("sigma must be finite");
    const WulffEnvelope env = wulff_envelope(a, n_samples);
    const std::size_t n = env.samples.size();

    double extent = 0.0;
    for (const auto& s : env.samples) extent = std::max({extent, std::abs(s.point.x), std::abs(s.point.y)});
    std::vector<Segment> segs;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s0 = env.samples[i];
        const auto& s1 = env.samples[(i + 1) % n];
        if (s0.stable && s1.stable && norm(s1.point - s0.point) > 0.0) segs.push_back({s0.point, s1.point, false, {}});
    }
    if (segs.empty() || std::abs(sigma) >= extent) return {};
    const double reach = 2.0 * extent + 1.0;
    segs.push_back({{-reach, sigma}, {reach, sigma}, true, {}});
    intersect_all(segs);

    NodeTable nodes(1e-11 * std::max(1.0, extent));
    std::map<std::pair<std::size_t, std::size_t>, bool> edge_map;
    for (Segment& s : segs) {
        s.cuts.push_back(0.0);
        s.cuts.push_back(1.0);
        std::sort(s.cuts.begin(), s.cuts.end());
        std::size_t prev = nodes.id(s.p);
        for (double t : s.cuts) {
            const std::size_t cur = t == 0.0 ? nodes.id(s.p) : t == 1.0 ? nodes.id(s.q) : nodes.id(s.p + t * (s.q - s.p));
            if (cur != prev) {
                auto key = std::minmax(prev, cur);
                edge_map[{key.first, key.second}] |= s.substrate;
            }
            prev = cur;
        }
    }

    // Trim dangling pieces: drop degree-1 nodes until none remain.
    const auto& pts = nodes.points();
    std::vector<std::vector<std::size_t>> adj(pts.size());
    std::vector<Edge> edges;
    for (const auto& [key, sub] : edge_map) {
        adj[key.first].push_back(edges.size());
        adj[key.second].push_back(edges.size());
        edges.push_back({key.first, key.second, sub});
    }
    std::vector<char> alive(edges.size(), 1);
    std::vector<std::size_t> degree(pts.size());
    for (std::size_t v = 0; v < pts.size(); ++v) degree[v] = adj[v].size();
    std::queue<std::size_t> leaves;
    for (std::size_t v = 0; v < pts.size(); ++v) {
        if (degree[v] == 1) leaves.push(v);
    }
    while (!leaves.empty()) {
        const std::size_t v = leaves.front();
        leaves.pop();
        for (std::size_t e : adj[v]) {
            if (!alive[e]) continue;
            alive[e] = 0;
            const std::size_t w = edges[e].u == v ? edges[e].v : edges[e].u;
            --degree[v];
            if (--degree[w] == 1) leaves.push(w);
        }
    }

    // Half-edges 2e (u -> v) and 2e + 1 (v -> u); outgoing lists sorted by angle.
    auto from = [&](std::size_t h) { return h % 2 == 0 ? edges[h / 2].u : edges[h / 2].v; };
    auto to = [&](std::size_t h) { return h % 2 == 0 ? edges[h / 2].v : edges[h / 2].u; };
    std::vector<std::vector<std::size_t>> out(pts.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!alive[e]) continue;
        out[edges[e].u].push_back(2 * e);
        out[edges[e].v].push_back(2 * e + 1);
    }
    std::vector<std::size_t> pos(2 * edges.size(), 0);
    for (std::size_t v = 0; v < pts.size(); ++v) {
        auto& list = out[v];
        std::sort(list.begin(), list.end(), [&](std::size_t h1, std::size_t h2) {
            const Vec2 d1 = pts[to(h1)] - pts[v];
            const Vec2 d2 = pts[to(h2)] - pts[v];
            return std::atan2(d1.y, d1.x) < std::atan2(d2.y, d2.x);
        });
        for (std::size_t k = 0; k < list.size(); ++k) pos[list[k]] = k;
    }
    auto next = [&](std::size_t h) {
        const std::size_t v = to(h);
        const std::size_t twin = h ^ 1u;
        const auto& list = out[v];
        return list[(pos[twin] + list.size() - 1) % list.size()];
    };

    const double tol = 1e-9 * std::max(1.0, extent);
    std::vector<char> seen(2 * edges.size(), 0);
    std::vector<WulffRegion> regions;
    for (std::size_t h0 = 0; h0 < 2 * edges.size(); ++h0) {
        if (!alive[h0 / 2] || seen[h0]) continue;
        std::vector<std::size_t> cycle;
        for (std::size_t h = h0; !seen[h]; h = next(h)) {
            seen[h] = 1;
            cycle.push_back(h);
        }
        double area2 = 0.0;
        bool above = true;
        for (std::size_t h : cycle) {
            area2 += cross(pts[from(h)], pts[to(h)]);
            if (pts[from(h)].y < sigma - tol) above = false;
        }
        if (!(area2 > 0.0) || !above) continue;
        std::size_t runs = 0;
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            const bool sub = edges[cycle[k] / 2].substrate;
            const bool prev_sub = edges[cycle[(k + cycle.size() - 1) % cycle.size()] / 2].substrate;
            if (sub && !prev_sub) ++runs;
        }
        if (runs != 1) continue;
        WulffRegion r;
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            const bool sub = edges[cycle[k] / 2].substrate;
            const bool prev_sub = edges[cycle[(k + cycle.size() - 1) % cycle.size()] / 2].substrate;
            if (sub && prev_sub) continue;  // interior point of the substrate segment
            r.vertices.push_back(pts[from(cycle[k])]);
        }
        r.area = 0.5 * area2;
        regions.push_back(std::move(r));
    }
    std::sort(regions.begin(), regions.end(), [](const WulffRegion& x, const WulffRegion& y) {
        const auto cx = std::min_element(x.vertices.begin(), x.vertices.end(), [](Vec2 p, Vec2 q) { return p.x < q.x; });
        const auto cy = std::min_element(y.vertices.begin(), y.vertices.end(), [](Vec2 p, Vec2 q) { return p.x < q.x; });
        return cx->x < cy->x;
    });
    return regions;
}

std::string regions_csv(const std::vector<WulffRegion>& regions) {
    std::string out = "region,x,y\n";
    for (std::size_t i = 0; i < regions.size(); ++i) {
        for (Vec2 v : regions[i].vertices) {
            out += std::to_string(i) + ',' + format_double(v.x) + ',' + format_double(v.y) + '\n';
        }
    }
    return out;
}

}  // namespace aniso
