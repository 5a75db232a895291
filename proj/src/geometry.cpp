#include "aniso/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "aniso/errors.hpp"
#include "aniso/io.hpp"

namespace aniso {

PolygonalCurve::PolygonalCurve(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
    const std::size_t n = vertices_.size();
    if (n < 3) throw ContractViolation("a closed curve needs at least 3 vertices");
    for (const Vec2& v : vertices_) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw DomainError("non-finite vertex coordinate");
    }
    for (std::size_t j = 0; j < n; ++j) {
        const Vec2 h = vertices_[(j + 1) % n] - vertices_[j];
        if (h.x == 0.0 && h.y == 0.0) {
            throw DegenerateMeshError("zero-length edge " + std::to_string(j));
        }
    }
    const double a = signed_area(vertices_);
    if (a == 0.0) throw DegenerateMeshError("polygon encloses zero area");
    if (a < 0.0) {
        std::reverse(vertices_.begin() + 1, vertices_.end());
        reoriented_ = true;
    }
}

Vec2 PolygonalCurve::edge(std::size_t j) const {
    return vertices_[(j + 1) % vertices_.size()] - vertices_[j];
}

EdgeFrame edge_frame(const PolygonalCurve& c) {
    const std::size_t n = c.size();
    EdgeFrame f;
    f.length.resize(n);
    f.tangent.resize(n);
    f.normal.resize(n);
    f.theta.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Vec2 h = c.edge(j);
        const double len = norm(h);
        if (!(len > 0.0)) throw DegenerateMeshError("zero-length edge " + std::to_string(j));
        f.length[j] = len;
        f.tangent[j] = h / len;
        f.normal[j] = -perp(h) / len;
        f.theta[j] = std::atan2(h.y, h.x);
    }
    return f;
}

double signed_area(std::span<const Vec2> v) {
    const std::size_t n = v.size();
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Vec2& cur = v[j];
        const Vec2& prev = v[(j + n - 1) % n];
        sum += (cur.x - prev.x) * (cur.y + prev.y);
    }
    return 0.5 * sum;
}

double enclosed_area(const PolygonalCurve& c) { return signed_area(c.vertices()); }

double perimeter(const PolygonalCurve& c) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) sum += norm(c.edge(j));
    return sum;
}

double total_energy(const PolygonalCurve& c, const Anisotropy& a) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        const Vec2 h = c.edge(j);
        sum += a.gamma(std::atan2(h.y, h.x)) * norm(h);
    }
    return sum;
}

double weighted_mesh_ratio(const PolygonalCurve& c, const Anisotropy& a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        const Vec2 h = c.edge(j);
        const double w = a.gamma(std::atan2(h.y, h.x)) * norm(h);
        lo = std::min(lo, w);
        hi = std::max(hi, w);
    }
    return hi / lo;
}

namespace {

struct Box {
    double x0, x1, y0, y1;
};

Box seg_box(const Vec2& a, const Vec2& b) {
    return {std::min(a.x, b.x), std::max(a.x, b.x), std::min(a.y, b.y), std::max(a.y, b.y)};
}

bool boxes_overlap(const Box& a, const Box& b, double pad) {
    return a.x0 <= b.x1 + pad && b.x0 <= a.x1 + pad && a.y0 <= b.y1 + pad && b.y0 <= a.y1 + pad;
}

double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

// Closed-segment intersection test with exact orientation signs.
bool segments_touch(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double o1 = orient(a, b, c);
    const double o2 = orient(a, b, d);
    const double o3 = orient(c, d, a);
    const double o4 = orient(c, d, b);
    if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

double scale_of(std::span<const Vec2> p) {
    double s = 0.0;
    for (const Vec2& v : p) s = std::max({s, std::abs(v.x), std::abs(v.y)});
    return std::max(s, 1.0);
}

// Green-integral area, positive for counterclockwise loops.
double ccw_area(std::span<const Vec2> v) {
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) sum += cross(v[i], v[(i + 1) % v.size()]);
    return 0.5 * sum;
}

bool point_inside(std::span<const Vec2> poly, const Vec2& p) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xc) inside = !inside;
        }
    }
    return inside;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double l2 = dot(ab, ab);
    double t = l2 > 0.0 ? dot(p - a, ab) / l2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

// Sum of the Green integrals of the fragments of `p` that lie on the union
// boundary. `keep_shared` selects whether fragments running along `q` in the
// same direction are counted (exactly one of the two passes keeps them).
double boundary_contribution(std::span<const Vec2> p, std::span<const Vec2> q, double eps, bool keep_shared) {
    const std::size_t np = p.size();
    const std::size_t nq = q.size();
    std::vector<Box> qbox(nq);
    for (std::size_t j = 0; j < nq; ++j) qbox[j] = seg_box(q[j], q[(j + 1) % nq]);

    double sum = 0.0;
    std::vector<double> ts;
    for (std::size_t i = 0; i < np; ++i) {
        const Vec2 a = p[i];
        const Vec2 b = p[(i + 1) % np];
        const Vec2 r = b - a;
        const double rr = dot(r, r);
        const Box pb = seg_box(a, b);
        ts.assign({0.0, 1.0});
        for (std::size_t j = 0; j < nq; ++j) {
            if (!boxes_overlap(pb, qbox[j], eps)) continue;
            const Vec2 c = q[j];
            const Vec2 d = q[(j + 1) % nq];
            const Vec2 s = d - c;
            const double den = cross(r, s);
            const Vec2 ca = c - a;
            if (std::abs(den) > 1e-14 * std::sqrt(rr * dot(s, s))) {
                const double t = cross(ca, s) / den;
                const double u = cross(ca, r) / den;
                if (t > 0.0 && t < 1.0 && u >= -1e-12 && u <= 1.0 + 1e-12) ts.push_back(t);
            } else if (std::abs(cross(ca, r)) <= eps * std::sqrt(rr)) {
                for (const Vec2& e : {c, d}) {
                    const double t = dot(e - a, r) / rr;
                    if (t > 0.0 && t < 1.0) ts.push_back(t);
                }
            }
        }
        std::sort(ts.begin(), ts.end());
        for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
            const double t0 = ts[k];
            const double t1 = ts[k + 1];
            if (t1 - t0 <= 0.0) continue;
            const Vec2 p0 = a + t0 * r;
            const Vec2 p1 = a + t1 * r;
            const Vec2 mid = a + (0.5 * (t0 + t1)) * r;
            bool on = false;
            bool same_dir = false;
            for (std::size_t j = 0; j < nq; ++j) {
                if (!boxes_overlap(seg_box(mid, mid), qbox[j], eps)) continue;
                const Vec2 c = q[j];
                const Vec2 d = q[(j + 1) % nq];
                if (point_segment_distance(mid, c, d) <= eps) {
                    on = true;
                    same_dir = dot(d - c, r) > 0.0;
                    break;
                }
            }
            const bool keep = on ? (keep_shared && same_dir) : !point_inside(q, mid);
            if (keep) sum += 0.5 * cross(p0, p1);
        }
    }
    return sum;
}

std::vector<Vec2> as_ccw(std::span<const Vec2> v) {
    std::vector<Vec2> out(v.begin(), v.end());
    if (ccw_area(out) < 0.0) std::reverse(out.begin(), out.end());
    return out;
}

void require_simple(std::span<const Vec2> v, const char* which) {
    if (v.size() < 3) throw ContractViolation(std::string(which) + " polygon needs >= 3 vertices");
    if (!is_simple(v)) throw UnsupportedGeometry(std::string(which) + " curve is self-intersecting");
}

}  // namespace

bool is_simple(std::span<const Vec2> v) {
    const std::size_t n = v.size();
    if (n < 3) return false;
    std::vector<Box> box(n);
    for (std::size_t i = 0; i < n; ++i) box[i] = seg_box(v[i], v[(i + 1) % n]);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (!boxes_overlap(box[i], box[j], 0.0)) continue;
            if (segments_touch(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
        }
    }
    // Adjacent edges folding back onto each other.
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = v[(i + n - 1) % n];
        const Vec2& b = v[i];
        const Vec2& c = v[(i + 1) % n];
        if (orient(a, b, c) == 0.0 && dot(b - a, c - b) < 0.0) return false;
    }
    return true;
}

double union_area(std::span<const Vec2> p_in, std::span<const Vec2> q_in) {
    const std::vector<Vec2> p = as_ccw(p_in);
    const std::vector<Vec2> q = as_ccw(q_in);
    const double eps = 1e-12 * std::max(scale_of(p), scale_of(q));
    return boundary_contribution(p, q, eps, true) + boundary_contribution(q, p, eps, false);
}

double manifold_distance(std::span<const Vec2> p, std::span<const Vec2> q) {
    require_simple(p, "first");
    require_simple(q, "second");
    const double u = union_area(p, q);
    const double m = 2.0 * u - std::abs(ccw_area(p)) - std::abs(ccw_area(q));
    return std::max(0.0, m);
}

double manifold_distance(const PolygonalCurve& c1, const PolygonalCurve& c2) {
    return manifold_distance(std::span<const Vec2>(c1.vertices()), std::span<const Vec2>(c2.vertices()));
}

PolygonalCurve make_ellipse(double a_semi, double b_semi, std::size_t n) {
    if (!(a_semi > 0.0) || !(b_semi > 0.0)) throw ContractViolation("ellipse semi-axes must be positive");
    if (n < 3) throw ContractViolation("ellipse needs N >= 3");
    std::vector<Vec2> v(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double p = kTwoPi * static_cast<double>(j) / static_cast<double>(n);
        v[j] = {a_semi * std::cos(p), -b_semi * std::sin(p)};
    }
    return PolygonalCurve(std::move(v));
}

std::string curve_csv(const PolygonalCurve& c) {
    std::string out = "x,y\n";
    for (const Vec2& v : c.vertices()) {
        out += format_double(v.x);
        out += ',';
        out += format_double(v.y);
        out += '\n';
    }
    return out;
}

void write_curve_csv(const std::filesystem::path& path, const PolygonalCurve& c) {
    write_file_atomic(path, curve_csv(c));
}

PolygonalCurve read_curve_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ContractViolation("empty curve file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y") throw ContractViolation("curve file " + path.string() + " must start with header x,y");
    std::vector<Vec2> v;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ContractViolation("malformed row '" + line + "' in " + path.string());
        try {
            v.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::exception&) {
            throw ContractViolation("malformed row '" + line + "' in " + path.string());
        }
    }
    return PolygonalCurve(std::move(v));
}

}  // namespace aniso
