#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aniso/anisotropy.hpp"
#include "aniso/vec2.hpp"

namespace aniso {

// Closed polygon X(rho_0) .. X(rho_{N-1}); edge j runs from vertex j to vertex
// j+1 (mod N). Stored clockwise so that n = -tau^perp is the outward normal
// and the enclosed area A_c is positive; counterclockwise input is reversed
// (vertex 0 is kept in place).
class PolygonalCurve {
public:
    explicit PolygonalCurve(std::vector<Vec2> vertices);

    [[nodiscard]] std::size_t size() const { return vertices_.size(); }
    [[nodiscard]] const std::vector<Vec2>& vertices() const { return vertices_; }
    [[nodiscard]] const Vec2& operator[](std::size_t i) const { return vertices_[i]; }
    [[nodiscard]] Vec2 edge(std::size_t j) const;
    // True when the constructor had to reverse the input order.
    [[nodiscard]] bool was_reoriented() const { return reoriented_; }

private:
    std::vector<Vec2> vertices_;
    bool reoriented_ = false;
};

struct EdgeFrame {
    std::vector<double> length;
    std::vector<Vec2> tangent;
    std::vector<Vec2> normal;
    std::vector<double> theta;
};

[[nodiscard]] EdgeFrame edge_frame(const PolygonalCurve& c);

// 1/2 sum_j (x_j - x_{j-1})(y_j + y_{j-1}) over the closed vertex loop.
// Positive for clockwise input.
[[nodiscard]] double signed_area(std::span<const Vec2> vertices);
[[nodiscard]] double enclosed_area(const PolygonalCurve& c);

[[nodiscard]] double perimeter(const PolygonalCurve& c);
// W_c = sum_j gamma(theta_j) |h_j|
[[nodiscard]] double total_energy(const PolygonalCurve& c, const Anisotropy& a);
// max_j gamma(theta_j)|h_j| / min_j gamma(theta_j)|h_j|
[[nodiscard]] double weighted_mesh_ratio(const PolygonalCurve& c, const Anisotropy& a);

// True when no two non-adjacent edges touch.
[[nodiscard]] bool is_simple(std::span<const Vec2> vertices);

// Area of the union of the regions bounded by two simple polygons, by exact
// boundary-fragment classification (each boundary is split at every crossing
// with the other; fragments outside the other region contribute their Green
// integral, shared same-direction fragments contribute once).
[[nodiscard]] double union_area(std::span<const Vec2> p, std::span<const Vec2> q);

// |Omega1 symmetric-difference Omega2| = 2|Omega1 u Omega2| - |Omega1| - |Omega2|.
// Throws UnsupportedGeometry on self-intersecting input.
[[nodiscard]] double manifold_distance(const PolygonalCurve& c1, const PolygonalCurve& c2);
[[nodiscard]] double manifold_distance(std::span<const Vec2> p, std::span<const Vec2> q);

// Vertices (a cos p_j, -b sin p_j), p_j = 2 pi j / N: uniform in the
// parametric angle, clockwise.
[[nodiscard]] PolygonalCurve make_ellipse(double a_semi, double b_semi, std::size_t n);

// Snapshot format: header "x,y", one vertex per row, 17 significant digits.
void write_curve_csv(const std::filesystem::path& path, const PolygonalCurve& c);
[[nodiscard]] std::string curve_csv(const PolygonalCurve& c);
[[nodiscard]] PolygonalCurve read_curve_csv(const std::filesystem::path& path);

}  // namespace aniso
