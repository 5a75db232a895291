#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "aniso/errors.hpp"
#include "aniso/geometry.hpp"
#include "oracles.hpp"

using namespace aniso;

namespace {

PolygonalCurve unit_square() { return PolygonalCurve({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

PolygonalCurve regular_ngon(std::size_t n) { return PolygonalCurve(oracle::circle({0, 0}, 1.0, n)); }

double shoelace_ccw(std::span<const Vec2> v) {
    double s = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const Vec2 a = v[j];
        const Vec2 b = v[(j + 1) % v.size()];
        s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::abs(s);
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("orientation is enforced clockwise") {
    const std::vector<Vec2> ccw{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    CHECK(signed_area(ccw) == doctest::Approx(-1.0));
    const PolygonalCurve c(ccw);
    CHECK(c.was_reoriented());
    CHECK(c[0] == Vec2{0, 0});
    CHECK(enclosed_area(c) == doctest::Approx(1.0));
    std::vector<Vec2> cw(ccw.rbegin(), ccw.rend());
    CHECK_FALSE(PolygonalCurve(cw).was_reoriented());
}

TEST_CASE("edge frame of the unit square") {
    const EdgeFrame f = edge_frame(unit_square());
    std::vector<double> th = f.theta;
    for (double& t : th) t = std::abs(t);
    std::sort(th.begin(), th.end());
    CHECK(th[0] == doctest::Approx(0.0));
    CHECK(th[1] == doctest::Approx(kPi / 2));
    CHECK(th[2] == doctest::Approx(kPi / 2));
    CHECK(th[3] == doctest::Approx(kPi));
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(f.length[j] == doctest::Approx(1.0));
        CHECK(norm(f.tangent[j]) == doctest::Approx(1.0));
        CHECK(dot(f.tangent[j], f.normal[j]) == doctest::Approx(0.0));
        CHECK(f.normal[j].x == doctest::Approx(unit_normal(f.theta[j]).x));
        CHECK(f.normal[j].y == doctest::Approx(unit_normal(f.theta[j]).y));
    }
}

TEST_CASE("outward normals point away from the centroid") {
    const PolygonalCurve c = make_ellipse(2.0, 0.5, 40);
    const EdgeFrame f = edge_frame(c);
    for (std::size_t j = 0; j < c.size(); ++j) {
        const Vec2 mid = 0.5 * (c[j] + c[(j + 1) % c.size()]);
        CHECK(dot(mid, f.normal[j]) > 0.0);
    }
}

TEST_CASE("regular polygon") {
    for (std::size_t n : {5u, 12u, 100u}) {
        const PolygonalCurve c = regular_ngon(n);
        const EdgeFrame f = edge_frame(c);
        for (double l : f.length) CHECK(l == doctest::Approx(2 * std::sin(kPi / n)).epsilon(1e-13));
        double turning = 0.0;
        for (std::size_t j = 0; j < n; ++j) turning += wrap_angle(f.theta[(j + 1) % n] - f.theta[j]);
        CHECK(std::abs(turning) == doctest::Approx(kTwoPi).epsilon(1e-12));
        CHECK(total_energy(c, Anisotropy::isotropic()) == doctest::Approx(2.0 * n * std::sin(kPi / n)).epsilon(1e-13));
        CHECK(weighted_mesh_ratio(c, Anisotropy::isotropic()) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("square energy and mesh ratio") {
    const PolygonalCurve sq = unit_square();
    CHECK(enclosed_area(sq) == doctest::Approx(1.0));
    CHECK(total_energy(sq, Anisotropy::isotropic()) == doctest::Approx(4.0));
    CHECK(total_energy(sq, Anisotropy::m_fold(0.5, 3)) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(weighted_mesh_ratio(sq, Anisotropy::m_fold(0.5, 3)) == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("mesh ratio is translation invariant") {
    std::vector<Vec2> v = make_ellipse(2.0, 0.5, 30).vertices();
    const Anisotropy a = Anisotropy::m_fold(0.3, 3, 0.2);
    const double r0 = weighted_mesh_ratio(PolygonalCurve(v), a);
    for (Vec2& p : v) p += Vec2{3.5, -1.25};
    CHECK(weighted_mesh_ratio(PolygonalCurve(v), a) == doctest::Approx(r0).epsilon(1e-12));
}

TEST_CASE("ellipse generator") {
    const PolygonalCurve sq = make_ellipse(1, 1, 4);
    CHECK(enclosed_area(sq) == doctest::Approx(2.0));
    CHECK(norm(sq[0] - Vec2{1, 0}) < 1e-15);
    double prev = 0.0;
    for (std::size_t n : {64u, 256u, 1024u, 4096u}) {
        const double a = enclosed_area(make_ellipse(2.0, 0.5, n));
        CHECK(a < kPi);
        CHECK(a > prev);
        prev = a;
    }
    CHECK(prev == doctest::Approx(kPi).epsilon(1e-5));
    CHECK(make_ellipse(2.0, 0.5, 64).size() == 64);
    CHECK_FALSE(make_ellipse(2.0, 0.5, 64).was_reoriented());
}

TEST_CASE("area equals the shoelace formula") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const auto p = oracle::random_convex(rng);
        CHECK(std::abs(signed_area(p)) == doctest::Approx(shoelace_ccw(p)).epsilon(1e-12));
    }
}

TEST_CASE("isotropic energy equals perimeter") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const PolygonalCurve c(oracle::random_convex(rng));
        CHECK(std::abs(total_energy(c, Anisotropy::isotropic()) - perimeter(c)) < 1e-13 * perimeter(c));
    }
}

TEST_CASE("manifold distance analytic cases") {
    const PolygonalCurve c1(oracle::circle({0, 0}, 1.0, 4096));
    const PolygonalCurve c2(oracle::circle({0, 0}, 2.0, 4096));
    const PolygonalCurve far(oracle::circle({10, 0}, 1.0, 4096));
    CHECK(manifold_distance(c1, c1) == doctest::Approx(0.0).scale(1.0));
    CHECK(manifold_distance(c1, c2) == doctest::Approx(3 * kPi).epsilon(1e-3));
    CHECK(manifold_distance(c1, far) == doctest::Approx(2 * kPi).epsilon(1e-3));
    CHECK(manifold_distance(c1, c2) == doctest::Approx(manifold_distance(c2, c1)).epsilon(1e-13));
}

TEST_CASE("manifold distance is monotone on nested circles") {
    const PolygonalCurve a(oracle::circle({0, 0}, 1.0, 300));
    const PolygonalCurve b(oracle::circle({0, 0}, 1.5, 300));
    const PolygonalCurve c(oracle::circle({0, 0}, 2.0, 300));
    CHECK(manifold_distance(a, c) >= manifold_distance(a, b));
}

TEST_CASE("manifold distance handles shared edges and translated copies") {
    const std::vector<Vec2> s1{{0, 0}, {0, 1}, {1, 1}, {1, 0}};
    const std::vector<Vec2> s2{{1, 0}, {1, 1}, {2, 1}, {2, 0}};
    const std::vector<Vec2> s3{{0.5, 0}, {0.5, 1}, {1.5, 1}, {1.5, 0}};
    CHECK(manifold_distance(s1, s2) == doctest::Approx(2.0));
    CHECK(manifold_distance(s1, s3) == doctest::Approx(1.0));
    CHECK(union_area(s1, s3) == doctest::Approx(1.5));
}

TEST_CASE("manifold distance matches grid quadrature") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 5; ++i) {
        const auto p = oracle::random_convex(rng);
        const auto q = oracle::random_convex(rng);
        const auto g = oracle::grid_symmetric_difference(p, q, 512);
        const double tol = (oracle::polygon_perimeter(p) + oracle::polygon_perimeter(q)) * std::sqrt(2 * g.cell_area);
        CHECK(std::abs(manifold_distance(p, q) - g.value) <= tol);
    }
}

TEST_CASE("scanline oracle agrees with per-cell classification") {
    std::mt19937_64 rng(5);
    const auto p = oracle::random_convex(rng);
    const auto q = oracle::random_convex(rng);
    const int n = 128;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (auto s : {std::span<const Vec2>(p), std::span<const Vec2>(q)}) {
        for (Vec2 v : s) {
            x0 = std::min(x0, v.x);
            x1 = std::max(x1, v.x);
            y0 = std::min(y0, v.y);
            y1 = std::max(y1, v.y);
        }
    }
    const double dx = (x1 - x0) / n;
    const double dy = (y1 - y0) / n;
    long count = 0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const Vec2 c{x0 + (i + 0.5) * dx, y0 + (j + 0.5) * dy};
            if (oracle::inside(p, c) != oracle::inside(q, c)) ++count;
        }
    }
    CHECK(oracle::grid_symmetric_difference(p, q, n).value == doctest::Approx(count * dx * dy).epsilon(1e-14));
}

TEST_CASE("self-intersecting input is rejected") {
    const std::vector<Vec2> bowtie{{0, 0}, {1, 1}, {1, 0}, {0, 1}};
    const std::vector<Vec2> sq{{0, 0}, {0, 1}, {1, 1}, {1, 0}};
    CHECK_FALSE(is_simple(bowtie));
    CHECK(is_simple(sq));
    CHECK_THROWS_AS((void)manifold_distance(bowtie, sq), UnsupportedGeometry);
}

TEST_CASE("degenerate polygons") {
    CHECK_THROWS_AS(PolygonalCurve({{0, 0}, {1, 0}}), ContractViolation);
    CHECK_THROWS_AS(PolygonalCurve({{0, 0}, {1, 0}, {1, 0}, {0, 1}}), DegenerateMeshError);
    CHECK_THROWS_AS(PolygonalCurve({{0, 0}, {1, 0}, {2, 0}}), DegenerateMeshError);
}

TEST_CASE("csv snapshots round-trip bit-exactly") {
    const PolygonalCurve c = make_ellipse(2.0, 0.5, 37);
    const auto path = std::filesystem::temp_directory_path() / "aniso_geometry_roundtrip.csv";
    write_curve_csv(path, c);
    const PolygonalCurve r = read_curve_csv(path);
    REQUIRE(r.size() == c.size());
    for (std::size_t j = 0; j < c.size(); ++j) CHECK(r[j] == c[j]);
    std::filesystem::remove(path);
    CHECK(curve_csv(c).rfind("x,y\n", 0) == 0);
}

}  // TEST_SUITE
