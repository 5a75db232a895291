#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "aniso/anisotropy.hpp"
#include "aniso/vec2.hpp"

namespace aniso {

inline constexpr double kStableSlack = 1e-12;

struct EnvelopeSample {
    double theta;
    Vec2 point;   // g n + g' dn/dtheta = (-g sin - g' cos, g cos - g' sin)
    bool stable;  // g + g'' >= -1e-12
};

struct WulffEnvelope {
    std::vector<EnvelopeSample> samples;  // theta_i = -pi + 2 pi i / n
    std::optional<double> sigma;          // substrate line y = sigma

    [[nodiscard]] std::string csv() const;  // "theta,x,y,stable"
};

// Requires n_samples >= 256.
[[nodiscard]] WulffEnvelope wulff_envelope(const Anisotropy& a, std::size_t n_samples);

struct AngleInterval {
    double lo;  // in [-pi, pi)
    double hi;  // lo < hi <= lo + 2 pi; may exceed pi when the interval wraps
    [[nodiscard]] double length() const { return hi - lo; }
    [[nodiscard]] bool contains(double theta) const;
};

// Maximal theta-intervals where g + g'' >= -1e-12, merged across the seam.
// Endpoints between a stable and an unstable sample are refined by
// bisection. A full circle is returned as [-pi, pi). Requires
// n_samples >= 1024.
[[nodiscard]] std::vector<AngleInterval> stability_mask(const Anisotropy& a, std::size_t n_samples);

struct WulffRegion {
    std::vector<Vec2> vertices;  // counterclockwise, not repeated at the end
    double area = 0.0;
};

// Bounded faces of the arrangement formed by the stable envelope arcs and the
// line y = sigma that lie above the line and touch it along exactly one
// segment. Dangling arc pieces (left by ear removal) are trimmed. Empty when
// nothing is enclosed.
[[nodiscard]] std::vector<WulffRegion> winterbottom(const Anisotropy& a, double sigma, std::size_t n_samples);

[[nodiscard]] std::string regions_csv(const std::vector<WulffRegion>& regions);  // "region,x,y"

}  // namespace aniso
