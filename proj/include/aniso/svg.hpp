#pragma once

#include <span>
#include <string>
#include <vector>

#include "aniso/vec2.hpp"

namespace aniso {

struct SvgStyle {
    std::string stroke = "#000000";
    double width = 1.5;
    std::string dash;          // stroke-dasharray, empty for solid
    std::string fill = "none";
    double fill_opacity = 1.0;
};

// Minimal SVG writer: world-coordinate polylines, labels and plain axes.
class SvgCanvas {
public:
    SvgCanvas(double width_px, double height_px);

    // Maps [xmin, xmax] x [ymin, ymax] (padded by 5%) onto the drawing area.
    // equal_aspect keeps one world unit the same length on both axes.
    void set_bounds(double xmin, double xmax, double ymin, double ymax, bool equal_aspect);
    void fit(std::span<const Vec2> points, bool equal_aspect);

    void polyline(std::span<const Vec2> points, const SvgStyle& style, bool closed = false);
    void text(Vec2 at, const std::string& label, double size_px = 12.0, const std::string& color = "#000000");
    // Frame with numeric ticks and axis labels.
    void axes(const std::string& xlabel, const std::string& ylabel, int ticks = 5);
    // Legend entry at the i-th slot in the top-left corner.
    void legend(int slot, const std::string& label, const SvgStyle& style);

    [[nodiscard]] std::string str() const;

private:
    [[nodiscard]] Vec2 map(Vec2 p) const;

    double w_;
    double h_;
    double margin_ = 50.0;
    double xmin_ = 0.0, xmax_ = 1.0, ymin_ = 0.0, ymax_ = 1.0;
    std::vector<std::string> body_;
};

[[nodiscard]] std::string svg_escape(const std::string& s);

}  // namespace aniso
