#include "aniso/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "aniso/errors.hpp"

namespace aniso {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

std::string style_attrs(const SvgStyle& s) {
    std::string out = "stroke=\"" + s.stroke + "\" stroke-width=\"" + num(s.width) + "\" fill=\"" + s.fill + "\"";
    if (s.fill != "none" && s.fill_opacity < 1.0) out += " fill-opacity=\"" + num(s.fill_opacity) + "\"";
    if (!s.dash.empty()) out += " stroke-dasharray=\"" + s.dash + "\"";
    return out;
}

}  // namespace

std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

SvgCanvas::SvgCanvas(double width_px, double height_px) : w_(width_px), h_(height_px) {
    if (!(width_px > 2 * margin_) || !(height_px > 2 * margin_)) throw ContractViolation("canvas too small");
}

void SvgCanvas::set_bounds(double xmin, double xmax, double ymin, double ymax, bool equal_aspect) {
    if (!(xmax > xmin)) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (!(ymax > ymin)) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double px = 0.05 * (xmax - xmin);
    const double py = 0.05 * (ymax - ymin);
    xmin_ = xmin - px;
    xmax_ = xmax + px;
    ymin_ = ymin - py;
    ymax_ = ymax + py;
    if (equal_aspect) {
        const double sx = (w_ - 2 * margin_) / (xmax_ - xmin_);
        const double sy = (h_ - 2 * margin_) / (ymax_ - ymin_);
        const double s = std::min(sx, sy);
        const double cx = 0.5 * (xmin_ + xmax_);
        const double cy = 0.5 * (ymin_ + ymax_);
        const double hx = 0.5 * (w_ - 2 * margin_) / s;
        const double hy = 0.5 * (h_ - 2 * margin_) / s;
        xmin_ = cx - hx;
        xmax_ = cx + hx;
        ymin_ = cy - hy;
        ymax_ = cy + hy;
    }
}

void SvgCanvas::fit(std::span<const Vec2> points, bool equal_aspect) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (Vec2 p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    if (!std::isfinite(x0)) {
        x0 = y0 = 0.0;
        x1 = y1 = 1.0;
    }
    set_bounds(x0, x1, y0, y1, equal_aspect);
}

Vec2 SvgCanvas::map(Vec2 p) const {
    const double x = margin_ + (p.x - xmin_) / (xmax_ - xmin_) * (w_ - 2 * margin_);
    const double y = h_ - margin_ - (p.y - ymin_) / (ymax_ - ymin_) * (h_ - 2 * margin_);
    return {x, y};
}

void SvgCanvas::polyline(std::span<const Vec2> points, const SvgStyle& style, bool closed) {
    if (points.empty()) return;
    std::string pts;
    for (Vec2 p : points) {
        const Vec2 q = map(p);
        pts += num(q.x) + ',' + num(q.y) + ' ';
    }
    body_.push_back(std::string(closed ? "<polygon" : "<polyline") + " points=\"" + pts + "\" " + style_attrs(style) +
                    " stroke-linejoin=\"round\"/>");
}

void SvgCanvas::text(Vec2 at, const std::string& label, double size_px, const std::string& color) {
    const Vec2 q = map(at);
    body_.push_back("<text x=\"" + num(q.x) + "\" y=\"" + num(q.y) + "\" font-size=\"" + num(size_px) +
                    "\" font-family=\"sans-serif\" fill=\"" + color + "\">" + svg_escape(label) + "</text>");
}

void SvgCanvas::axes(const std::string& xlabel, const std::string& ylabel, int ticks) {
    const double l = margin_, r = w_ - margin_, t = margin_, b = h_ - margin_;
    body_.push_back("<rect x=\"" + num(l) + "\" y=\"" + num(t) + "\" width=\"" + num(r - l) + "\" height=\"" +
                    num(b - t) + "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>");
    ticks = std::max(ticks, 2);
    for (int i = 0; i < ticks; ++i) {
        const double f = static_cast<double>(i) / (ticks - 1);
        const double xv = xmin_ + f * (xmax_ - xmin_);
        const double yv = ymin_ + f * (ymax_ - ymin_);
        const double xp = l + f * (r - l);
        const double yp = b - f * (b - t);
        body_.push_back("<line x1=\"" + num(xp) + "\" y1=\"" + num(b) + "\" x2=\"" + num(xp) + "\" y2=\"" +
                        num(b + 5) + "\" stroke=\"#444444\"/>");
        body_.push_back("<text x=\"" + num(xp) + "\" y=\"" + num(b + 18) +
                        "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"middle\">" + tick_label(xv) +
                        "</text>");
        body_.push_back("<line x1=\"" + num(l - 5) + "\" y1=\"" + num(yp) + "\" x2=\"" + num(l) + "\" y2=\"" +
                        num(yp) + "\" stroke=\"#444444\"/>");
        body_.push_back("<text x=\"" + num(l - 8) + "\" y=\"" + num(yp + 3) +
                        "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">" + tick_label(yv) +
                        "</text>");
    }
    body_.push_back("<text x=\"" + num(0.5 * (l + r)) + "\" y=\"" + num(h_ - 12) +
                    "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\">" + svg_escape(xlabel) +
                    "</text>");
    body_.push_back("<text x=\"14\" y=\"" + num(0.5 * (t + b)) +
                    "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
                    num(0.5 * (t + b)) + ")\">" + svg_escape(ylabel) + "</text>");
}

void SvgCanvas::legend(int slot, const std::string& label, const SvgStyle& style) {
    const double x = margin_ + 10;
    const double y = margin_ + 16 + 16 * slot;
    SvgStyle s = style;
    if (s.fill == "none" || s.fill.empty()) s.fill = "none";
    body_.push_back("<line x1=\"" + num(x) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x + 24) + "\" y2=\"" + num(y) +
                    "\" " + style_attrs(SvgStyle{s.stroke, s.width, s.dash, "none", 1.0}) + "/>");
    body_.push_back("<text x=\"" + num(x + 30) + "\" y=\"" + num(y + 4) +
                    "\" font-size=\"11\" font-family=\"sans-serif\">" + svg_escape(label) + "</text>");
}

std::string SvgCanvas::str() const {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      num(w_) + "\" height=\"" + num(h_) + "\" viewBox=\"0 0 " + num(w_) + ' ' + num(h_) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    for (const auto& line : body_) out += line + '\n';
    out += "</svg>\n";
    return out;
}

}  // namespace aniso
