#pragma once

// Diagram -> SVG 1.1 text, and a small deterministic rasterizer for the SVG
// subset that compile_svg emits (rect, circle, ellipse, polygon, each with an
// optional rotate(a cx cy) transform).

#include "sketch2svg/error.hpp"
#include "sketch2svg/shape_grammar.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sketch2svg {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// SVG 1.1 named-color values. Empty for "none".
constexpr std::optional<Rgb> color_rgb(NamedColor color) noexcept {
    switch (color) {
        case NamedColor::Red: return Rgb{255, 0, 0};
        case NamedColor::Green: return Rgb{0, 128, 0};
        case NamedColor::Blue: return Rgb{0, 0, 255};
        case NamedColor::Yellow: return Rgb{255, 255, 0};
        case NamedColor::Purple: return Rgb{128, 0, 128};
        case NamedColor::Orange: return Rgb{255, 165, 0};
        case NamedColor::Black: return Rgb{0, 0, 0};
        case NamedColor::White: return Rgb{255, 255, 255};
        case NamedColor::None: return std::nullopt;
    }
    return std::nullopt;
}

/// Row-major RGBA8.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RasterImage() = default;
    RasterImage(int w, int h, Rgb fill = {255, 255, 255})
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 4) {
        for (std::size_t i = 0; i < pixels.size(); i += 4) {
            pixels[i] = fill.r;
            pixels[i + 1] = fill.g;
            pixels[i + 2] = fill.b;
            pixels[i + 3] = 255;
        }
    }

    [[nodiscard]] bool empty() const noexcept { return width == 0 || height == 0; }

    [[nodiscard]] Rgb rgb(int x, int y) const {
        auto i = (static_cast<std::size_t>(y) * width + x) * 4;
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }

    void set(int x, int y, Rgb c) {
        auto i = (static_cast<std::size_t>(y) * width + x) * 4;
        pixels[i] = c.r;
        pixels[i + 1] = c.g;
        pixels[i + 2] = c.b;
        pixels[i + 3] = 255;
    }

    bool operator==(const RasterImage&) const = default;
};

struct SvgDocument {
    std::string text;
};

struct Point {
    double x = 0;
    double y = 0;
};

/// Clockwise rotation (y axis points down) of p about center.
inline Point rotate_about(Point p, Point center, double degrees) {
    double rad = degrees * std::numbers::pi / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    double dx = p.x - center.x, dy = p.y - center.y;
    return {center.x + dx * c - dy * s, center.y + dx * s + dy * c};
}

/// Triangle vertices (apex first) after rotation.
inline std::array<Point, 3> triangle_vertices(const Shape& s) {
    Point c{s.x, s.y};
    std::array<Point, 3> v{Point{s.x, s.y - s.scale_y / 2}, Point{s.x - s.scale_x / 2, s.y + s.scale_y / 2},
                           Point{s.x + s.scale_x / 2, s.y + s.scale_y / 2}};
    for (auto& p : v) p = rotate_about(p, c, s.rotation);
    return v;
}

namespace detail {

/// Up to six decimals; SVG coordinates are derived values (half scales) so
/// they need more room than the grammar's four.
inline std::string svg_number(double value) {
    std::array<char, 64> buf{};
    double rounded = std::round(value * 1e6) / 1e6;
    if (rounded == 0.0) rounded = 0.0;
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), rounded, std::chars_format::fixed, 6);
    std::string text(buf.data(), ec == std::errc{} ? end : buf.data());
    if (text.find('.') != std::string::npos) {
        while (text.back() == '0') text.pop_back();
        if (text.back() == '.') text.pop_back();
    }
    return text;
}

inline std::string paint_attributes(const Shape& s) {
    std::string out = " fill=\"" + std::string(to_string(s.fill_color)) + "\"";
    out += " stroke=\"" + std::string(to_string(s.stroke_color)) + "\"";
    out += " stroke-width=\"" + svg_number(s.stroke_width) + "\"";
    return out;
}

inline std::string rotate_attribute(const Shape& s) {
    if (s.rotation == 0) return {};
    return " transform=\"rotate(" + svg_number(s.rotation) + " " + svg_number(s.x) + " " + svg_number(s.y) + ")\"";
}

}  // namespace detail

inline std::string compile_shape(const Shape& s) {
    using detail::svg_number;
    switch (s.shape_type) {
        case ShapeType::Rectangle:
            return "<rect x=\"" + svg_number(s.x - s.scale_x / 2) + "\" y=\"" + svg_number(s.y - s.scale_y / 2) +
                   "\" width=\"" + svg_number(s.scale_x) + "\" height=\"" + svg_number(s.scale_y) + "\"" +
                   detail::rotate_attribute(s) + detail::paint_attributes(s) + "/>";
        case ShapeType::Circle:
            return "<circle cx=\"" + svg_number(s.x) + "\" cy=\"" + svg_number(s.y) + "\" r=\"" +
                   svg_number(s.scale_x / 2) + "\"" + detail::paint_attributes(s) + "/>";
        case ShapeType::Ellipse:
            return "<ellipse cx=\"" + svg_number(s.x) + "\" cy=\"" + svg_number(s.y) + "\" rx=\"" +
                   svg_number(s.scale_x / 2) + "\" ry=\"" + svg_number(s.scale_y / 2) + "\"" +
                   detail::rotate_attribute(s) + detail::paint_attributes(s) + "/>";
        case ShapeType::Triangle: {
            Shape upright = s;
            upright.rotation = 0;
            auto v = triangle_vertices(upright);
            std::string points;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) points += ' ';
                points += svg_number(v[i].x) + "," + svg_number(v[i].y);
            }
            return "<polygon points=\"" + points + "\"" + detail::rotate_attribute(s) + detail::paint_attributes(s) +
                   "/>";
        }
    }
    return {};
}

/// One element per shape, in diagram order.
inline SvgDocument compile_svg(const Diagram& d) {
    const auto w = std::to_string(d.canvas.width);
    const auto h = std::to_string(d.canvas.height);
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + w + "\" height=\"" + h +
           "\" viewBox=\"0 0 " + w + " " + h + "\">\n";
    for (const auto& shape : d.shapes) {
        out += "  " + compile_shape(shape) + "\n";
    }
    out += "</svg>\n";
    return {out};
}

namespace detail {

struct SvgElement {
    std::string name;
    std::map<std::string, std::string, std::less<>> attributes;
};

/// Tokenizes the flat element list compile_svg produces.
inline std::vector<SvgElement> scan_elements(std::string_view text) {
    std::vector<SvgElement> out;
    std::size_t pos = 0;
    auto fail = [](const std::string& what) { throw Error(ErrorCode::RenderBackendFailure, what); };
    while ((pos = text.find('<', pos)) != std::string_view::npos) {
        auto close = text.find('>', pos);
        if (close == std::string_view::npos) fail("unterminated tag");
        auto tag = text.substr(pos + 1, close - pos - 1);
        pos = close + 1;
        if (tag.empty() || tag.front() == '?' || tag.front() == '/' || tag.front() == '!') continue;
        if (tag.back() == '/') tag.remove_suffix(1);
        SvgElement element;
        std::size_t i = 0;
        while (i < tag.size() && !std::isspace(static_cast<unsigned char>(tag[i]))) ++i;
        element.name = std::string(tag.substr(0, i));
        while (i < tag.size()) {
            while (i < tag.size() && std::isspace(static_cast<unsigned char>(tag[i]))) ++i;
            if (i >= tag.size()) break;
            auto eq = tag.find('=', i);
            if (eq == std::string_view::npos) fail("malformed attribute in <" + element.name + ">");
            auto key = tag.substr(i, eq - i);
            if (eq + 1 >= tag.size() || tag[eq + 1] != '"') fail("attribute value must be quoted");
            auto end = tag.find('"', eq + 2);
            if (end == std::string_view::npos) fail("unterminated attribute value");
            element.attributes.emplace(std::string(key), std::string(tag.substr(eq + 2, end - eq - 2)));
            i = end + 1;
        }
        out.push_back(std::move(element));
    }
    return out;
}

inline double parse_double(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{}) {
        throw Error(ErrorCode::RenderBackendFailure, "bad number '" + std::string(text) + "'");
    }
    return value;
}

inline std::vector<double> parse_numbers(std::string_view text) {
    std::vector<double> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == ',')) ++i;
        if (i >= text.size()) break;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != ',') ++j;
        out.push_back(parse_double(text.substr(i, j - i)));
        i = j;
    }
    return out;
}

struct Primitive {
    enum class Kind { Box, Ellipse, Polygon } kind = Kind::Box;
    Point center;
    double rotation = 0;
    double half_x = 0;  // box half-width / ellipse semi-axis
    double half_y = 0;
    std::vector<Point> polygon;  // unrotated, for Kind::Polygon
    std::optional<Rgb> fill;
    std::optional<Rgb> stroke;
    double stroke_width = 0;
};

inline const std::string& require(const SvgElement& e, std::string_view key) {
    auto it = e.attributes.find(key);
    if (it == e.attributes.end()) {
        throw Error(ErrorCode::RenderBackendFailure, "<" + e.name + "> lacks attribute " + std::string(key));
    }
    return it->second;
}

inline std::optional<Rgb> read_paint(const SvgElement& e, std::string_view key, NamedColor fallback) {
    auto it = e.attributes.find(key);
    NamedColor color = fallback;
    if (it != e.attributes.end()) {
        auto parsed = color_from_string(it->second);
        if (!parsed) throw Error(ErrorCode::RenderBackendFailure, "unsupported paint '" + it->second + "'");
        color = *parsed;
    }
    return color_rgb(color);
}

inline Primitive to_primitive(const SvgElement& e) {
    Primitive p;
    // SVG defaults: fill black, stroke none, stroke-width 1.
    p.fill = read_paint(e, "fill", NamedColor::Black);
    p.stroke = read_paint(e, "stroke", NamedColor::None);
    p.stroke_width = e.attributes.contains("stroke-width") ? parse_double(e.attributes.find("stroke-width")->second) : 1.0;
    if (auto it = e.attributes.find("transform"); it != e.attributes.end()) {
        std::string_view t = it->second;
        if (!t.starts_with("rotate(") || t.back() != ')') {
            throw Error(ErrorCode::RenderBackendFailure, "unsupported transform '" + it->second + "'");
        }
        auto args = parse_numbers(t.substr(7, t.size() - 8));
        if (args.size() != 3) throw Error(ErrorCode::RenderBackendFailure, "rotate() needs angle cx cy");
        p.rotation = args[0];
        p.center = {args[1], args[2]};
    }
    bool rotated = e.attributes.contains("transform");
    if (e.name == "rect") {
        double x = parse_double(require(e, "x")), y = parse_double(require(e, "y"));
        double w = parse_double(require(e, "width")), h = parse_double(require(e, "height"));
        p.kind = Primitive::Kind::Box;
        p.half_x = w / 2;
        p.half_y = h / 2;
        Point mid{x + w / 2, y + h / 2};
        if (rotated) {
            // rotation pivot need not be the box center in general SVG; ours always is
            mid = rotate_about(mid, p.center, p.rotation);
        }
        p.center = mid;
    } else if (e.name == "circle" || e.name == "ellipse") {
        Point mid{parse_double(require(e, "cx")), parse_double(require(e, "cy"))};
        p.kind = Primitive::Kind::Ellipse;
        if (e.name == "circle") {
            p.half_x = p.half_y = parse_double(require(e, "r"));
        } else {
            p.half_x = parse_double(require(e, "rx"));
            p.half_y = parse_double(require(e, "ry"));
        }
        if (rotated) mid = rotate_about(mid, p.center, p.rotation);
        p.center = mid;
    } else if (e.name == "polygon") {
        auto nums = parse_numbers(require(e, "points"));
        if (nums.size() < 6 || nums.size() % 2) throw Error(ErrorCode::RenderBackendFailure, "bad polygon points");
        p.kind = Primitive::Kind::Polygon;
        Point pivot = rotated ? p.center : Point{0, 0};
        for (std::size_t i = 0; i < nums.size(); i += 2) p.polygon.push_back({nums[i] - pivot.x, nums[i + 1] - pivot.y});
        p.center = pivot;
    } else {
        throw Error(ErrorCode::RenderBackendFailure, "unsupported element <" + e.name + ">");
    }
    return p;
}

/// Distance from (x, y) to the boundary of the axis-aligned ellipse with
/// semi-axes a, b centered at the origin. Robust bisection form.
inline double ellipse_boundary_distance(double a, double b, double x, double y) {
    x = std::abs(x);
    y = std::abs(y);
    if (a < b) {
        std::swap(a, b);
        std::swap(x, y);
    }
    if (y > 0) {
        if (x > 0) {
            double z0 = x / a, z1 = y / b;
            double g = z0 * z0 + z1 * z1 - 1;
            if (g == 0) return 0;
            double r0 = (a / b) * (a / b);
            double n0 = r0 * z0;
            double s0 = z1 - 1;
            double s1 = g < 0 ? 0 : std::hypot(n0, z1) - 1;
            double s = 0;
            for (int i = 0; i < 200; ++i) {
                s = (s0 + s1) / 2;
                if (s == s0 || s == s1) break;
                double ratio0 = n0 / (s + r0), ratio1 = z1 / (s + 1);
                double gs = ratio0 * ratio0 + ratio1 * ratio1 - 1;
                if (gs > 0) {
                    s0 = s;
                } else if (gs < 0) {
                    s1 = s;
                } else {
                    break;
                }
            }
            double x0 = r0 * x / (s + r0), y0 = y / (s + 1);
            return std::hypot(x0 - x, y0 - y);
        }
        return std::abs(y - b);
    }
    double numer0 = a * x, denom0 = a * a - b * b;
    if (numer0 < denom0) {
        double xde0 = numer0 / denom0;
        double x0 = a * xde0, y0 = b * std::sqrt(std::max(0.0, 1 - xde0 * xde0));
        return std::hypot(x0 - x, y0);
    }
    return std::abs(x - a);
}

inline double segment_distance(Point p, Point a, Point b) {
    double vx = b.x - a.x, vy = b.y - a.y;
    double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

inline bool inside_convex(const std::vector<Point>& poly, Point p) {
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (cross > 0) pos = true;
        if (cross < 0) neg = true;
        if (pos && neg) return false;
    }
    return true;
}

struct Coverage {
    bool in_fill = false;
    bool in_stroke = false;
};

/// Classifies a point given in the primitive's unrotated local frame.
inline Coverage classify(const Primitive& p, Point local) {
    const double half_stroke = p.stroke && p.stroke_width > 0 ? p.stroke_width / 2 : -1.0;
    Coverage c;
    switch (p.kind) {
        case Primitive::Kind::Box: {
            double ox = std::abs(local.x) - p.half_x, oy = std::abs(local.y) - p.half_y;
            c.in_fill = ox <= 0 && oy <= 0;
            if (half_stroke >= 0) {
                double d = c.in_fill ? std::min(-ox, -oy) : std::hypot(std::max(ox, 0.0), std::max(oy, 0.0));
                c.in_stroke = d <= half_stroke;
            }
            break;
        }
        case Primitive::Kind::Ellipse: {
            double a = p.half_x, b = p.half_y;
            double f = a > 0 && b > 0 ? (local.x / a) * (local.x / a) + (local.y / b) * (local.y / b) : 2.0;
            c.in_fill = f <= 1.0;
            if (half_stroke >= 0) {
                double m = std::min(a, b);
                double outer = 1 + half_stroke / m;
                double inner = std::max(0.0, 1 - half_stroke / m);
                if (f > outer * outer) {
                    c.in_stroke = false;
                } else if (f < inner * inner) {
                    c.in_stroke = false;
                } else {
                    c.in_stroke = ellipse_boundary_distance(a, b, local.x, local.y) <= half_stroke;
                }
            }
            break;
        }
        case Primitive::Kind::Polygon: {
            c.in_fill = inside_convex(p.polygon, local);
            if (half_stroke >= 0) {
                double d = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < p.polygon.size(); ++i) {
                    d = std::min(d, segment_distance(local, p.polygon[i], p.polygon[(i + 1) % p.polygon.size()]));
                }
                c.in_stroke = d <= half_stroke;
            }
            break;
        }
    }
    return c;
}

/// Conservative canvas-space bounds including the stroke.
inline std::array<double, 4> primitive_bounds(const Primitive& p) {
    double pad = p.stroke ? p.stroke_width / 2 : 0.0;
    double rad = p.rotation * std::numbers::pi / 180.0;
    double c = std::abs(std::cos(rad)), s = std::abs(std::sin(rad));
    if (p.kind == Primitive::Kind::Polygon) {
        double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
        for (auto v : p.polygon) {
            auto q = rotate_about({p.center.x + v.x, p.center.y + v.y}, p.center, p.rotation);
            min_x = std::min(min_x, q.x);
            min_y = std::min(min_y, q.y);
            max_x = std::max(max_x, q.x);
            max_y = std::max(max_y, q.y);
        }
        // polygon stroke joins are round in our distance model
        return {min_x - pad, min_y - pad, max_x + pad, max_y + pad};
    }
    double ex, ey;
    if (p.kind == Primitive::Kind::Box) {
        ex = p.half_x * c + p.half_y * s;
        ey = p.half_x * s + p.half_y * c;
    } else {
        ex = std::sqrt(p.half_x * p.half_x * c * c + p.half_y * p.half_y * s * s);
        ey = std::sqrt(p.half_x * p.half_x * s * s + p.half_y * p.half_y * c * c);
    }
    return {p.center.x - ex - pad, p.center.y - ey - pad, p.center.x + ex + pad, p.center.y + ey + pad};
}

}  // namespace detail

/// Renders at canvas size times `supersample`, one point sample per output
/// pixel at the pixel center, over an opaque white background.
inline RasterImage rasterize(const SvgDocument& svg, int supersample) {
    if (supersample < 1) throw Error(ErrorCode::RenderBackendFailure, "supersample must be >= 1");
    auto elements = detail::scan_elements(svg.text);
    int canvas_w = 0, canvas_h = 0;
    std::vector<detail::Primitive> primitives;
    for (const auto& e : elements) {
        if (e.name == "svg") {
            canvas_w = static_cast<int>(detail::parse_double(detail::require(e, "width")));
            canvas_h = static_cast<int>(detail::parse_double(detail::require(e, "height")));
            continue;
        }
        primitives.push_back(detail::to_primitive(e));
    }
    if (canvas_w < 1 || canvas_h < 1) throw Error(ErrorCode::RenderBackendFailure, "missing <svg> size");

    const int w = canvas_w * supersample, h = canvas_h * supersample;
    RasterImage img(w, h);
    const double scale = 1.0 / supersample;
    for (const auto& p : primitives) {
        if (!p.fill && !p.stroke) continue;
        auto [bx0, by0, bx1, by1] = detail::primitive_bounds(p);
        int px0 = std::max(0, static_cast<int>(std::floor(bx0 * supersample)) - 1);
        int py0 = std::max(0, static_cast<int>(std::floor(by0 * supersample)) - 1);
        int px1 = std::min(w - 1, static_cast<int>(std::ceil(bx1 * supersample)) + 1);
        int py1 = std::min(h - 1, static_cast<int>(std::ceil(by1 * supersample)) + 1);
        double rad = p.rotation * std::numbers::pi / 180.0;
        double c = std::cos(rad), s = std::sin(rad);
        for (int py = py0; py <= py1; ++py) {
            double sy = (py + 0.5) * scale - p.center.y;
            for (int px = px0; px <= px1; ++px) {
                double sx = (px + 0.5) * scale - p.center.x;
                Point local{sx * c + sy * s, -sx * s + sy * c};
                auto cov = detail::classify(p, local);
                if (cov.in_stroke) {
                    img.set(px, py, *p.stroke);
                } else if (cov.in_fill && p.fill) {
                    img.set(px, py, *p.fill);
                }
            }
        }
    }
    return img;
}

/// Box-filter reduction by an integer factor; rounds to nearest.
inline RasterImage downsample(const RasterImage& img, int factor) {
    if (factor <= 1) return img;
    if (img.width % factor || img.height % factor) {
        throw Error(ErrorCode::RenderBackendFailure, "image size is not a multiple of the factor");
    }
    RasterImage out(img.width / factor, img.height / factor);
    const int n = factor * factor;
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            std::array<int, 4> sum{};
            for (int dy = 0; dy < factor; ++dy) {
                for (int dx = 0; dx < factor; ++dx) {
                    auto i = (static_cast<std::size_t>(y * factor + dy) * img.width + (x * factor + dx)) * 4;
                    for (int k = 0; k < 4; ++k) sum[k] += img.pixels[i + k];
                }
            }
            auto o = (static_cast<std::size_t>(y) * out.width + x) * 4;
            for (int k = 0; k < 4; ++k) out.pixels[o + k] = static_cast<std::uint8_t>((sum[k] + n / 2) / n);
        }
    }
    return out;
}

inline constexpr int kDefaultSupersample = 2;

/// Canvas-resolution, anti-aliased render used for model payloads.
inline RasterImage render_diagram(const Diagram& d, int supersample = kDefaultSupersample) {
    return downsample(rasterize(compile_svg(d), supersample), supersample);
}

}  // namespace sketch2svg
