#pragma once

// Shape-program grammar: four primitives, nine named colors, eight optional
// per-shape fields. Parsing is strict (unknown fields and non-lowercase
// colors are errors) and every parsed value is normalized so that
// parse(serialize(d)) == d holds field-exactly.

#include "sketch2svg/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

namespace sketch2svg {

/// Pixel canvas. Origin top-left, +x right, +y down.
struct Canvas {
    int width = 512;
    int height = 512;

    bool operator==(const Canvas&) const = default;
};

inline void validate_canvas(const Canvas& canvas) {
    if (canvas.width < 1 || canvas.height < 1) {
        throw Error(ErrorCode::InvalidConfig, "canvas dimensions must be >= 1");
    }
}

/// Parses "WxH" (e.g. "640x480").
inline Canvas parse_canvas(std::string_view text) {
    auto sep = text.find_first_of("xX");
    if (sep == std::string_view::npos) {
        throw Error(ErrorCode::InvalidConfig, "canvas must be WxH, got '" + std::string(text) + "'");
    }
    Canvas canvas{0, 0};
    auto w = text.substr(0, sep);
    auto h = text.substr(sep + 1);
    auto [pw, ew] = std::from_chars(w.data(), w.data() + w.size(), canvas.width);
    auto [ph, eh] = std::from_chars(h.data(), h.data() + h.size(), canvas.height);
    if (ew != std::errc{} || eh != std::errc{} || pw != w.data() + w.size() || ph != h.data() + h.size()) {
        throw Error(ErrorCode::InvalidConfig, "canvas must be WxH, got '" + std::string(text) + "'");
    }
    validate_canvas(canvas);
    return canvas;
}

enum class ShapeType { Circle, Rectangle, Ellipse, Triangle };

inline constexpr std::array<ShapeType, 4> kShapeTypes{ShapeType::Circle, ShapeType::Rectangle,
                                                       ShapeType::Ellipse, ShapeType::Triangle};

constexpr std::string_view to_string(ShapeType type) noexcept {
    switch (type) {
        case ShapeType::Circle: return "circle";
        case ShapeType::Rectangle: return "rectangle";
        case ShapeType::Ellipse: return "ellipse";
        case ShapeType::Triangle: return "triangle";
    }
    return "circle";
}

inline std::optional<ShapeType> shape_type_from_string(std::string_view name) {
    for (auto type : kShapeTypes) {
        if (to_string(type) == name) return type;
    }
    return std::nullopt;
}

enum class NamedColor { Red, Green, Blue, Yellow, Purple, Orange, Black, White, None };

inline constexpr std::array<NamedColor, 9> kNamedColors{
    NamedColor::Red,    NamedColor::Green, NamedColor::Blue,  NamedColor::Yellow, NamedColor::Purple,
    NamedColor::Orange, NamedColor::Black, NamedColor::White, NamedColor::None};

constexpr std::string_view to_string(NamedColor color) noexcept {
    switch (color) {
        case NamedColor::Red: return "red";
        case NamedColor::Green: return "green";
        case NamedColor::Blue: return "blue";
        case NamedColor::Yellow: return "yellow";
        case NamedColor::Purple: return "purple";
        case NamedColor::Orange: return "orange";
        case NamedColor::Black: return "black";
        case NamedColor::White: return "white";
        case NamedColor::None: return "none";
    }
    return "none";
}

/// Exact, case-sensitive lookup. "Red" is not a color.
inline std::optional<NamedColor> color_from_string(std::string_view name) {
    for (auto color : kNamedColors) {
        if (to_string(color) == name) return color;
    }
    return std::nullopt;
}

/// One primitive. Position is the shape center; for circle/ellipse the
/// scales are diameters. Rotation is clockwise degrees.
struct Shape {
    ShapeType shape_type = ShapeType::Circle;
    double x = 0;
    double y = 0;
    double scale_x = 1;
    double scale_y = 1;
    NamedColor fill_color = NamedColor::None;
    NamedColor stroke_color = NamedColor::Black;
    double stroke_width = 1;
    double rotation = 0;

    bool operator==(const Shape&) const = default;
};

/// Painter's order: later shapes draw on top.
struct Diagram {
    Canvas canvas;
    std::vector<Shape> shapes;

    bool operator==(const Diagram&) const = default;
};

enum class ShapeField { X, Y, ScaleX, ScaleY, FillColor, StrokeColor, StrokeWidth, Rotation };

inline constexpr std::array<ShapeField, 8> kShapeFields{ShapeField::X,          ShapeField::Y,
                                                        ShapeField::ScaleX,     ShapeField::ScaleY,
                                                        ShapeField::FillColor,  ShapeField::StrokeColor,
                                                        ShapeField::StrokeWidth, ShapeField::Rotation};

constexpr std::string_view to_string(ShapeField field) noexcept {
    switch (field) {
        case ShapeField::X: return "x";
        case ShapeField::Y: return "y";
        case ShapeField::ScaleX: return "scale_x";
        case ShapeField::ScaleY: return "scale_y";
        case ShapeField::FillColor: return "fill_color";
        case ShapeField::StrokeColor: return "stroke_color";
        case ShapeField::StrokeWidth: return "stroke_width";
        case ShapeField::Rotation: return "rotation";
    }
    return "x";
}

inline std::optional<ShapeField> shape_field_from_string(std::string_view name) {
    for (auto field : kShapeFields) {
        if (to_string(field) == name) return field;
    }
    return std::nullopt;
}

using FieldValue = std::variant<double, NamedColor>;

inline FieldValue get_field(const Shape& shape, ShapeField field) {
    switch (field) {
        case ShapeField::X: return shape.x;
        case ShapeField::Y: return shape.y;
        case ShapeField::ScaleX: return shape.scale_x;
        case ShapeField::ScaleY: return shape.scale_y;
        case ShapeField::FillColor: return shape.fill_color;
        case ShapeField::StrokeColor: return shape.stroke_color;
        case ShapeField::StrokeWidth: return shape.stroke_width;
        case ShapeField::Rotation: return shape.rotation;
    }
    return 0.0;
}

inline void set_field(Shape& shape, ShapeField field, const FieldValue& value) {
    switch (field) {
        case ShapeField::X: shape.x = std::get<double>(value); break;
        case ShapeField::Y: shape.y = std::get<double>(value); break;
        case ShapeField::ScaleX: shape.scale_x = std::get<double>(value); break;
        case ShapeField::ScaleY: shape.scale_y = std::get<double>(value); break;
        case ShapeField::FillColor: shape.fill_color = std::get<NamedColor>(value); break;
        case ShapeField::StrokeColor: shape.stroke_color = std::get<NamedColor>(value); break;
        case ShapeField::StrokeWidth: shape.stroke_width = std::get<double>(value); break;
        case ShapeField::Rotation: shape.rotation = std::get<double>(value); break;
    }
}

// ---------------------------------------------------------------------------
// Numbers
// ---------------------------------------------------------------------------

/// Serialized numbers carry at most this many decimals.
inline constexpr int kDecimalPlaces = 4;

/// Rounds to the serialization grid so that values survive a text round trip.
inline double quantize(double value) {
    double q = std::round(value * 1e4) / 1e4;
    return q == 0.0 ? 0.0 : q;  // drop negative zero
}

/// Up to four decimals, trailing zeros trimmed: 1 -> "1", 0.25 -> "0.25".
inline std::string format_number(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), quantize(value),
                                   std::chars_format::fixed, kDecimalPlaces);
    std::string text(buf.data(), ec == std::errc{} ? end : buf.data());
    if (auto dot = text.find('.'); dot != std::string::npos) {
        while (text.back() == '0') text.pop_back();
        if (text.back() == '.') text.pop_back();
    }
    if (text == "-0") text = "0";
    return text;
}

inline double normalize_rotation(double degrees) {
    double r = std::fmod(degrees, 360.0);
    if (r < 0) r += 360.0;
    r = quantize(r);
    if (r >= 360.0) r -= 360.0;
    return quantize(r);
}

/// Canonical form of a fully specified shape: numbers on the 4-decimal grid,
/// rotation in [0, 360). Idempotent.
inline Shape normalize(Shape shape) {
    shape.x = quantize(shape.x);
    shape.y = quantize(shape.y);
    shape.scale_x = quantize(shape.scale_x);
    shape.scale_y = quantize(shape.scale_y);
    shape.stroke_width = quantize(shape.stroke_width);
    shape.rotation = normalize_rotation(shape.rotation);
    return shape;
}

inline Diagram normalize(Diagram diagram) {
    for (auto& shape : diagram.shapes) shape = normalize(shape);
    return diagram;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// One validation finding, located by JSON pointer.
struct Issue {
    std::string pointer;
    ErrorCode code = ErrorCode::InvalidValue;
    std::string message;
    bool warning = false;
};

namespace detail {

inline std::optional<double> read_number(const nlohmann::json& value, const std::string& pointer,
                                         std::vector<Issue>& issues) {
    if (!value.is_number()) {
        issues.push_back({pointer, ErrorCode::InvalidValue, "expected a number"});
        return std::nullopt;
    }
    return value.get<double>();
}

inline std::optional<NamedColor> read_color(const nlohmann::json& value, const std::string& pointer,
                                            std::vector<Issue>& issues) {
    if (!value.is_string()) {
        issues.push_back({pointer, ErrorCode::UnknownColor, "color must be a lowercase color name"});
        return std::nullopt;
    }
    auto color = color_from_string(value.get_ref<const std::string&>());
    if (!color) {
        issues.push_back({pointer, ErrorCode::UnknownColor,
                          "unknown color '" + value.get<std::string>() + "'"});
    }
    return color;
}

/// Reads one shape record, appending every problem found. Returns a shape
/// only when the record produced no errors.
inline std::optional<Shape> read_shape(const nlohmann::json& record, const std::string& pointer,
                                       std::vector<Issue>& issues) {
    if (!record.is_object()) {
        issues.push_back({pointer, ErrorCode::InvalidValue, "shape must be a JSON object"});
        return std::nullopt;
    }
    auto errors_before = std::count_if(issues.begin(), issues.end(), [](const Issue& i) { return !i.warning; });
    Shape shape;
    bool have_type = false;
    bool have_scale_y = false;

    // shape_type first so its error is reported ahead of field errors
    if (auto it = record.find("shape_type"); it != record.end()) {
        const std::string at = pointer + "/shape_type";
        if (!it->is_string()) {
            issues.push_back({at, ErrorCode::UnknownShapeType, "shape_type must be a string"});
        } else if (auto type = shape_type_from_string(it->get_ref<const std::string&>())) {
            shape.shape_type = *type;
            have_type = true;
        } else {
            issues.push_back({at, ErrorCode::UnknownShapeType, "unknown shape type '" + it->get<std::string>() + "'"});
        }
    }
    for (const auto& [key, value] : record.items()) {
        const std::string at = pointer + "/" + key;
        if (key == "shape_type") continue;
        auto field = shape_field_from_string(key);
        if (!field) {
            issues.push_back({at, ErrorCode::UnknownField, "unknown field '" + key + "'"});
            continue;
        }
        if (*field == ShapeField::FillColor || *field == ShapeField::StrokeColor) {
            if (auto color = read_color(value, at, issues)) set_field(shape, *field, *color);
            continue;
        }
        auto number = read_number(value, at, issues);
        if (!number) continue;
        if (!std::isfinite(*number)) {
            issues.push_back({at, ErrorCode::InvalidValue, "number must be finite"});
            continue;
        }
        switch (*field) {
            case ShapeField::ScaleX:
            case ShapeField::ScaleY:
                if (quantize(*number) <= 0) {
                    issues.push_back({at, ErrorCode::NonPositiveScale,
                                      key + " must be positive (at least 0.0001)"});
                    continue;
                }
                if (*field == ShapeField::ScaleY) have_scale_y = true;
                break;
            case ShapeField::StrokeWidth:
                if (*number < 0) {
                    issues.push_back({at, ErrorCode::InvalidValue, "stroke_width must be >= 0"});
                    continue;
                }
                break;
            default: break;
        }
        set_field(shape, *field, *number);
    }

    if (!have_type && !record.contains("shape_type")) {
        issues.push_back({pointer + "/shape_type", ErrorCode::MissingRequiredField,
                          "shape_type is required"});
    }
    auto errors_after = std::count_if(issues.begin(), issues.end(), [](const Issue& i) { return !i.warning; });
    if (errors_after != errors_before || !have_type) return std::nullopt;

    shape = normalize(shape);
    if (shape.shape_type == ShapeType::Circle && have_scale_y && shape.scale_x != shape.scale_y) {
        issues.push_back({pointer, ErrorCode::InvalidValue,
                          "circle has scale_x != scale_y; scale_x is used as the diameter", true});
    }
    return shape;
}

inline std::optional<Diagram> read_document(const nlohmann::json& doc, const Canvas& canvas,
                                            std::vector<Issue>& issues) {
    if (!doc.is_object()) {
        issues.push_back({"", ErrorCode::InvalidValue, "document must be a JSON object"});
        return std::nullopt;
    }
    bool ok = true;
    for (const auto& [key, value] : doc.items()) {
        if (key != "shapes") {
            issues.push_back({"/" + key, ErrorCode::UnknownField, "unknown top-level field '" + key + "'"});
            ok = false;
        }
    }
    auto it = doc.find("shapes");
    if (it == doc.end()) {
        issues.push_back({"/shapes", ErrorCode::MissingRequiredField, "\"shapes\" array is required"});
        return std::nullopt;
    }
    if (!it->is_array()) {
        issues.push_back({"/shapes", ErrorCode::InvalidValue, "\"shapes\" must be an array"});
        return std::nullopt;
    }
    Diagram diagram{canvas, {}};
    diagram.shapes.reserve(it->size());
    for (std::size_t i = 0; i < it->size(); ++i) {
        auto shape = read_shape((*it)[i], "/shapes/" + std::to_string(i), issues);
        if (shape) {
            diagram.shapes.push_back(*shape);
        } else {
            ok = false;
        }
    }
    if (!ok) return std::nullopt;
    return diagram;
}

inline void throw_first_error(const std::vector<Issue>& issues) {
    for (const auto& issue : issues) {
        if (!issue.warning) {
            throw Error(issue.code, issue.message + (issue.pointer.empty() ? "" : " at " + issue.pointer),
                        issue.pointer);
        }
    }
}

}  // namespace detail

/// Collects every error and warning in a diagram document without throwing.
inline std::vector<Issue> validate_document(std::string_view text) {
    std::vector<Issue> issues;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        issues.push_back({"", ErrorCode::MalformedJson, e.what()});
        return issues;
    }
    detail::read_document(doc, Canvas{}, issues);
    return issues;
}

/// Fills grammar defaults for an already-decoded shape record.
inline Shape normalize_shape(const nlohmann::json& record) {
    std::vector<Issue> issues;
    auto shape = detail::read_shape(record, "", issues);
    detail::throw_first_error(issues);
    if (!shape) throw Error(ErrorCode::InvalidValue, "invalid shape record");
    return *shape;
}

inline Diagram diagram_from_json(const nlohmann::json& doc, const Canvas& canvas) {
    validate_canvas(canvas);
    std::vector<Issue> issues;
    auto diagram = detail::read_document(doc, canvas, issues);
    detail::throw_first_error(issues);
    if (!diagram) throw Error(ErrorCode::InvalidValue, "invalid diagram document");
    return *diagram;
}

inline Diagram parse_diagram(std::string_view text, const Canvas& canvas) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, e.what());
    }
    return diagram_from_json(doc, canvas);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string serialize_shape(const Shape& s) {
    std::string out;
    out.reserve(220);
    out += "{\"shape_type\": \"";
    out += to_string(s.shape_type);
    out += "\", \"x\": " + format_number(s.x);
    out += ", \"y\": " + format_number(s.y);
    out += ", \"scale_x\": " + format_number(s.scale_x);
    out += ", \"scale_y\": " + format_number(s.scale_y);
    out += ", \"fill_color\": \"";
    out += to_string(s.fill_color);
    out += "\", \"stroke_color\": \"";
    out += to_string(s.stroke_color);
    out += "\", \"stroke_width\": " + format_number(s.stroke_width);
    out += ", \"rotation\": " + format_number(s.rotation);
    out += "}";
    return out;
}

/// Single-line document with every field explicit, in grammar order.
inline std::string serialize_diagram(const Diagram& d) {
    std::string out = "{\"shapes\": [";
    for (std::size_t i = 0; i < d.shapes.size(); ++i) {
        if (i) out += ", ";
        out += serialize_shape(d.shapes[i]);
    }
    out += "]}";
    return out;
}

inline nlohmann::json diagram_to_json(const Diagram& d) {
    return nlohmann::json::parse(serialize_diagram(d));
}

// ---------------------------------------------------------------------------
// Diff
// ---------------------------------------------------------------------------

struct FieldChange {
    std::size_t index = 0;  // index in the source diagram
    ShapeField field = ShapeField::X;
    FieldValue before;
    FieldValue after;

    bool operator==(const FieldChange&) const = default;
};

/// Edit script from a source diagram to a target diagram. `matching` pairs
/// (source index, target index) for every shape that survives, so the
/// target's draw order can be rebuilt exactly.
struct DiagramDelta {
    std::vector<std::pair<std::size_t, Shape>> added;    // target index, shape
    std::vector<std::pair<std::size_t, Shape>> removed;  // source index, shape
    std::vector<FieldChange> modified;
    std::vector<std::pair<std::size_t, std::size_t>> matching;

    /// True when matched shapes keep their relative draw order.
    [[nodiscard]] bool order_preserved() const {
        for (std::size_t i = 1; i < matching.size(); ++i) {
            if (matching[i].second < matching[i - 1].second) return false;
        }
        return true;
    }

    [[nodiscard]] bool empty() const {
        return added.empty() && removed.empty() && modified.empty() && order_preserved();
    }

    /// Field-level discrepancy count: one per added, removed, or modified entry.
    [[nodiscard]] std::size_t size() const { return added.size() + removed.size() + modified.size(); }
};

/// Greedy matching: same shape_type only, closest centers first; ties by
/// source index then target index. Result is sorted by source index.
inline std::vector<std::pair<std::size_t, std::size_t>> greedy_match(const std::vector<Shape>& a,
                                                                     const std::vector<Shape>& b) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (a[i].shape_type != b[j].shape_type) continue;
            pairs.emplace_back(std::hypot(a[i].x - b[j].x, a[i].y - b[j].y), i, j);
        }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> used_a(a.size()), used_b(b.size());
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& [dist, i, j] : pairs) {
        if (used_a[i] || used_b[j]) continue;
        used_a[i] = used_b[j] = true;
        out.emplace_back(i, j);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline DiagramDelta diff_diagrams(const Diagram& a, const Diagram& b) {
    if (a.canvas != b.canvas) throw Error(ErrorCode::CanvasMismatch, "diagrams use different canvases");
    DiagramDelta delta;
    delta.matching = greedy_match(a.shapes, b.shapes);
    std::vector<bool> matched_a(a.shapes.size()), matched_b(b.shapes.size());
    for (auto [i, j] : delta.matching) {
        matched_a[i] = matched_b[j] = true;
        for (auto field : kShapeFields) {
            auto before = get_field(a.shapes[i], field);
            auto after = get_field(b.shapes[j], field);
            if (before != after) delta.modified.push_back({i, field, before, after});
        }
    }
    for (std::size_t i = 0; i < a.shapes.size(); ++i) {
        if (!matched_a[i]) delta.removed.emplace_back(i, a.shapes[i]);
    }
    for (std::size_t j = 0; j < b.shapes.size(); ++j) {
        if (!matched_b[j]) delta.added.emplace_back(j, b.shapes[j]);
    }
    return delta;
}

inline Diagram apply_delta(const Diagram& a, const DiagramDelta& delta) {
    std::vector<Shape> edited = a.shapes;
    for (const auto& change : delta.modified) {
        if (change.index >= edited.size()) throw Error(ErrorCode::InvalidValue, "delta index out of range");
        set_field(edited[change.index], change.field, change.after);
    }
    std::size_t target_size = delta.matching.size() + delta.added.size();
    std::vector<std::optional<Shape>> slots(target_size);
    auto place = [&](std::size_t index, const Shape& shape) {
        if (index >= target_size || slots[index]) throw Error(ErrorCode::InvalidValue, "inconsistent delta");
        slots[index] = shape;
    };
    for (auto [i, j] : delta.matching) {
        if (i >= edited.size()) throw Error(ErrorCode::InvalidValue, "delta index out of range");
        place(j, edited[i]);
    }
    for (const auto& [j, shape] : delta.added) place(j, shape);
    Diagram out{a.canvas, {}};
    out.shapes.reserve(target_size);
    for (auto& slot : slots) out.shapes.push_back(*slot);
    return out;
}

inline std::string format_field_value(const FieldValue& value) {
    if (const auto* number = std::get_if<double>(&value)) return format_number(*number);
    return std::string(to_string(std::get<NamedColor>(value)));
}

/// Short noun phrase for a shape: "red rectangle", "unfilled circle".
inline std::string shape_label(const Shape& shape) {
    std::string color = shape.fill_color == NamedColor::None ? std::string("unfilled")
                                                             : std::string(to_string(shape.fill_color));
    return color + " " + std::string(to_string(shape.shape_type));
}

/// One human-readable line per delta entry.
inline std::vector<std::string> describe_delta(const Diagram& source, const DiagramDelta& delta) {
    std::vector<std::string> lines;
    for (const auto& [i, shape] : delta.removed) {
        lines.push_back("remove shape " + std::to_string(i) + " (" + shape_label(shape) + ")");
    }
    for (const auto& change : delta.modified) {
        std::string label = change.index < source.shapes.size() ? shape_label(source.shapes[change.index]) : "?";
        lines.push_back("shape " + std::to_string(change.index) + " (" + label + "): " +
                        std::string(to_string(change.field)) + " " + format_field_value(change.before) +
                        " -> " + format_field_value(change.after));
    }
    for (const auto& [j, shape] : delta.added) {
        lines.push_back("add " + shape_label(shape) + " at (" + format_number(shape.x) + ", " +
                        format_number(shape.y) + ") as shape " + std::to_string(j));
    }
    if (!delta.order_preserved()) lines.push_back("reorder shapes");
    return lines;
}

}  // namespace sketch2svg
