#pragma once

// A backend that knows the diagram behind the sketch. It plays all three
// roles deterministically: the critic reports the largest remaining
// differences as qualitative text, the synthesizer applies exactly the
// suggested edits, and the judge ranks candidates by structural distance.
// Used for end-to-end tests and offline demos.

#include "sketch2svg/geometry.hpp"
#include "sketch2svg/model_gateway.hpp"
#include "sketch2svg/shape_grammar.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace sketch2svg {

/// One aspect of one shape to change, or a whole shape to add or remove.
struct PlannedEdit {
    enum class Kind { Position, Size, Fill, Stroke, Rotation, Remove, Add };

    Kind kind = Kind::Position;
    std::size_t source = 0;  // index in the current diagram (not for Add)
    std::size_t target = 0;  // index in the target diagram (not for Remove)
    double gain = 0;         // distance reduction when applied alone
    double pair_cost = 0;    // current cost of the shape this edit touches
    std::string discrepancy;
    std::string suggestion;
};

namespace oracle {

inline const char* kRowWords[5] = {"top", "upper", "middle", "lower", "bottom"};
inline const char* kColumnWords[5] = {"far left", "left", "center", "right", "far right"};
inline const char* kSizeWords[5] = {"tiny", "small", "medium", "large", "huge"};
inline constexpr double kSizeValues[5] = {0.04, 0.1, 0.2, 0.35, 0.55};
inline constexpr double kSizeBounds[4] = {0.07, 0.15, 0.27, 0.45};
inline const char* kOrientationWords[8] = {"upright",     "tilted right", "turned right", "tipped right",
                                           "upside down", "tipped left",  "turned left",  "tilted left"};

inline int grid_cell(double v, double extent, int cells) {
    return std::clamp(static_cast<int>(std::floor(v / extent * cells)), 0, cells - 1);
}

/// Coarse 3x3 area name: "top-left", "center", "bottom", ...
inline std::string area(const Shape& s, const Canvas& c) {
    static const char* rows[3] = {"top", "", "bottom"};
    static const char* cols[3] = {"left", "", "right"};
    int r = grid_cell(s.y, c.height, 3), k = grid_cell(s.x, c.width, 3);
    std::string out = rows[r];
    if (*cols[k]) out += out.empty() ? cols[k] : std::string("-") + cols[k];
    return out.empty() ? "center" : out;
}

inline std::string ref(const Shape& s, const Canvas& c) {
    return "the " + shape_label(s) + " in the " + area(s, c) + " area";
}

inline double signed_turn(double from, double to) {
    double d = std::fmod(to - from + 540.0, 360.0);
    if (d < 0) d += 360.0;
    return d - 180.0;
}

inline std::string magnitude(double fraction) {
    if (fraction < 0.05) return "slightly ";
    if (fraction > 0.25) return "far ";
    return "";
}

inline std::string turn_words(double degrees) {
    double a = std::abs(degrees);
    if (a < 20) return "slightly";
    if (a < 67.5) return "by about an eighth of a turn";
    if (a < 135) return "by about a quarter turn";
    return "by about a half turn";
}

/// A relation in the target that pins shape `j` to another shape that is
/// already present in the current diagram, phrased as a destination.
inline std::string anchor_phrase(const Diagram& current, const Diagram& target, std::size_t j,
                                 const std::map<std::size_t, std::size_t>& target_to_source) {
    static const std::pair<RelationKind, const char*> kinds[] = {
        {RelationKind::Touching, "until it touches "},
        {RelationKind::HorizontallyAligned, "until it lines up horizontally with "},
        {RelationKind::VerticallyAligned, "until it lines up vertically with "},
        {RelationKind::LeftOf, "so it sits left of "},
        {RelationKind::RightOf, "so it sits right of "},
        {RelationKind::Above, "so it sits above "},
        {RelationKind::Below, "so it sits below "},
    };
    for (const auto& [kind, words] : kinds) {
        for (std::size_t k = 0; k < target.shapes.size(); ++k) {
            if (k == j) continue;
            auto it = target_to_source.find(k);
            if (it == target_to_source.end()) continue;
            if (relation_holds(kind, target.shapes[j], target.shapes[k], target.canvas)) {
                return std::string(" ") + words + ref(current.shapes[it->second], current.canvas);
            }
        }
    }
    return " into the " + area(target.shapes[j], target.canvas) + " area";
}

inline std::string size_change_words(const Shape& from, const Shape& to) {
    double rx = to.scale_x / from.scale_x;
    double ry = effective_scale_y(to) / effective_scale_y(from);
    auto amount = [](double r) {
        double f = std::abs(std::log(r));
        if (f < 0.15) return std::string("slightly ");
        if (f > 0.6) return std::string("much ");
        return std::string();
    };
    if (from.shape_type == ShapeType::Circle || (rx > 1) == (ry > 1) || rx == 1 || ry == 1) {
        double g = std::sqrt(rx * ry);
        if (std::abs(rx - ry) / std::max(rx, ry) < 0.2 || from.shape_type == ShapeType::Circle) {
            return amount(g) + (g > 1 ? "larger" : "smaller");
        }
        if (std::abs(std::log(rx)) > std::abs(std::log(ry))) return amount(rx) + (rx > 1 ? "wider" : "narrower");
        return amount(ry) + (ry > 1 ? "taller" : "shorter");
    }
    return amount(rx) + (rx > 1 ? "wider" : "narrower") + " and " + amount(ry) + (ry > 1 ? "taller" : "shorter");
}

inline std::string fill_words(NamedColor c) {
    return c == NamedColor::None ? std::string("no fill") : "a " + std::string(to_string(c)) + " fill";
}

inline std::string outline_words(NamedColor c) {
    return c == NamedColor::None ? std::string("no outline") : "a " + std::string(to_string(c)) + " outline";
}

// ---------------------------------------------------------------------------
// Scene description (initial critic output) and its inverse
// ---------------------------------------------------------------------------

inline std::string describe_shape(const Shape& s, const Canvas& c) {
    std::string fill = s.fill_color == NamedColor::None ? "unfilled" : std::string(to_string(s.fill_color));
    std::string outline =
        s.stroke_color == NamedColor::None ? "no" : std::string(to_string(s.stroke_color));
    const double unit = std::min(c.width, c.height);
    const double sy = effective_scale_y(s);
    double g = std::sqrt(s.scale_x * sy) / unit;
    int size = 0;
    while (size < 4 && g >= kSizeBounds[size]) ++size;
    double r = s.scale_x / sy;
    std::string aspect = s.shape_type == ShapeType::Circle ? "even" : r > 1.5 ? "wide" : r < 1 / 1.5 ? "tall" : "even";
    int octant = s.shape_type == ShapeType::Circle ? 0 : static_cast<int>(std::lround(s.rotation / 45.0)) % 8;
    return fill + " " + std::string(to_string(s.shape_type)) + " with " + outline + " outline, " +
           kSizeWords[size] + ", " + aspect + ", " + kOrientationWords[octant] + ", in the " +
           kRowWords[grid_cell(s.y, c.height, 5)] + " " + kColumnWords[grid_cell(s.x, c.width, 5)] +
           " part of the canvas";
}

inline std::string describe_scene(const Diagram& d) {
    std::string out = "The sketch shows " + std::to_string(d.shapes.size()) +
                      (d.shapes.size() == 1 ? " shape" : " shapes") + ", listed from back to front:";
    for (const auto& s : d.shapes) out += "\n- " + describe_shape(s, d.canvas);
    return out;
}

template <std::size_t N>
inline int word_index(const char* const (&words)[N], const std::string& w) {
    for (std::size_t i = 0; i < N; ++i) {
        if (w == words[i]) return static_cast<int>(i);
    }
    return -1;
}

/// Rebuilds a coarse diagram from describe_scene() text. Lines that do
/// not follow the format are skipped.
inline Diagram parse_scene(const std::string& text, const Canvas& c) {
    Diagram d{c, {}};
    std::istringstream in(text);
    std::string line;
    const double unit = std::min(c.width, c.height);
    while (std::getline(in, line)) {
        if (line.rfind("- ", 0) != 0) continue;
        std::vector<std::string> parts;
        std::size_t pos = 2;
        while (true) {
            auto next = line.find(", ", pos);
            parts.push_back(line.substr(pos, next - pos));
            if (next == std::string::npos) break;
            pos = next + 2;
        }
        if (parts.size() != 5) continue;
        std::istringstream head(parts[0]);
        std::string fill, type, with, outline;
        head >> fill >> type >> with >> outline;
        auto shape_type = shape_type_from_string(type);
        auto fill_color = fill == "unfilled" ? std::optional(NamedColor::None) : color_from_string(fill);
        auto stroke_color = outline == "no" ? std::optional(NamedColor::None) : color_from_string(outline);
        int size = word_index(kSizeWords, parts[1]);
        int octant = word_index(kOrientationWords, parts[3]);
        const std::string prefix = "in the ", suffix = " part of the canvas";
        if (!shape_type || !fill_color || !stroke_color || size < 0 || octant < 0 ||
            parts[4].rfind(prefix, 0) != 0 || parts[4].size() < prefix.size() + suffix.size()) {
            continue;
        }
        std::string where = parts[4].substr(prefix.size(), parts[4].size() - prefix.size() - suffix.size());
        auto space = where.find(' ');
        if (space == std::string::npos) continue;
        int row = word_index(kRowWords, where.substr(0, space));
        int col = word_index(kColumnWords, where.substr(space + 1));
        if (row < 0 || col < 0) continue;

        Shape s;
        s.shape_type = *shape_type;
        s.fill_color = *fill_color;
        s.stroke_color = *stroke_color;
        double ratio = parts[2] == "wide" ? 2.0 : parts[2] == "tall" ? 0.5 : 1.0;
        double side = kSizeValues[size] * unit;
        s.scale_x = side * std::sqrt(ratio);
        s.scale_y = s.shape_type == ShapeType::Circle ? s.scale_x : side / std::sqrt(ratio);
        s.x = (col + 0.5) * c.width / 5.0;
        s.y = (row + 0.5) * c.height / 5.0;
        s.rotation = octant * 45.0;
        d.shapes.push_back(normalize(s));
    }
    return d;
}

}  // namespace oracle

// ---------------------------------------------------------------------------
// Edit planning
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<ShapeField> edit_fields(PlannedEdit::Kind kind) {
    switch (kind) {
        case PlannedEdit::Kind::Position: return {ShapeField::X, ShapeField::Y};
        case PlannedEdit::Kind::Size: return {ShapeField::ScaleX, ShapeField::ScaleY};
        case PlannedEdit::Kind::Fill: return {ShapeField::FillColor};
        case PlannedEdit::Kind::Stroke: return {ShapeField::StrokeColor};
        case PlannedEdit::Kind::Rotation: return {ShapeField::Rotation};
        default: return {};
    }
}

inline Shape with_edit(Shape s, const Shape& target, PlannedEdit::Kind kind) {
    for (auto f : edit_fields(kind)) set_field(s, f, get_field(target, f));
    if (s.shape_type == ShapeType::Circle) s.scale_y = s.scale_x;
    return s;
}

inline void phrase(PlannedEdit& e, const Diagram& current, const Diagram& target,
                   const std::map<std::size_t, std::size_t>& target_to_source) {
    using Kind = PlannedEdit::Kind;
    const Canvas& c = current.canvas;
    if (e.kind == Kind::Remove) {
        std::string who = oracle::ref(current.shapes[e.source], c);
        e.discrepancy = who + " has no counterpart in the sketch";
        e.suggestion = "Remove " + who;
        return;
    }
    const Shape& to = target.shapes[e.target];
    if (e.kind == Kind::Add) {
        e.discrepancy = "the sketch has a " + oracle::describe_shape(to, c) + " that the diagram lacks";
        e.suggestion = "Add a " + shape_label(to) + " with " + oracle::outline_words(to.stroke_color) +
                       oracle::anchor_phrase(current, target, e.target, target_to_source);
        return;
    }
    const Shape& from = current.shapes[e.source];
    const std::string who = oracle::ref(from, c);
    switch (e.kind) {
        case Kind::Position: {
            double dx = to.x - from.x, dy = to.y - from.y;
            std::string dir;
            if (std::abs(dy) >= 0.5) dir = dy > 0 ? "down" : "up";
            if (std::abs(dx) >= 0.5) dir += std::string(dir.empty() ? "" : " and ") + (dx > 0 ? "right" : "left");
            if (dir.empty()) dir = "a little";
            double frac = std::hypot(dx, dy) / std::min(c.width, c.height);
            e.discrepancy = who + " is out of place; in the sketch it lies " + oracle::magnitude(frac) +
                            "further " + dir;
            e.suggestion =
                "Move " + who + " " + oracle::magnitude(frac) + dir +
                oracle::anchor_phrase(current, target, e.target, target_to_source);
            return;
        }
        case Kind::Size: {
            auto words = oracle::size_change_words(from, to);
            e.discrepancy = who + " should be " + words;
            e.suggestion = "Make " + who + " " + words;
            return;
        }
        case Kind::Fill:
            e.discrepancy = who + " should have " + oracle::fill_words(to.fill_color);
            e.suggestion = "Give " + who + " " + oracle::fill_words(to.fill_color);
            return;
        case Kind::Stroke:
            e.discrepancy = who + " should have " + oracle::outline_words(to.stroke_color);
            e.suggestion = "Give " + who + " " + oracle::outline_words(to.stroke_color);
            return;
        case Kind::Rotation: {
            double turn = oracle::signed_turn(from.rotation, to.rotation);
            e.discrepancy = who + " is oriented differently from the sketch";
            e.suggestion = "Rotate " + who + (turn > 0 ? " clockwise " : " counter-clockwise ") +
                           oracle::turn_words(turn);
            return;
        }
        default: return;
    }
}

}  // namespace detail

/// Every edit that moves `current` toward `target`, largest distance
/// reduction first. Each edit on its own strictly lowers the structural
/// distance, and any set of them together does too.
inline std::vector<PlannedEdit> plan_edits(const Diagram& current, const Diagram& target,
                                           const CostWeights& w = {}) {
    using Kind = PlannedEdit::Kind;
    auto dist = structural_distance(current, target, w);
    std::vector<PlannedEdit> out;
    std::map<std::size_t, std::size_t> target_to_source;
    std::vector<bool> matched_source(current.shapes.size()), matched_target(target.shapes.size());
    for (auto [i, j] : dist.matching) {
        target_to_source[j] = i;
        matched_source[i] = matched_target[j] = true;
    }
    for (auto [i, j] : dist.matching) {
        const Shape& from = current.shapes[i];
        const Shape& to = target.shapes[j];
        const double base = shape_cost(from, to, current.canvas, w);
        for (auto kind : {Kind::Position, Kind::Size, Kind::Fill, Kind::Stroke, Kind::Rotation}) {
            if (from.shape_type == ShapeType::Circle && kind == Kind::Rotation) continue;
            double gain = base - shape_cost(detail::with_edit(from, to, kind), to, current.canvas, w);
            if (gain > 1e-12) out.push_back({kind, i, j, gain, base, {}, {}});
        }
    }
    for (std::size_t i = 0; i < current.shapes.size(); ++i) {
        if (!matched_source[i]) out.push_back({Kind::Remove, i, 0, w.unmatched_penalty, w.unmatched_penalty, {}, {}});
    }
    for (std::size_t j = 0; j < target.shapes.size(); ++j) {
        if (!matched_target[j]) out.push_back({Kind::Add, 0, j, w.unmatched_penalty, w.unmatched_penalty, {}, {}});
    }
    std::stable_sort(out.begin(), out.end(), [](const PlannedEdit& a, const PlannedEdit& b) {
        if (a.gain != b.gain) return a.gain > b.gain;
        if (a.kind != b.kind) return a.kind < b.kind;
        if (a.source != b.source) return a.source < b.source;
        return a.target < b.target;
    });
    for (auto& e : out) detail::phrase(e, current, target, target_to_source);
    return out;
}

/// Applies a subset of planned edits. Added shapes go on top, or at the
/// bottom of the stack when `adds_first`.
inline Diagram apply_edits(const Diagram& current, const Diagram& target, const std::vector<PlannedEdit>& edits,
                           bool adds_first = false) {
    using Kind = PlannedEdit::Kind;
    Diagram out = current;
    std::set<std::size_t, std::greater<>> removed;
    std::vector<std::size_t> added;
    for (const auto& e : edits) {
        if (e.kind == Kind::Remove) {
            removed.insert(e.source);
        } else if (e.kind == Kind::Add) {
            added.push_back(e.target);
        } else {
            out.shapes[e.source] = detail::with_edit(out.shapes[e.source], target.shapes[e.target], e.kind);
        }
    }
    for (auto i : removed) out.shapes.erase(out.shapes.begin() + static_cast<std::ptrdiff_t>(i));
    std::sort(added.begin(), added.end());
    std::vector<Shape> fresh;
    for (auto j : added) fresh.push_back(target.shapes[j]);
    out.shapes.insert(adds_first ? out.shapes.begin() : out.shapes.end(), fresh.begin(), fresh.end());
    return normalize(out);
}

/// Edits whose suggestion text appears in `suggestions`, in that order.
/// Repeated texts take successive plan entries.
inline std::vector<PlannedEdit> edits_for_suggestions(const std::vector<PlannedEdit>& plan,
                                                      const std::vector<std::string>& suggestions) {
    std::vector<bool> used(plan.size());
    std::vector<PlannedEdit> out;
    for (const auto& text : suggestions) {
        for (std::size_t k = 0; k < plan.size(); ++k) {
            if (!used[k] && plan[k].suggestion == text) {
                used[k] = true;
                out.push_back(plan[k]);
                break;
            }
        }
    }
    return out;
}

/// The subset of (ordered) edits a strategy applies.
inline std::vector<PlannedEdit> strategy_subset(const std::vector<PlannedEdit>& edits, Strategy strategy) {
    const std::size_t n = edits.size();
    switch (strategy) {
        case Strategy::Conservative: return {edits.begin(), edits.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(1, n))};
        case Strategy::Moderate: return {edits.begin(), edits.begin() + static_cast<std::ptrdiff_t>((n + 1) / 2)};
        case Strategy::Aggressive:
        case Strategy::Alternative: return edits;
        case Strategy::Focused: {
            if (edits.empty()) return {};
            auto key = [](const PlannedEdit& e) {
                return e.kind == PlannedEdit::Kind::Add ? std::pair{1, e.target} : std::pair{0, e.source};
            };
            std::size_t worst = 0;
            for (std::size_t k = 1; k < n; ++k) {
                if (edits[k].pair_cost > edits[worst].pair_cost) worst = k;
            }
            std::vector<PlannedEdit> out;
            for (const auto& e : edits) {
                if (key(e) == key(edits[worst])) out.push_back(e);
            }
            return out;
        }
    }
    return edits;
}

struct OracleOptions {
    double threshold = kEquivalenceThreshold;
    CostWeights weights{};
};

class OracleBackend : public ModelBackend {
public:
    explicit OracleBackend(Diagram target, OracleOptions options = {})
        : target_(normalize(std::move(target))), options_(options) {}

    [[nodiscard]] std::string name() const override { return "oracle"; }
    [[nodiscard]] const Diagram& target() const { return target_; }

    std::string complete(const ModelRequest& req) override {
        switch (req.role) {
            case ModelRole::Critic: return req.initial ? describe() : critique(req);
            case ModelRole::Synthesizer: return req.initial ? initial(req) : synthesize(req);
            case ModelRole::Judge: return judge(req);
        }
        return {};
    }

private:
    std::string describe() const {
        return nlohmann::json{{"scene_description", oracle::describe_scene(target_)}}.dump();
    }

    Diagram current_of(const ModelRequest& req) const {
        if (!req.current_program) throw Error(ErrorCode::InvalidState, "oracle needs the current program");
        if (req.current_program->canvas != target_.canvas) {
            throw Error(ErrorCode::CanvasMismatch, "oracle target canvas differs from the session canvas");
        }
        return *req.current_program;
    }

    std::string critique(const ModelRequest& req) const {
        Diagram current = current_of(req);
        nlohmann::json out{{"scene_description", oracle::describe_scene(target_)}};
        auto plan = plan_edits(current, target_, options_.weights);
        if (plan.empty() || structural_distance(current, target_, options_.weights).value < options_.threshold) {
            out["discrepancies"] = nlohmann::json::array();
            out["suggestions"] = nlohmann::json::array();
            out["no_differences"] = true;
            return out.dump();
        }
        std::set<std::string> rejected;
        for (const auto& f : req.failures) rejected.insert(f.rejected_suggestions.begin(), f.rejected_suggestions.end());
        std::vector<const PlannedEdit*> chosen;
        for (const auto& e : plan) {
            if (chosen.size() == kMaxDiscrepancies) break;
            if (!rejected.count(e.suggestion)) chosen.push_back(&e);
        }
        if (chosen.empty()) {
            for (std::size_t k = 0; k < std::min(plan.size(), kMaxDiscrepancies); ++k) chosen.push_back(&plan[k]);
        }
        nlohmann::json discrepancies = nlohmann::json::array(), suggestions = nlohmann::json::array();
        for (const auto* e : chosen) {
            discrepancies.push_back(e->discrepancy);
            suggestions.push_back(e->suggestion);
        }
        out["discrepancies"] = discrepancies;
        out["suggestions"] = suggestions;
        return out.dump();
    }

    std::string initial(const ModelRequest& req) const {
        if (!req.critique) throw Error(ErrorCode::InvalidState, "oracle needs the scene description");
        return serialize_diagram(oracle::parse_scene(req.critique->scene_description, target_.canvas));
    }

    std::string synthesize(const ModelRequest& req) const {
        Diagram current = current_of(req);
        if (!req.critique || !req.strategy) throw Error(ErrorCode::InvalidState, "oracle needs critique and strategy");
        auto plan = plan_edits(current, target_, options_.weights);
        auto edits = strategy_subset(edits_for_suggestions(plan, req.critique->suggestions), *req.strategy);
        return serialize_diagram(apply_edits(current, target_, edits, *req.strategy == Strategy::Alternative));
    }

    std::string judge(const ModelRequest& req) const {
        Diagram current = current_of(req);
        double best = structural_distance(current, target_, options_.weights).value;
        std::size_t selected = 0;
        for (std::size_t i = 0; i < req.candidate_programs.size(); ++i) {
            double d = structural_distance(req.candidate_programs[i], target_, options_.weights).value;
            if (d < best - 1e-12) {
                best = d;
                selected = i + 1;
            }
        }
        std::string why = selected == 0 ? "no candidate is closer to the sketch than the current diagram"
                                        : "candidate " + std::to_string(selected) + " is closest to the sketch";
        return nlohmann::json{{"selected", selected}, {"rationale", why + " (distance " + format_number(best) + ")"}}
            .dump();
    }

    Diagram target_;
    OracleOptions options_;
};

}  // namespace sketch2svg
