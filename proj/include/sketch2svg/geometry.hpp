#pragma once

// Qualitative spatial relations between shapes and a matching-based
// structural distance between diagrams.

#include "sketch2svg/error.hpp"
#include "sketch2svg/shape_grammar.hpp"
#include "sketch2svg/svg_renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace sketch2svg {

struct Box {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

    [[nodiscard]] double width() const { return max_x - min_x; }
    [[nodiscard]] double height() const { return max_y - min_y; }
    bool operator==(const Box&) const = default;
};

/// Circles render with scale_x as the diameter on both axes.
inline double effective_scale_y(const Shape& s) {
    return s.shape_type == ShapeType::Circle ? s.scale_x : s.scale_y;
}

/// Tight axis-aligned box of the rotated outline, stroke excluded.
inline Box bounding_box(const Shape& s) {
    const double rad = s.rotation * std::numbers::pi / 180.0;
    const double c = std::abs(std::cos(rad)), sn = std::abs(std::sin(rad));
    const double hx = s.scale_x / 2, hy = effective_scale_y(s) / 2;
    switch (s.shape_type) {
        case ShapeType::Rectangle: {
            double ex = hx * c + hy * sn, ey = hx * sn + hy * c;
            return {s.x - ex, s.y - ey, s.x + ex, s.y + ey};
        }
        case ShapeType::Circle:
        case ShapeType::Ellipse: {
            double ex = std::sqrt(hx * hx * c * c + hy * hy * sn * sn);
            double ey = std::sqrt(hx * hx * sn * sn + hy * hy * c * c);
            return {s.x - ex, s.y - ey, s.x + ex, s.y + ey};
        }
        case ShapeType::Triangle: {
            auto v = triangle_vertices(s);
            Box b{v[0].x, v[0].y, v[0].x, v[0].y};
            for (const auto& p : v) {
                b.min_x = std::min(b.min_x, p.x);
                b.min_y = std::min(b.min_y, p.y);
                b.max_x = std::max(b.max_x, p.x);
                b.max_y = std::max(b.max_y, p.y);
            }
            return b;
        }
    }
    return {};
}

inline double shape_area(const Shape& s) {
    switch (s.shape_type) {
        case ShapeType::Circle: return std::numbers::pi / 4 * s.scale_x * s.scale_x;
        case ShapeType::Ellipse: return std::numbers::pi / 4 * s.scale_x * s.scale_y;
        case ShapeType::Rectangle: return s.scale_x * s.scale_y;
        case ShapeType::Triangle: return s.scale_x * s.scale_y / 2;
    }
    return 0;
}

/// Convex outline in canvas coordinates; curved shapes become 128-gons.
inline std::vector<Point> outline_polygon(const Shape& s) {
    const Point c{s.x, s.y};
    std::vector<Point> out;
    switch (s.shape_type) {
        case ShapeType::Rectangle: {
            const double hx = s.scale_x / 2, hy = s.scale_y / 2;
            for (auto [dx, dy] : {std::pair{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}}) {
                out.push_back(rotate_about({s.x + dx, s.y + dy}, c, s.rotation));
            }
            break;
        }
        case ShapeType::Triangle: {
            auto v = triangle_vertices(s);
            out.assign(v.begin(), v.end());
            break;
        }
        case ShapeType::Circle:
        case ShapeType::Ellipse: {
            constexpr int kSegments = 128;
            const double rx = s.scale_x / 2, ry = effective_scale_y(s) / 2;
            for (int i = 0; i < kSegments; ++i) {
                double t = 2 * std::numbers::pi * i / kSegments;
                out.push_back(rotate_about({s.x + rx * std::cos(t), s.y + ry * std::sin(t)}, c, s.rotation));
            }
            break;
        }
    }
    return out;
}

namespace detail {

inline std::pair<double, double> project(const std::vector<Point>& poly, double nx, double ny) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : poly) {
        double v = p.x * nx + p.y * ny;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

}  // namespace detail

/// Signed separation of two convex outlines: the gap when disjoint,
/// minus the penetration depth when overlapping.
inline double signed_separation(const Shape& a, const Shape& b) {
    auto pa = outline_polygon(a);
    auto pb = outline_polygon(b);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto* poly : {&pa, &pb}) {
        for (std::size_t i = 0; i < poly->size(); ++i) {
            const auto& p = (*poly)[i];
            const auto& q = (*poly)[(i + 1) % poly->size()];
            double nx = q.y - p.y, ny = p.x - q.x;
            double len = std::hypot(nx, ny);
            if (len == 0) continue;
            nx /= len;
            ny /= len;
            auto [a_lo, a_hi] = detail::project(pa, nx, ny);
            auto [b_lo, b_hi] = detail::project(pb, nx, ny);
            best = std::max(best, std::max(b_lo - a_hi, a_lo - b_hi));
        }
    }
    if (best <= 0) return best;
    double gap = std::numeric_limits<double>::infinity();
    for (const auto* from : {&pa, &pb}) {
        const auto& to = from == &pa ? pb : pa;
        for (const auto& v : *from) {
            for (std::size_t i = 0; i < to.size(); ++i) {
                gap = std::min(gap, detail::segment_distance(v, to[i], to[(i + 1) % to.size()]));
            }
        }
    }
    return gap;
}

enum class RelationKind {
    LeftOf,
    RightOf,
    Above,
    Below,
    HorizontallyAligned,
    VerticallyAligned,
    Touching,
    Contains,
    LargerThan,
    SameColor,
};

constexpr std::string_view to_string(RelationKind kind) noexcept {
    switch (kind) {
        case RelationKind::LeftOf: return "left-of";
        case RelationKind::RightOf: return "right-of";
        case RelationKind::Above: return "above";
        case RelationKind::Below: return "below";
        case RelationKind::HorizontallyAligned: return "horizontally-aligned";
        case RelationKind::VerticallyAligned: return "vertically-aligned";
        case RelationKind::Touching: return "touching";
        case RelationKind::Contains: return "contains";
        case RelationKind::LargerThan: return "larger-than";
        case RelationKind::SameColor: return "same-color";
    }
    return "";
}

struct QualitativeRelation {
    RelationKind kind = RelationKind::LeftOf;
    std::size_t subject = 0;
    std::size_t object = 0;

    auto operator<=>(const QualitativeRelation&) const = default;
};

struct RelationTolerances {
    double alignment_fraction = 0.02;  // of canvas extent on that axis
    double touch_px = 1.0;
    double contain_margin_px = 1.0;
    double larger_ratio = 1.1;  // area ratio
};

inline bool relation_holds(RelationKind kind, const Shape& a, const Shape& b, const Canvas& canvas,
                           const RelationTolerances& tol = {}) {
    const Box ba = bounding_box(a), bb = bounding_box(b);
    switch (kind) {
        case RelationKind::LeftOf: return ba.max_x <= bb.min_x + tol.touch_px;
        case RelationKind::RightOf: return ba.min_x >= bb.max_x - tol.touch_px;
        case RelationKind::Above: return ba.max_y <= bb.min_y + tol.touch_px;
        case RelationKind::Below: return ba.min_y >= bb.max_y - tol.touch_px;
        case RelationKind::HorizontallyAligned:
            return std::abs(a.y - b.y) <= tol.alignment_fraction * canvas.height;
        case RelationKind::VerticallyAligned: return std::abs(a.x - b.x) <= tol.alignment_fraction * canvas.width;
        case RelationKind::Touching: {
            double sep = signed_separation(a, b);
            return sep <= tol.touch_px && sep >= -tol.touch_px;
        }
        case RelationKind::Contains:
            return bb.min_x >= ba.min_x + tol.contain_margin_px && bb.max_x <= ba.max_x - tol.contain_margin_px &&
                   bb.min_y >= ba.min_y + tol.contain_margin_px && bb.max_y <= ba.max_y - tol.contain_margin_px;
        case RelationKind::LargerThan: return shape_area(a) > tol.larger_ratio * shape_area(b);
        case RelationKind::SameColor: return a.fill_color != NamedColor::None && a.fill_color == b.fill_color;
    }
    return false;
}

inline constexpr std::array<RelationKind, 10> kRelationKinds{
    RelationKind::LeftOf,   RelationKind::RightOf,  RelationKind::Above,      RelationKind::Below,
    RelationKind::HorizontallyAligned, RelationKind::VerticallyAligned, RelationKind::Touching,
    RelationKind::Contains, RelationKind::LargerThan, RelationKind::SameColor};

/// Every relation that holds, ordered by (kind, subject, object).
inline std::vector<QualitativeRelation> extract_relations(const Diagram& d, const RelationTolerances& tol = {}) {
    std::vector<QualitativeRelation> out;
    const auto n = d.shapes.size();
    for (auto kind : kRelationKinds) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                if (relation_holds(kind, d.shapes[i], d.shapes[j], d.canvas, tol)) out.push_back({kind, i, j});
            }
        }
    }
    return out;
}

inline std::string describe_relation(const Diagram& d, const QualitativeRelation& r) {
    return "the " + shape_label(d.shapes[r.subject]) + " (#" + std::to_string(r.subject) + ") is " +
           std::string(to_string(r.kind)) + " the " + shape_label(d.shapes[r.object]) + " (#" +
           std::to_string(r.object) + ")";
}

// ---------------------------------------------------------------------------
// Structural distance
// ---------------------------------------------------------------------------

struct CostWeights {
    double position = 0.5;
    double size = 0.2;
    double fill = 0.15;
    double stroke = 0.1;
    double rotation = 0.05;
    double unmatched_penalty = 1.0;
};

inline constexpr double kEquivalenceThreshold = 0.01;

/// Smallest angle between two orientations, in [0, 180].
inline double angular_difference(double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return std::min(d, 360.0 - d);
}

/// Dissimilarity of two same-type shapes, in [0, 1]. The size term compares
/// the shapes' own (unrotated) extents so that it is independent of the
/// rotation term; circles are rotation invariant.
inline double shape_cost(const Shape& a, const Shape& b, const Canvas& canvas, const CostWeights& w = {}) {
    const double diagonal = std::hypot(canvas.width, canvas.height);
    const double position = std::min(1.0, std::hypot(a.x - b.x, a.y - b.y) / diagonal);
    const double ay = effective_scale_y(a), by = effective_scale_y(b);
    const double size = (std::abs(a.scale_x - b.scale_x) + std::abs(ay - by)) / (a.scale_x + b.scale_x + ay + by);
    const double fill = a.fill_color == b.fill_color ? 0.0 : 1.0;
    const double stroke = a.stroke_color == b.stroke_color ? 0.0 : 1.0;
    const double rotation =
        a.shape_type == ShapeType::Circle ? 0.0 : angular_difference(a.rotation, b.rotation) / 180.0;
    return w.position * position + w.size * size + w.fill * fill + w.stroke * stroke + w.rotation * rotation;
}

struct StructuralDistance {
    double value = 0;
    std::vector<std::pair<std::size_t, std::size_t>> matching;  // (index in a, index in b), sorted

    [[nodiscard]] bool equivalent(double threshold = kEquivalenceThreshold) const { return value < threshold; }
};

namespace detail {

/// Minimum-cost assignment saturating the smaller side. `cost[i][j]` with
/// rows >= cols. Exhaustive subset DP when cols <= 10, greedy otherwise.
inline std::vector<std::pair<std::size_t, std::size_t>> min_cost_assignment(
    const std::vector<std::vector<double>>& cost) {
    const std::size_t rows = cost.size();
    const std::size_t cols = rows ? cost[0].size() : 0;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (cols == 0) return out;
    if (cols > 10) {
        std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) pairs.emplace_back(cost[i][j], i, j);
        }
        std::sort(pairs.begin(), pairs.end());
        std::vector<bool> used_r(rows), used_c(cols);
        for (auto [c, i, j] : pairs) {
            if (used_r[i] || used_c[j]) continue;
            used_r[i] = used_c[j] = true;
            out.emplace_back(i, j);
        }
        std::sort(out.begin(), out.end());
        return out;
    }
    const std::size_t full = std::size_t{1} << cols;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // best[i][mask]: min cost having decided rows [0, i) with columns `mask` used.
    std::vector<std::vector<double>> best(rows + 1, std::vector<double>(full, kInf));
    best[0][0] = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t mask = 0; mask < full; ++mask) {
            double here = best[i][mask];
            if (here == kInf) continue;
            best[i + 1][mask] = std::min(best[i + 1][mask], here);
            for (std::size_t j = 0; j < cols; ++j) {
                if (mask & (std::size_t{1} << j)) continue;
                auto next = mask | (std::size_t{1} << j);
                best[i + 1][next] = std::min(best[i + 1][next], here + cost[i][j]);
            }
        }
    }
    // walk back from the saturated mask
    std::size_t mask = full - 1;
    for (std::size_t i = rows; i-- > 0;) {
        double target = best[i + 1][mask];
        if (best[i][mask] == target) continue;
        for (std::size_t j = 0; j < cols; ++j) {
            if (!(mask & (std::size_t{1} << j))) continue;
            auto prev = mask & ~(std::size_t{1} << j);
            if (best[i][prev] + cost[i][j] == target) {
                out.emplace_back(i, j);
                mask = prev;
                break;
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Canonical orientation so distance(a, b) and distance(b, a) run the
/// identical computation.
inline bool canonical_first(const std::vector<const Shape*>& a, const std::vector<const Shape*>& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto sa = serialize_shape(*a[i]), sb = serialize_shape(*b[i]);
        if (sa != sb) return sa < sb;
    }
    return true;
}

}  // namespace detail

inline StructuralDistance structural_distance(const Diagram& a, const Diagram& b, const CostWeights& w = {}) {
    if (a.canvas != b.canvas) throw Error(ErrorCode::CanvasMismatch, "diagrams use different canvases");
    StructuralDistance out;
    std::vector<double> matched_costs;
    std::size_t unmatched = 0;
    for (auto type : kShapeTypes) {
        std::vector<std::size_t> ia, ib;
        std::vector<const Shape*> sa, sb;
        for (std::size_t i = 0; i < a.shapes.size(); ++i) {
            if (a.shapes[i].shape_type == type) {
                ia.push_back(i);
                sa.push_back(&a.shapes[i]);
            }
        }
        for (std::size_t j = 0; j < b.shapes.size(); ++j) {
            if (b.shapes[j].shape_type == type) {
                ib.push_back(j);
                sb.push_back(&b.shapes[j]);
            }
        }
        unmatched += std::max(ia.size(), ib.size()) - std::min(ia.size(), ib.size());
        if (ia.empty() || ib.empty()) continue;
        const bool a_rows = detail::canonical_first(sa, sb);
        const auto& rows = a_rows ? sa : sb;
        const auto& cols = a_rows ? sb : sa;
        std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < cols.size(); ++c) cost[r][c] = shape_cost(*rows[r], *cols[c], a.canvas, w);
        }
        for (auto [r, c] : detail::min_cost_assignment(cost)) {
            matched_costs.push_back(cost[r][c]);
            if (a_rows) {
                out.matching.emplace_back(ia[r], ib[c]);
            } else {
                out.matching.emplace_back(ia[c], ib[r]);
            }
        }
    }
    std::sort(matched_costs.begin(), matched_costs.end());
    double total = 0;
    for (double c : matched_costs) total += c;
    out.value = total + w.unmatched_penalty * static_cast<double>(unmatched);
    std::sort(out.matching.begin(), out.matching.end());
    return out;
}

struct RelationDiff {
    std::vector<std::string> only_in_a;
    std::vector<std::string> only_in_b;
};

/// Relations that hold in one diagram but not the other, with shapes paired
/// up by the structural-distance matching. A relation whose shapes have no
/// partner on the other side counts as missing there. Lines are phrased
/// with the indices of the diagram they hold in.
inline RelationDiff relation_diff(const Diagram& a, const Diagram& b, const RelationTolerances& tol = {}) {
    auto matching = structural_distance(a, b).matching;
    std::map<std::size_t, std::size_t> a_to_b, b_to_a;
    for (auto [i, j] : matching) {
        a_to_b[i] = j;
        b_to_a[j] = i;
    }
    auto ra = extract_relations(a, tol), rb = extract_relations(b, tol);
    std::set<QualitativeRelation> set_a(ra.begin(), ra.end()), set_b(rb.begin(), rb.end());
    auto missing = [](const std::vector<QualitativeRelation>& rels, const std::set<QualitativeRelation>& other,
                      const std::map<std::size_t, std::size_t>& map, const Diagram& d) {
        std::vector<std::string> out;
        for (const auto& r : rels) {
            auto s = map.find(r.subject), o = map.find(r.object);
            if (s != map.end() && o != map.end() && other.count({r.kind, s->second, o->second})) continue;
            out.push_back(describe_relation(d, r));
        }
        return out;
    };
    return {missing(ra, set_b, a_to_b, a), missing(rb, set_a, b_to_a, b)};
}

}  // namespace sketch2svg
