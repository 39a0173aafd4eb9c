#include "sketch2svg/geometry.hpp"

#include "support/random_diagrams.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

namespace sketch2svg {
namespace {

bool has(const std::vector<QualitativeRelation>& rels, RelationKind kind, std::size_t s, std::size_t o) {
    return std::find(rels.begin(), rels.end(), QualitativeRelation{kind, s, o}) != rels.end();
}

TEST(BoundingBox, UnrotatedRectangle) {
    auto b = bounding_box(Shape{ShapeType::Rectangle, 50, 50, 20, 10});
    EXPECT_EQ(b, (Box{40, 45, 60, 55}));
}

TEST(BoundingBox, QuarterTurnRectangle) {
    auto b = bounding_box(Shape{ShapeType::Rectangle, 50, 50, 20, 10, NamedColor::None, NamedColor::Black, 1, 90});
    EXPECT_NEAR(b.min_x, 45, 1e-9);
    EXPECT_NEAR(b.min_y, 40, 1e-9);
    EXPECT_NEAR(b.max_x, 55, 1e-9);
    EXPECT_NEAR(b.max_y, 60, 1e-9);
}

TEST(BoundingBox, Circle) {
    EXPECT_EQ(bounding_box(Shape{ShapeType::Circle, 30, 30, 10, 10}), (Box{25, 25, 35, 35}));
}

TEST(BoundingBox, MatchesRotatedOutlineExtrema) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        auto s = testing::random_shape(rng, Canvas{200, 200});
        auto box = bounding_box(s);
        // dense sampling of the rotated outline as the oracle
        auto poly = outline_polygon(s);
        double lo_x = 1e9, hi_x = -1e9;
        for (auto p : poly) {
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
        }
        double tol = s.shape_type == ShapeType::Rectangle || s.shape_type == ShapeType::Triangle ? 1e-9 : 0.01 * s.scale_x;
        EXPECT_NEAR(box.min_x, lo_x, tol);
        EXPECT_NEAR(box.max_x, hi_x, tol);
    }
}

TEST(Relations, SameYIsHorizontallyAlignedBothWays) {
    Diagram d{Canvas{100, 100}, {Shape{ShapeType::Circle, 20, 40, 10, 10}, Shape{ShapeType::Circle, 80, 40, 10, 10}}};
    auto rels = extract_relations(d);
    EXPECT_TRUE(has(rels, RelationKind::HorizontallyAligned, 0, 1));
    EXPECT_TRUE(has(rels, RelationKind::HorizontallyAligned, 1, 0));
    EXPECT_TRUE(has(rels, RelationKind::LeftOf, 0, 1));
    EXPECT_TRUE(has(rels, RelationKind::RightOf, 1, 0));
    EXPECT_FALSE(has(rels, RelationKind::VerticallyAligned, 0, 1));
}

TEST(Relations, ContainmentImpliesLarger) {
    Diagram d{Canvas{100, 100},
              {Shape{ShapeType::Rectangle, 50, 50, 10, 10}, Shape{ShapeType::Rectangle, 50, 50, 60, 60}}};
    auto rels = extract_relations(d);
    EXPECT_TRUE(has(rels, RelationKind::Contains, 1, 0));
    EXPECT_TRUE(has(rels, RelationKind::LargerThan, 1, 0));
    EXPECT_FALSE(has(rels, RelationKind::Contains, 0, 1));
    EXPECT_FALSE(has(rels, RelationKind::Touching, 0, 1));
}

TEST(Relations, HalfPixelGapIsTouching) {
    // boxes [10,20] and [20.5,30.5] on x
    Diagram d{Canvas{100, 100},
              {Shape{ShapeType::Rectangle, 15, 50, 10, 10}, Shape{ShapeType::Rectangle, 25.5, 50, 10, 10}}};
    EXPECT_NEAR(signed_separation(d.shapes[0], d.shapes[1]), 0.5, 1e-9);
    auto rels = extract_relations(d);
    EXPECT_TRUE(has(rels, RelationKind::Touching, 0, 1));
    EXPECT_TRUE(has(rels, RelationKind::Touching, 1, 0));
    d.shapes[1].x = 28;  // 3px gap
    EXPECT_FALSE(has(extract_relations(d), RelationKind::Touching, 0, 1));
    d.shapes[1].x = 22;  // 3px overlap
    EXPECT_FALSE(has(extract_relations(d), RelationKind::Touching, 0, 1));
}

TEST(Relations, SameColorNeedsAFill) {
    Diagram d{Canvas{100, 100}, {Shape{ShapeType::Circle, 10, 10}, Shape{ShapeType::Circle, 90, 90}}};
    EXPECT_FALSE(has(extract_relations(d), RelationKind::SameColor, 0, 1));
    d.shapes[0].fill_color = d.shapes[1].fill_color = NamedColor::Blue;
    EXPECT_TRUE(has(extract_relations(d), RelationKind::SameColor, 0, 1));
}

TEST(Relations, DeterministicOrder) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 20; ++i) {
        auto d = testing::random_diagram(rng, Canvas{100, 100}, 2, 6);
        auto rels = extract_relations(d);
        EXPECT_TRUE(std::is_sorted(rels.begin(), rels.end()));
        for (const auto& r : rels) EXPECT_NE(r.subject, r.object);
    }
}

/// Signed separation of two rasterized masks: max over directions of the
/// gap between projection intervals (negative means overlap depth).
double mask_separation(const Shape& a, const Shape& b, const Canvas& canvas, int ss) {
    auto mask = [&](Shape s) {
        s.fill_color = NamedColor::Black;
        s.stroke_color = NamedColor::None;
        auto img = rasterize(compile_svg(Diagram{canvas, {s}}), ss);
        std::vector<Point> pts;
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (img.rgb(x, y) != Rgb{255, 255, 255}) pts.push_back({(x + 0.5) / ss, (y + 0.5) / ss});
            }
        }
        return pts;
    };
    auto pa = mask(a), pb = mask(b);
    double best = -1e300;
    for (int k = 0; k < 360; ++k) {
        double t = std::numbers::pi * k / 360;
        double nx = std::cos(t), ny = std::sin(t);
        double a_lo = 1e300, a_hi = -1e300, b_lo = 1e300, b_hi = -1e300;
        for (auto p : pa) {
            double v = p.x * nx + p.y * ny;
            a_lo = std::min(a_lo, v);
            a_hi = std::max(a_hi, v);
        }
        for (auto p : pb) {
            double v = p.x * nx + p.y * ny;
            b_lo = std::min(b_lo, v);
            b_hi = std::max(b_hi, v);
        }
        best = std::max(best, std::max(b_lo - a_hi, a_lo - b_hi));
    }
    return best;
}

TEST(Relations, TouchingAgreesWithRasterMasks) {
    std::mt19937_64 rng(21);
    const Canvas canvas{64, 64};
    std::uniform_real_distribution<double> scale(8, 20), rot(0, 360), pos(16, 48), gap(-4, 4);
    std::uniform_int_distribution<int> type(0, 3);
    int checked = 0;
    for (int trial = 0; trial < 400 && checked < 40; ++trial) {
        Shape a{kShapeTypes[type(rng)], 32, 32, scale(rng), scale(rng)};
        a.rotation = rot(rng);
        Shape b{kShapeTypes[type(rng)], pos(rng), pos(rng), scale(rng), scale(rng)};
        b.rotation = rot(rng);
        a = normalize(a);
        b = normalize(b);
        double oracle = mask_separation(a, b, canvas, 4);
        // stay out of the discretization band around the 1px thresholds
        if (std::abs(std::abs(oracle) - 1.0) < 0.6) continue;
        ++checked;
        bool expected = oracle >= -1.0 && oracle <= 1.0;
        EXPECT_EQ(relation_holds(RelationKind::Touching, a, b, canvas), expected)
            << serialize_shape(a) << " / " << serialize_shape(b) << " mask separation " << oracle;
    }
    EXPECT_GE(checked, 20);
}

TEST(Relations, ContainsAgreesWithRasterMasks) {
    std::mt19937_64 rng(22);
    const Canvas canvas{64, 64};
    std::uniform_real_distribution<double> big(30, 50), small(4, 14), rot(0, 360), pos(14, 50);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Shape outer{ShapeType::Rectangle, 32, 32, big(rng), big(rng)};
        Shape inner{kShapeTypes[trial % 4], pos(rng), pos(rng), small(rng), small(rng)};
        inner.rotation = rot(rng);
        auto bounds = [&](const Shape& s) {
            auto img = rasterize(compile_svg(Diagram{canvas, {Shape{s.shape_type, s.x, s.y, s.scale_x, s.scale_y,
                                                                     NamedColor::Black, NamedColor::None, 0,
                                                                     s.rotation}}}),
                                 4);
            Box b{1e9, 1e9, -1e9, -1e9};
            for (int y = 0; y < img.height; ++y) {
                for (int x = 0; x < img.width; ++x) {
                    if (img.rgb(x, y) == Rgb{255, 255, 255}) continue;
                    b.min_x = std::min(b.min_x, x / 4.0);
                    b.min_y = std::min(b.min_y, y / 4.0);
                    b.max_x = std::max(b.max_x, (x + 1) / 4.0);
                    b.max_y = std::max(b.max_y, (y + 1) / 4.0);
                }
            }
            return b;
        };
        auto bo = bounds(outer), bi = bounds(inner);
        double margin = std::min({bi.min_x - bo.min_x, bi.min_y - bo.min_y, bo.max_x - bi.max_x, bo.max_y - bi.max_y});
        if (std::abs(margin - 1.0) < 0.6) continue;
        ++checked;
        EXPECT_EQ(relation_holds(RelationKind::Contains, outer, inner, canvas), margin >= 1.0)
            << serialize_shape(inner) << " margin " << margin;
    }
    EXPECT_GE(checked, 50);
}

TEST(StructuralDistance, IdenticalIsZero) {
    std::mt19937_64 rng(13);
    auto a = testing::random_diagram(rng, Canvas{100, 100}, 1, 8);
    auto d = structural_distance(a, a);
    EXPECT_EQ(d.value, 0);
    EXPECT_TRUE(d.equivalent());
}

TEST(StructuralDistance, MovedShapeCostsHalfNormalizedDisplacement) {
    Diagram a{Canvas{100, 100}, {Shape{ShapeType::Rectangle, 30, 30, 10, 10}, Shape{ShapeType::Circle, 70, 70, 8, 8}}};
    Diagram b = a;
    b.shapes[0].x += 10;
    // 0.5 * 10 / hypot(100, 100)
    EXPECT_NEAR(structural_distance(a, b).value, 0.0353553390593, 1e-12);
}

TEST(StructuralDistance, ExtraShapeCostsOnePenalty) {
    Diagram a{Canvas{100, 100},
              {Shape{ShapeType::Rectangle, 30, 30, 10, 10}, Shape{ShapeType::Circle, 70, 70, 8, 8},
               Shape{ShapeType::Triangle, 50, 20, 8, 8}}};
    Diagram b = a;
    b.shapes.push_back(Shape{ShapeType::Ellipse, 10, 90, 8, 4});
    auto d = structural_distance(a, b);
    EXPECT_DOUBLE_EQ(d.value, 1.0);
    EXPECT_EQ(d.matching.size(), 3u);
}

TEST(StructuralDistance, CanvasMismatch) {
    EXPECT_THROW(structural_distance(Diagram{Canvas{10, 10}, {}}, Diagram{Canvas{20, 10}, {}}), Error);
}

TEST(StructuralDistance, TermsMatchHandComputation) {
    const Canvas c{300, 400};  // diagonal 500
    Shape a{ShapeType::Rectangle, 100, 100, 20, 10, NamedColor::Red, NamedColor::Black, 1, 10};
    Shape b{ShapeType::Rectangle, 130, 140, 30, 10, NamedColor::Blue, NamedColor::Black, 1, 350};
    // position 50/500, size (10+0)/(20+30+10+10), fill 1, stroke 0, rotation 20/180
    double expected = 0.5 * 0.1 + 0.2 * (10.0 / 70.0) + 0.15 + 0.05 * (20.0 / 180.0);
    EXPECT_NEAR(shape_cost(a, b, c), expected, 1e-12);
}

TEST(StructuralDistance, SymmetricAndConsistentMatching) {
    std::mt19937_64 rng(14);
    const Canvas canvas{120, 80};
    for (int i = 0; i < 200; ++i) {
        auto a = testing::random_diagram(rng, canvas, 0, 9);
        auto b = testing::random_diagram(rng, canvas, 0, 9);
        auto ab = structural_distance(a, b), ba = structural_distance(b, a);
        EXPECT_EQ(ab.value, ba.value);
        EXPECT_EQ(structural_distance(a, a).value, 0);
        std::vector<bool> seen_a(a.shapes.size()), seen_b(b.shapes.size());
        for (auto [i, j] : ab.matching) {
            EXPECT_FALSE(seen_a[i]);
            EXPECT_FALSE(seen_b[j]);
            seen_a[i] = seen_b[j] = true;
            EXPECT_EQ(a.shapes[i].shape_type, b.shapes[j].shape_type);
        }
    }
}

/// Brute force over all injective assignments, as an oracle for the DP.
double brute_force_distance(const Diagram& a, const Diagram& b) {
    double total = 0;
    for (auto type : kShapeTypes) {
        std::vector<Shape> sa, sb;
        for (const auto& s : a.shapes) if (s.shape_type == type) sa.push_back(s);
        for (const auto& s : b.shapes) if (s.shape_type == type) sb.push_back(s);
        if (sa.size() < sb.size()) std::swap(sa, sb);
        total += static_cast<double>(sa.size() - sb.size());
        if (sb.empty()) continue;
        std::vector<std::size_t> perm(sa.size());
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            double sum = 0;
            for (std::size_t k = 0; k < sb.size(); ++k) sum += shape_cost(sa[perm[k]], sb[k], a.canvas);
            best = std::min(best, sum);
        } while (std::next_permutation(perm.begin(), perm.end()));
        total += best;
    }
    return total;
}

TEST(StructuralDistance, AssignmentMatchesBruteForce) {
    std::mt19937_64 rng(15);
    const Canvas canvas{100, 100};
    for (int i = 0; i < 150; ++i) {
        auto a = testing::random_diagram(rng, canvas, 0, 10);
        auto b = testing::random_diagram(rng, canvas, 0, 10);
        EXPECT_NEAR(structural_distance(a, b).value, brute_force_distance(a, b), 1e-9);
    }
}

TEST(StructuralDistance, SingleFieldEditTowardTargetLowersCost) {
    std::mt19937_64 rng(16);
    const Canvas canvas{100, 100};
    for (int i = 0; i < 300; ++i) {
        auto a = testing::random_shape(rng, canvas);
        auto b = testing::random_shape(rng, canvas);
        b.shape_type = a.shape_type;
        for (auto field : kShapeFields) {
            if (field == ShapeField::StrokeWidth) continue;
            if (a.shape_type == ShapeType::Circle && (field == ShapeField::ScaleY || field == ShapeField::Rotation)) continue;
            if (get_field(a, field) == get_field(b, field)) continue;
            auto edited = a;
            set_field(edited, field, get_field(b, field));
            EXPECT_LT(shape_cost(edited, b, canvas), shape_cost(a, b, canvas)) << to_string(field);
        }
    }
}

TEST(RelationDiff, IgnoresShapeOrderAndReportsChanges) {
    const Canvas canvas{200, 200};
    Diagram a{canvas,
              {Shape{ShapeType::Rectangle, 40, 100, 40, 40, NamedColor::Red},
               Shape{ShapeType::Circle, 150, 100, 30, 30, NamedColor::Blue}}};
    Diagram shuffled{canvas, {a.shapes[1], a.shapes[0]}};
    auto same = relation_diff(a, shuffled);
    EXPECT_TRUE(same.only_in_a.empty());
    EXPECT_TRUE(same.only_in_b.empty());

    // circle moved over the rectangle
    Diagram b = a;
    b.shapes[1].x = 40;
    b.shapes[1].y = 30;
    auto d = relation_diff(a, b);
    auto mentions = [](const std::vector<std::string>& lines, const std::string& text) {
        return std::any_of(lines.begin(), lines.end(),
                           [&](const std::string& l) { return l.find(text) != std::string::npos; });
    };
    EXPECT_TRUE(mentions(d.only_in_a, "left-of"));
    EXPECT_TRUE(mentions(d.only_in_a, "horizontally-aligned"));
    EXPECT_TRUE(mentions(d.only_in_b, "above"));
    EXPECT_TRUE(mentions(d.only_in_b, "vertically-aligned"));
    EXPECT_FALSE(mentions(d.only_in_b, "left-of"));
}

}  // namespace
}  // namespace sketch2svg
