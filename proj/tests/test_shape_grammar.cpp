#include "sketch2svg/shape_grammar.hpp"

#include "support/negative_corpus.hpp"
#include "support/random_diagrams.hpp"

#include <gtest/gtest.h>

#include <random>

namespace sketch2svg {
namespace {

const Canvas kCanvas{200, 100};

ErrorCode error_of(std::string_view text) {
    try {
        parse_diagram(text, kCanvas);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error for " << text;
    return ErrorCode::InvalidState;
}

TEST(ParseDiagram, DefaultsFilledForBareCircle) {
    auto d = parse_diagram(R"({"shapes":[{"shape_type":"circle"}]})", kCanvas);
    ASSERT_EQ(d.shapes.size(), 1u);
    const auto& s = d.shapes[0];
    EXPECT_EQ(s.shape_type, ShapeType::Circle);
    EXPECT_EQ(s.x, 0);
    EXPECT_EQ(s.y, 0);
    EXPECT_EQ(s.scale_x, 1);
    EXPECT_EQ(s.scale_y, 1);
    EXPECT_EQ(s.fill_color, NamedColor::None);
    EXPECT_EQ(s.stroke_color, NamedColor::Black);
    EXPECT_EQ(s.stroke_width, 1);
    EXPECT_EQ(s.rotation, 0);
    EXPECT_EQ(d.canvas, kCanvas);
}

TEST(ParseDiagram, EmptyProgram) {
    auto d = parse_diagram(R"({"shapes":[]})", kCanvas);
    EXPECT_TRUE(d.shapes.empty());
}

TEST(ParseDiagram, UnknownShapeTypeRejected) {
    EXPECT_EQ(error_of(R"({"shapes":[{"shape_type":"square"}]})"), ErrorCode::UnknownShapeType);
}

TEST(ParseDiagram, PreservesShapeOrder) {
    auto d = parse_diagram(
        R"({"shapes":[{"shape_type":"triangle"},{"shape_type":"circle"},{"shape_type":"rectangle"}]})", kCanvas);
    ASSERT_EQ(d.shapes.size(), 3u);
    EXPECT_EQ(d.shapes[0].shape_type, ShapeType::Triangle);
    EXPECT_EQ(d.shapes[1].shape_type, ShapeType::Circle);
    EXPECT_EQ(d.shapes[2].shape_type, ShapeType::Rectangle);
}

TEST(ParseDiagram, NegativeCorpus) {
    for (const auto& c : testing::negative_corpus()) {
        EXPECT_EQ(error_of(c.document), c.expected) << c.document;
    }
}

TEST(ParseDiagram, WrongTypesAreInvalidValue) {
    EXPECT_EQ(error_of(R"({"shapes":[{"shape_type":"circle","x":"10"}]})"), ErrorCode::InvalidValue);
    EXPECT_EQ(error_of(R"({"shapes":[{"shape_type":"circle","stroke_width":-1}]})"), ErrorCode::InvalidValue);
    EXPECT_EQ(error_of(R"({"shapes":{}})"), ErrorCode::InvalidValue);
    EXPECT_EQ(error_of(R"([])"), ErrorCode::InvalidValue);
    EXPECT_EQ(error_of(R"({})"), ErrorCode::MissingRequiredField);
}

TEST(ParseDiagram, ErrorCarriesPointer) {
    try {
        parse_diagram(R"({"shapes":[{"shape_type":"circle"},{"shape_type":"circle","fill_color":"Red"}]})", kCanvas);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.pointer(), "/shapes/1/fill_color");
    }
}

TEST(ValidateDocument, CollectsAllIssuesAndWarnings) {
    auto issues = validate_document(
        R"({"shapes":[{"shape_type":"circle","scale_x":10,"scale_y":20},{"shape_type":"blob","fill_color":"Blue"}]})");
    ASSERT_EQ(issues.size(), 3u);
    EXPECT_TRUE(issues[0].warning);
    EXPECT_EQ(issues[0].pointer, "/shapes/0");
    EXPECT_EQ(issues[1].code, ErrorCode::UnknownShapeType);
    EXPECT_EQ(issues[2].code, ErrorCode::UnknownColor);
    EXPECT_EQ(issues[2].pointer, "/shapes/1/fill_color");
}

TEST(ValidateDocument, CircleWithUnequalScalesIsOnlyAWarning) {
    auto d = parse_diagram(R"({"shapes":[{"shape_type":"circle","scale_x":10,"scale_y":20}]})", kCanvas);
    EXPECT_EQ(d.shapes[0].scale_x, 10);
    EXPECT_EQ(d.shapes[0].scale_y, 20);
}

TEST(NormalizeShape, RotationReducedModulo360) {
    auto s = normalize_shape({{"shape_type", "rectangle"}, {"rotation", 450}});
    EXPECT_EQ(s.rotation, 90);
    EXPECT_EQ(normalize_shape({{"shape_type", "rectangle"}, {"rotation", -90}}).rotation, 270);
    EXPECT_EQ(normalize_shape({{"shape_type", "rectangle"}, {"rotation", 359.99999}}).rotation, 0);
}

TEST(NormalizeShape, OmittedFillIsNone) {
    auto s = normalize_shape({{"shape_type", "triangle"}});
    EXPECT_EQ(s.fill_color, NamedColor::None);
}

TEST(NormalizeShape, ScaleYKeepsDefault) {
    auto s = normalize_shape({{"shape_type", "ellipse"}, {"scale_x", 40}});
    EXPECT_EQ(s.scale_x, 40);
    EXPECT_EQ(s.scale_y, 1);
}

TEST(NormalizeShape, MissingTypeIsError) {
    try {
        normalize_shape({{"x", 3}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingRequiredField);
    }
}

TEST(NormalizeShape, Idempotent) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        Shape raw;
        raw.shape_type = ShapeType::Ellipse;
        std::uniform_real_distribution<double> u(-1000, 1000);
        raw.x = u(rng);
        raw.y = u(rng);
        raw.scale_x = std::abs(u(rng)) + 1;
        raw.scale_y = std::abs(u(rng)) + 1;
        raw.rotation = u(rng) * 10;
        auto once = normalize(raw);
        EXPECT_EQ(normalize(once), once);
        EXPECT_GE(once.rotation, 0);
        EXPECT_LT(once.rotation, 360);
    }
}

TEST(SerializeDiagram, EmitsEveryFieldInGrammarOrder) {
    Diagram d{kCanvas, {Shape{}}};
    EXPECT_EQ(serialize_diagram(d),
              R"({"shapes": [{"shape_type": "circle", "x": 0, "y": 0, "scale_x": 1, "scale_y": 1, )"
              R"("fill_color": "none", "stroke_color": "black", "stroke_width": 1, "rotation": 0}]})");
}

TEST(SerializeDiagram, EmptyDiagram) { EXPECT_EQ(serialize_diagram(Diagram{kCanvas, {}}), R"({"shapes": []})"); }

TEST(SerializeDiagram, NumberFormatting) {
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(format_number(0.25), "0.25");
    EXPECT_EQ(format_number(-0.00001), "0");
    EXPECT_EQ(format_number(12.34567), "12.3457");
    EXPECT_EQ(format_number(-3.5), "-3.5");
}

TEST(SerializeDiagram, RandomRoundTrip) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 100; ++i) {
        auto d = testing::random_diagram(rng, kCanvas, 0, 12);
        auto text = serialize_diagram(d);
        EXPECT_EQ(parse_diagram(text, kCanvas), d) << text;
        EXPECT_EQ(serialize_diagram(parse_diagram(text, kCanvas)), text);
    }
}

TEST(DiffDiagrams, IdenticalIsEmpty) {
    std::mt19937_64 rng(1);
    auto a = testing::random_diagram(rng, kCanvas, 1, 8);
    auto delta = diff_diagrams(a, a);
    EXPECT_TRUE(delta.empty());
    EXPECT_EQ(delta.size(), 0u);
}

TEST(DiffDiagrams, SingleFillChange) {
    Diagram a{kCanvas, {Shape{ShapeType::Rectangle, 20, 20, 10, 10, NamedColor::Red},
                        Shape{ShapeType::Circle, 80, 50, 10, 10, NamedColor::Green}}};
    Diagram b = a;
    b.shapes[0].fill_color = NamedColor::Blue;
    auto delta = diff_diagrams(a, b);
    ASSERT_EQ(delta.modified.size(), 1u);
    EXPECT_TRUE(delta.added.empty());
    EXPECT_TRUE(delta.removed.empty());
    EXPECT_EQ(delta.modified[0].field, ShapeField::FillColor);
    EXPECT_EQ(delta.modified[0].before, FieldValue{NamedColor::Red});
    EXPECT_EQ(delta.modified[0].after, FieldValue{NamedColor::Blue});
    EXPECT_EQ(apply_delta(a, delta), b);
}

TEST(DiffDiagrams, AddToEmpty) {
    Diagram a{kCanvas, {}};
    Diagram b{kCanvas, {Shape{ShapeType::Triangle, 5, 5}}};
    auto delta = diff_diagrams(a, b);
    EXPECT_EQ(delta.added.size(), 1u);
    EXPECT_EQ(delta.size(), 1u);
    EXPECT_EQ(apply_delta(a, delta), b);
}

TEST(DiffDiagrams, CanvasMismatch) {
    try {
        diff_diagrams(Diagram{kCanvas, {}}, Diagram{Canvas{10, 10}, {}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CanvasMismatch);
    }
}

TEST(DiffDiagrams, DeltaSoundOnRandomPairs) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
        auto a = testing::random_diagram(rng, kCanvas, 0, 8);
        auto b = testing::random_diagram(rng, kCanvas, 0, 8);
        // share some shapes so matches and modifications both occur
        if (!a.shapes.empty() && !b.shapes.empty()) b.shapes[0] = a.shapes.back();
        EXPECT_EQ(apply_delta(a, diff_diagrams(a, b)), b);
    }
}

TEST(DiffDiagrams, DescribeDeltaLines) {
    Diagram a{kCanvas, {Shape{ShapeType::Rectangle, 20, 20, 10, 10, NamedColor::Red}}};
    Diagram b = a;
    b.shapes[0].x = 25;
    auto lines = describe_delta(a, diff_diagrams(a, b));
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_EQ(lines[0], "shape 0 (red rectangle): x 20 -> 25");
}

TEST(Canvas, ParseWxH) {
    EXPECT_EQ(parse_canvas("640x480"), (Canvas{640, 480}));
    EXPECT_THROW(parse_canvas("640"), Error);
    EXPECT_THROW(parse_canvas("0x10"), Error);
    EXPECT_THROW(parse_canvas("10x10px"), Error);
}

}  // namespace
}  // namespace sketch2svg
