#pragma once

// Prompt text for the three roles. Everything a backend needs to see goes
// through these builders, so tests can assert on prompt contents directly.

#include "sketch2svg/model_types.hpp"
#include "sketch2svg/shape_grammar.hpp"
#include "sketch2svg/svg_renderer.hpp"

#include <memory>
#include <string>
#include <vector>

namespace sketch2svg {

inline const std::string kDefaultInstruction =
    "Stick to the text instruction shown on the image. The color text refers to the fill color. "
    "Do not include any text in the final diagram.";

struct PromptImage {
    std::string label;  // "sketch", "current", "candidate 1", ...
    std::shared_ptr<const RasterImage> image;
};

/// System text, user text, and images in the order they are referenced.
struct ChatPrompt {
    std::string system;
    std::string user;
    std::vector<PromptImage> images;

    [[nodiscard]] std::string text() const { return system + "\n\n" + user; }
};

namespace prompts {

inline std::string grammar_reference(const Canvas& canvas) {
    std::string colors;
    for (auto c : kNamedColors) {
        if (!colors.empty()) colors += ", ";
        colors += to_string(c);
    }
    return "Diagram programs are JSON documents of the form {\"shapes\": [ ... ]}. Shapes are drawn in list "
           "order, later ones on top. The canvas is " +
           std::to_string(canvas.width) + "x" + std::to_string(canvas.height) +
           " pixels with the origin at the top-left corner and y growing downward.\n"
           "Each shape has these fields:\n"
           "  shape_type: one of circle, rectangle, ellipse, triangle (required)\n"
           "  x, y: center of the shape in pixels (required)\n"
           "  scale_x, scale_y: width and height in pixels, > 0 (circles use scale_x as the diameter)\n"
           "  fill_color, stroke_color: one of " +
           colors +
           "\n"
           "  stroke_width: outline width in pixels, >= 0 (default 1)\n"
           "  rotation: clockwise degrees about the center (default 0)\n"
           "Triangles are isosceles with the apex pointing up before rotation. No other fields are allowed.";
}

inline std::string failures_block(const std::vector<FailureFeedback>& failures) {
    if (failures.empty()) return {};
    std::string out = "These changes were tried since the last accepted edit and made things worse. "
                      "Do not propose them again:\n";
    for (std::size_t i = 0; i < failures.size(); ++i) {
        const auto& f = failures[i];
        out += "[failed attempt " + std::to_string(i + 1) + " at step " + std::to_string(f.step) + "]\n";
        for (const auto& s : f.rejected_suggestions) out += "  suggestion: " + s + "\n";
        for (const auto& d : f.rejected_deltas) out += "  program change: " + d + "\n";
    }
    return out;
}

inline const std::string kCritiqueFormat =
    "Answer with one JSON object and nothing else:\n"
    "{\"scene_description\": \"...\", \"discrepancies\": [\"...\"], \"suggestions\": [\"...\"]}\n"
    "List at most three discrepancies, most important first, with exactly one suggestion for each. "
    "If the rendered diagram already matches the sketch, answer with empty lists and "
    "\"no_differences\": true.";

inline ChatPrompt describe_sketch(std::shared_ptr<const RasterImage> sketch, const std::string& instruction,
                                  const Canvas& canvas) {
    ChatPrompt p;
    p.system = "You read hand-drawn sketches of diagrams and describe them in terms of simple primitives.\n" +
               grammar_reference(canvas);
    p.user = "Instruction: " + instruction +
             "\n\nDescribe the sketch in the first image as a list of primitives. For each one give its type, "
             "fill and outline color, rough size, rough position on the canvas, and orientation. Mention how "
             "the primitives relate to each other (left of, above, touching, inside, aligned).\n"
             "Answer with one JSON object and nothing else: {\"scene_description\": \"...\"}";
    p.images.push_back({"sketch", std::move(sketch)});
    return p;
}

inline ChatPrompt initial_program(const std::string& description, const std::string& instruction,
                                  const Canvas& canvas) {
    ChatPrompt p;
    p.system = "You write diagram programs.\n" + grammar_reference(canvas);
    p.user = "Instruction: " + instruction + "\n\nScene description:\n" + description +
             "\n\nWrite a program that draws this scene. Answer with the JSON document only.";
    return p;
}

inline ChatPrompt critique(std::shared_ptr<const RasterImage> sketch, std::shared_ptr<const RasterImage> current,
                           const Diagram& program, const std::string& instruction,
                           const std::vector<FailureFeedback>& failures) {
    ChatPrompt p;
    p.system = "You compare a rendered diagram with the hand-drawn sketch it should reproduce.\n" +
               grammar_reference(program.canvas);
    p.user = "Instruction: " + instruction +
             "\n\nThe first image is the sketch. The second image is the current rendering of this program:\n" +
             serialize_diagram(program) +
             "\n\nFirst describe what the sketch shows using the available primitives. Then list the visual "
             "differences between the rendering and the sketch. Describe each difference qualitatively, "
             "relative to other shapes or to the canvas (for example \"the blue circle should sit to the "
             "right of the red square\"), never as raw coordinates. For each difference suggest one change.\n";
    if (auto block = failures_block(failures); !block.empty()) p.user += "\n" + block;
    p.user += "\n" + kCritiqueFormat;
    p.images.push_back({"sketch", std::move(sketch)});
    p.images.push_back({"current", std::move(current)});
    return p;
}

inline std::string strategy_directive(Strategy strategy) {
    switch (strategy) {
        case Strategy::Conservative: return "Apply only the first suggestion and keep everything else unchanged.";
        case Strategy::Moderate: return "Apply the first half of the suggestions, rounding up.";
        case Strategy::Aggressive: return "Apply every suggestion.";
        case Strategy::Alternative:
            return "Apply every suggestion, but choose a different layout or drawing order than the obvious one.";
        case Strategy::Focused:
            return "Apply only the suggestions that concern the single most wrong shape, and apply all of them.";
    }
    return {};
}

inline ChatPrompt synthesize(const Diagram& program, const CritiqueReport& report, Strategy strategy,
                             const std::string& instruction) {
    ChatPrompt p;
    p.system = "You edit diagram programs.\n" + grammar_reference(program.canvas);
    p.user = "Instruction: " + instruction + "\n\nCurrent program:\n" + serialize_diagram(program) +
             "\n\nScene description:\n" + report.scene_description + "\n\nDifferences and suggested changes:\n";
    for (std::size_t i = 0; i < report.discrepancies.size(); ++i) {
        p.user += std::to_string(i + 1) + ". " + report.discrepancies[i] + "\n   change: " +
                  (i < report.suggestions.size() ? report.suggestions[i] : std::string{}) + "\n";
    }
    p.user += "\nStrategy (" + std::string(to_string(strategy)) + "): " + strategy_directive(strategy) +
              "\nAnswer with the full edited JSON document only.";
    return p;
}

inline ChatPrompt judge(std::shared_ptr<const RasterImage> sketch, std::shared_ptr<const RasterImage> current,
                        const std::vector<std::shared_ptr<const RasterImage>>& candidates,
                        const std::string& instruction) {
    ChatPrompt p;
    p.system = "You pick the rendering that is closest to a hand-drawn sketch.";
    p.user = "Instruction: " + instruction +
             "\n\nThe first image is the sketch. Image 0 is the current rendering. Images 1 to " +
             std::to_string(candidates.size()) +
             " are candidate edits. Choose the one that best matches the sketch in shapes, positions, sizes, "
             "colors and relations between shapes. Choose 0 if no candidate improves on the current rendering.\n"
             "Answer with one JSON object and nothing else: {\"selected\": <index>, \"rationale\": \"...\"}";
    p.images.push_back({"sketch", std::move(sketch)});
    p.images.push_back({"0", std::move(current)});
    for (std::size_t i = 0; i < candidates.size(); ++i) p.images.push_back({std::to_string(i + 1), candidates[i]});
    return p;
}

inline std::string repair_note(const std::string& error) {
    return "\n\nYour previous answer could not be used: " + error +
           "\nReply again with a corrected answer in the required format.";
}

}  // namespace prompts

}  // namespace sketch2svg
