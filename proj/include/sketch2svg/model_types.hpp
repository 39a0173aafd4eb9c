#pragma once

// Value types exchanged with the three model roles, and the parsers that
// turn raw model text into them.

#include "sketch2svg/error.hpp"
#include "sketch2svg/shape_grammar.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sketch2svg {

enum class ModelRole { Critic, Synthesizer, Judge };

constexpr std::string_view to_string(ModelRole role) noexcept {
    switch (role) {
        case ModelRole::Critic: return "critic";
        case ModelRole::Synthesizer: return "synthesizer";
        case ModelRole::Judge: return "judge";
    }
    return "";
}

enum class Strategy { Conservative, Moderate, Aggressive, Alternative, Focused };

inline constexpr std::array<Strategy, 5> kStrategies{Strategy::Conservative, Strategy::Moderate,
                                                     Strategy::Aggressive, Strategy::Alternative,
                                                     Strategy::Focused};

constexpr std::string_view to_string(Strategy strategy) noexcept {
    switch (strategy) {
        case Strategy::Conservative: return "conservative";
        case Strategy::Moderate: return "moderate";
        case Strategy::Aggressive: return "aggressive";
        case Strategy::Alternative: return "alternative";
        case Strategy::Focused: return "focused";
    }
    return "";
}

inline std::optional<Strategy> strategy_from_string(std::string_view name) {
    for (auto s : kStrategies) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

inline constexpr std::size_t kMaxDiscrepancies = 3;

struct CritiqueReport {
    std::string scene_description;
    std::vector<std::string> discrepancies;  // at most three
    std::vector<std::string> suggestions;    // one per discrepancy
    std::string raw_response;

    /// No discrepancies means the critic sees nothing left to fix.
    [[nodiscard]] bool converged() const { return discrepancies.empty(); }

    bool operator==(const CritiqueReport&) const = default;
};

/// A parsed program plus how it was obtained.
struct ProgramResponse {
    Diagram diagram;
    std::string raw_response;
    int repair_count = 0;
};

struct CandidateProgram {
    Strategy strategy = Strategy::Conservative;
    Diagram diagram;
    std::string raw_response;
    int repair_count = 0;
};

/// selected == 0 keeps the current image (revert); 1..N picks a candidate.
struct JudgeVerdict {
    std::size_t selected = 0;
    std::string rationale;
    std::string raw_response;
};

struct FailureFeedback {
    int step = 0;
    std::vector<std::string> rejected_suggestions;
    std::vector<std::string> rejected_deltas;

    bool operator==(const FailureFeedback&) const = default;
};

// ---------------------------------------------------------------------------
// JSON conversions (trace payloads and service DTOs)
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const CritiqueReport& r) {
    return {{"scene_description", r.scene_description},
            {"discrepancies", r.discrepancies},
            {"suggestions", r.suggestions},
            {"raw_response", r.raw_response}};
}

inline CritiqueReport critique_from_json(const nlohmann::json& j) {
    CritiqueReport r;
    r.scene_description = j.at("scene_description").get<std::string>();
    r.discrepancies = j.at("discrepancies").get<std::vector<std::string>>();
    r.suggestions = j.at("suggestions").get<std::vector<std::string>>();
    r.raw_response = j.value("raw_response", std::string{});
    return r;
}

inline nlohmann::json to_json(const FailureFeedback& f) {
    return {{"step", f.step}, {"rejected_suggestions", f.rejected_suggestions}, {"rejected_deltas", f.rejected_deltas}};
}

inline FailureFeedback failure_from_json(const nlohmann::json& j) {
    return {j.at("step").get<int>(), j.at("rejected_suggestions").get<std::vector<std::string>>(),
            j.at("rejected_deltas").get<std::vector<std::string>>()};
}

inline nlohmann::json to_json(const CandidateProgram& c) {
    return {{"strategy", std::string(to_string(c.strategy))},
            {"diagram", diagram_to_json(c.diagram)},
            {"raw_response", c.raw_response},
            {"repair_count", c.repair_count}};
}

inline CandidateProgram candidate_from_json(const nlohmann::json& j, const Canvas& canvas) {
    CandidateProgram c;
    auto strategy = strategy_from_string(j.at("strategy").get<std::string>());
    if (!strategy) throw Error(ErrorCode::InvalidValue, "unknown strategy in record");
    c.strategy = *strategy;
    c.diagram = diagram_from_json(j.at("diagram"), canvas);
    c.raw_response = j.value("raw_response", std::string{});
    c.repair_count = j.value("repair_count", 0);
    return c;
}

inline nlohmann::json to_json(const JudgeVerdict& v) {
    return {{"selected", v.selected}, {"rationale", v.rationale}, {"raw_response", v.raw_response}};
}

inline JudgeVerdict verdict_from_json(const nlohmann::json& j) {
    return {j.at("selected").get<std::size_t>(), j.at("rationale").get<std::string>(),
            j.value("raw_response", std::string{})};
}

// ---------------------------------------------------------------------------
// Model output parsing
// ---------------------------------------------------------------------------

/// First balanced top-level {...} in free text, skipping braces inside
/// string literals. Models like to wrap JSON in prose or code fences.
inline std::optional<std::string> extract_json_object(std::string_view text) {
    for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) return std::string(text.substr(start, i - start + 1));
            }
        }
        // unbalanced from this start; try the next brace
    }
    return std::nullopt;
}

inline nlohmann::json parse_model_json(std::string_view raw) {
    auto object = extract_json_object(raw);
    if (!object) throw Error(ErrorCode::MalformedModelOutput, "response contains no JSON object");
    try {
        return nlohmann::json::parse(*object);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedModelOutput, std::string("response JSON does not parse: ") + e.what());
    }
}

namespace detail {

inline std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) return {};
    if (!it->is_array()) throw Error(ErrorCode::MalformedModelOutput, std::string(key) + " must be an array");
    std::vector<std::string> out;
    for (const auto& item : *it) {
        if (!item.is_string()) throw Error(ErrorCode::MalformedModelOutput, std::string(key) + " must hold strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace detail

/// Critique response: {"scene_description", "discrepancies", "suggestions"}
/// or the same with "no_differences": true and empty lists. More than three
/// discrepancies are cut to the first three.
inline CritiqueReport parse_critique_response(std::string_view raw) {
    auto j = parse_model_json(raw);
    CritiqueReport r;
    r.raw_response = std::string(raw);
    auto desc = j.find("scene_description");
    if (desc == j.end() || !desc->is_string()) {
        throw Error(ErrorCode::MalformedModelOutput, "scene_description (string) is required");
    }
    r.scene_description = desc->get<std::string>();
    r.discrepancies = detail::string_list(j, "discrepancies");
    r.suggestions = detail::string_list(j, "suggestions");
    bool no_differences = j.value("no_differences", false);
    if (no_differences) {
        r.discrepancies.clear();
        r.suggestions.clear();
        return r;
    }
    if (r.discrepancies.empty()) {
        throw Error(ErrorCode::MalformedModelOutput,
                    "no discrepancies listed; set \"no_differences\": true if the images match");
    }
    if (r.discrepancies.size() != r.suggestions.size()) {
        throw Error(ErrorCode::MalformedModelOutput, "need exactly one suggestion per discrepancy");
    }
    if (r.discrepancies.size() > kMaxDiscrepancies) {
        r.discrepancies.resize(kMaxDiscrepancies);
        r.suggestions.resize(kMaxDiscrepancies);
    }
    return r;
}

/// Initial description response: only the scene description is used.
inline CritiqueReport parse_description_response(std::string_view raw) {
    auto j = parse_model_json(raw);
    auto desc = j.find("scene_description");
    if (desc == j.end() || !desc->is_string() || desc->get<std::string>().empty()) {
        throw Error(ErrorCode::MalformedModelOutput, "scene_description (non-empty string) is required");
    }
    CritiqueReport r;
    r.scene_description = desc->get<std::string>();
    r.raw_response = std::string(raw);
    return r;
}

inline JudgeVerdict parse_verdict_response(std::string_view raw, std::size_t candidate_count) {
    auto j = parse_model_json(raw);
    auto sel = j.find("selected");
    if (sel == j.end() || !sel->is_number_integer()) {
        throw Error(ErrorCode::MalformedModelOutput, "selected (integer) is required");
    }
    auto value = sel->get<long long>();
    if (value < 0 || static_cast<std::size_t>(value) > candidate_count) {
        throw Error(ErrorCode::MalformedModelOutput,
                    "selected must be between 0 and " + std::to_string(candidate_count));
    }
    JudgeVerdict v;
    v.selected = static_cast<std::size_t>(value);
    v.rationale = j.value("rationale", std::string{});
    v.raw_response = std::string(raw);
    return v;
}

/// Program response: the grammar document, extracted and strictly parsed.
inline Diagram parse_program_response(std::string_view raw, const Canvas& canvas) {
    auto object = extract_json_object(raw);
    if (!object) throw Error(ErrorCode::MalformedModelOutput, "response contains no JSON object");
    try {
        return parse_diagram(*object, canvas);
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedModelOutput, e.what(), e.pointer());
    }
}

}  // namespace sketch2svg
