#pragma once

// The refinement loop: critique the current rendering, synthesize one
// candidate per strategy, let the judge pick one or keep the current
// program, and record everything. Each step is committed as one batch of
// trace records before the in-memory state changes.

#include "sketch2svg/error.hpp"
#include "sketch2svg/model_gateway.hpp"
#include "sketch2svg/shape_grammar.hpp"
#include "sketch2svg/svg_renderer.hpp"
#include "sketch2svg/trace.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace sketch2svg {

struct LoopConfig {
    Canvas canvas{};
    std::string instruction = kDefaultInstruction;
    int max_steps = 10;
    std::size_t candidate_count = 5;
    int max_consecutive_reverts = 3;
    double convergence_threshold = kEquivalenceThreshold;
    int supersample = kDefaultSupersample;
    bool pause_after_step = false;
};

inline nlohmann::json to_json(const LoopConfig& c) {
    return {{"canvas", std::to_string(c.canvas.width) + "x" + std::to_string(c.canvas.height)},
            {"instruction", c.instruction},
            {"max_steps", c.max_steps},
            {"candidate_count", c.candidate_count},
            {"max_consecutive_reverts", c.max_consecutive_reverts},
            {"convergence_threshold", c.convergence_threshold},
            {"supersample", c.supersample},
            {"pause_after_step", c.pause_after_step}};
}

/// Overlays `j` on `base`. Keys in `passthrough` (e.g. backend settings)
/// are left to the caller; anything else unknown is an error.
inline LoopConfig loop_config_from_json(const nlohmann::json& j, LoopConfig base = {},
                                        const std::set<std::string>& passthrough = {"backend"}) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    auto bad = [](const std::string& key, const std::string& why) {
        throw Error(ErrorCode::InvalidConfig, key + ": " + why, "/" + key);
    };
    for (const auto& [key, v] : j.items()) {
        if (key == "canvas") {
            if (v.is_string()) {
                base.canvas = parse_canvas(v.get<std::string>());
            } else if (v.is_object() && v.contains("width") && v.contains("height")) {
                base.canvas = Canvas{v["width"].get<int>(), v["height"].get<int>()};
                validate_canvas(base.canvas);
            } else {
                bad(key, "expected \"WxH\" or {width, height}");
            }
        } else if (key == "instruction") {
            if (!v.is_string() || v.get<std::string>().empty()) bad(key, "expected a non-empty string");
            base.instruction = v.get<std::string>();
        } else if (key == "max_steps" || key == "max_consecutive_reverts" || key == "supersample" ||
                   key == "candidate_count") {
            if (!v.is_number_integer() || v.get<long long>() < 1) bad(key, "expected an integer >= 1");
            auto n = v.get<int>();
            if (key == "max_steps") base.max_steps = n;
            if (key == "max_consecutive_reverts") base.max_consecutive_reverts = n;
            if (key == "supersample") base.supersample = n;
            if (key == "candidate_count") base.candidate_count = static_cast<std::size_t>(n);
        } else if (key == "convergence_threshold") {
            if (!v.is_number() || v.get<double>() <= 0) bad(key, "expected a number > 0");
            base.convergence_threshold = v.get<double>();
        } else if (key == "pause_after_step") {
            if (!v.is_boolean()) bad(key, "expected a boolean");
            base.pause_after_step = v.get<bool>();
        } else if (!passthrough.count(key)) {
            bad(key, "unknown config key");
        }
    }
    return base;
}

enum class Phase { Initializing, AwaitingStep, RunningStep, AwaitingHuman, Converged, Exhausted, Failed };

constexpr std::string_view to_string(Phase p) noexcept {
    switch (p) {
        case Phase::Initializing: return "initializing";
        case Phase::AwaitingStep: return "awaiting_step";
        case Phase::RunningStep: return "running_step";
        case Phase::AwaitingHuman: return "awaiting_human";
        case Phase::Converged: return "converged";
        case Phase::Exhausted: return "exhausted";
        case Phase::Failed: return "failed";
    }
    return "";
}

inline std::optional<Phase> phase_from_string(std::string_view s) {
    for (auto p : {Phase::Initializing, Phase::AwaitingStep, Phase::RunningStep, Phase::AwaitingHuman,
                   Phase::Converged, Phase::Exhausted, Phase::Failed}) {
        if (to_string(p) == s) return p;
    }
    return std::nullopt;
}

constexpr bool is_terminal(Phase p) noexcept {
    return p == Phase::Converged || p == Phase::Exhausted || p == Phase::Failed;
}

/// A human intervention between steps.
struct Override {
    enum class Kind { SelectCandidate, EditProgram, InjectInstruction, AcceptAsFinal };

    Kind kind = Kind::AcceptAsFinal;
    int step = 0;           // SelectCandidate: the step whose candidates are meant
    std::size_t index = 0;  // SelectCandidate: 1-based, as in verdicts
    std::optional<Diagram> program;
    std::string instruction;
};

constexpr std::string_view to_string(Override::Kind k) noexcept {
    switch (k) {
        case Override::Kind::SelectCandidate: return "select_candidate";
        case Override::Kind::EditProgram: return "edit_program";
        case Override::Kind::InjectInstruction: return "inject_instruction";
        case Override::Kind::AcceptAsFinal: return "accept_as_final";
    }
    return "";
}

inline nlohmann::json to_json(const Override& o) {
    nlohmann::json j{{"kind", std::string(to_string(o.kind))}};
    switch (o.kind) {
        case Override::Kind::SelectCandidate:
            j["step"] = o.step;
            j["index"] = o.index;
            break;
        case Override::Kind::EditProgram: j["program"] = diagram_to_json(*o.program); break;
        case Override::Kind::InjectInstruction: j["instruction"] = o.instruction; break;
        case Override::Kind::AcceptAsFinal: break;
    }
    return j;
}

inline Override override_from_json(const nlohmann::json& j, const Canvas& canvas) {
    auto bad = [](const std::string& why, std::string ptr = {}) {
        throw Error(ErrorCode::InvalidOverride, why, std::move(ptr));
    };
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) bad("override needs a kind", "/kind");
    Override o;
    const auto kind = j["kind"].get<std::string>();
    if (kind == "select_candidate") {
        o.kind = Override::Kind::SelectCandidate;
        if (!j.contains("step") || !j["step"].is_number_integer()) bad("select_candidate needs step", "/step");
        if (!j.contains("index") || !j["index"].is_number_integer() || j["index"].get<long long>() < 0) bad("select_candidate needs index", "/index");
        o.step = j["step"].get<int>();
        o.index = j["index"].get<std::size_t>();
    } else if (kind == "edit_program") {
        o.kind = Override::Kind::EditProgram;
        if (!j.contains("program")) bad("edit_program needs program", "/program");
        try {
            o.program = diagram_from_json(j["program"], canvas);
        } catch (const Error& e) {
            bad(e.what(), "/program" + e.pointer());
        }
    } else if (kind == "inject_instruction") {
        o.kind = Override::Kind::InjectInstruction;
        if (!j.contains("instruction") || !j["instruction"].is_string() || j["instruction"].get<std::string>().empty()) {
            bad("inject_instruction needs a non-empty instruction", "/instruction");
        }
        o.instruction = j["instruction"].get<std::string>();
    } else if (kind == "accept_as_final") {
        o.kind = Override::Kind::AcceptAsFinal;
    } else {
        bad("unknown override kind '" + kind + "'", "/kind");
    }
    return o;
}

class Session {
public:
    /// Receives each committed batch. Throwing aborts the step unchanged.
    using Sink = std::function<void(std::vector<TraceRecord>&)>;

    Session(LoopConfig config, std::shared_ptr<const RasterImage> sketch, std::shared_ptr<ModelGateway> gateway,
            Sink sink = {})
        : config_(std::move(config)),
          sketch_(std::move(sketch)),
          gateway_(std::move(gateway)),
          sink_(std::move(sink)),
          instruction_(config_.instruction),
          program_{config_.canvas, {}} {
        validate_canvas(config_.canvas);
        if (!sketch_) throw Error(ErrorCode::InvalidImage, "session needs a sketch");
        if (config_.candidate_count < 1) throw Error(ErrorCode::InvalidConfig, "candidate_count must be >= 1");
    }

    [[nodiscard]] const LoopConfig& config() const { return config_; }
    [[nodiscard]] Phase phase() const { return phase_; }
    [[nodiscard]] const Diagram& program() const { return program_; }
    [[nodiscard]] int steps_completed() const { return completed_; }
    [[nodiscard]] int consecutive_reverts() const { return consecutive_reverts_; }
    [[nodiscard]] const std::vector<FailureFeedback>& failures() const { return failures_; }
    [[nodiscard]] const std::string& instruction() const { return instruction_; }
    [[nodiscard]] const std::string& description() const { return description_; }
    [[nodiscard]] const std::vector<CandidateProgram>& last_candidates() const { return last_candidates_; }
    [[nodiscard]] const std::string& final_reason() const { return final_reason_; }

    /// Describes the sketch and writes the initial program.
    void initialize() {
        if (phase_ != Phase::Initializing) throw Error(ErrorCode::InvalidState, "session is already initialized");
        CritiqueReport description;
        ProgramResponse initial;
        try {
            description = gateway_->describe_sketch(sketch_, instruction_, config_.canvas);
            initial = gateway_->initial_program(description, instruction_, config_.canvas);
        } catch (const Error& e) {
            ErrorCode code = e.code() == ErrorCode::MalformedModelOutput ? ErrorCode::InitialProgramInvalid : e.code();
            fail(0, e.what());
            throw Error(code, e.what(), e.pointer());
        }
        std::vector<TraceRecord> batch{{RecordType::InitProgram,
                                        0,
                                        {},
                                        {{"description", description.scene_description},
                                         {"description_raw", description.raw_response},
                                         {"diagram", diagram_to_json(initial.diagram)},
                                         {"raw_response", initial.raw_response},
                                         {"repair_count", initial.repair_count}}}};
        commit(batch);
        description_ = description.scene_description;
        program_ = initial.diagram;
        phase_ = Phase::AwaitingStep;
    }

    /// One critique / synthesize / judge round.
    void run_step() {
        if (phase_ != Phase::AwaitingStep && phase_ != Phase::AwaitingHuman) {
            throw Error(ErrorCode::InvalidState, "cannot run a step while " + std::string(to_string(phase_)));
        }
        const Phase before = phase_;
        phase_ = Phase::RunningStep;
        try {
            step();
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BackendUnavailable || e.code() == ErrorCode::MalformedModelOutput) {
                fail(completed_, e.what());
            } else if (phase_ == Phase::RunningStep) {
                phase_ = before;
            }
            throw;
        }
    }

    /// Runs steps until the session ends, pauses for a human, or `limit`
    /// steps have run (negative: no limit).
    Phase run(int limit = -1) {
        if (phase_ == Phase::Initializing) initialize();
        for (int n = 0; (limit < 0 || n < limit) && !is_terminal(phase_); ++n) {
            if (n > 0 && phase_ == Phase::AwaitingHuman) break;
            run_step();
        }
        return phase_;
    }

    void apply_override(const Override& o) {
        if (phase_ != Phase::AwaitingStep && phase_ != Phase::AwaitingHuman) {
            throw Error(ErrorCode::InvalidState, "cannot override while " + std::string(to_string(phase_)));
        }
        check_override(o);
        std::vector<TraceRecord> batch{{RecordType::Override, completed_, {}, to_json(o)}};
        if (o.kind == Override::Kind::AcceptAsFinal) {
            batch.push_back(final_record(completed_, Phase::Converged, "accepted by user", program_));
        }
        commit(batch);
        apply_override_effect(o);
    }

    /// Rebuilds state from a stored trace without calling any model.
    void restore(const std::vector<TraceRecord>& records) {
        if (phase_ != Phase::Initializing) throw Error(ErrorCode::InvalidState, "restore needs a fresh session");
        std::vector<CandidateProgram> pending;
        for (const auto& r : records) {
            switch (r.type) {
                case RecordType::SessionMeta: break;
                case RecordType::InitProgram:
                    program_ = diagram_from_json(r.payload.at("diagram"), config_.canvas);
                    description_ = r.payload.value("description", std::string{});
                    phase_ = Phase::AwaitingStep;
                    break;
                case RecordType::Critique: pending.clear(); break;
                case RecordType::Candidate: pending.push_back(candidate_from_json(r.payload, config_.canvas)); break;
                case RecordType::Verdict: {
                    auto selected = r.payload.at("selected").get<std::size_t>();
                    if (selected > 0) accept(pending.at(selected - 1).diagram);
                    last_candidates_ = pending;
                    completed_ = r.step;
                    phase_ = config_.pause_after_step ? Phase::AwaitingHuman : Phase::AwaitingStep;
                    break;
                }
                case RecordType::Revert:
                    failures_.push_back(failure_from_json(r.payload.at("failure")));
                    ++consecutive_reverts_;
                    break;
                case RecordType::Override:
                    apply_override_effect(override_from_json(r.payload, config_.canvas));
                    break;
                case RecordType::Final: {
                    auto p = phase_from_string(r.payload.value("phase", std::string{}));
                    phase_ = p ? *p : Phase::Failed;
                    final_reason_ = r.payload.value("reason", std::string{});
                    if (r.payload.contains("diagram")) {
                        program_ = diagram_from_json(r.payload["diagram"], config_.canvas);
                    }
                    break;
                }
            }
        }
    }

private:
    std::shared_ptr<const RasterImage> render(const Diagram& d) const {
        return std::make_shared<const RasterImage>(render_diagram(d, config_.supersample));
    }

    std::vector<Strategy> strategies() const {
        std::vector<Strategy> out;
        for (std::size_t i = 0; i < config_.candidate_count; ++i) out.push_back(kStrategies[i % kStrategies.size()]);
        return out;
    }

    TraceRecord critique_record(int s, const CritiqueReport& report, const char* purpose) const {
        auto payload = to_json(report);
        payload["purpose"] = purpose;
        payload["instruction"] = instruction_;
        payload["failures"] = nlohmann::json::array();
        for (const auto& f : failures_) payload["failures"].push_back(to_json(f));
        return {RecordType::Critique, s, {}, std::move(payload)};
    }

    static TraceRecord final_record(int s, Phase phase, const std::string& reason, const Diagram& program) {
        return {RecordType::Final,
                s,
                {},
                {{"phase", std::string(to_string(phase))},
                 {"reason", reason},
                 {"diagram", diagram_to_json(program)},
                 {"svg", compile_svg(program).text}}};
    }

    void step() {
        const int s = completed_ + 1;
        if (consecutive_reverts_ >= config_.max_consecutive_reverts) {
            std::vector<TraceRecord> batch{final_record(completed_, Phase::Exhausted, "too many consecutive reverts", program_)};
            commit(batch);
            finish(Phase::Exhausted, "too many consecutive reverts");
            return;
        }
        if (s > config_.max_steps) {
            final_check(s);
            return;
        }
        auto current = render(program_);
        auto report = gateway_->critique(sketch_, current, program_, instruction_, failures_, s);
        std::vector<TraceRecord> batch{critique_record(s, report, "step")};
        if (report.converged()) {
            batch.push_back(final_record(s, Phase::Converged, "critic found no differences", program_));
            commit(batch);
            finish(Phase::Converged, "critic found no differences");
            return;
        }

        auto candidates = gateway_->synthesize_all(program_, report, strategies(), instruction_, s);
        std::vector<std::shared_ptr<const RasterImage>> images;
        std::vector<Diagram> programs;
        for (const auto& c : candidates) {
            images.push_back(render(c.diagram));
            programs.push_back(c.diagram);
        }
        auto verdict = gateway_->judge(sketch_, current, program_, images, programs, instruction_, s);

        std::vector<std::string> rejected_deltas;
        std::set<std::string> seen;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            auto payload = to_json(candidates[i]);
            payload["index"] = i + 1;
            auto changes = describe_delta(program_, diff_diagrams(program_, candidates[i].diagram));
            payload["changes"] = changes;
            batch.push_back({RecordType::Candidate, s, {}, std::move(payload)});
            for (auto& c : changes) {
                if (seen.insert(c).second) rejected_deltas.push_back(c);
            }
        }
        batch.push_back({RecordType::Verdict, s, {}, to_json(verdict)});

        std::optional<FailureFeedback> failure;
        int reverts = verdict.selected > 0 ? 0 : consecutive_reverts_ + 1;
        if (verdict.selected == 0) {
            failure = FailureFeedback{s, report.suggestions, rejected_deltas};
            batch.push_back({RecordType::Revert, s, {}, {{"failure", to_json(*failure)}}});
        }
        const Diagram next = verdict.selected > 0 ? candidates[verdict.selected - 1].diagram : program_;
        const bool exhausted = reverts >= config_.max_consecutive_reverts;
        if (exhausted) batch.push_back(final_record(s, Phase::Exhausted, "too many consecutive reverts", next));
        commit(batch);

        if (verdict.selected > 0) {
            accept(next);
        } else {
            failures_.push_back(*failure);
            consecutive_reverts_ = reverts;
        }
        completed_ = s;
        last_candidates_ = std::move(candidates);
        if (exhausted) {
            finish(Phase::Exhausted, "too many consecutive reverts");
        } else if (s >= config_.max_steps) {
            final_check(s + 1);
        } else {
            phase_ = config_.pause_after_step ? Phase::AwaitingHuman : Phase::AwaitingStep;
        }
    }

    /// Step budget spent: one more critique decides converged or exhausted.
    void final_check(int s) {
        auto report = gateway_->critique(sketch_, render(program_), program_, instruction_, failures_, s);
        Phase outcome = report.converged() ? Phase::Converged : Phase::Exhausted;
        std::string reason = report.converged() ? "critic found no differences" : "step budget exhausted";
        std::vector<TraceRecord> batch{critique_record(s, report, "final_check"),
                                       final_record(s, outcome, reason, program_)};
        commit(batch);
        finish(outcome, reason);
    }

    void check_override(const Override& o) const {
        switch (o.kind) {
            case Override::Kind::SelectCandidate:
                if (o.step != completed_ || last_candidates_.empty()) {
                    throw Error(ErrorCode::InvalidOverride,
                                "only candidates of the last completed step (" + std::to_string(completed_) +
                                    ") can be selected");
                }
                if (o.index < 1 || o.index > last_candidates_.size()) {
                    throw Error(ErrorCode::InvalidOverride, "candidate index must be 1.." +
                                                                std::to_string(last_candidates_.size()));
                }
                break;
            case Override::Kind::EditProgram:
                if (!o.program) throw Error(ErrorCode::InvalidOverride, "edit_program needs a program");
                if (o.program->canvas != config_.canvas) throw Error(ErrorCode::CanvasMismatch, "program canvas differs");
                break;
            case Override::Kind::InjectInstruction:
                if (o.instruction.empty()) throw Error(ErrorCode::InvalidOverride, "instruction is empty");
                break;
            case Override::Kind::AcceptAsFinal: break;
        }
    }

    void apply_override_effect(const Override& o) {
        switch (o.kind) {
            case Override::Kind::SelectCandidate: accept(last_candidates_.at(o.index - 1).diagram); break;
            case Override::Kind::EditProgram: accept(normalize(*o.program)); break;
            case Override::Kind::InjectInstruction: instruction_ = o.instruction; break;
            case Override::Kind::AcceptAsFinal: finish(Phase::Converged, "accepted by user"); return;
        }
        if (phase_ == Phase::AwaitingHuman) phase_ = Phase::AwaitingStep;
    }

    void accept(const Diagram& d) {
        program_ = d;
        failures_.clear();
        consecutive_reverts_ = 0;
    }

    void finish(Phase p, std::string reason) {
        phase_ = p;
        final_reason_ = std::move(reason);
    }

    /// Records the failure, if the trace can still take a final record.
    void fail(int s, const std::string& reason) {
        std::vector<TraceRecord> batch{final_record(s, Phase::Failed, reason, program_)};
        try {
            commit(batch);
        } catch (const Error&) {
            // the original error matters more than a failed final write
        }
        finish(Phase::Failed, reason);
    }

    void commit(std::vector<TraceRecord>& batch) {
        for (auto& r : batch) {
            if (r.timestamp.empty()) r.timestamp = utc_timestamp();
        }
        if (sink_) sink_(batch);
    }

    LoopConfig config_;
    std::shared_ptr<const RasterImage> sketch_;
    std::shared_ptr<ModelGateway> gateway_;
    Sink sink_;

    Phase phase_ = Phase::Initializing;
    std::string instruction_;
    std::string description_;
    Diagram program_;
    int completed_ = 0;
    int consecutive_reverts_ = 0;
    std::vector<FailureFeedback> failures_;
    std::vector<CandidateProgram> last_candidates_;
    std::string final_reason_;
};

}  // namespace sketch2svg
