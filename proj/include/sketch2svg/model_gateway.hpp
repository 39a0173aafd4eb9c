#pragma once

// Uniform access to the critic, synthesizer and judge. Backends only turn a
// request into raw text; parsing, repair re-asks and fan-out live here.

#include "sketch2svg/error.hpp"
#include "sketch2svg/model_types.hpp"
#include "sketch2svg/prompts.hpp"
#include "sketch2svg/shape_grammar.hpp"
#include "sketch2svg/svg_renderer.hpp"

#include <algorithm>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sketch2svg {

/// What a backend sees. The prompt is what a remote model gets; the
/// structured fields carry the same information for programmatic backends.
struct ModelRequest {
    ModelRole role = ModelRole::Critic;
    bool initial = false;  // initial description / initial program
    int step = 0;
    int attempt = 0;       // > 0 for repair re-asks
    std::size_t slot = 0;  // 1-based candidate position during fan-out
    ChatPrompt prompt;

    std::string instruction;
    std::optional<Diagram> current_program;
    std::vector<Diagram> candidate_programs;
    std::optional<CritiqueReport> critique;
    std::optional<Strategy> strategy;
    std::vector<FailureFeedback> failures;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    /// Raw model text. Throws Error(BackendUnavailable) when unreachable.
    /// Called concurrently during candidate fan-out.
    virtual std::string complete(const ModelRequest& request) = 0;

    [[nodiscard]] virtual std::string name() const = 0;
};

struct GatewayOptions {
    int max_repairs = 2;
    std::size_t max_in_flight = 5;
};

template <typename T>
struct Parsed {
    T value;
    int repairs = 0;
};

class ModelGateway {
public:
    using Observer = std::function<void(const ModelRequest&, const std::string& response)>;

    explicit ModelGateway(std::shared_ptr<ModelBackend> backend, GatewayOptions options = {})
        : ModelGateway(backend, backend, backend, options) {}

    ModelGateway(std::shared_ptr<ModelBackend> critic, std::shared_ptr<ModelBackend> synthesizer,
                 std::shared_ptr<ModelBackend> judge, GatewayOptions options = {})
        : critic_(std::move(critic)),
          synthesizer_(std::move(synthesizer)),
          judge_(std::move(judge)),
          options_(options) {
        if (!critic_ || !synthesizer_ || !judge_) throw Error(ErrorCode::InvalidConfig, "missing model backend");
        if (options_.max_in_flight == 0) options_.max_in_flight = 1;
    }

    /// Sees every request with the raw response it produced. Calls are
    /// serialized, so the observer needs no locking of its own.
    void set_observer(Observer observer) { observer_ = std::move(observer); }

    [[nodiscard]] const GatewayOptions& options() const { return options_; }

    CritiqueReport describe_sketch(std::shared_ptr<const RasterImage> sketch, const std::string& instruction,
                                   const Canvas& canvas) {
        ModelRequest req;
        req.role = ModelRole::Critic;
        req.initial = true;
        req.instruction = instruction;
        req.prompt = prompts::describe_sketch(std::move(sketch), instruction, canvas);
        return ask(*critic_, std::move(req), [](const std::string& raw) { return parse_description_response(raw); })
            .value;
    }

    ProgramResponse initial_program(const CritiqueReport& description, const std::string& instruction,
                                    const Canvas& canvas) {
        ModelRequest req;
        req.role = ModelRole::Synthesizer;
        req.initial = true;
        req.instruction = instruction;
        req.critique = description;
        req.current_program = Diagram{canvas, {}};
        req.prompt = prompts::initial_program(description.scene_description, instruction, canvas);
        std::string raw;
        auto parsed = ask(*synthesizer_, std::move(req), [&](const std::string& text) {
            auto d = parse_program_response(text, canvas);
            raw = text;
            return d;
        });
        return {std::move(parsed.value), raw, parsed.repairs};
    }

    CritiqueReport critique(std::shared_ptr<const RasterImage> sketch, std::shared_ptr<const RasterImage> current,
                            const Diagram& program, const std::string& instruction,
                            const std::vector<FailureFeedback>& failures, int step) {
        ModelRequest req;
        req.role = ModelRole::Critic;
        req.step = step;
        req.instruction = instruction;
        req.current_program = program;
        req.failures = failures;
        req.prompt = prompts::critique(std::move(sketch), std::move(current), program, instruction, failures);
        return ask(*critic_, std::move(req), [](const std::string& raw) { return parse_critique_response(raw); })
            .value;
    }

    CandidateProgram synthesize(const Diagram& program, const CritiqueReport& report, Strategy strategy,
                                const std::string& instruction, int step, std::size_t slot = 0) {
        ModelRequest req;
        req.slot = slot;
        req.role = ModelRole::Synthesizer;
        req.step = step;
        req.instruction = instruction;
        req.current_program = program;
        req.critique = report;
        req.strategy = strategy;
        req.prompt = prompts::synthesize(program, report, strategy, instruction);
        std::string raw;
        auto parsed = ask(*synthesizer_, std::move(req), [&](const std::string& text) {
            auto d = parse_program_response(text, program.canvas);
            raw = text;
            return d;
        });
        return {strategy, std::move(parsed.value), raw, parsed.repairs};
    }

    /// One candidate per strategy, in strategy order, at most max_in_flight
    /// requests at a time. The first failure propagates.
    std::vector<CandidateProgram> synthesize_all(const Diagram& program, const CritiqueReport& report,
                                                 const std::vector<Strategy>& strategies,
                                                 const std::string& instruction, int step) {
        std::vector<CandidateProgram> out;
        out.reserve(strategies.size());
        for (std::size_t begin = 0; begin < strategies.size(); begin += options_.max_in_flight) {
            std::size_t end = std::min(strategies.size(), begin + options_.max_in_flight);
            std::vector<std::future<CandidateProgram>> batch;
            for (std::size_t i = begin; i < end; ++i) {
                batch.push_back(std::async(std::launch::async, [&, i] {
                    return synthesize(program, report, strategies[i], instruction, step, i + 1);
                }));
            }
            std::exception_ptr first_error;
            for (auto& f : batch) {
                try {
                    out.push_back(f.get());
                } catch (...) {
                    if (!first_error) first_error = std::current_exception();
                }
            }
            if (first_error) std::rethrow_exception(first_error);
        }
        return out;
    }

    JudgeVerdict judge(std::shared_ptr<const RasterImage> sketch, std::shared_ptr<const RasterImage> current,
                       const Diagram& program, const std::vector<std::shared_ptr<const RasterImage>>& candidate_images,
                       const std::vector<Diagram>& candidate_programs, const std::string& instruction, int step) {
        ModelRequest req;
        req.role = ModelRole::Judge;
        req.step = step;
        req.instruction = instruction;
        req.current_program = program;
        req.candidate_programs = candidate_programs;
        req.prompt = prompts::judge(std::move(sketch), std::move(current), candidate_images, instruction);
        const auto n = candidate_programs.size();
        return ask(*judge_, std::move(req), [n](const std::string& raw) { return parse_verdict_response(raw, n); })
            .value;
    }

private:
    template <typename Parse>
    auto ask(ModelBackend& backend, ModelRequest req, Parse&& parse) -> Parsed<decltype(parse(std::string{}))> {
        const std::string base_user = req.prompt.user;
        std::string last_error;
        for (int attempt = 0; attempt <= options_.max_repairs; ++attempt) {
            req.attempt = attempt;
            if (attempt > 0) req.prompt.user = base_user + prompts::repair_note(last_error);
            std::string raw = backend.complete(req);
            notify(req, raw);
            try {
                return {parse(raw), attempt};
            } catch (const Error& e) {
                if (e.code() != ErrorCode::MalformedModelOutput) throw;
                last_error = e.what();
            }
        }
        throw Error(ErrorCode::MalformedModelOutput,
                    std::string(to_string(req.role)) + " output unusable after " +
                        std::to_string(options_.max_repairs) + " repair attempts; last error: " + last_error);
    }

    void notify(const ModelRequest& req, const std::string& raw) {
        if (!observer_) return;
        std::lock_guard lock(observer_mutex_);
        observer_(req, raw);
    }

    std::shared_ptr<ModelBackend> critic_, synthesizer_, judge_;
    GatewayOptions options_;
    Observer observer_;
    std::mutex observer_mutex_;
};

}  // namespace sketch2svg
