#pragma once

// Re-runs a recorded session against its own recorded model responses and
// checks that the loop regenerates the same trace.

#include "sketch2svg/optimization_loop.hpp"
#include "sketch2svg/scripted_backend.hpp"
#include "sketch2svg/trace.hpp"

#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

namespace sketch2svg {

inline const std::string kReplayedMalformed = "(recorded response needed repair)";

/// Serves every model call from the responses stored in `trace`. Calls that
/// were repaired in the original run get a malformed answer first, as many
/// times as they were repaired.
inline std::shared_ptr<ScriptedBackend> replay_backend(const std::vector<TraceRecord>& trace) {
    struct Reply {
        std::string raw;
        int repairs = 0;
    };
    // (role, initial, step, slot)
    std::map<std::tuple<int, bool, int, std::size_t>, Reply> replies;
    std::map<int, std::size_t> slots;
    for (const auto& r : trace) {
        const auto& p = r.payload;
        switch (r.type) {
            case RecordType::InitProgram:
                replies[{static_cast<int>(ModelRole::Critic), true, 0, 0}] = {p.value("description_raw", std::string{}), 0};
                replies[{static_cast<int>(ModelRole::Synthesizer), true, 0, 0}] = {p.value("raw_response", std::string{}),
                                                                                  p.value("repair_count", 0)};
                break;
            case RecordType::Critique:
                replies[{static_cast<int>(ModelRole::Critic), false, r.step, 0}] = {p.value("raw_response", std::string{}), 0};
                break;
            case RecordType::Candidate: {
                std::size_t slot = p.value("index", ++slots[r.step]);
                replies[{static_cast<int>(ModelRole::Synthesizer), false, r.step, slot}] = {
                    p.value("raw_response", std::string{}), p.value("repair_count", 0)};
                break;
            }
            case RecordType::Verdict:
                replies[{static_cast<int>(ModelRole::Judge), false, r.step, 0}] = {p.value("raw_response", std::string{}), 0};
                break;
            default: break;
        }
    }
    return std::make_shared<ScriptedBackend>(
        [replies = std::move(replies)](const ModelRequest& req) {
            auto it = replies.find({static_cast<int>(req.role), req.initial, req.step, req.slot});
            if (it == replies.end()) {
                throw Error(ErrorCode::ReplayDivergence, "no recorded " + std::string(to_string(req.role)) +
                                                             " response for step " + std::to_string(req.step));
            }
            return req.attempt < it->second.repairs ? kReplayedMalformed : it->second.raw;
        },
        "replay");
}

struct ReplayResult {
    bool reproduced = false;
    std::size_t records_compared = 0;
    std::string divergence;  // empty when reproduced
};

/// Replays `trace` (including its session_meta) against `sketch`.
inline ReplayResult replay_trace(const std::vector<TraceRecord>& trace, std::shared_ptr<const RasterImage> sketch,
                                 GatewayOptions gateway_options = {}) {
    if (trace.empty() || trace.front().type != RecordType::SessionMeta) {
        throw Error(ErrorCode::ReplayDivergence, "trace does not start with session_meta");
    }
    const auto& meta = trace.front().payload;
    LoopConfig config = loop_config_from_json(meta.value("config", nlohmann::json::object()));
    std::vector<TraceRecord> produced;
    auto gateway = std::make_shared<ModelGateway>(replay_backend(trace), gateway_options);
    Session session(config, std::move(sketch), gateway, [&](std::vector<TraceRecord>& batch) {
        produced.insert(produced.end(), batch.begin(), batch.end());
    });

    auto attempt = [&](auto&& action) {
        try {
            action();
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ReplayDivergence) throw;
            // the original run failed the same way; the final record says so
        }
    };
    bool has_final = false;
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const auto& r = trace[i];
        if (is_terminal(session.phase()) && r.type != RecordType::Final) break;
        switch (r.type) {
            case RecordType::InitProgram: attempt([&] { session.initialize(); }); break;
            case RecordType::Critique:
                if (r.payload.value("purpose", std::string("step")) == "step") attempt([&] { session.run_step(); });
                break;
            case RecordType::Override:
                attempt([&] { session.apply_override(override_from_json(r.payload, config.canvas)); });
                break;
            case RecordType::Final: has_final = true; break;
            default: break;
        }
    }
    if (has_final && session.phase() == Phase::Initializing) attempt([&] { session.initialize(); });
    if (has_final && !is_terminal(session.phase())) attempt([&] { session.run_step(); });

    ReplayResult result;
    const std::size_t expected = trace.size() - 1;
    for (std::size_t i = 0; i < std::max(expected, produced.size()); ++i) {
        if (i >= expected || i >= produced.size()) {
            result.divergence = "record count differs: trace has " + std::to_string(expected) + ", replay produced " +
                                std::to_string(produced.size());
            return result;
        }
        const auto& want = trace[i + 1];
        const auto& got = produced[i];
        ++result.records_compared;
        if (want.type != got.type || want.step != got.step || want.payload != got.payload) {
            result.divergence = "record " + std::to_string(i + 1) + " (" + std::string(to_string(want.type)) +
                                " at step " + std::to_string(want.step) + ") differs; replay produced " +
                                std::string(to_string(got.type)) + " at step " + std::to_string(got.step);
            return result;
        }
    }
    result.reproduced = true;
    return result;
}

}  // namespace sketch2svg
