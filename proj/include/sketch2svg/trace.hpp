#pragma once

// Trace records: the append-only history of a session. One JSON object per
// line: {"type", "step", "timestamp", "payload"}.

#include "sketch2svg/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <ctime>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sketch2svg {

enum class RecordType { SessionMeta, InitProgram, Critique, Candidate, Verdict, Revert, Override, Final };

inline constexpr std::array<RecordType, 8> kRecordTypes{RecordType::SessionMeta, RecordType::InitProgram,
                                                        RecordType::Critique,    RecordType::Candidate,
                                                        RecordType::Verdict,     RecordType::Revert,
                                                        RecordType::Override,    RecordType::Final};

constexpr std::string_view to_string(RecordType t) noexcept {
    switch (t) {
        case RecordType::SessionMeta: return "session_meta";
        case RecordType::InitProgram: return "init_program";
        case RecordType::Critique: return "critique";
        case RecordType::Candidate: return "candidate";
        case RecordType::Verdict: return "verdict";
        case RecordType::Revert: return "revert";
        case RecordType::Override: return "override";
        case RecordType::Final: return "final";
    }
    return "";
}

inline std::optional<RecordType> record_type_from_string(std::string_view name) {
    for (auto t : kRecordTypes) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

struct TraceRecord {
    RecordType type = RecordType::SessionMeta;
    int step = 0;
    std::string timestamp;
    nlohmann::json payload = nlohmann::json::object();
};

/// UTC, millisecond precision: 2024-05-01T12:00:00.123Z
inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
    return out;
}

inline nlohmann::json to_json(const TraceRecord& r) {
    return {{"type", std::string(to_string(r.type))}, {"step", r.step}, {"timestamp", r.timestamp}, {"payload", r.payload}};
}

inline TraceRecord record_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedJson, "trace record must be an object");
    auto type = j.contains("type") && j["type"].is_string() ? record_type_from_string(j["type"].get<std::string>())
                                                             : std::nullopt;
    if (!type) throw Error(ErrorCode::MalformedJson, "trace record has no valid type", "/type");
    if (!j.contains("step") || !j["step"].is_number_integer()) {
        throw Error(ErrorCode::MalformedJson, "trace record has no integer step", "/step");
    }
    TraceRecord r;
    r.type = *type;
    r.step = j["step"].get<int>();
    r.timestamp = j.value("timestamp", std::string{});
    r.payload = j.value("payload", nlohmann::json::object());
    return r;
}

inline std::string to_jsonl(const TraceRecord& r) { return to_json(r).dump() + "\n"; }

inline TraceRecord parse_record_line(std::string_view line) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedJson, "trace line is not JSON");
    return record_from_json(j);
}

/// Every record of a JSONL trace. Blank lines are skipped; anything else
/// that does not parse is an error.
inline std::vector<TraceRecord> parse_trace(std::string_view text) {
    std::vector<TraceRecord> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            out.push_back(parse_record_line(line));
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

/// Records must follow the step protocol:
///   critique s opens step s (s = completed + 1);
///   candidate and verdict belong to the open step, and the verdict closes it;
///   revert and override refer to the last completed step;
///   final is the last record, at the completed or the open step.
class TraceOrder {
public:
    [[nodiscard]] int completed() const { return completed_; }
    [[nodiscard]] std::optional<int> open_step() const { return open_; }
    [[nodiscard]] bool finished() const { return finished_; }
    [[nodiscard]] bool initialized() const { return initialized_; }

    /// Throws OutOfOrderRecord; leaves the state unchanged on failure.
    void accept(const TraceRecord& r) {
        auto fail = [&](const std::string& why) {
            throw Error(ErrorCode::OutOfOrderRecord,
                        std::string(to_string(r.type)) + " at step " + std::to_string(r.step) + ": " + why);
        };
        if (finished_) fail("session already has a final record");
        if (!has_meta_ && r.type != RecordType::SessionMeta) fail("first record must be session_meta");
        switch (r.type) {
            case RecordType::SessionMeta:
                if (has_meta_ || r.step != 0) fail("session_meta must come first, at step 0");
                has_meta_ = true;
                return;
            case RecordType::InitProgram:
                if (initialized_ || r.step != 0) fail("init_program must come once, at step 0");
                initialized_ = true;
                return;
            case RecordType::Critique:
                if (!initialized_) fail("no initial program yet");
                if (open_) fail("step " + std::to_string(*open_) + " is still open");
                if (r.step != completed_ + 1) fail("expected step " + std::to_string(completed_ + 1));
                open_ = r.step;
                return;
            case RecordType::Candidate:
                if (!open_ || r.step != *open_) fail("no open step with this number");
                return;
            case RecordType::Verdict:
                if (!open_ || r.step != *open_) fail("no open step with this number");
                completed_ = *open_;
                open_.reset();
                return;
            case RecordType::Revert:
            case RecordType::Override:
                if (open_) fail("step " + std::to_string(*open_) + " is still open");
                if (r.step != completed_) fail("expected step " + std::to_string(completed_));
                return;
            case RecordType::Final:
                if (r.step != completed_ && r.step != completed_ + 1) {
                    fail("expected step " + std::to_string(completed_) + " or " + std::to_string(completed_ + 1));
                }
                finished_ = true;
                return;
        }
    }

private:
    bool has_meta_ = false;
    bool initialized_ = false;
    bool finished_ = false;
    int completed_ = 0;
    std::optional<int> open_;
};

}  // namespace sketch2svg
