#pragma once

// Durable session history. Layout under the root directory:
//   index.jsonl               one {"id", "created_at", "seq"} line per session
//   sessions/<id>.jsonl       trace records, append-only
//   sketches/<sha256>.png     uploaded sketches, content addressed
// Every append is a single write followed by fsync.

#include "sketch2svg/encoding.hpp"
#include "sketch2svg/error.hpp"
#include "sketch2svg/trace.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace sketch2svg {

struct SessionSummary {
    std::string id;
    std::string created_at;
    long long seq = 0;
    std::string phase;  // from the final record, or "awaiting_step"
    int steps_completed = 0;
    std::string instruction;
};

namespace detail {

inline void write_all_synced(const std::filesystem::path& path, const std::string& data, bool append) {
    int flags = O_WRONLY | O_CREAT | O_CLOEXEC | (append ? O_APPEND : O_TRUNC);
    int fd = ::open(path.c_str(), flags, 0644);
    if (fd < 0) throw Error(ErrorCode::StorageFailure, "cannot open " + path.string());
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
        ssize_t n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            throw Error(ErrorCode::StorageFailure, "write failed for " + path.string());
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        throw Error(ErrorCode::StorageFailure, "fsync failed for " + path.string());
    }
    ::close(fd);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::StorageFailure, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Whether a record can end a committed batch. A step batch ends with the
/// verdict (accepted), the revert, or a final record.
inline bool closes_batch(const TraceRecord& r) {
    switch (r.type) {
        case RecordType::SessionMeta:
        case RecordType::InitProgram:
        case RecordType::Revert:
        case RecordType::Override:
        case RecordType::Final: return true;
        case RecordType::Verdict: return r.payload.value("selected", 0) > 0;
        default: return false;
    }
}

}  // namespace detail

class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_ / "sessions", ec);
        std::filesystem::create_directories(root_ / "sketches", ec);
        if (ec) throw Error(ErrorCode::StorageFailure, "cannot create store at " + root_.string());
        load_index();
    }

    [[nodiscard]] const std::filesystem::path& root() const { return root_; }

    /// Creates the session file with its session_meta record. The payload
    /// gets id, created_at and sketch_digest filled in.
    std::string create_session(nlohmann::json meta, std::string_view sketch_png) {
        std::string digest = sha256_hex(sketch_png);
        auto sketch_path = root_ / "sketches" / (digest + ".png");
        if (!std::filesystem::exists(sketch_path)) {
            detail::write_all_synced(sketch_path, std::string(sketch_png), false);
        }
        std::lock_guard lock(mutex_);
        std::string id = fresh_id();
        std::string created = utc_timestamp();
        long long seq = next_seq_++;
        meta["session_id"] = id;
        meta["created_at"] = created;
        meta["sketch_digest"] = digest;
        TraceRecord r{RecordType::SessionMeta, 0, created, std::move(meta)};
        auto state = std::make_shared<SessionFile>();
        state->order.accept(r);
        detail::write_all_synced(session_path(id), to_jsonl(r), false);
        state->records.push_back(r);
        detail::write_all_synced(root_ / "index.jsonl",
                                 nlohmann::json{{"id", id}, {"created_at", created}, {"seq", seq}}.dump() + "\n", true);
        sessions_[id] = state;
        index_.push_back({id, created, seq});
        cv_.notify_all();
        return id;
    }

    [[nodiscard]] bool exists(const std::string& id) const {
        std::lock_guard lock(mutex_);
        return sessions_.count(id) > 0;
    }

    /// Appends a batch atomically with respect to ordering: every record is
    /// checked before anything is written. Timestamps are filled if empty.
    void append(const std::string& id, std::vector<TraceRecord> records) {
        auto file = get(id);
        std::lock_guard file_lock(file->mutex);
        TraceOrder order = file->order;
        std::string data;
        for (auto& r : records) {
            order.accept(r);
            if (r.timestamp.empty()) r.timestamp = utc_timestamp();
            data += to_jsonl(r);
        }
        detail::write_all_synced(session_path(id), data, true);
        {
            std::lock_guard lock(mutex_);
            file->order = order;
            file->records.insert(file->records.end(), records.begin(), records.end());
        }
        cv_.notify_all();
    }

    [[nodiscard]] std::vector<TraceRecord> read(const std::string& id) const {
        auto file = get(id);
        std::lock_guard lock(mutex_);
        return file->records;
    }

    [[nodiscard]] std::string sketch(const std::string& id) const {
        auto records = read(id);
        return detail::read_file(root_ / "sketches" / (records.front().payload.at("sketch_digest").get<std::string>() + ".png"));
    }

    /// Blocks until the session has more than `have` records or the timeout
    /// passes. Returns the records beyond `have`.
    std::vector<TraceRecord> wait_for_records(const std::string& id, std::size_t have,
                                              std::chrono::milliseconds timeout) const {
        auto file = get(id);
        std::unique_lock lock(mutex_);
        cv_.wait_for(lock, timeout, [&] { return file->records.size() > have; });
        if (file->records.size() <= have) return {};
        return {file->records.begin() + static_cast<std::ptrdiff_t>(have), file->records.end()};
    }

    /// Newest first.
    [[nodiscard]] std::vector<SessionSummary> list_sessions() const {
        std::lock_guard lock(mutex_);
        std::vector<SessionSummary> out;
        for (const auto& entry : index_) {
            auto it = sessions_.find(entry.id);
            if (it == sessions_.end()) continue;
            SessionSummary s{entry.id, entry.created_at, entry.seq, "awaiting_step", it->second->order.completed(), {}};
            const auto& recs = it->second->records;
            if (!recs.empty()) s.instruction = recs.front().payload.value("instruction", std::string{});
            if (!recs.empty() && recs.back().type == RecordType::Final) {
                s.phase = recs.back().payload.value("phase", std::string{});
            }
            out.push_back(std::move(s));
        }
        std::sort(out.begin(), out.end(), [](const SessionSummary& a, const SessionSummary& b) {
            if (a.created_at != b.created_at) return a.created_at > b.created_at;
            return a.seq > b.seq;
        });
        return out;
    }

private:
    struct SessionFile {
        std::mutex mutex;  // serializes appends
        TraceOrder order;
        std::vector<TraceRecord> records;
    };

    struct IndexEntry {
        std::string id;
        std::string created_at;
        long long seq = 0;
    };

    [[nodiscard]] std::filesystem::path session_path(const std::string& id) const {
        return root_ / "sessions" / (id + ".jsonl");
    }

    std::shared_ptr<SessionFile> get(const std::string& id) const {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
        return it->second;
    }

    std::string fresh_id() {
        static const char* hex = "0123456789abcdef";
        std::uniform_int_distribution<int> digit(0, 15);
        while (true) {
            std::string id;
            for (int i = 0; i < 16; ++i) id.push_back(hex[digit(rng_)]);
            if (!sessions_.count(id)) return id;
        }
    }

    void load_index() {
        auto index_path = root_ / "index.jsonl";
        if (!std::filesystem::exists(index_path)) return;
        std::istringstream in(detail::read_file(index_path));
        std::string line;
        while (std::getline(in, line)) {
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("id")) continue;  // torn last line
            IndexEntry e{j["id"].get<std::string>(), j.value("created_at", std::string{}), j.value("seq", 0LL)};
            next_seq_ = std::max(next_seq_, e.seq + 1);
            if (!std::filesystem::exists(session_path(e.id))) continue;
            sessions_[e.id] = load_session(e.id);
            index_.push_back(std::move(e));
        }
    }

    /// Reads a session file, dropping anything after the last complete
    /// batch (a crash mid-write), and rewrites the file if it was cut.
    std::shared_ptr<SessionFile> load_session(const std::string& id) {
        std::string text = detail::read_file(session_path(id));
        auto file = std::make_shared<SessionFile>();
        std::vector<TraceRecord> records;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                records.push_back(parse_record_line(line));
            } catch (const Error&) {
                break;
            }
        }
        std::size_t keep = records.size();
        while (keep > 0 && !detail::closes_batch(records[keep - 1])) --keep;
        records.resize(keep);
        std::vector<TraceRecord> valid;
        TraceOrder order;
        for (const auto& r : records) {
            try {
                order.accept(r);
            } catch (const Error&) {
                break;
            }
            valid.push_back(r);
        }
        std::string rewritten;
        for (const auto& r : valid) rewritten += to_jsonl(r);
        if (rewritten != text) detail::write_all_synced(session_path(id), rewritten, false);
        file->order = order;
        file->records = std::move(valid);
        return file;
    }

    std::filesystem::path root_;
    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    std::map<std::string, std::shared_ptr<SessionFile>> sessions_;
    std::vector<IndexEntry> index_;
    long long next_seq_ = 0;
    std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace sketch2svg
