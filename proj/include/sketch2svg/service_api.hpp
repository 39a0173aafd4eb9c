#pragma once

// HTTP front end over the store and the loop.
//
//   POST /sessions                    multipart "sketch" (PNG) + "config" (JSON)
//   GET  /sessions                    newest first
//   GET  /sessions/{id}               current state
//   POST /sessions/{id}/run?steps=k   k == 1 runs inline, k > 1 answers 202 and runs in the background
//   GET  /sessions/{id}/steps/{n}     critique, candidates with renders, verdict
//   POST /sessions/{id}/override      JSON override action
//   GET  /sessions/{id}/export.svg
//   GET  /sessions/{id}/sketch        {"png": base64}
//   GET  /sessions/{id}/events        server-sent trace records, from ?from=n (default 0)
//
// Errors are {"code", "message", "pointer"?} with 4xx for bad input, 404
// for unknown ids, 409 for state conflicts and 502 for model failures.

#include "sketch2svg/backends.hpp"
#include "sketch2svg/encoding.hpp"
#include "sketch2svg/error.hpp"
#include "sketch2svg/optimization_loop.hpp"
#include "sketch2svg/png.hpp"
#include "sketch2svg/session_store.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace sketch2svg {

using BackendFactory = std::function<std::shared_ptr<ModelBackend>(const nlohmann::json& backend_spec,
                                                                   std::string_view sketch_png,
                                                                   const LoopConfig& config)>;

inline BackendFactory default_backend_factory() {
    return [](const nlohmann::json& spec, std::string_view png, const LoopConfig& config) {
        return make_backend(spec, png, config.canvas, config.convergence_threshold);
    };
}

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path store_root = "sketch2svg-store";
    LoopConfig defaults{Canvas{512, 512}};
    nlohmann::json backend = {{"kind", "oracle"}};
    GatewayOptions gateway{};
    BackendFactory backend_factory = default_backend_factory();
};

/// Service config file: {"listen": "host:port", "store": dir, "canvas": "WxH",
/// "backend": {...}, "max_repairs": n, "max_in_flight": n, "loop": {...}}.
/// SKETCH2SVG_LISTEN, SKETCH2SVG_STORE and SKETCH2SVG_BACKEND override it.
inline ServiceOptions service_options_from_json(const nlohmann::json& j) {
    ServiceOptions o;
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "service config must be a JSON object");
    auto listen = [&](const std::string& text) {
        auto colon = text.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "listen must be host:port", "/listen");
        o.host = text.substr(0, colon);
        try {
            o.port = std::stoi(text.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidConfig, "bad port in '" + text + "'", "/listen");
        }
    };
    for (const auto& [key, v] : j.items()) {
        if (key == "listen") {
            listen(v.get<std::string>());
        } else if (key == "store") {
            o.store_root = v.get<std::string>();
        } else if (key == "canvas") {
            o.defaults.canvas = parse_canvas(v.get<std::string>());
        } else if (key == "backend") {
            o.backend = v;
        } else if (key == "max_repairs") {
            o.gateway.max_repairs = v.get<int>();
        } else if (key == "max_in_flight") {
            o.gateway.max_in_flight = v.get<std::size_t>();
        } else if (key == "loop") {
            o.defaults = loop_config_from_json(v, o.defaults, {});
        } else {
            throw Error(ErrorCode::InvalidConfig, key + ": unknown service config key", "/" + key);
        }
    }
    if (const char* e = std::getenv("SKETCH2SVG_LISTEN"); e && *e) listen(e);
    if (const char* e = std::getenv("SKETCH2SVG_STORE"); e && *e) o.store_root = e;
    if (const char* e = std::getenv("SKETCH2SVG_BACKEND"); e && *e) o.backend["kind"] = std::string(e);
    return o;
}

inline int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownSession: return 404;
        case ErrorCode::InvalidState: return 409;
        case ErrorCode::BackendUnavailable:
        case ErrorCode::MalformedModelOutput:
        case ErrorCode::InitialProgramInvalid: return 502;
        case ErrorCode::RenderBackendFailure:
        case ErrorCode::EncodingFailure:
        case ErrorCode::StorageFailure:
        case ErrorCode::OutOfOrderRecord:
        case ErrorCode::ReplayDivergence: return 500;
        default: return 400;
    }
}

inline nlohmann::json error_body(const Error& e) {
    nlohmann::json j{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    if (!e.pointer().empty()) j["pointer"] = e.pointer();
    return j;
}

inline std::string png_base64(const Diagram& d, int supersample) {
    return base64_encode(to_string(encode_png(render_diagram(d, supersample))));
}

/// Per-step view of a trace: critique, candidates, verdict, outcome and the
/// program before and after. Only loop steps get an entry; the budget's
/// final check shows up in the session's final record instead.
inline std::vector<nlohmann::json> step_records(const std::vector<TraceRecord>& trace) {
    std::vector<nlohmann::json> steps;
    nlohmann::json current = nullptr;
    auto entry_for = [&](int s) -> nlohmann::json* {
        for (auto& e : steps) {
            if (e["step"] == s) return &e;
        }
        return nullptr;
    };
    for (const auto& r : trace) {
        const auto& p = r.payload;
        switch (r.type) {
            case RecordType::SessionMeta: break;
            case RecordType::InitProgram: current = p.at("diagram"); break;
            case RecordType::Critique:
                if (p.value("purpose", std::string("step")) != "step") break;
                steps.push_back({{"step", r.step},
                                 {"critique", p},
                                 {"candidates", nlohmann::json::array()},
                                 {"verdict", nullptr},
                                 {"outcome", "pending"},
                                 {"diagram_before", current},
                                 {"diagram_after", current},
                                 {"overrides", nlohmann::json::array()}});
                if (p.value("no_differences", false)) steps.back()["outcome"] = "converged";
                break;
            case RecordType::Candidate:
                if (auto* e = entry_for(r.step)) (*e)["candidates"].push_back(p);
                break;
            case RecordType::Verdict:
                if (auto* e = entry_for(r.step)) {
                    auto selected = p.value("selected", 0);
                    (*e)["verdict"] = p;
                    if (selected > 0) {
                        current = (*e)["candidates"].at(static_cast<std::size_t>(selected - 1)).at("diagram");
                        (*e)["outcome"] = "accepted";
                    } else {
                        (*e)["outcome"] = "reverted";
                    }
                    (*e)["diagram_after"] = current;
                }
                break;
            case RecordType::Revert:
                if (auto* e = entry_for(r.step)) (*e)["failure"] = p.at("failure");
                break;
            case RecordType::Override: {
                const auto kind = p.value("kind", std::string{});
                if (kind == "select_candidate") {
                    if (auto* e = entry_for(p.value("step", 0))) {
                        current = (*e)["candidates"].at(p.value("index", std::size_t{1}) - 1).at("diagram");
                    }
                } else if (kind == "edit_program") {
                    current = p.at("program");
                }
                if (auto* e = entry_for(r.step)) (*e)["overrides"].push_back(p);
                break;
            }
            case RecordType::Final: break;
        }
    }
    return steps;
}

inline nlohmann::json step_summary(const nlohmann::json& step) {
    return {{"step", step["step"]},
            {"outcome", step["outcome"]},
            {"selected", step["verdict"].is_null() ? nlohmann::json(nullptr) : step["verdict"]["selected"]},
            {"discrepancies", step["critique"].value("discrepancies", nlohmann::json::array())},
            {"candidate_count", step["candidates"].size()}};
}

class Service {
public:
    explicit Service(ServiceOptions options) : options_(std::move(options)), store_(options_.store_root) {
        routes();
    }

    ~Service() { stop(); }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    [[nodiscard]] SessionStore& store() { return store_; }
    [[nodiscard]] const ServiceOptions& options() const { return options_; }

    /// Binds and serves on a background thread. Returns the bound port
    /// (options.port == 0 picks a free one).
    int start() {
        int port = options_.port == 0 ? server_.bind_to_any_port(options_.host)
                                      : (server_.bind_to_port(options_.host, options_.port) ? options_.port : -1);
        if (port < 0) {
            throw Error(ErrorCode::InvalidConfig,
                        "cannot listen on " + options_.host + ":" + std::to_string(options_.port));
        }
        listener_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port;
    }

    /// Serves on the calling thread until stop().
    void serve() {
        if (!server_.listen(options_.host, options_.port)) {
            throw Error(ErrorCode::InvalidConfig,
                        "cannot listen on " + options_.host + ":" + std::to_string(options_.port));
        }
    }

    void stop() {
        stopping_ = true;
        server_.stop();
        if (listener_.joinable()) listener_.join();
        std::vector<std::shared_ptr<Handle>> handles;
        {
            std::lock_guard lock(handles_mutex_);
            for (auto& [id, h] : handles_) handles.push_back(h);
        }
        for (auto& h : handles) {
            if (h->worker.joinable()) h->worker.join();
        }
    }

    /// Blocks until no background run is active for `id`.
    void wait_idle(const std::string& id) {
        auto h = handle(id);
        while (h->busy) std::this_thread::sleep_for(std::chrono::milliseconds(5));
        std::lock_guard lock(h->op);
    }

private:
    struct Handle {
        std::string id;
        std::mutex op;  // held by whoever mutates the session
        std::atomic<bool> busy{false};
        std::unique_ptr<Session> session;
        std::mutex snapshot_mutex;
        nlohmann::json snapshot;
        nlohmann::json last_error = nullptr;
        std::thread worker;
        int runs = 0;
    };

    /// Stands in for a backend that could not be built when a stored
    /// session was reopened, so the session can still be read.
    class UnavailableBackend : public ModelBackend {
    public:
        explicit UnavailableBackend(std::string why) : why_(std::move(why)) {}
        std::string complete(const ModelRequest&) override { throw Error(ErrorCode::BackendUnavailable, why_); }
        [[nodiscard]] std::string name() const override { return "unavailable"; }

    private:
        std::string why_;
    };

    static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <typename F>
    static httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                reply(res, http_status(e.code()), error_body(e));
            } catch (const nlohmann::json::exception& e) {
                reply(res, 400, {{"code", "MalformedJson"}, {"message", e.what()}});
            } catch (const std::exception& e) {
                reply(res, 500, {{"code", "Internal"}, {"message", e.what()}});
            }
        };
    }

    void routes() {
        server_.Post("/sessions", guarded([this](const auto& req, auto& res) { create(req, res); }));
        server_.Get("/sessions", guarded([this](const auto&, auto& res) { list(res); }));
        server_.Get(R"(/sessions/([0-9a-f]+))", guarded([this](const auto& req, auto& res) {
                        reply(res, 200, state(*handle(req.matches[1])));
                    }));
        server_.Post(R"(/sessions/([0-9a-f]+)/run)", guarded([this](const auto& req, auto& res) { run(req, res); }));
        server_.Get(R"(/sessions/([0-9a-f]+)/steps/(\d+))",
                    guarded([this](const auto& req, auto& res) { step(req, res); }));
        server_.Post(R"(/sessions/([0-9a-f]+)/override)",
                     guarded([this](const auto& req, auto& res) { override_(req, res); }));
        server_.Get(R"(/sessions/([0-9a-f]+)/export\.svg)", guarded([this](const auto& req, auto& res) {
                        auto h = handle(req.matches[1]);
                        std::lock_guard lock(h->snapshot_mutex);
                        res.set_content(h->snapshot.at("svg").template get<std::string>(), "image/svg+xml");
                    }));
        server_.Get(R"(/sessions/([0-9a-f]+)/sketch)", guarded([this](const auto& req, auto& res) {
                        std::string id = req.matches[1];
                        reply(res, 200, {{"png", base64_encode(store_.sketch(id))}});
                    }));
        server_.Get(R"(/sessions/([0-9a-f]+)/events)", guarded([this](const auto& req, auto& res) { events(req, res); }));
        server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                res.set_content(nlohmann::json{{"code", "NotFound"}, {"message", "no such resource"}}.dump(),
                                "application/json");
            }
        });
    }

    // --- handlers ---

    void create(const httplib::Request& req, httplib::Response& res) {
        std::string png;
        nlohmann::json config = nlohmann::json::object();
        if (req.is_multipart_form_data()) {
            if (!req.has_file("sketch")) throw Error(ErrorCode::InvalidImage, "multipart field 'sketch' is missing");
            png = req.get_file_value("sketch").content;
            if (req.has_file("config")) config = parse_config_text(req.get_file_value("config").content);
        } else {
            auto body = parse_config_text(req.body);
            if (!body.contains("sketch_png")) throw Error(ErrorCode::InvalidImage, "sketch_png is missing", "/sketch_png");
            png = base64_decode(body["sketch_png"].get<std::string>());
            if (body.contains("config")) config = body["config"];
        }
        if (!config.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");

        LoopConfig loop = loop_config_from_json(config, options_.defaults);
        if (!looks_like_png(png)) throw Error(ErrorCode::InvalidImage, "sketch is not a PNG");
        auto sketch = std::make_shared<const RasterImage>(decode_png(std::string_view(png)));
        nlohmann::json backend_spec = config.contains("backend") ? config["backend"] : options_.backend;
        auto backend = options_.backend_factory(backend_spec, png, loop);

        std::string id = store_.create_session(
            {{"config", to_json(loop)}, {"backend", backend_spec}, {"instruction", loop.instruction}}, png);
        auto h = std::make_shared<Handle>();
        h->id = id;
        h->session = make_session(id, loop, sketch, backend);
        {
            std::lock_guard lock(handles_mutex_);
            handles_[id] = h;
        }
        std::lock_guard op(h->op);
        try {
            h->session->initialize();
        } catch (const Error& e) {
            refresh(*h);
            auto body = error_body(e);
            body["session_id"] = id;
            reply(res, http_status(e.code()), body);
            return;
        }
        refresh(*h);
        reply(res, 201, state(*h));
    }

    void list(httplib::Response& res) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& s : store_.list_sessions()) {
            out.push_back({{"id", s.id},
                           {"created_at", s.created_at},
                           {"phase", s.phase},
                           {"steps_completed", s.steps_completed},
                           {"instruction", s.instruction}});
        }
        reply(res, 200, {{"sessions", out}});
    }

    void run(const httplib::Request& req, httplib::Response& res) {
        auto h = handle(req.matches[1]);
        int k = 1;
        if (req.has_param("steps")) {
            const auto text = req.get_param_value("steps");
            try {
                std::size_t used = 0;
                k = std::stoi(text, &used);
                if (used != text.size()) throw std::invalid_argument(text);
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidValue, "steps must be an integer", "/steps");
            }
            if (k < 1) throw Error(ErrorCode::InvalidValue, "steps must be >= 1", "/steps");
        }
        if (h->busy.exchange(true)) throw Error(ErrorCode::InvalidState, "a run is already in progress");
        std::unique_lock op(h->op);
        auto release = [&] { h->busy = false; };
        if (is_terminal(h->session->phase())) {
            release();
            throw Error(ErrorCode::InvalidState,
                        "session is " + std::string(to_string(h->session->phase())) + "; nothing to run");
        }
        if (k == 1) {
            const auto before = store_.read(h->id).size();
            try {
                run_steps(*h, 1);
            } catch (const Error&) {
                release();
                throw;
            }
            release();
            reply(res, 200, {{"steps", new_steps(h->id, before)}, {"state", state(*h)}});
            return;
        }
        op.unlock();
        if (h->worker.joinable()) h->worker.join();
        const std::string token = h->id + "-" + std::to_string(++h->runs);
        h->worker = std::thread([this, h, k] {
            std::lock_guard lock(h->op);
            try {
                run_steps(*h, k);
            } catch (const Error& e) {
                std::lock_guard snap(h->snapshot_mutex);
                h->last_error = error_body(e);
            }
            h->busy = false;
        });
        reply(res, 202, {{"run_token", token}, {"steps_requested", k}, {"events", "/sessions/" + h->id + "/events"}});
    }

    void step(const httplib::Request& req, httplib::Response& res) {
        auto h = handle(req.matches[1]);
        const int n = std::stoi(req.matches[2]);
        const auto canvas = h->session->config().canvas;
        const int supersample = h->session->config().supersample;
        for (auto& s : step_records(store_.read(h->id))) {
            if (s["step"] != n) continue;
            for (auto& c : s["candidates"]) {
                c["png"] = png_base64(diagram_from_json(c.at("diagram"), canvas), supersample);
            }
            reply(res, 200, s);
            return;
        }
        throw Error(ErrorCode::UnknownSession, "session " + h->id + " has no step " + std::to_string(n));
    }

    void override_(const httplib::Request& req, httplib::Response& res) {
        auto h = handle(req.matches[1]);
        auto o = override_from_json(parse_config_text(req.body), h->session->config().canvas);
        if (h->busy.exchange(true)) throw Error(ErrorCode::InvalidState, "a run is in progress");
        std::lock_guard op(h->op);
        try {
            h->session->apply_override(o);
        } catch (...) {
            h->busy = false;
            throw;
        }
        refresh(*h);
        h->busy = false;
        reply(res, 200, state(*h));
    }

    void events(const httplib::Request& req, httplib::Response& res) {
        std::string id = req.matches[1];
        (void)handle(id);
        std::size_t from = 0;
        if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, id, sent = from](std::size_t, httplib::DataSink& sink) mutable {
                if (stopping_) return false;
                auto fresh = store_.wait_for_records(id, sent, std::chrono::milliseconds(200));
                for (const auto& r : fresh) {
                    std::string event = "id: " + std::to_string(sent) + "\nevent: " + std::string(to_string(r.type)) +
                                        "\ndata: " + to_json(r).dump() + "\n\n";
                    if (!sink.write(event.data(), event.size())) return false;
                    ++sent;
                    if (r.type == RecordType::Final) {
                        sink.done();
                        return true;
                    }
                }
                return sink.is_writable();
            });
    }

    // --- helpers ---

    static nlohmann::json parse_config_text(const std::string& text) {
        auto j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::MalformedJson, "request body is not valid JSON");
        return j;
    }

    std::unique_ptr<Session> make_session(const std::string& id, const LoopConfig& loop,
                                          std::shared_ptr<const RasterImage> sketch,
                                          std::shared_ptr<ModelBackend> backend) {
        auto gateway = std::make_shared<ModelGateway>(std::move(backend), options_.gateway);
        return std::make_unique<Session>(loop, std::move(sketch), gateway,
                                         [this, id](std::vector<TraceRecord>& batch) { store_.append(id, batch); });
    }

    /// Open session for `id`, rebuilt from the store if this process has
    /// not seen it yet.
    std::shared_ptr<Handle> handle(const std::string& id) {
        std::lock_guard lock(handles_mutex_);
        if (auto it = handles_.find(id); it != handles_.end()) return it->second;
        auto records = store_.read(id);  // throws UnknownSession
        const auto& meta = records.front().payload;
        LoopConfig loop = loop_config_from_json(meta.value("config", nlohmann::json::object()), options_.defaults);
        std::string png = store_.sketch(id);
        auto sketch = std::make_shared<const RasterImage>(decode_png(std::string_view(png)));
        std::shared_ptr<ModelBackend> backend;
        try {
            backend = options_.backend_factory(meta.value("backend", options_.backend), png, loop);
        } catch (const Error& e) {
            backend = std::make_shared<UnavailableBackend>(e.what());
        }
        auto h = std::make_shared<Handle>();
        h->id = id;
        h->session = make_session(id, loop, sketch, backend);
        h->session->restore(records);
        refresh(*h);
        handles_[id] = h;
        return h;
    }

    /// Runs up to k steps, refreshing the snapshot after each. Caller holds op.
    void run_steps(Handle& h, int k) {
        auto& s = *h.session;
        for (int n = 0; n < k && !is_terminal(s.phase()) && !stopping_; ++n) {
            if (n > 0 && s.phase() == Phase::AwaitingHuman) break;
            try {
                if (s.phase() == Phase::Initializing) {
                    s.initialize();
                } else {
                    s.run_step();
                }
            } catch (...) {
                refresh(h);
                throw;
            }
            refresh(h);
        }
    }

    /// Rebuilds the read-side view. Caller holds op.
    void refresh(Handle& h) {
        const auto& s = *h.session;
        nlohmann::json snap{{"id", h.id},
                            {"phase", std::string(to_string(s.phase()))},
                            {"steps_completed", s.steps_completed()},
                            {"consecutive_reverts", s.consecutive_reverts()},
                            {"pending_failures", s.failures().size()},
                            {"instruction", s.instruction()},
                            {"description", s.description()},
                            {"final_reason", s.final_reason()},
                            {"config", to_json(s.config())},
                            {"diagram", diagram_to_json(s.program())},
                            {"svg", compile_svg(s.program()).text},
                            {"png", png_base64(s.program(), s.config().supersample)}};
        std::lock_guard lock(h.snapshot_mutex);
        h.snapshot = std::move(snap);
    }

    nlohmann::json state(Handle& h) {
        nlohmann::json out;
        {
            std::lock_guard lock(h.snapshot_mutex);
            out = h.snapshot;
            out["last_error"] = h.last_error;
        }
        out["running"] = h.busy.load();
        auto records = store_.read(h.id);
        out["created_at"] = records.front().payload.value("created_at", std::string{});
        out["steps"] = nlohmann::json::array();
        for (const auto& st : step_records(records)) out["steps"].push_back(step_summary(st));
        return out;
    }

    nlohmann::json new_steps(const std::string& id, std::size_t before) {
        auto records = store_.read(id);
        std::set<int> touched;
        for (std::size_t i = before; i < records.size(); ++i) {
            if (records[i].type == RecordType::Critique) touched.insert(records[i].step);
        }
        nlohmann::json out = nlohmann::json::array();
        for (const auto& st : step_records(records)) {
            if (touched.count(st["step"].get<int>())) out.push_back(step_summary(st));
        }
        return out;
    }

    ServiceOptions options_;
    SessionStore store_;
    httplib::Server server_;
    std::thread listener_;
    std::atomic<bool> stopping_{false};
    std::mutex handles_mutex_;
    std::map<std::string, std::shared_ptr<Handle>> handles_;
};

}  // namespace sketch2svg
