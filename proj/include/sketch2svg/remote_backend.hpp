#pragma once

// Multimodal chat endpoint over HTTP(S). The request body is a generic
// {model, messages} document with text and base64 PNG parts; the reply text
// is looked up in the places common chat APIs put it.

#include "sketch2svg/encoding.hpp"
#include "sketch2svg/error.hpp"
#include "sketch2svg/model_gateway.hpp"
#include "sketch2svg/png.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <utility>

namespace sketch2svg {

struct RemoteOptions {
    std::string endpoint;  // http(s)://host[:port]/path
    std::string model;
    std::string credential_env = "SKETCH2SVG_API_KEY";
    std::string auth_header = "Authorization";
    std::string auth_template = "Bearer {credential}";
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds timeout{120};
};

inline RemoteOptions remote_options_from_json(const nlohmann::json& j) {
    RemoteOptions o;
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "remote backend config must be an object");
    o.endpoint = j.value("endpoint", std::string{});
    o.model = j.value("model", std::string{});
    o.credential_env = j.value("credential_env", o.credential_env);
    o.auth_header = j.value("auth_header", o.auth_header);
    o.auth_template = j.value("auth_template", o.auth_template);
    o.attempts = j.value("attempts", o.attempts);
    o.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", 1000));
    o.timeout = std::chrono::seconds(j.value("timeout_s", 120));
    if (o.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "remote backend needs an endpoint");
    if (o.attempts < 1) throw Error(ErrorCode::InvalidConfig, "remote backend attempts must be >= 1");
    return o;
}

namespace detail {

/// Splits "https://host:port/path" into ("https://host:port", "/path").
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorCode::InvalidConfig, "endpoint needs a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

inline std::optional<std::string> text_of(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string joined;
        bool any = false;
        for (const auto& part : v) {
            if (auto t = part.is_object() && part.contains("text") ? text_of(part["text"]) : std::nullopt) {
                joined += *t;
                any = true;
            }
        }
        if (any) return joined;
    }
    return std::nullopt;
}

/// Reply text from the usual response shapes.
inline std::optional<std::string> response_text(const nlohmann::json& body) {
    using ptr = nlohmann::json::json_pointer;
    for (const char* path : {"/choices/0/message/content", "/content", "/output_text", "/text", "/response",
                             "/candidates/0/content/parts", "/message/content"}) {
        ptr p(path);
        if (body.contains(p)) {
            if (auto t = text_of(body[p])) return t;
        }
    }
    return std::nullopt;
}

}  // namespace detail

inline nlohmann::json remote_request_body(const std::string& model, const ModelRequest& req) {
    nlohmann::json user = nlohmann::json::array();
    user.push_back({{"type", "text"}, {"text", req.prompt.user}});
    for (const auto& img : req.prompt.images) {
        if (!img.image) continue;
        user.push_back({{"type", "text"}, {"text", "Image " + img.label + ":"}});
        user.push_back({{"type", "image"},
                        {"media_type", "image/png"},
                        {"data", base64_encode(to_string(encode_png(*img.image)))}});
    }
    return {{"model", model},
            {"messages",
             {{{"role", "system"}, {"content", {{{"type", "text"}, {"text", req.prompt.system}}}}},
              {{"role", "user"}, {"content", user}}}},
            {"metadata", {{"role", std::string(to_string(req.role))}, {"step", req.step}}}};
}

class RemoteBackend : public ModelBackend {
public:
    explicit RemoteBackend(RemoteOptions options) : options_(std::move(options)) {
        std::tie(base_, path_) = detail::split_url(options_.endpoint);
    }

    [[nodiscard]] std::string name() const override { return "remote:" + options_.model; }

    std::string complete(const ModelRequest& req) override {
        const std::string body = remote_request_body(options_.model, req).dump();
        httplib::Headers headers;
        if (!options_.credential_env.empty()) {
            if (const char* secret = std::getenv(options_.credential_env.c_str()); secret && *secret) {
                std::string value = options_.auth_template;
                auto at = value.find("{credential}");
                if (at != std::string::npos) value.replace(at, 12, secret);
                headers.emplace(options_.auth_header, value);
            }
        }
        auto backoff = options_.initial_backoff;
        std::string last;
        for (int attempt = 1; attempt <= options_.attempts; ++attempt) {
            httplib::Client client(base_);
            client.set_connection_timeout(options_.timeout);
            client.set_read_timeout(options_.timeout);
            client.set_write_timeout(options_.timeout);
            auto res = client.Post(path_, headers, body, "application/json");
            if (res && res->status == 200) {
                nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
                if (parsed.is_discarded()) {
                    throw Error(ErrorCode::MalformedModelOutput, "endpoint reply is not JSON");
                }
                auto text = detail::response_text(parsed);
                if (!text) throw Error(ErrorCode::MalformedModelOutput, "endpoint reply carries no text");
                return *text;
            }
            if (res) {
                last = "HTTP " + std::to_string(res->status);
                bool retryable = res->status == 429 || res->status >= 500;
                if (!retryable) break;
            } else {
                last = httplib::to_string(res.error());
            }
            if (attempt < options_.attempts) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
        }
        throw Error(ErrorCode::BackendUnavailable, options_.endpoint + ": " + last);
    }

private:
    RemoteOptions options_;
    std::string base_, path_;
};

}  // namespace sketch2svg
