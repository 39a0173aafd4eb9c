#pragma once

// Builds a model backend from the "backend" section of a session config.
//   {"kind": "oracle", "target": <diagram document>}   target optional: the
//       sketch PNG may carry the diagram in a tEXt chunk named "diagram"
//   {"kind": "remote", "endpoint": ..., "model": ..., ...}
//   {"kind": "scripted", "trace": <path to a trace.jsonl>}  replays its responses

#include "sketch2svg/error.hpp"
#include "sketch2svg/model_gateway.hpp"
#include "sketch2svg/oracle_backend.hpp"
#include "sketch2svg/png.hpp"
#include "sketch2svg/remote_backend.hpp"
#include "sketch2svg/replay.hpp"
#include "sketch2svg/session_store.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>
#include <string_view>

namespace sketch2svg {

inline constexpr const char* kDiagramTextKey = "diagram";

/// Diagram embedded in a PNG by `render --raster`, if any.
inline std::optional<Diagram> embedded_diagram(std::string_view png, const Canvas& canvas) {
    auto text = read_png_text(png);
    auto it = text.find(kDiagramTextKey);
    if (it == text.end()) return std::nullopt;
    return parse_diagram(it->second, canvas);
}

inline std::shared_ptr<ModelBackend> make_backend(const nlohmann::json& config, std::string_view sketch_png,
                                                  const Canvas& canvas, double threshold = kEquivalenceThreshold) {
    const nlohmann::json spec = config.is_object() ? config : nlohmann::json{{"kind", config}};
    const std::string kind = spec.value("kind", std::string("oracle"));
    if (kind == "oracle") {
        std::optional<Diagram> target;
        if (spec.contains("target")) {
            target = spec["target"].is_string() ? parse_diagram(spec["target"].get<std::string>(), canvas)
                                                : diagram_from_json(spec["target"], canvas);
        } else {
            target = embedded_diagram(sketch_png, canvas);
        }
        if (!target) {
            throw Error(ErrorCode::InvalidConfig,
                        "oracle backend needs a target diagram (backend.target, or a sketch rendered with --raster)");
        }
        return std::make_shared<OracleBackend>(*target, OracleOptions{threshold, {}});
    }
    if (kind == "scripted") {
        if (!spec.contains("trace") || !spec["trace"].is_string()) {
            throw Error(ErrorCode::InvalidConfig, "scripted backend needs a trace path", "/backend/trace");
        }
        return replay_backend(parse_trace(detail::read_file(spec["trace"].get<std::string>())));
    }
    if (kind == "remote") return std::make_shared<RemoteBackend>(remote_options_from_json(spec));
    throw Error(ErrorCode::InvalidConfig, "unknown backend kind '" + kind + "'", "/backend/kind");
}

}  // namespace sketch2svg
