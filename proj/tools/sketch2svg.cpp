// sketch2svg command line: run, validate, render, diff, replay, serve.
//
// Exit codes: 0 converged (or command succeeded), 2 exhausted,
// 1 any failure. Usage errors use CLI11's own codes.

#include "sketch2svg/backends.hpp"
#include "sketch2svg/geometry.hpp"
#include "sketch2svg/optimization_loop.hpp"
#include "sketch2svg/png.hpp"
#include "sketch2svg/replay.hpp"
#include "sketch2svg/service_api.hpp"
#include "sketch2svg/session_store.hpp"
#include "sketch2svg/shape_grammar.hpp"
#include "sketch2svg/svg_renderer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace sketch2svg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::StorageFailure, "cannot read " + path + ": no such file");
    return detail::read_file(path);
}

void spit(const fs::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    out << data;
    if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path.string());
}

ServiceOptions load_options(const std::string& config_path) {
    if (config_path.empty()) return service_options_from_json(nlohmann::json::object());
    auto j = nlohmann::json::parse(slurp(config_path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, config_path + " is not valid JSON");
    return service_options_from_json(j);
}

struct RunArgs {
    std::string sketch, instruction, backend, canvas, out = "sketch2svg-out", config, target, trace;
    int max_steps = 0;
};

int run(const RunArgs& a) {
    auto options = load_options(a.config);
    LoopConfig cfg = options.defaults;
    if (!a.canvas.empty()) cfg.canvas = parse_canvas(a.canvas);
    if (a.max_steps > 0) cfg.max_steps = a.max_steps;
    if (!a.instruction.empty()) cfg.instruction = a.instruction;

    const std::string png = slurp(a.sketch);
    if (!looks_like_png(png)) throw Error(ErrorCode::InvalidImage, a.sketch + " is not a PNG");
    auto sketch = std::make_shared<const RasterImage>(decode_png(std::string_view(png)));

    nlohmann::json spec = options.backend;
    if (!a.backend.empty()) spec = {{"kind", a.backend}};
    if (!a.target.empty()) spec["target"] = slurp(a.target);
    if (!a.trace.empty()) spec["trace"] = a.trace;
    auto backend = make_backend(spec, png, cfg.canvas, cfg.convergence_threshold);
    auto oracle = std::dynamic_pointer_cast<OracleBackend>(backend);

    std::vector<TraceRecord> trace{{RecordType::SessionMeta,
                                    0,
                                    utc_timestamp(),
                                    {{"config", to_json(cfg)},
                                     {"backend", spec},
                                     {"instruction", cfg.instruction},
                                     {"sketch_digest", sha256_hex(png)}}}};
    auto gateway = std::make_shared<ModelGateway>(backend, options.gateway);
    Session session(cfg, sketch, gateway, [&](std::vector<TraceRecord>& batch) {
        trace.insert(trace.end(), batch.begin(), batch.end());
    });

    std::optional<Error> failure;
    try {
        session.run();
    } catch (const Error& e) {
        failure = e;
    }

    fs::create_directories(a.out);
    std::string jsonl;
    for (const auto& r : trace) jsonl += to_jsonl(r);
    spit(fs::path(a.out) / "trace.jsonl", jsonl);
    spit(fs::path(a.out) / "sketch.png", png);
    spit(fs::path(a.out) / "final.svg", compile_svg(session.program()).text);
    spit(fs::path(a.out) / "final.json", serialize_diagram(session.program()));

    std::cout << "phase: " << to_string(session.phase()) << "\n";
    std::cout << "steps: " << session.steps_completed() << "\n";
    if (oracle) std::cout << "distance: " << structural_distance(session.program(), oracle->target()).value << "\n";
    std::cout << "output: " << a.out << "\n";
    if (failure) {
        std::cerr << "error: " << failure->what() << "\n";
        return 1;
    }
    switch (session.phase()) {
        case Phase::Converged: return 0;
        case Phase::Exhausted: return 2;
        default: return 1;
    }
}

int validate(const std::string& path) {
    int errors = 0;
    for (const auto& issue : validate_document(slurp(path))) {
        std::string where = issue.pointer.empty() ? "/" : issue.pointer;
        if (issue.warning) {
            std::cout << "warning " << where << ": " << issue.message << "\n";
        } else {
            ++errors;
            std::cout << where << ": " << to_string(issue.code) << ": " << issue.message << "\n";
        }
    }
    std::cout << errors << (errors == 1 ? " error" : " errors") << "\n";
    return errors == 0 ? 0 : 1;
}

int render(const std::string& path, bool raster, const std::string& out, const std::string& canvas, int supersample) {
    const std::string text = slurp(path);
    auto diagram = parse_diagram(text, parse_canvas(canvas));
    std::string data = raster ? to_string(encode_png(render_diagram(diagram, supersample),
                                                     {{kDiagramTextKey, serialize_diagram(diagram)}}))
                              : compile_svg(diagram).text;
    if (out.empty() || out == "-") {
        std::cout << data;
    } else {
        spit(out, data);
    }
    return 0;
}

int diff(const std::string& a_path, const std::string& b_path, const std::string& canvas_text) {
    const auto canvas = parse_canvas(canvas_text);
    auto a = parse_diagram(slurp(a_path), canvas);
    auto b = parse_diagram(slurp(b_path), canvas);
    auto dist = structural_distance(a, b);
    std::cout << (dist.equivalent() ? "equivalent" : "different") << " (distance " << dist.value << ")\n";
    for (const auto& line : describe_delta(a, diff_diagrams(a, b))) std::cout << "field: " << line << "\n";
    auto rel = relation_diff(a, b);
    for (const auto& line : rel.only_in_a) std::cout << "only in " << a_path << ": " << line << "\n";
    for (const auto& line : rel.only_in_b) std::cout << "only in " << b_path << ": " << line << "\n";
    return 0;
}

int replay(const std::string& trace_path, std::string sketch_path) {
    auto trace = parse_trace(slurp(trace_path));
    if (sketch_path.empty()) {
        auto sibling = fs::path(trace_path).parent_path() / "sketch.png";
        if (fs::exists(sibling)) sketch_path = sibling.string();
    }
    std::shared_ptr<const RasterImage> sketch;
    if (!sketch_path.empty()) {
        sketch = std::make_shared<const RasterImage>(decode_png(std::string_view(slurp(sketch_path))));
    } else {
        // recorded responses do not depend on the image
        sketch = std::make_shared<const RasterImage>(RasterImage(1, 1));
    }
    auto result = replay_trace(trace, sketch);
    if (!result.reproduced) {
        std::cerr << "trace diverged: " << result.divergence << "\n";
        return 1;
    }
    std::cout << "trace reproduced (" << result.records_compared << " records)\n";
    return 0;
}

int serve(const std::string& config, const std::string& listen, const std::string& store) {
    nlohmann::json j = nlohmann::json::object();
    if (!config.empty()) {
        j = nlohmann::json::parse(slurp(config), nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, config + " is not valid JSON");
    }
    if (!listen.empty()) j["listen"] = listen;
    if (!store.empty()) j["store"] = store;
    Service service(service_options_from_json(j));
    std::cout << "listening on " << service.options().host << ":" << service.options().port << " (store "
              << service.options().store_root.string() << ")" << std::endl;
    service.serve();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sketch to editable SVG diagrams"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Refine a sketch into a diagram");
    run_cmd->add_option("--sketch", run_args.sketch, "sketch PNG")->required();
    run_cmd->add_option("--instruction", run_args.instruction, "text instruction");
    run_cmd->add_option("--backend", run_args.backend, "model backend")
        ->check(CLI::IsMember({"remote", "oracle", "scripted"}));
    run_cmd->add_option("--canvas", run_args.canvas, "canvas WxH");
    run_cmd->add_option("--max-steps", run_args.max_steps, "step budget")->check(CLI::PositiveNumber);
    run_cmd->add_option("--out", run_args.out, "output directory")->capture_default_str();
    run_cmd->add_option("--config", run_args.config, "config file (same format as serve)");
    run_cmd->add_option("--target", run_args.target, "oracle target diagram JSON");
    run_cmd->add_option("--trace", run_args.trace, "trace to replay with the scripted backend");

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "Check a diagram document");
    validate_cmd->add_option("path", validate_path)->required();

    std::string render_path, render_out, render_canvas = "512x512";
    bool raster = false;
    int supersample = kDefaultSupersample;
    auto* render_cmd = app.add_subcommand("render", "Compile a diagram to SVG, or PNG with --raster");
    render_cmd->add_option("path", render_path)->required();
    render_cmd->add_flag("--raster", raster, "write PNG (with the diagram embedded) instead of SVG");
    render_cmd->add_option("-o,--out", render_out, "output file, default stdout");
    render_cmd->add_option("--canvas", render_canvas, "canvas WxH")->capture_default_str();
    render_cmd->add_option("--supersample", supersample, "samples per pixel axis")->capture_default_str()->check(CLI::PositiveNumber);

    std::string diff_a, diff_b, diff_canvas = "512x512";
    auto* diff_cmd = app.add_subcommand("diff", "Field and relation differences between two diagrams");
    diff_cmd->add_option("a", diff_a)->required();
    diff_cmd->add_option("b", diff_b)->required();
    diff_cmd->add_option("--canvas", diff_canvas, "canvas WxH")->capture_default_str();

    std::string replay_path, replay_sketch;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run a trace from its recorded responses");
    replay_cmd->add_option("trace", replay_path)->required();
    replay_cmd->add_option("--sketch", replay_sketch, "sketch PNG, default sketch.png next to the trace");

    std::string serve_config, serve_listen, serve_store;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--config", serve_config, "service config JSON");
    serve_cmd->add_option("--listen", serve_listen, "host:port");
    serve_cmd->add_option("--store", serve_store, "store directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return run(run_args);
        if (*validate_cmd) return validate(validate_path);
        if (*render_cmd) return render(render_path, raster, render_out, render_canvas, supersample);
        if (*diff_cmd) return diff(diff_a, diff_b, diff_canvas);
        if (*replay_cmd) return replay(replay_path, replay_sketch);
        if (*serve_cmd) return serve(serve_config, serve_listen, serve_store);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
