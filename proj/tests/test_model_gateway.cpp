#include "sketch2svg/encoding.hpp"
#include "sketch2svg/model_gateway.hpp"
#include "sketch2svg/oracle_backend.hpp"
#include "sketch2svg/remote_backend.hpp"
#include "sketch2svg/scripted_backend.hpp"
#include "support/random_diagrams.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

using namespace sketch2svg;

namespace {

const Canvas kCanvas{200, 150};

Shape make(ShapeType t, double x, double y, double sx, double sy, NamedColor fill) {
    Shape s;
    s.shape_type = t;
    s.x = x;
    s.y = y;
    s.scale_x = sx;
    s.scale_y = t == ShapeType::Circle ? sx : sy;
    s.fill_color = fill;
    return normalize(s);
}

const std::string kValidCritique =
    R"({"scene_description": "a red circle", "discrepancies": ["too far left"], "suggestions": ["move it right"]})";

std::shared_ptr<const RasterImage> blank() {
    return std::make_shared<const RasterImage>(render_diagram(Diagram{kCanvas, {}}));
}

int count_of(const std::string& text, const std::string& needle) {
    int n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST(ModelOutput, ExtractsFirstBalancedObject) {
    EXPECT_EQ(extract_json_object("Sure! ```json\n{\"a\": {\"b\": 1}}\n``` done"), "{\"a\": {\"b\": 1}}");
    EXPECT_EQ(extract_json_object(R"(x {"s": "brace } inside \" quote"} y)"), R"({"s": "brace } inside \" quote"})");
    EXPECT_EQ(extract_json_object("{ unbalanced {\"ok\": 1}"), "{\"ok\": 1}");
    EXPECT_FALSE(extract_json_object("no json here"));
}

TEST(ModelOutput, CritiqueParsing) {
    auto r = parse_critique_response(kValidCritique);
    EXPECT_EQ(r.discrepancies.size(), 1u);
    EXPECT_FALSE(r.converged());
    EXPECT_EQ(r.raw_response, kValidCritique);

    auto done = parse_critique_response(R"({"scene_description": "x", "no_differences": true})");
    EXPECT_TRUE(done.converged());

    auto many = parse_critique_response(
        R"({"scene_description": "x", "discrepancies": ["1","2","3","4","5"], "suggestions": ["a","b","c","d","e"]})");
    EXPECT_EQ(many.discrepancies, (std::vector<std::string>{"1", "2", "3"}));
    EXPECT_EQ(many.suggestions, (std::vector<std::string>{"a", "b", "c"}));

    for (const char* bad : {R"({"discrepancies": []})", R"({"scene_description": "x", "discrepancies": []})",
                            R"({"scene_description": "x", "discrepancies": ["a"], "suggestions": []})",
                            R"({"scene_description": "x", "discrepancies": "a", "suggestions": "b"})", "nope"}) {
        try {
            parse_critique_response(bad);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::MalformedModelOutput) << bad;
        }
    }
}

TEST(ModelOutput, VerdictRange) {
    EXPECT_EQ(parse_verdict_response(R"({"selected": 3, "rationale": "r"})", 5).selected, 3u);
    EXPECT_EQ(parse_verdict_response(R"({"selected": 0})", 5).selected, 0u);
    EXPECT_THROW(parse_verdict_response(R"({"selected": 6})", 5), Error);
    EXPECT_THROW(parse_verdict_response(R"({"selected": -1})", 5), Error);
    EXPECT_THROW(parse_verdict_response(R"({"selected": "2"})", 5), Error);
}

TEST(ModelOutput, ProgramErrorsBecomeMalformedOutput) {
    try {
        parse_program_response(R"({"shapes": [{"shape_type": "hexagon", "x": 1, "y": 1}]})", kCanvas);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedModelOutput);
        EXPECT_EQ(e.pointer(), "/shapes/0/shape_type");
    }
}

TEST(Gateway, RepairsMalformedOutput) {
    std::vector<std::string> prompts;
    auto backend = std::make_shared<ScriptedBackend>([&](const ModelRequest& r) -> std::string {
        prompts.push_back(r.prompt.user);
        return r.attempt == 0 ? "I think the diagram looks {fine" : R"({"shapes": []})";
    });
    ModelGateway gw(backend);
    auto cand = gw.synthesize(Diagram{kCanvas, {}}, parse_critique_response(kValidCritique), Strategy::Aggressive,
                              kDefaultInstruction, 1);
    EXPECT_EQ(cand.repair_count, 1);
    EXPECT_EQ(cand.raw_response, R"({"shapes": []})");
    ASSERT_EQ(prompts.size(), 2u);
    EXPECT_EQ(prompts[1].find(prompts[0]), 0u);
    EXPECT_NE(prompts[1].find("could not be used"), std::string::npos);
    EXPECT_NE(prompts[1].find("no JSON object"), std::string::npos);
}

TEST(Gateway, GivesUpAfterMaxRepairs) {
    std::atomic<int> calls = 0;
    auto backend = std::make_shared<ScriptedBackend>([&](const ModelRequest&) {
        ++calls;
        return std::string(R"({"selected": 99})");
    });
    ModelGateway gw(backend);
    try {
        gw.judge(blank(), blank(), Diagram{kCanvas, {}}, {blank()}, {Diagram{kCanvas, {}}}, kDefaultInstruction, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedModelOutput);
    }
    EXPECT_EQ(calls, 3);
}

TEST(Gateway, BackendUnavailableIsNotRepaired) {
    std::atomic<int> calls = 0;
    auto backend = std::make_shared<ScriptedBackend>([&](const ModelRequest&) -> std::string {
        ++calls;
        throw Error(ErrorCode::BackendUnavailable, "down");
    });
    ModelGateway gw(backend);
    EXPECT_THROW(gw.describe_sketch(blank(), kDefaultInstruction, kCanvas), Error);
    EXPECT_EQ(calls, 1);
}

TEST(Gateway, CritiquePromptListsEveryFailure) {
    std::string seen;
    auto backend = std::make_shared<ScriptedBackend>([&](const ModelRequest& r) {
        seen = r.prompt.text();
        EXPECT_EQ(r.prompt.images.size(), 2u);
        return kValidCritique;
    });
    ModelGateway gw(backend);
    std::vector<FailureFeedback> failures{{2, {"move it right"}, {"shape 0 (red circle): x 10 -> 20"}},
                                          {3, {"make it bigger"}, {}},
                                          {4, {"paint it blue"}, {}}};
    gw.critique(blank(), blank(), Diagram{kCanvas, {}}, "draw a circle", failures, 5);
    EXPECT_EQ(count_of(seen, "[failed attempt"), 3);
    EXPECT_NE(seen.find("move it right"), std::string::npos);
    EXPECT_NE(seen.find("x 10 -> 20"), std::string::npos);
    EXPECT_NE(seen.find("draw a circle"), std::string::npos);
    EXPECT_NE(seen.find("200x150"), std::string::npos);

    gw.critique(blank(), blank(), Diagram{kCanvas, {}}, "draw a circle", {}, 1);
    EXPECT_EQ(count_of(seen, "[failed attempt"), 0);
}

TEST(Gateway, FanOutRespectsInFlightLimit) {
    for (std::size_t limit : {std::size_t{1}, std::size_t{2}, std::size_t{5}}) {
        std::atomic<int> in_flight = 0, peak = 0;
        auto backend = std::make_shared<ScriptedBackend>([&](const ModelRequest&) {
            int now = ++in_flight;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(40));
            --in_flight;
            return std::string(R"({"shapes": []})");
        });
        ModelGateway gw(backend, GatewayOptions{2, limit});
        std::vector<Strategy> strategies(kStrategies.begin(), kStrategies.end());
        auto out = gw.synthesize_all(Diagram{kCanvas, {}}, parse_critique_response(kValidCritique), strategies,
                                     kDefaultInstruction, 1);
        EXPECT_EQ(out.size(), 5u);
        EXPECT_LE(peak.load(), static_cast<int>(limit));
        if (limit == 5) {
            EXPECT_EQ(peak.load(), 5);
        }
    }
}

TEST(Gateway, FanOutKeepsStrategyOrder) {
    auto backend = std::make_shared<ScriptedBackend>([](const ModelRequest& r) {
        int k = static_cast<int>(*r.strategy);
        std::this_thread::sleep_for(std::chrono::milliseconds(5 * (5 - k)));
        return serialize_diagram(Diagram{kCanvas, {make(ShapeType::Circle, 10.0 * k + 5, 5, 4, 4, NamedColor::Red)}});
    });
    ModelGateway gw(backend);
    std::vector<Strategy> strategies(kStrategies.begin(), kStrategies.end());
    auto out = gw.synthesize_all(Diagram{kCanvas, {}}, parse_critique_response(kValidCritique), strategies,
                                 kDefaultInstruction, 1);
    ASSERT_EQ(out.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(out[i].strategy, kStrategies[i]);
        EXPECT_DOUBLE_EQ(out[i].diagram.shapes[0].x, 10.0 * static_cast<double>(i) + 5);
    }
}

TEST(Gateway, SingleBackendServesAllRoles) {
    std::vector<ModelRole> roles;
    auto backend = std::make_shared<ScriptedBackend>(
        [&](const ModelRequest& r) -> std::string {
            roles.push_back(r.role);
            switch (r.role) {
                case ModelRole::Critic: return R"({"scene_description": "one circle"})";
                case ModelRole::Synthesizer: return R"({"shapes": []})";
                case ModelRole::Judge: return R"({"selected": 0, "rationale": "none"})";
            }
            return {};
        },
        "scripted", true);
    ModelGateway gw(backend);
    auto desc = gw.describe_sketch(blank(), kDefaultInstruction, kCanvas);
    auto init = gw.initial_program(desc, kDefaultInstruction, kCanvas);
    gw.judge(blank(), blank(), init.diagram, {}, {}, kDefaultInstruction, 1);
    EXPECT_EQ(roles, (std::vector<ModelRole>{ModelRole::Critic, ModelRole::Synthesizer, ModelRole::Judge}));
    EXPECT_EQ(desc.scene_description, "one circle");
}

// ---------------------------------------------------------------------------
// Oracle backend
// ---------------------------------------------------------------------------

TEST(Oracle, EveryPlannedEditStrictlyLowersDistance) {
    std::mt19937_64 rng(11);
    int edits_checked = 0;
    for (int trial = 0; trial < 150; ++trial) {
        auto a = sketch2svg::testing::random_diagram(rng, kCanvas, 0, 6);
        auto b = sketch2svg::testing::random_diagram(rng, kCanvas, 0, 6);
        double before = structural_distance(a, b).value;
        auto plan = plan_edits(a, b);
        if (before > 0) {
            ASSERT_FALSE(plan.empty());
        }
        for (const auto& e : plan) {
            double after = structural_distance(apply_edits(a, b, {e}), b).value;
            EXPECT_LT(after, before - 1e-9) << e.suggestion;
            ++edits_checked;
        }
        std::uniform_int_distribution<std::size_t> pick(0, plan.size());
        std::vector<PlannedEdit> subset;
        for (const auto& e : plan) {
            if (pick(rng) % 2 == 0) subset.push_back(e);
        }
        if (!subset.empty()) {
            EXPECT_LT(structural_distance(apply_edits(a, b, subset), b).value, before - 1e-9);
        }
        EXPECT_NEAR(structural_distance(apply_edits(a, b, plan), b).value, 0.0, 1e-12);
    }
    EXPECT_GT(edits_checked, 500);
}

TEST(Oracle, PlanIsOrderedByGain) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        auto plan = plan_edits(sketch2svg::testing::random_diagram(rng, kCanvas, 1, 5), sketch2svg::testing::random_diagram(rng, kCanvas, 1, 5));
        for (std::size_t k = 1; k < plan.size(); ++k) EXPECT_GE(plan[k - 1].gain, plan[k].gain);
    }
}

TEST(Oracle, SceneDescriptionRoundTripsCoarsely) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        auto target = sketch2svg::testing::random_diagram(rng, kCanvas, 1, 8);
        auto text = oracle::describe_scene(target);
        auto coarse = oracle::parse_scene(text, kCanvas);
        ASSERT_EQ(coarse.shapes.size(), target.shapes.size()) << text;
        for (std::size_t i = 0; i < coarse.shapes.size(); ++i) {
            const auto& c = coarse.shapes[i];
            const auto& t = target.shapes[i];
            EXPECT_EQ(c.shape_type, t.shape_type);
            EXPECT_EQ(c.fill_color, t.fill_color);
            EXPECT_EQ(c.stroke_color, t.stroke_color);
            // same 5x5 cell, unless the target sits outside the canvas
            if (t.x >= 0 && t.x < kCanvas.width) {
                EXPECT_LE(std::abs(c.x - t.x), kCanvas.width / 10.0 + 1e-9);
            }
            if (t.y >= 0 && t.y < kCanvas.height) {
                EXPECT_LE(std::abs(c.y - t.y), kCanvas.height / 10.0 + 1e-9);
            }
            if (t.shape_type != ShapeType::Circle) {
                EXPECT_LE(angular_difference(c.rotation, t.rotation), 22.5 + 1e-9);
            }
        }
        EXPECT_EQ(text.find("{"), std::string::npos);
    }
}

TEST(Oracle, CriticReportsTopEditsAndSkipsRejected) {
    Diagram target{kCanvas, {make(ShapeType::Rectangle, 150, 100, 40, 20, NamedColor::Red),
                             make(ShapeType::Circle, 50, 40, 30, 30, NamedColor::Blue)}};
    Diagram current{kCanvas, {make(ShapeType::Rectangle, 60, 100, 40, 20, NamedColor::Green),
                              make(ShapeType::Circle, 50, 40, 10, 10, NamedColor::Blue),
                              make(ShapeType::Triangle, 20, 20, 10, 10, NamedColor::Black)}};
    OracleBackend oracle(target);
    ModelRequest req;
    req.role = ModelRole::Critic;
    req.current_program = current;
    auto report = parse_critique_response(oracle.complete(req));
    ASSERT_EQ(report.suggestions.size(), 3u);
    auto plan = plan_edits(current, target);
    EXPECT_EQ(report.suggestions[0], plan[0].suggestion);
    EXPECT_EQ(plan[0].kind, PlannedEdit::Kind::Remove);
    EXPECT_NE(report.suggestions[0].find("black triangle"), std::string::npos);

    req.failures = {{1, {plan[0].suggestion, plan[1].suggestion}, {}}};
    auto again = parse_critique_response(oracle.complete(req));
    EXPECT_EQ(again.suggestions[0], plan[2].suggestion);

    req.current_program = target;
    EXPECT_TRUE(parse_critique_response(oracle.complete(req)).converged());
}

TEST(Oracle, SynthesizerAppliesStrategySubsets) {
    Diagram target{kCanvas, {make(ShapeType::Rectangle, 150, 100, 40, 20, NamedColor::Red),
                             make(ShapeType::Ellipse, 50, 40, 30, 12, NamedColor::Blue)}};
    Diagram current{kCanvas, {make(ShapeType::Rectangle, 60, 100, 40, 20, NamedColor::Green),
                              make(ShapeType::Ellipse, 50, 40, 10, 10, NamedColor::Blue)}};
    OracleBackend oracle(target);
    ModelRequest req;
    req.role = ModelRole::Critic;
    req.current_program = current;
    auto report = parse_critique_response(oracle.complete(req));
    ASSERT_EQ(report.suggestions.size(), 3u);

    req.role = ModelRole::Synthesizer;
    req.critique = report;
    std::map<Strategy, std::size_t> changed;
    for (auto s : kStrategies) {
        req.strategy = s;
        auto d = parse_diagram(oracle.complete(req), kCanvas);
        changed[s] = diff_diagrams(current, d).size();
        EXPECT_LT(structural_distance(d, target).value, structural_distance(current, target).value);
    }
    EXPECT_LT(changed[Strategy::Conservative], changed[Strategy::Aggressive]);
    EXPECT_LE(changed[Strategy::Moderate], changed[Strategy::Aggressive]);
    EXPECT_EQ(changed[Strategy::Alternative], changed[Strategy::Aggressive]);
    EXPECT_LE(changed[Strategy::Focused], changed[Strategy::Aggressive]);
}

TEST(Oracle, JudgePicksClosestOrReverts) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        auto target = sketch2svg::testing::random_diagram(rng, kCanvas, 1, 5);
        auto current = sketch2svg::testing::random_diagram(rng, kCanvas, 1, 5);
        std::vector<Diagram> candidates;
        for (int k = 0; k < 5; ++k) candidates.push_back(sketch2svg::testing::random_diagram(rng, kCanvas, 1, 5));
        OracleBackend oracle(target);
        ModelRequest req;
        req.role = ModelRole::Judge;
        req.current_program = current;
        req.candidate_programs = candidates;
        auto v = parse_verdict_response(oracle.complete(req), 5);
        // independent argmin
        std::size_t best = 0;
        double best_d = structural_distance(current, target).value;
        for (std::size_t k = 0; k < 5; ++k) {
            double d = structural_distance(candidates[k], target).value;
            if (d < best_d - 1e-12) {
                best_d = d;
                best = k + 1;
            }
        }
        EXPECT_EQ(v.selected, best);
    }
}

TEST(Oracle, InitialProgramComesFromDescriptionOnly) {
    Diagram target{kCanvas, {make(ShapeType::Triangle, 150, 100, 40, 20, NamedColor::Yellow)}};
    auto backend = std::make_shared<OracleBackend>(target);
    ModelGateway gw(backend);
    auto desc = gw.describe_sketch(blank(), kDefaultInstruction, kCanvas);
    EXPECT_NE(desc.scene_description.find("yellow triangle"), std::string::npos);
    auto init = gw.initial_program(desc, kDefaultInstruction, kCanvas);
    ASSERT_EQ(init.diagram.shapes.size(), 1u);
    EXPECT_EQ(init.diagram.shapes[0].shape_type, ShapeType::Triangle);
    EXPECT_EQ(init.repair_count, 0);

    CritiqueReport edited = desc;
    edited.scene_description = "The sketch shows 1 shape, listed from back to front:\n"
                               "- red circle with black outline, small, even, upright, in the top far left part of the canvas";
    auto other = gw.initial_program(edited, kDefaultInstruction, kCanvas);
    ASSERT_EQ(other.diagram.shapes.size(), 1u);
    EXPECT_EQ(other.diagram.shapes[0].fill_color, NamedColor::Red);
    EXPECT_DOUBLE_EQ(other.diagram.shapes[0].x, 20);
}

// ---------------------------------------------------------------------------
// Remote backend against a local fake endpoint
// ---------------------------------------------------------------------------

namespace {

struct FakeEndpoint {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit FakeEndpoint(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server.Post("/v1/chat", std::move(handler));
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeEndpoint() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat"; }
};

}  // namespace

TEST(Remote, SendsImagesAndCredentialAndRepairs) {
    std::atomic<int> hits = 0;
    std::string auth;
    nlohmann::json first_body;
    FakeEndpoint fake([&](const httplib::Request& req, httplib::Response& res) {
        int n = hits++;
        if (n == 0) {
            first_body = nlohmann::json::parse(req.body);
            auth = req.get_header_value("Authorization");
            res.set_content(R"({"choices": [{"message": {"content": "Looks like {broken"}}]})", "application/json");
        } else {
            res.set_content(nlohmann::json{{"content", {{{"type", "text"}, {"text", kValidCritique}}}}}.dump(),
                            "application/json");
        }
    });
    ::setenv("SKETCH2SVG_TEST_KEY", "s3cret", 1);
    RemoteOptions opts;
    opts.endpoint = fake.url();
    opts.model = "vision-model";
    opts.credential_env = "SKETCH2SVG_TEST_KEY";
    ModelGateway gw(std::make_shared<RemoteBackend>(opts));
    auto report = gw.critique(blank(), blank(), Diagram{kCanvas, {}}, kDefaultInstruction, {}, 1);
    EXPECT_EQ(report.suggestions, (std::vector<std::string>{"move it right"}));
    EXPECT_EQ(hits, 2);
    EXPECT_EQ(auth, "Bearer s3cret");
    EXPECT_EQ(first_body["model"], "vision-model");
    const auto& parts = first_body["messages"][1]["content"];
    int images = 0;
    for (const auto& p : parts) {
        if (p["type"] == "image") {
            ++images;
            auto img = decode_png(base64_decode(p["data"].get<std::string>()));
            EXPECT_EQ(img.width, kCanvas.width);
            EXPECT_EQ(img.height, kCanvas.height);
        }
    }
    EXPECT_EQ(images, 2);
}

TEST(Remote, RetriesWithBackoffThenFails) {
    std::atomic<int> hits = 0;
    FakeEndpoint fake([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    RemoteOptions opts;
    opts.endpoint = fake.url();
    opts.initial_backoff = std::chrono::milliseconds(20);
    RemoteBackend backend(opts);
    auto start = std::chrono::steady_clock::now();
    try {
        backend.complete(ModelRequest{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
        EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
    }
    EXPECT_EQ(hits, 3);
    EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(60));
}

TEST(Remote, ClientErrorsAreNotRetried) {
    std::atomic<int> hits = 0;
    FakeEndpoint fake([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    RemoteOptions opts;
    opts.endpoint = fake.url();
    opts.initial_backoff = std::chrono::milliseconds(1);
    EXPECT_THROW(RemoteBackend(opts).complete(ModelRequest{}), Error);
    EXPECT_EQ(hits, 1);
}

TEST(Remote, UnreachableEndpoint) {
    RemoteOptions opts;
    opts.endpoint = "http://127.0.0.1:1/none";
    opts.initial_backoff = std::chrono::milliseconds(1);
    opts.timeout = std::chrono::seconds(2);
    try {
        RemoteBackend(opts).complete(ModelRequest{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
    }
}

TEST(Remote, ConfigValidation) {
    EXPECT_THROW(remote_options_from_json(nlohmann::json::object()), Error);
    EXPECT_THROW(remote_options_from_json({{"endpoint", "http://x"}, {"attempts", 0}}), Error);
    auto o = remote_options_from_json({{"endpoint", "https://api.example.com/v1/chat"}, {"model", "m"}});
    EXPECT_EQ(o.attempts, 3);
    EXPECT_EQ(o.initial_backoff, std::chrono::milliseconds(1000));
    EXPECT_EQ(detail::split_url(o.endpoint), (std::pair<std::string, std::string>{"https://api.example.com", "/v1/chat"}));
}

TEST(Encoding, KnownVectors) {
    EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
    EXPECT_EQ(base64_encode("fo"), "Zm8=");
    EXPECT_EQ(base64_decode("Zm8="), "fo");
    EXPECT_EQ(base64_decode("Zg=="), "f");
    EXPECT_EQ(base64_decode(""), "");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    std::string bytes;
    for (int i = 0; i < 256; ++i) bytes.push_back(static_cast<char>(i));
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
}
