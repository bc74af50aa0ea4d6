// svbrd command-line driver.
//
//   svbrd synth      --out traj.jsonl --manifest manifest.json
//   svbrd features   --input traj.jsonl --out features.jsonl
//   svbrd discover   --train train.jsonl --out candidates.json
//   svbrd verify     --library candidates.json --val val.jsonl --out verified.json
//   svbrd classify   --library verified.json --features test.jsonl --out reports.jsonl
//   svbrd evaluate   --reports reports.jsonl --labels test.jsonl --out metrics.json
//   svbrd seed-library --out seed.json
//
// Options may also come from a TOML file (--config); flags win.
// Exit codes: 0 success, 1 runtime failure, 2 input or configuration error.

#include <chrono>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "svbrd/llm/http_backend.hpp"
#include "svbrd/svbrd.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

struct BackendChoice {
    std::string kind = "mock";
    std::string mock_dir;
};

std::unique_ptr<svbrd::llm::ChatBackend> make_backend(const BackendChoice& b) {
    if (b.kind == "mock") {
        if (b.mock_dir.empty()) {
            throw svbrd::Error(svbrd::ErrorCode::InvalidArgument, "the mock backend needs --mock-dir");
        }
        return std::make_unique<svbrd::llm::MockBackend>(svbrd::llm::MockBackend::read_fixtures(b.mock_dir));
    }
    return std::make_unique<svbrd::llm::HttpBackend>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interpretable AV/HDV identification from trajectory behavior rules"};
    app.set_config("--config", "", "TOML configuration file");
    app.require_subcommand(1);
    app.fallthrough();

    svbrd::RunConfig cfg;
    BackendChoice backend;
    auto& bcfg = cfg.verification.backend;
    long long timeout_ms = bcfg.timeout.count();
    long long backoff_ms = bcfg.initial_backoff.count();
    std::string undetermined = "exclude";
    std::size_t lc_window = cfg.lane_change.window;
    bool no_smooth = false;

    app.add_option("--seed", cfg.seed, "Seed for every random draw")->capture_default_str();
    app.add_option("--theta", cfg.theta, "Confidence threshold for verified rules")->capture_default_str();
    app.add_option("--delta", cfg.delta, "Matching-score threshold for an AV decision")->capture_default_str();
    app.add_option("--lc-window", lc_window, "Lane-change window, frames")->capture_default_str();
    app.add_option("--lc-threshold", cfg.lane_change.threshold,
                   "Lane-change cumulative lateral displacement threshold, length units")
        ->capture_default_str();
    app.add_option("--stationary-speed", cfg.stationary_speed, "Drop vehicles slower than this on average")
        ->capture_default_str();
    app.add_option("--congestion-speed", cfg.congestion_speed, "Mean speed below which traffic counts as congested")
        ->capture_default_str();
    app.add_flag("--no-smooth", no_smooth, "Skip Kalman smoothing");
    app.add_option("--kalman-q", cfg.kalman.process_noise, "Kalman process noise")->capture_default_str();
    app.add_option("--kalman-r", cfg.kalman.measurement_noise, "Kalman measurement variance")->capture_default_str();
    app.add_option("--horizon", cfg.horizon, "Prediction horizon, seconds (2, 3 or 4)")->capture_default_str();
    app.add_option("--blend", cfg.blend_weight, "Weight of rule votes against the kinematic prior")
        ->capture_default_str();
    app.add_option("--prompt-budget", cfg.prompt_budget, "Discovery prompt size limit, characters")
        ->capture_default_str();
    app.add_option("--max-iters", cfg.verification.max_iters, "Verification iteration cap")->capture_default_str();
    app.add_option("--epsilon", cfg.verification.epsilon, "Confidence change treated as no change")
        ->capture_default_str();
    app.add_flag("--strict-confidence", cfg.verification.confidence.strict,
                 "Score confidence over all validation samples");
    app.add_option("--undetermined", undetermined, "How undetermined decisions are scored")
        ->check(CLI::IsMember({"exclude", "wrong"}))
        ->capture_default_str();
    app.add_option("--backend", backend.kind, "Language-model backend")
        ->check(CLI::IsMember({"mock", "http"}))
        ->capture_default_str();
    app.add_option("--mock-dir", backend.mock_dir, "Fixture directory for the mock backend");
    app.add_option("--endpoint", bcfg.endpoint, "Chat-completion URL")->capture_default_str();
    app.add_option("--model", bcfg.model, "Model name")->capture_default_str();
    app.add_option("--temperature", bcfg.temperature, "Sampling temperature")->capture_default_str();
    app.add_option("--max-tokens", bcfg.max_output_tokens, "Output token cap")->capture_default_str();
    app.add_option("--timeout-ms", timeout_ms, "Per-request timeout")->capture_default_str();
    app.add_option("--retries", bcfg.retry_budget, "Retries after a transient failure")->capture_default_str();
    app.add_option("--backoff-ms", backoff_ms, "First retry delay, doubled each time")->capture_default_str();
    app.add_option("--api-key-env", bcfg.api_key_env, "Environment variable holding the bearer token")
        ->capture_default_str();

    // synth
    svbrd::GeneratorConfig gen;
    std::string synth_out, manifest_out;
    auto* synth = app.add_subcommand("synth", "Generate labeled synthetic trajectories");
    synth->add_option("--out", synth_out, "Trajectory file (JSONL)")->required();
    synth->add_option("--manifest", manifest_out, "Manifest file (JSON)")->required();
    synth->add_option("--n-av", gen.n_av, "AV trajectories")->capture_default_str();
    synth->add_option("--n-hdv", gen.n_hdv, "HDV trajectories")->capture_default_str();
    synth->add_option("--separation", gen.separation, "AV/HDV profile separation multiplier")->capture_default_str();
    synth->add_option("--min-duration", gen.min_duration, "Shortest trajectory, s")->capture_default_str();
    synth->add_option("--max-duration", gen.max_duration, "Longest trajectory, s")->capture_default_str();
    synth->add_option("--frame-rate", gen.frame_rate, "Frames per second")->capture_default_str();
    synth->add_option("--noise", gen.noise_floor, "Position noise std, m")->capture_default_str();
    synth->add_option("--threads", gen.threads, "Worker threads, 0 = all cores")->capture_default_str();

    // features
    std::string feat_in, feat_out;
    auto* features = app.add_subcommand("features", "Validate, smooth and summarize trajectories");
    features->add_option("--input", feat_in, "Trajectory file (JSONL)")->required();
    features->add_option("--out", feat_out, "Feature file (JSONL)")->required();

    // discover
    std::string train, cand_out, rejected_out;
    auto* discover = app.add_subcommand("discover", "Ask the backend for candidate rules");
    discover->add_option("--train", train, "Labeled feature file")->required();
    discover->add_option("--out", cand_out, "Candidate library (JSON)")->required();
    discover->add_option("--rejected", rejected_out, "Rejected blocks (JSONL); default <out>.rejected.jsonl");

    // verify
    std::string lib_in, val_in, verified_out, log_out;
    auto* verify = app.add_subcommand("verify", "Score, reflect and refine rules on validation data");
    verify->add_option("--library", lib_in, "Rule library to verify")->required();
    verify->add_option("--val", val_in, "Labeled validation feature file")->required();
    verify->add_option("--out", verified_out, "Verified library (JSON)")->required();
    verify->add_option("--log", log_out, "Iteration log (JSONL); default <out>.log.jsonl");

    // classify
    std::string cls_lib, cls_features, reports_out;
    auto* classify = app.add_subcommand("classify", "Identify vehicles and predict speed and lane changes");
    classify->add_option("--library", cls_lib, "Verified library")->required();
    classify->add_option("--features", cls_features, "Feature file")->required();
    classify->add_option("--out", reports_out, "Reports (JSONL)")->required();

    // evaluate
    std::string reports_in, labels_in, metrics_out;
    auto* evaluate = app.add_subcommand("evaluate", "Score reports against labeled records");
    evaluate->add_option("--reports", reports_in, "Reports from classify")->required();
    evaluate->add_option("--labels", labels_in, "Labeled feature file")->required();
    evaluate->add_option("--out", metrics_out, "Metrics (JSON)")->required();

    // seed-library
    std::string seed_out;
    auto* seed = app.add_subcommand("seed-library", "Write the built-in verified seed library");
    seed->add_option("--out", seed_out, "Library file (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        cfg.lane_change.window = lc_window;
        cfg.smooth = !no_smooth;
        cfg.undetermined = undetermined == "wrong" ? svbrd::UndeterminedPolicy::count_as_wrong
                                                   : svbrd::UndeterminedPolicy::exclude;
        bcfg.timeout = std::chrono::milliseconds(timeout_ms);
        bcfg.initial_backoff = std::chrono::milliseconds(backoff_ms);
        cfg.validate();

        if (*synth) {
            gen.seed = cfg.seed;
            gen.lane_change = cfg.lane_change;
            const auto ds = svbrd::cmd_synth(gen, synth_out, manifest_out);
            std::cout << "generated " << ds.trajectories.size() << " trajectories (" << gen.n_av << " AV, "
                      << gen.n_hdv << " HDV)\n";
        } else if (*features) {
            const auto s = svbrd::cmd_features(feat_in, feat_out, cfg);
            std::cout << "read " << s.read << ", wrote " << s.written << ", dropped " << s.stationary.size()
                      << " stationary";
            for (const auto& id : s.stationary) std::cout << ' ' << id;
            std::cout << '\n';
        } else if (*discover) {
            auto be = make_backend(backend);
            if (rejected_out.empty()) rejected_out = cand_out + ".rejected.jsonl";
            const auto s = svbrd::cmd_discover(train, cand_out, rejected_out, *be, cfg);
            std::cout << "samples " << s.n_av << " AV / " << s.n_hdv << " HDV; accepted " << s.accepted
                      << " rules, rejected " << s.rejected.size() << '\n';
            for (const auto& r : s.rejected) std::cerr << "rejected block " << r.index << ": " << r.message << '\n';
        } else if (*verify) {
            auto be = make_backend(backend);
            if (log_out.empty()) log_out = verified_out + ".log.jsonl";
            const auto res = svbrd::cmd_verify(lib_in, val_in, verified_out, log_out, *be, cfg);
            std::size_t verified = 0, retired = 0;
            for (const auto& r : res.library.rules()) {
                verified += r.state == svbrd::RuleState::verified;
                retired += r.state == svbrd::RuleState::retired;
            }
            std::cout << "iterations " << res.iterations << ", verified " << verified << ", retired " << retired
                      << '\n';
        } else if (*classify) {
            const auto s = svbrd::cmd_classify(cls_lib, cls_features, reports_out, cfg);
            std::cout << "classified " << s.n << ": " << s.av << " AV, " << s.hdv << " HDV, " << s.undetermined
                      << " undetermined\n";
        } else if (*evaluate) {
            const auto res = svbrd::cmd_evaluate(reports_in, labels_in, metrics_out, cfg);
            for (const auto& id : res.unmatched) std::cerr << "no labeled record for report '" << id << "'\n";
            std::cout << svbrd::format_metrics_table(res);
        } else if (*seed) {
            svbrd::save_library(svbrd::seed_library(cfg.theta), seed_out);
            std::cout << "wrote " << seed_out << '\n';
        }
    } catch (const svbrd::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return svbrd::is_input_error(e.code()) ? kExitInput : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
