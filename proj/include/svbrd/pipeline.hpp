#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svbrd/classification.hpp"
#include "svbrd/error.hpp"
#include "svbrd/features.hpp"
#include "svbrd/io.hpp"
#include "svbrd/kalman.hpp"
#include "svbrd/kinematics.hpp"
#include "svbrd/lane_change.hpp"
#include "svbrd/library_io.hpp"
#include "svbrd/llm/backend.hpp"
#include "svbrd/llm/prompts.hpp"
#include "svbrd/llm/response_parser.hpp"
#include "svbrd/metrics.hpp"
#include "svbrd/seed_library.hpp"
#include "svbrd/synth.hpp"
#include "svbrd/verification.hpp"

namespace svbrd {

/// Settings shared by every pipeline stage.
struct RunConfig {
    double theta = 0.7;
    double delta = 0.5;
    LaneChangeParams lane_change;
    double stationary_speed = 0.5;
    double congestion_speed = kDefaultCongestionSpeed;
    bool smooth = true;
    KalmanParams kalman;
    int horizon = 3;
    double blend_weight = kDefaultBlendWeight;
    std::size_t prompt_budget = llm::kDefaultPromptBudget;
    VerificationOptions verification;
    UndeterminedPolicy undetermined = UndeterminedPolicy::exclude;
    std::uint64_t seed = 42;

    void validate() const {
        auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, m); };
        if (!(theta >= 0.0 && theta <= 1.0)) bad("theta must lie in [0,1]");
        if (!(delta >= 0.0 && delta <= 1.0)) bad("delta must lie in [0,1]");
        if (lane_change.window < 2) bad("lane-change window must be >= 2 frames");
        if (!(lane_change.threshold > 0.0)) bad("lane-change threshold must be > 0");
        if (!(stationary_speed >= 0.0)) bad("stationary speed threshold must be >= 0");
        if (!(congestion_speed >= 0.0)) bad("congestion speed threshold must be >= 0");
        if (!(kalman.process_noise > 0.0 && kalman.measurement_noise > 0.0)) bad("Kalman noise terms must be > 0");
        check_horizon(horizon);
        if (!(blend_weight >= 0.0 && blend_weight <= 1.0)) bad("blend weight must lie in [0,1]");
        if (prompt_budget == 0) bad("prompt budget must be > 0");
        if (verification.max_iters < 1) bad("max iterations must be >= 1");
        if (!(verification.epsilon >= 0.0)) bad("epsilon must be >= 0");
        verification.backend.validate();
    }
};

/// True for failures caused by the caller's input or configuration (CLI
/// exit code 2) rather than by the run itself (exit code 1).
inline bool is_input_error(ErrorCode c) {
    switch (c) {
        case ErrorCode::TooShort:
        case ErrorCode::NonFinite:
        case ErrorCode::NonPositiveParameter:
        case ErrorCode::InvalidFrame:
        case ErrorCode::WindowLongerThanTrajectory:
        case ErrorCode::InvalidArgument:
        case ErrorCode::SyntaxError:
        case ErrorCode::UnknownAtom:
        case ErrorCode::NonFiniteLiteral:
        case ErrorCode::InvalidRange:
        case ErrorCode::UnitMismatch:
        case ErrorCode::CorruptFile:
        case ErrorCode::MissingVersion:
        case ErrorCode::ValidationFailed:
        case ErrorCode::SchemaViolation:
        case ErrorCode::IoError:
        case ErrorCode::EmptySampleSet:
        case ErrorCode::EmptyValidationSet:
        case ErrorCode::InvalidHorizon:
        case ErrorCode::LengthMismatch:
        case ErrorCode::EmptyInput:
        case ErrorCode::DegenerateLabels: return true;
        default: return false;
    }
}

// ---------------------------------------------------------------------------
// Stage 1: features

struct Extraction {
    FeatureVector features;
    std::vector<LaneChangeEvent> events;
    KinematicSeries kinematics;
};

/// Features of an already validated trajectory. A trajectory shorter than
/// the lane-change window simply has no events.
inline Extraction extract(const Trajectory& traj, const RunConfig& cfg) {
    const Trajectory t = cfg.smooth ? smooth_trajectory(traj, cfg.kalman) : traj;
    Extraction ex;
    ex.kinematics = compute_kinematics(t);
    if (t.size() >= cfg.lane_change.window) ex.events = detect_lane_changes(t, cfg.lane_change);
    ex.features = summarize_features(t, ex.kinematics, ex.events);
    return ex;
}

inline std::vector<double> speed_profile_1hz(const Trajectory& traj, const KinematicSeries& kin) {
    std::vector<double> out;
    const auto step = static_cast<std::size_t>(std::max(1.0, std::round(traj.frame_rate)));
    for (std::size_t i = 0; i < kin.velocity.size(); i += step) out.push_back(kin.velocity[i]);
    return out;
}

/// Feature record of one validated trajectory, including the forecast
/// block when the trajectory outlasts the horizon.
inline FeatureRecord make_feature_record(const Trajectory& traj, const RunConfig& cfg) {
    const Extraction ex = extract(traj, cfg);
    FeatureRecord r;
    r.vehicle_id = traj.vehicle_id;
    r.label = traj.label;
    r.context_explicit = traj.context.has_value();
    r.context = derive_context(ex.features, traj.context, cfg.congestion_speed);
    r.frame_rate = traj.frame_rate;
    r.features = ex.features;
    r.lane_changes = ex.events;
    r.speed_profile = speed_profile_1hz(traj, ex.kinematics);

    if (traj.size() >= horizon_points(traj, cfg.horizon) + kMinTrajectoryLength) {
        const Trajectory prefix = observed_prefix(traj, cfg.horizon);
        const Extraction pex = extract(prefix, cfg);
        const Trajectory observed = cfg.smooth ? smooth_trajectory(prefix, cfg.kalman) : prefix;
        const Trajectory full = cfg.smooth ? smooth_trajectory(traj, cfg.kalman) : traj;
        Forecast f;
        f.horizon = cfg.horizon;
        f.features = pex.features;
        f.recent = recent_motion(observed, pex.kinematics);
        f.future = future_outcomes(full, compute_kinematics(full), cfg.horizon, cfg.lane_change.threshold);
        r.forecast = f;
    }
    return r;
}

struct FeatureSummary {
    std::size_t read = 0;
    std::size_t written = 0;
    std::vector<std::string> stationary;  ///< ids dropped as stationary
};

/// validate -> smooth -> drop stationary -> features, for a whole file.
inline FeatureSummary cmd_features(const std::filesystem::path& input, const std::filesystem::path& output,
                                   const RunConfig& cfg) {
    cfg.validate();
    auto in = open_input(input);
    std::vector<Trajectory> kept;
    FeatureSummary summary;
    for_each_jsonl(in, [&](const nlohmann::json& j, std::size_t) {
        ++summary.read;
        Trajectory t = validate_trajectory(trajectory_from_json(j));
        const Trajectory s = cfg.smooth ? smooth_trajectory(t, cfg.kalman) : t;
        if (mean_speed(s) < cfg.stationary_speed) {
            summary.stationary.push_back(t.vehicle_id);
            return;
        }
        kept.push_back(std::move(t));
    });
    std::vector<FeatureRecord> records;
    records.reserve(kept.size());
    for (const auto& t : kept) records.push_back(make_feature_record(t, cfg));
    auto out = open_output(output);
    write_feature_records(out, records);
    summary.written = records.size();
    return summary;
}

// ---------------------------------------------------------------------------
// Stage 2: discovery

inline UnitSystem common_units(std::span<const FeatureRecord> records) {
    if (records.empty()) throw Error(ErrorCode::EmptyInput, "no feature records");
    const UnitSystem u = records.front().features.unit_system;
    for (const auto& r : records) {
        if (r.features.unit_system != u) throw Error(ErrorCode::UnitMismatch, "feature records mix unit systems");
    }
    return u;
}

struct DiscoverySummary {
    std::size_t n_av = 0;
    std::size_t n_hdv = 0;
    std::size_t accepted = 0;
    std::vector<llm::RejectedBlock> rejected;
};

/// Builds the discovery prompt from labeled training records, asks the
/// backend and writes the parsed candidates as a library. The prompt is
/// saved beside the library before the backend is called.
inline DiscoverySummary cmd_discover(const std::filesystem::path& train, const std::filesystem::path& library_out,
                                     const std::filesystem::path& rejected_out, llm::ChatBackend& backend,
                                     const RunConfig& cfg) {
    cfg.validate();
    const auto records = read_feature_records(train);
    const UnitSystem units = common_units(records);
    std::vector<Sample> av, hdv;
    for (const auto& r : records) {
        if (!r.label) continue;
        (*r.label == Label::AV ? av : hdv).push_back(r.sample());
    }
    if (av.empty() || hdv.empty()) {
        throw Error(ErrorCode::EmptySampleSet, "discovery needs labeled AV and HDV records");
    }
    const auto prompt = llm::build_discovery_prompt(av, hdv, cfg.prompt_budget);
    {
        auto p = open_output(library_out.string() + ".prompt.txt");
        for (const auto& m : prompt.messages) p << "## " << to_string(m.role) << "\n" << m.content << "\n";
    }
    const auto parsed = llm::parse_rule_response(llm::complete(cfg.verification.backend, backend, prompt));

    RuleLibrary lib(cfg.theta, units);
    for (const auto& r : parsed.rules) lib.add(r);
    save_library(lib, library_out);
    auto rej = open_output(rejected_out);
    for (const auto& b : parsed.rejected) {
        rej << nlohmann::json{{"index", b.index},
                              {"reason", std::string(to_string(b.reason))},
                              {"message", b.message},
                              {"text", b.text}}
                   .dump()
            << '\n';
    }
    return {av.size(), hdv.size(), parsed.rules.size(), parsed.rejected};
}

// ---------------------------------------------------------------------------
// Stage 3: verification

inline nlohmann::json iteration_record_to_json(const IterationRecord& r) {
    return {{"rule_id", r.rule_id}, {"iteration", r.iteration}, {"confidence", r.confidence}, {"action", r.action}};
}

inline void write_iteration_log(const std::filesystem::path& path, std::span<const IterationRecord> log) {
    auto out = open_output(path);
    for (const auto& r : log) out << iteration_record_to_json(r).dump() << '\n';
}

/// Runs the verification loop against validation records. On a backend
/// failure the partial library and log are still written before the
/// error propagates.
inline VerificationResult cmd_verify(const std::filesystem::path& library_in,
                                     const std::filesystem::path& validation,
                                     const std::filesystem::path& library_out,
                                     const std::filesystem::path& log_out, llm::ChatBackend& backend,
                                     const RunConfig& cfg) {
    cfg.validate();
    RuleLibrary lib = load_library(library_in);
    lib.set_theta(cfg.theta);
    const auto records = read_feature_records(validation);
    if (common_units(records) != lib.units()) {
        throw Error(ErrorCode::UnitMismatch, "validation records and library use different unit systems");
    }
    std::vector<Sample> val;
    for (const auto& r : records) {
        if (!r.label) throw Error(ErrorCode::SchemaViolation, "validation record '" + r.vehicle_id + "' has no label");
        val.push_back(r.sample());
    }
    try {
        auto res = run_verification_loop(std::move(lib), val, backend, cfg.verification);
        save_library(res.library, library_out);
        write_iteration_log(log_out, res.log);
        return res;
    } catch (const VerificationAborted& e) {
        save_library(e.partial().library, library_out);
        write_iteration_log(log_out, e.partial().log);
        throw;
    }
}

// ---------------------------------------------------------------------------
// Stage 4: application

inline nlohmann::json task_prediction_to_json(const TaskPrediction& p) {
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& [o, s] : p.scores) scores[std::string(to_string(o))] = s;
    return {{"predicted", std::string(to_string(p.predicted))}, {"scores", std::move(scores)}, {"horizon", p.horizon}};
}

inline nlohmann::json match_report_to_json(const MatchReport& r) {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& e : r.entries) {
        const char* verdict = e.verdict == Verdict::matched       ? "matched"
                              : e.verdict == Verdict::not_matched ? "not_matched"
                                                                  : "not_applicable";
        rules.push_back({{"rule_id", e.rule_id}, {"verdict", verdict}, {"weight", e.weight}});
    }
    const bool determined = r.decision != Decision::undetermined;
    return {{"vehicle_id", r.vehicle_id},
            {"decision", std::string(to_string(r.decision))},
            {"score", determined ? nlohmann::json(r.score) : nlohmann::json()},
            {"delta", r.delta},
            {"confidence", determined ? nlohmann::json(r.confidence) : nlohmann::json()},
            {"applicable_weight_sum", r.applicable_weight_sum},
            {"matched_weight_sum", r.matched_weight_sum},
            {"rules", std::move(rules)}};
}

/// Report for one feature record: identification plus, when the record
/// has a forecast block, both prediction tasks.
inline nlohmann::json classify_record(const FeatureRecord& r, const RuleLibrary& lib, const RunConfig& cfg) {
    auto j = match_report_to_json(classify_vehicle(r.vehicle_id, r.features, r.context, lib, cfg.delta));
    if (r.forecast) {
        const auto& f = *r.forecast;
        auto speed = predict_speed_change(f.features, f.recent, r.context, lib, cfg.horizon, cfg.blend_weight);
        auto lane = predict_lane_change(f.features, f.recent, r.context, lib, cfg.horizon, cfg.blend_weight);
        speed.vehicle_id = lane.vehicle_id = r.vehicle_id;
        j["predictions"] = {{"speed", task_prediction_to_json(speed)}, {"lane_change", task_prediction_to_json(lane)}};
    }
    return j;
}

struct ClassifySummary {
    std::size_t n = 0;
    std::size_t av = 0;
    std::size_t hdv = 0;
    std::size_t undetermined = 0;
};

inline ClassifySummary cmd_classify(const std::filesystem::path& library_in, const std::filesystem::path& features,
                                    const std::filesystem::path& reports_out, const RunConfig& cfg) {
    cfg.validate();
    const RuleLibrary lib = load_library(library_in);
    const auto records = read_feature_records(features);
    ClassifySummary s;
    auto out = open_output(reports_out);
    for (const auto& r : records) {
        if (r.features.unit_system != lib.units()) {
            throw Error(ErrorCode::UnitMismatch, "record '" + r.vehicle_id + "' does not use the library's units");
        }
        const auto j = classify_record(r, lib, cfg);
        const auto d = j.at("decision").get<std::string>();
        ++s.n;
        s.av += d == "AV";
        s.hdv += d == "HDV";
        s.undetermined += d == kUndetermined;
        out << j.dump() << '\n';
    }
    return s;
}

inline nlohmann::json metrics_to_json(const MetricsReport& m) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& c : m.per_class) {
        per[c.name] = {{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
    }
    return {{"accuracy", m.accuracy},
            {"macro_precision", m.macro_precision},
            {"macro_recall", m.macro_recall},
            {"macro_f1", m.macro_f1},
            {"per_class", std::move(per)},
            {"classes", m.confusion.classes},
            {"confusion", m.confusion.counts},
            {"roc_auc", m.roc_auc ? nlohmann::json(*m.roc_auc) : nlohmann::json()},
            {"n_samples", m.n_samples},
            {"n_undetermined", m.n_undetermined}};
}

struct EvaluationResult {
    MetricsReport identification;
    std::optional<MetricsReport> speed;
    std::optional<MetricsReport> lane_change;
    std::vector<std::string> unmatched;  ///< report ids without a labeled record
    nlohmann::json json;
};

/// Joins reports with the labeled feature records by vehicle id and scores
/// all three tasks. Reports without a label are listed, not fatal.
inline EvaluationResult cmd_evaluate(const std::filesystem::path& reports_in, const std::filesystem::path& labels,
                                     const std::filesystem::path& metrics_out, const RunConfig& cfg) {
    cfg.validate();
    std::map<std::string, FeatureRecord> by_id;
    for (auto& r : read_feature_records(labels)) by_id.emplace(r.vehicle_id, std::move(r));

    EvaluationResult res;
    std::vector<std::string> pred, truth, sp_pred, sp_truth, lc_pred, lc_truth;
    std::vector<double> scores;
    std::vector<bool> positive;
    auto in = open_input(reports_in);
    for_each_jsonl(in, [&](const nlohmann::json& j, std::size_t) {
        const auto id = j.at("vehicle_id").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end() || !it->second.label) {
            res.unmatched.push_back(id);
            return;
        }
        const auto& rec = it->second;
        pred.push_back(j.at("decision").get<std::string>());
        truth.emplace_back(to_string(*rec.label));
        if (!j.at("score").is_null()) {
            scores.push_back(j.at("score").get<double>());
            positive.push_back(*rec.label == Label::AV);
        }
        if (j.contains("predictions") && rec.forecast) {
            const auto& p = j.at("predictions");
            sp_pred.push_back(p.at("speed").at("predicted").get<std::string>());
            sp_truth.emplace_back(to_string(rec.forecast->future.speed));
            lc_pred.push_back(p.at("lane_change").at("predicted").get<std::string>());
            lc_truth.emplace_back(to_string(rec.forecast->future.lane));
        }
    });
    if (pred.empty()) throw Error(ErrorCode::EmptyInput, "no report matches a labeled record");

    res.identification = compute_metrics(pred, truth, {"AV", "HDV"}, cfg.undetermined);
    const bool both = std::count(positive.begin(), positive.end(), true) > 0 &&
                      std::count(positive.begin(), positive.end(), false) > 0;
    if (both) res.identification.roc_auc = compute_roc_auc(scores, positive);
    if (!sp_pred.empty()) {
        res.speed = compute_metrics(sp_pred, sp_truth, {"accelerate", "decelerate", "maintain"});
        res.lane_change = compute_metrics(lc_pred, lc_truth, {"left_LC", "right_LC", "keep_lane"});
    }
    res.json = {{"identification", metrics_to_json(res.identification)},
                {"speed", res.speed ? metrics_to_json(*res.speed) : nlohmann::json()},
                {"lane_change", res.lane_change ? metrics_to_json(*res.lane_change) : nlohmann::json()},
                {"unmatched", res.unmatched}};
    auto out = open_output(metrics_out);
    out << res.json.dump(2) << '\n';
    return res;
}

inline std::string format_metrics_table(const EvaluationResult& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    auto row = [&](const char* task, const MetricsReport& m, bool binary) {
        const double p = binary ? m.positive().precision : m.macro_precision;
        const double rc = binary ? m.positive().recall : m.macro_recall;
        const double f = binary ? m.positive().f1 : m.macro_f1;
        os << task << "\t" << m.accuracy << "\t" << p << "\t" << rc << "\t" << f << "\t";
        if (m.roc_auc) {
            os << *m.roc_auc;
        } else {
            os << "-";
        }
        os << "\t" << m.n_samples << "\t" << m.n_undetermined << "\n";
    };
    os << "task\taccuracy\tprecision\trecall\tf1\troc_auc\tn\tundetermined\n";
    row("identification", r.identification, true);
    if (r.speed) row("speed", *r.speed, false);
    if (r.lane_change) row("lane_change", *r.lane_change, false);
    return os.str();
}

// ---------------------------------------------------------------------------
// Synthetic data

inline Dataset cmd_synth(const GeneratorConfig& gen, const std::filesystem::path& trajectories_out,
                         const std::filesystem::path& manifest_out) {
    auto ds = generate_dataset(gen);
    auto out = open_output(trajectories_out);
    write_trajectories(out, ds.trajectories);
    auto man = open_output(manifest_out);
    man << ds.manifest.dump(2) << '\n';
    return ds;
}

}  // namespace svbrd
