#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svbrd/error.hpp"
#include "svbrd/features.hpp"
#include "svbrd/kinematics.hpp"
#include "svbrd/lane_change.hpp"
#include "svbrd/rule.hpp"
#include "svbrd/trajectory.hpp"
#include "svbrd/types.hpp"

namespace svbrd {

enum class Decision { AV, HDV, undetermined };

constexpr std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::AV: return "AV";
        case Decision::HDV: return "HDV";
        case Decision::undetermined: return "undetermined";
    }
    return "?";
}

struct RuleEvidence {
    std::string rule_id;
    Verdict verdict = Verdict::not_applicable;
    double weight = 0.0;

    friend bool operator==(const RuleEvidence&, const RuleEvidence&) = default;
};

struct MatchReport {
    std::string vehicle_id;
    double score = 0.0;
    Decision decision = Decision::undetermined;
    std::vector<RuleEvidence> entries;
    double applicable_weight_sum = 0.0;
    double matched_weight_sum = 0.0;
    double delta = 0.5;
    double confidence = 0.0;  ///< distance of the score from delta, scaled to [0,1]

    friend bool operator==(const MatchReport&, const MatchReport&) = default;
};

/// Confidence-weighted fraction of applicable verified AV-indicative
/// identification rules that the features satisfy. Entries list those rules
/// in library order, including the ones that did not apply.
inline MatchReport matching_score(const FeatureVector& features, TrafficContext context, const RuleLibrary& lib) {
    MatchReport rep;
    for (const Rule* r : lib.verified_av()) {
        if (!r->context.applies_to(Task::identification)) continue;
        const Verdict v = evaluate_rule(*r, features, context, lib.units());
        const double w = r->weight();
        rep.entries.push_back({r->id, v, w});
        if (v == Verdict::not_applicable) continue;
        rep.applicable_weight_sum += w;
        if (v == Verdict::matched) rep.matched_weight_sum += w;
    }
    if (!(rep.applicable_weight_sum > 0.0)) {
        throw Error(ErrorCode::NoApplicableRules, "no applicable AV-indicative verified rule");
    }
    rep.score = rep.matched_weight_sum / rep.applicable_weight_sum;
    return rep;
}

inline double decision_confidence(double score, double delta) {
    if (score >= delta) return delta >= 1.0 ? 1.0 : (score - delta) / (1.0 - delta);
    return delta <= 0.0 ? 1.0 : (delta - score) / delta;
}

inline void check_delta(double delta) {
    if (!(delta >= 0.0 && delta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "delta must lie in [0,1]");
}

/// AV iff the matching score reaches delta.
inline MatchReport identify_vehicle(const FeatureVector& features, TrafficContext context, const RuleLibrary& lib,
                                    double delta = 0.5) {
    check_delta(delta);
    MatchReport rep = matching_score(features, context, lib);
    rep.delta = delta;
    rep.decision = rep.score >= delta ? Decision::AV : Decision::HDV;
    rep.confidence = decision_confidence(rep.score, delta);
    return rep;
}

/// identify_vehicle, except that zero coverage yields an undetermined
/// report (listing the inapplicable rules) instead of an error.
inline MatchReport classify_vehicle(const std::string& vehicle_id, const FeatureVector& features,
                                    TrafficContext context, const RuleLibrary& lib, double delta = 0.5) {
    check_delta(delta);
    MatchReport rep;
    try {
        rep = identify_vehicle(features, context, lib, delta);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoApplicableRules) throw;
        rep.delta = delta;
        for (const Rule* r : lib.verified_av()) {
            if (r->context.applies_to(Task::identification)) {
                rep.entries.push_back({r->id, evaluate_rule(*r, features, context, lib.units()), r->weight()});
            }
        }
    }
    rep.vehicle_id = vehicle_id;
    return rep;
}

inline constexpr double kDefaultCongestionSpeed = 2.0;

/// Explicit context wins; otherwise a mean speed below the threshold means
/// congested traffic.
inline TrafficContext derive_context(const FeatureVector& f, std::optional<TrafficContext> explicit_context = {},
                                     double congestion_speed = kDefaultCongestionSpeed) {
    if (explicit_context) return *explicit_context;
    return f.mean_speed < congestion_speed ? TrafficContext::congested : TrafficContext::free_flow;
}

// ---------------------------------------------------------------------------
// Auxiliary prediction tasks

inline constexpr std::array<Outcome, 3> kSpeedOutcomes{Outcome::accelerate, Outcome::decelerate, Outcome::maintain};
inline constexpr std::array<Outcome, 3> kLaneOutcomes{Outcome::left_lc, Outcome::right_lc, Outcome::keep_lane};
inline constexpr double kSpeedPriorThreshold = 0.1;
inline constexpr double kLateralPriorThreshold = 0.05;

struct TaskPrediction {
    std::string vehicle_id;
    Task task = Task::speed;
    Outcome predicted = Outcome::maintain;
    std::array<std::pair<Outcome, double>, 3> scores{};
    int horizon = 3;

    double score(Outcome o) const {
        for (const auto& [k, v] : scores) {
            if (k == o) return v;
        }
        return 0.0;
    }

    friend bool operator==(const TaskPrediction&, const TaskPrediction&) = default;
};

/// Motion over the last second of an observed trajectory.
struct RecentMotion {
    double mean_acceleration = 0.0;  ///< u/s^2
    double lateral_velocity = 0.0;   ///< u/s, negative towards the left
};

inline RecentMotion recent_motion(const Trajectory& traj, const KinematicSeries& kin) {
    RecentMotion m;
    const auto window = static_cast<std::size_t>(std::max(1.0, std::round(traj.frame_rate)));
    if (!kin.acceleration.empty()) {
        const std::size_t k = std::min(window, kin.acceleration.size());
        double sum = 0.0;
        for (std::size_t i = kin.acceleration.size() - k; i < kin.acceleration.size(); ++i) sum += kin.acceleration[i];
        m.mean_acceleration = sum / static_cast<double>(k);
    }
    if (traj.points.size() >= 2) {
        const std::size_t k = std::min(window, traj.points.size() - 1);
        const auto& last = traj.points.back();
        const auto& first = traj.points[traj.points.size() - 1 - k];
        const double seconds = static_cast<double>(last.t - first.t) / traj.frame_rate;
        m.lateral_velocity = (last.y - first.y) * traj.unit_scale / seconds;
    }
    return m;
}

inline Outcome speed_prior(double mean_acceleration) {
    if (mean_acceleration > kSpeedPriorThreshold) return Outcome::accelerate;
    if (mean_acceleration < -kSpeedPriorThreshold) return Outcome::decelerate;
    return Outcome::maintain;
}

inline Outcome lane_prior(double lateral_velocity) {
    if (lateral_velocity < -kLateralPriorThreshold) return Outcome::left_lc;
    if (lateral_velocity > kLateralPriorThreshold) return Outcome::right_lc;
    return Outcome::keep_lane;
}

inline void check_horizon(int horizon) {
    if (horizon < 2 || horizon > 4) throw Error(ErrorCode::InvalidHorizon, "horizon must be 2, 3 or 4 seconds");
}

namespace detail {

/// Normalized confidence-weighted votes of matching verified rules that
/// serve the task and name one of its outcomes, blended with a one-hot
/// prior. Without votes the prior stands alone. Ties go to `fallback`.
inline TaskPrediction vote(const FeatureVector& f, TrafficContext context, const RuleLibrary& lib, Task task,
                           const std::array<Outcome, 3>& outcomes, Outcome prior, Outcome fallback,
                           double rule_weight) {
    if (!(rule_weight >= 0.0 && rule_weight <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "blend weight must lie in [0,1]");
    }
    std::array<double, 3> votes{};
    double total = 0.0;
    for (const Rule* r : lib.verified()) {
        if (!r->outcome || !r->context.applies_to(task)) continue;
        const auto it = std::find(outcomes.begin(), outcomes.end(), *r->outcome);
        if (it == outcomes.end()) continue;
        if (evaluate_rule(*r, f, context, lib.units()) != Verdict::matched) continue;
        votes[static_cast<std::size_t>(it - outcomes.begin())] += r->weight();
        total += r->weight();
    }
    TaskPrediction p;
    p.task = task;
    const double wr = total > 0.0 ? rule_weight : 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double rule_part = total > 0.0 ? votes[i] / total : 0.0;
        p.scores[i] = {outcomes[i], wr * rule_part + (1.0 - wr) * (outcomes[i] == prior ? 1.0 : 0.0)};
    }
    p.predicted = fallback;
    double best = p.score(fallback);
    for (const auto& [o, s] : p.scores) {
        if (s > best) {
            best = s;
            p.predicted = o;
        }
    }
    return p;
}

}  // namespace detail

inline constexpr double kDefaultBlendWeight = 0.5;

inline TaskPrediction predict_speed_change(const FeatureVector& f, const RecentMotion& recent, TrafficContext context,
                                           const RuleLibrary& lib, int horizon = 3,
                                           double rule_weight = kDefaultBlendWeight) {
    check_horizon(horizon);
    auto p = detail::vote(f, context, lib, Task::speed, kSpeedOutcomes, speed_prior(recent.mean_acceleration),
                          Outcome::maintain, rule_weight);
    p.horizon = horizon;
    return p;
}

inline TaskPrediction predict_lane_change(const FeatureVector& f, const RecentMotion& recent, TrafficContext context,
                                          const RuleLibrary& lib, int horizon = 3,
                                          double rule_weight = kDefaultBlendWeight) {
    check_horizon(horizon);
    auto p = detail::vote(f, context, lib, Task::lane_change, kLaneOutcomes, lane_prior(recent.lateral_velocity),
                          Outcome::keep_lane, rule_weight);
    p.horizon = horizon;
    return p;
}

// ---------------------------------------------------------------------------
// Ground truth for the prediction tasks, taken from the trajectory itself

struct FutureOutcomes {
    Outcome speed = Outcome::maintain;
    Outcome lane = Outcome::keep_lane;
};

/// Number of trailing points that fall inside the horizon.
inline std::size_t horizon_points(const Trajectory& traj, int horizon) {
    return static_cast<std::size_t>(std::llround(horizon * traj.frame_rate));
}

/// Observed prefix with the last `horizon` seconds removed.
inline Trajectory observed_prefix(const Trajectory& traj, int horizon) {
    check_horizon(horizon);
    const std::size_t h = horizon_points(traj, horizon);
    if (traj.points.size() < h + kMinTrajectoryLength) {
        throw Error(ErrorCode::TooShort, "trajectory '" + traj.vehicle_id + "' too short for the forecast horizon");
    }
    Trajectory prefix = traj;
    prefix.points.resize(traj.points.size() - h);
    return prefix;
}

/// Speed category from the mean acceleration over the horizon and lane
/// category from the net lateral displacement over it, compared with half
/// the lane-change threshold.
inline FutureOutcomes future_outcomes(const Trajectory& traj, const KinematicSeries& kin, int horizon,
                                      double lane_change_threshold) {
    check_horizon(horizon);
    const std::size_t h = horizon_points(traj, horizon);
    if (traj.points.size() < h + kMinTrajectoryLength) {
        throw Error(ErrorCode::TooShort, "trajectory '" + traj.vehicle_id + "' too short for the forecast horizon");
    }
    FutureOutcomes out;
    const std::size_t split = traj.points.size() - h;  // index of the first future point
    // acceleration[i] belongs to point i + 2
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < kin.acceleration.size(); ++i) {
        if (i + 2 >= split) {
            sum += kin.acceleration[i];
            ++n;
        }
    }
    if (n) out.speed = speed_prior(sum / static_cast<double>(n));
    const double dy = (traj.points.back().y - traj.points[split - 1].y) * traj.unit_scale;
    if (dy < -lane_change_threshold / 2.0) out.lane = Outcome::left_lc;
    if (dy > lane_change_threshold / 2.0) out.lane = Outcome::right_lc;
    return out;
}

}  // namespace svbrd
