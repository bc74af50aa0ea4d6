#pragma once

#include <string>

#include "svbrd/predicate.hpp"
#include "svbrd/rule.hpp"

namespace svbrd {

/// Placeholder weight for seeded rules until they are re-verified on local
/// data (the reported mean validation accuracy of the retained rules).
inline constexpr double kSeedConfidence = 0.825;

/// Built-in library of representative AV-indicative rules with metric
/// thresholds. Interval-style "A vs B" rules are encoded as "closer to the
/// AV centre than to the HDV centre", i.e. a comparison at the midpoint.
inline RuleLibrary seed_library(double theta = 0.7) {
    RuleLibrary lib(theta, UnitSystem::metric);
    auto add = [&](std::string id, std::string description, std::string_view predicate, RuleCategory category,
                   std::set<Task> tasks, bool free_flow_only = false) {
        Rule r;
        r.id = std::move(id);
        r.description = std::move(description);
        r.predicate = parse_predicate(predicate);
        r.category = category;
        r.polarity = Polarity::AV_indicative;
        r.context.tasks = std::move(tasks);
        if (free_flow_only) r.context.congested = false;
        r.confidence = kSeedConfidence;
        r.state = RuleState::verified;
        lib.add(std::move(r));
    };
    using T = Task;
    using C = RuleCategory;

    add("R2", "AV acceleration more linear (1.2 +- 0.3 vs 1.5 +- 0.5 m/s^2)", "std_accel < 1.35", C::speed,
        {T::identification, T::speed});
    add("R3", "AV deceleration smoother (max deceleration 0.55 vs 0.8 m/s^2)", "max_decel < 0.6", C::speed,
        {T::identification, T::speed});
    add("R4", "AV speed fluctuates more frequently (3 vs 1.8 times/min)", "speed_fluctuation_rate > 2.4", C::speed,
        {T::identification, T::speed});
    add("R11", "AV decelerates before lane change (0.25 vs 0.1 m/s^2)", "pre_lane_change_decel IN 0.2..0.3",
        C::lane_change, {T::identification, T::lane_change});
    add("R12", "AV lane change angle smoother (18 vs 22 degrees)", "lane_change_angle IN 15..20", C::lane_change,
        {T::identification, T::lane_change});
    add("R20", "AV stable accel/decel in following (0.4 vs 0.7 m/s^2)", "following_accel_delta < 0.5", C::following,
        {T::identification});
    add("R27", "AV lower jerk standard deviation (0.28 vs 0.45 m/s^3)", "std_jerk < 0.3", C::smoothness,
        {T::identification});
    add("R29", "AV low jerk during deceleration (0.35 vs 0.55 m/s^3)", "std_jerk < 0.4", C::smoothness,
        {T::identification});
    // Refined forms of low-accuracy rules.
    add("R7", "AV holds constant speed 0-10 km/h (non-congested only)", "mean_speed IN 0..2.7778", C::speed,
        {T::identification, T::speed}, true);
    add("R15", "AV speed variation below 2.0 m/s (non-congested only)", "std_speed < 2", C::lane_change,
        {T::identification, T::lane_change}, true);
    add("R30", "AV jerk standard deviation below 0.5 m/s^3", "std_jerk < 0.5", C::smoothness, {T::identification});
    return lib;
}

}  // namespace svbrd
