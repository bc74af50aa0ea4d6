#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "svbrd/error.hpp"

namespace svbrd {

enum class Label { AV, HDV };
enum class UnitSystem { pixel, metric };
enum class TrafficContext { free_flow, congested };
enum class Task { identification, speed, lane_change };
enum class RuleCategory { speed, lane_change, following, smoothness };
enum class Polarity { AV_indicative, HDV_indicative };
enum class RuleState { candidate, verified, retired };

/// Outcome a rule votes for in the two auxiliary prediction tasks.
enum class Outcome { accelerate, decelerate, maintain, left_lc, right_lc, keep_lane };

/// Closed vocabulary of feature atoms a predicate may reference.
enum class FeatureAtom {
    mean_speed,
    std_speed,
    mean_accel,
    std_accel,
    std_jerk,
    lane_change_count,
    max_decel,
    lane_change_rate,
    speed_fluctuation_rate,
    pre_lane_change_decel,
    lane_change_angle,
    following_accel_delta,
};
inline constexpr std::size_t kAtomCount = 12;

namespace detail {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

template <typename E, std::size_t N>
constexpr std::string_view name_of(const NameTable<E, N>& table, E value) {
    for (const auto& [v, name] : table) {
        if (v == value) return name;
    }
    return "?";
}

template <typename E, std::size_t N>
constexpr std::optional<E> lookup(const NameTable<E, N>& table, std::string_view name) {
    for (const auto& [v, n] : table) {
        if (n == name) return v;
    }
    return std::nullopt;
}

inline constexpr NameTable<Label, 2> kLabels{{{Label::AV, "AV"}, {Label::HDV, "HDV"}}};
inline constexpr NameTable<UnitSystem, 2> kUnits{
    {{UnitSystem::pixel, "pixel"}, {UnitSystem::metric, "metric"}}};
inline constexpr NameTable<TrafficContext, 2> kContexts{
    {{TrafficContext::free_flow, "free_flow"}, {TrafficContext::congested, "congested"}}};
inline constexpr NameTable<Task, 3> kTasks{{{Task::identification, "identification"},
                                            {Task::speed, "speed"},
                                            {Task::lane_change, "lane_change"}}};
inline constexpr NameTable<RuleCategory, 4> kCategories{{{RuleCategory::speed, "speed"},
                                                         {RuleCategory::lane_change, "lane_change"},
                                                         {RuleCategory::following, "following"},
                                                         {RuleCategory::smoothness, "smoothness"}}};
inline constexpr NameTable<Polarity, 2> kPolarities{
    {{Polarity::AV_indicative, "AV_indicative"}, {Polarity::HDV_indicative, "HDV_indicative"}}};
inline constexpr NameTable<RuleState, 3> kStates{{{RuleState::candidate, "candidate"},
                                                  {RuleState::verified, "verified"},
                                                  {RuleState::retired, "retired"}}};
inline constexpr NameTable<Outcome, 6> kOutcomes{{{Outcome::accelerate, "accelerate"},
                                                  {Outcome::decelerate, "decelerate"},
                                                  {Outcome::maintain, "maintain"},
                                                  {Outcome::left_lc, "left_LC"},
                                                  {Outcome::right_lc, "right_LC"},
                                                  {Outcome::keep_lane, "keep_lane"}}};
inline constexpr NameTable<FeatureAtom, kAtomCount> kAtoms{{
    {FeatureAtom::mean_speed, "mean_speed"},
    {FeatureAtom::std_speed, "std_speed"},
    {FeatureAtom::mean_accel, "mean_accel"},
    {FeatureAtom::std_accel, "std_accel"},
    {FeatureAtom::std_jerk, "std_jerk"},
    {FeatureAtom::lane_change_count, "lane_change_count"},
    {FeatureAtom::max_decel, "max_decel"},
    {FeatureAtom::lane_change_rate, "lane_change_rate"},
    {FeatureAtom::speed_fluctuation_rate, "speed_fluctuation_rate"},
    {FeatureAtom::pre_lane_change_decel, "pre_lane_change_decel"},
    {FeatureAtom::lane_change_angle, "lane_change_angle"},
    {FeatureAtom::following_accel_delta, "following_accel_delta"},
}};

template <typename E, std::size_t N>
E parse_or_throw(const NameTable<E, N>& table, std::string_view name, std::string_view what) {
    if (auto v = lookup(table, name)) return *v;
    throw Error(ErrorCode::SchemaViolation,
                "unknown " + std::string(what) + " '" + std::string(name) + "'");
}

}  // namespace detail

constexpr std::string_view to_string(Label v) { return detail::name_of(detail::kLabels, v); }
constexpr std::string_view to_string(UnitSystem v) { return detail::name_of(detail::kUnits, v); }
constexpr std::string_view to_string(TrafficContext v) { return detail::name_of(detail::kContexts, v); }
constexpr std::string_view to_string(Task v) { return detail::name_of(detail::kTasks, v); }
constexpr std::string_view to_string(RuleCategory v) { return detail::name_of(detail::kCategories, v); }
constexpr std::string_view to_string(Polarity v) { return detail::name_of(detail::kPolarities, v); }
constexpr std::string_view to_string(RuleState v) { return detail::name_of(detail::kStates, v); }
constexpr std::string_view to_string(Outcome v) { return detail::name_of(detail::kOutcomes, v); }
constexpr std::string_view to_string(FeatureAtom v) { return detail::name_of(detail::kAtoms, v); }

inline Label parse_label(std::string_view s) { return detail::parse_or_throw(detail::kLabels, s, "label"); }
inline UnitSystem parse_unit_system(std::string_view s) {
    return detail::parse_or_throw(detail::kUnits, s, "unit system");
}
inline TrafficContext parse_context(std::string_view s) {
    return detail::parse_or_throw(detail::kContexts, s, "traffic context");
}
inline Task parse_task(std::string_view s) { return detail::parse_or_throw(detail::kTasks, s, "task"); }
inline RuleCategory parse_category(std::string_view s) {
    return detail::parse_or_throw(detail::kCategories, s, "rule category");
}
inline Polarity parse_polarity(std::string_view s) {
    return detail::parse_or_throw(detail::kPolarities, s, "polarity");
}
inline RuleState parse_state(std::string_view s) {
    return detail::parse_or_throw(detail::kStates, s, "rule state");
}
inline Outcome parse_outcome(std::string_view s) {
    return detail::parse_or_throw(detail::kOutcomes, s, "outcome");
}
inline std::optional<FeatureAtom> find_atom(std::string_view s) { return detail::lookup(detail::kAtoms, s); }

constexpr Label opposite(Label l) { return l == Label::AV ? Label::HDV : Label::AV; }

/// Label a rule of the given polarity asserts when its predicate holds.
constexpr Label indicated_label(Polarity p) { return p == Polarity::AV_indicative ? Label::AV : Label::HDV; }

}  // namespace svbrd
