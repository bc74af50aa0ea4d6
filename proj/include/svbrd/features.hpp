#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "svbrd/kinematics.hpp"
#include "svbrd/lane_change.hpp"
#include "svbrd/trajectory.hpp"
#include "svbrd/types.hpp"

namespace svbrd {

/// Summary features of one trajectory. The first six fields are always
/// present; the extended atoms are optional because they need lane-change
/// events or upstream data (leader vehicle, heading) to be defined.
struct FeatureVector {
    double mean_speed = 0.0;
    double std_speed = 0.0;
    double mean_accel = 0.0;
    double std_accel = 0.0;
    double std_jerk = 0.0;
    int lane_change_count = 0;
    double duration = 0.0;  ///< seconds
    UnitSystem unit_system = UnitSystem::pixel;

    std::optional<double> max_decel;
    std::optional<double> lane_change_rate;        ///< events per minute
    std::optional<double> speed_fluctuation_rate;  ///< significant acceleration sign flips per minute
    std::optional<double> pre_lane_change_decel;
    std::optional<double> lane_change_angle;
    std::optional<double> following_accel_delta;

    std::optional<double> value(FeatureAtom atom) const {
        switch (atom) {
            case FeatureAtom::mean_speed: return mean_speed;
            case FeatureAtom::std_speed: return std_speed;
            case FeatureAtom::mean_accel: return mean_accel;
            case FeatureAtom::std_accel: return std_accel;
            case FeatureAtom::std_jerk: return std_jerk;
            case FeatureAtom::lane_change_count: return static_cast<double>(lane_change_count);
            case FeatureAtom::max_decel: return max_decel;
            case FeatureAtom::lane_change_rate: return lane_change_rate;
            case FeatureAtom::speed_fluctuation_rate: return speed_fluctuation_rate;
            case FeatureAtom::pre_lane_change_decel: return pre_lane_change_decel;
            case FeatureAtom::lane_change_angle: return lane_change_angle;
            case FeatureAtom::following_accel_delta: return following_accel_delta;
        }
        return std::nullopt;
    }

    std::optional<double>* extended_slot(FeatureAtom atom) {
        switch (atom) {
            case FeatureAtom::max_decel: return &max_decel;
            case FeatureAtom::lane_change_rate: return &lane_change_rate;
            case FeatureAtom::speed_fluctuation_rate: return &speed_fluctuation_rate;
            case FeatureAtom::pre_lane_change_decel: return &pre_lane_change_decel;
            case FeatureAtom::lane_change_angle: return &lane_change_angle;
            case FeatureAtom::following_accel_delta: return &following_accel_delta;
            default: return nullptr;
        }
    }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// True for the atoms that are always computed from positions.
constexpr bool is_core_atom(FeatureAtom atom) {
    switch (atom) {
        case FeatureAtom::mean_speed:
        case FeatureAtom::std_speed:
        case FeatureAtom::mean_accel:
        case FeatureAtom::std_accel:
        case FeatureAtom::std_jerk:
        case FeatureAtom::lane_change_count: return true;
        default: return false;
    }
}

/// An acceleration sample is significant when |a| exceeds this (units/s^2).
inline constexpr double kFluctuationThreshold = 0.1;

/// Counts sign flips between consecutive significant acceleration samples.
/// Samples inside the +-threshold band are ignored, which gives the count
/// hysteresis against noise around zero.
inline int count_speed_fluctuations(std::span<const double> accel, double threshold = kFluctuationThreshold) {
    int flips = 0;
    int last_sign = 0;
    for (double a : accel) {
        if (std::abs(a) <= threshold) continue;
        const int sign = a > 0 ? 1 : -1;
        if (last_sign != 0 && sign != last_sign) ++flips;
        last_sign = sign;
    }
    return flips;
}

/// Mean deceleration (positive when slowing) over the second before each
/// event window, averaged over events that have acceleration samples there.
inline std::optional<double> pre_lane_change_deceleration(const Trajectory& traj, const KinematicSeries& kin,
                                                          std::span<const LaneChangeEvent> events) {
    if (events.empty() || kin.acceleration.empty()) return std::nullopt;
    const std::int64_t t0 = traj.points.front().t;
    const auto lookback = static_cast<std::int64_t>(std::lround(traj.frame_rate));
    const auto len = static_cast<std::int64_t>(kin.acceleration.size());
    double total = 0.0;
    int used = 0;
    for (const auto& e : events) {
        // acceleration[i] belongs to point index i + 2
        const std::int64_t lo = std::max<std::int64_t>(0, e.start_frame - lookback - t0 - 2);
        const std::int64_t hi = std::min<std::int64_t>(len, e.start_frame - t0 - 2);
        if (hi <= lo) continue;
        double sum = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) sum += -kin.acceleration[static_cast<std::size_t>(i)];
        total += sum / static_cast<double>(hi - lo);
        ++used;
    }
    if (used == 0) return std::nullopt;
    return total / used;
}

inline FeatureVector summarize_features(const Trajectory& traj, const KinematicSeries& kin,
                                        std::span<const LaneChangeEvent> events) {
    FeatureVector f;
    const auto v = population_stats(kin.velocity);
    const auto a = population_stats(kin.acceleration);
    const auto j = population_stats(kin.jerk);
    f.mean_speed = v.mean;
    f.std_speed = v.stddev;
    f.mean_accel = a.mean;
    f.std_accel = a.stddev;
    f.std_jerk = j.stddev;
    f.lane_change_count = static_cast<int>(events.size());
    f.duration = static_cast<double>(traj.size()) / traj.frame_rate;
    f.unit_system = traj.unit_system;

    const double minutes = f.duration / 60.0;
    f.lane_change_rate = f.lane_change_count / minutes;
    if (!kin.acceleration.empty()) {
        const double min_a = *std::min_element(kin.acceleration.begin(), kin.acceleration.end());
        f.max_decel = std::max(0.0, -min_a);
        f.speed_fluctuation_rate = count_speed_fluctuations(kin.acceleration) / minutes;
    }
    f.pre_lane_change_decel = pre_lane_change_deceleration(traj, kin, events);

    for (const auto& [atom, value] : traj.extra_features) {
        if (auto* slot = f.extended_slot(atom)) *slot = value;
    }
    return f;
}

}  // namespace svbrd
