#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "svbrd/error.hpp"
#include "svbrd/trajectory.hpp"

namespace svbrd {

/// Inclusive frame interval over which a derived series is defined.
struct FrameRange {
    std::int64_t first = 0;
    std::int64_t last = 0;

    friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

/// Central-difference speed, acceleration and jerk. Each derivative level
/// drops one sample per end, so element i of `velocity` belongs to frame
/// points[i + 1].t, of `acceleration` to points[i + 2].t, of `jerk` to
/// points[i + 3].t. Units are length-units per second^k.
struct KinematicSeries {
    std::vector<double> velocity;
    std::vector<double> acceleration;
    std::vector<double> jerk;
    std::optional<FrameRange> velocity_range;
    std::optional<FrameRange> acceleration_range;
    std::optional<FrameRange> jerk_range;  ///< empty for 5- and 6-point trajectories
};

namespace detail {

inline std::vector<double> central_difference(std::span<const double> series, double half_rate) {
    std::vector<double> out;
    if (series.size() < 3) return out;
    out.reserve(series.size() - 2);
    for (std::size_t i = 1; i + 1 < series.size(); ++i) {
        out.push_back((series[i + 1] - series[i - 1]) * half_rate);
    }
    return out;
}

inline std::optional<FrameRange> range_for(const Trajectory& traj, std::size_t trim, std::size_t len) {
    if (len == 0) return std::nullopt;
    return FrameRange{traj.points[trim].t, traj.points[trim + len - 1].t};
}

}  // namespace detail

inline KinematicSeries compute_kinematics(const Trajectory& traj) {
    const std::size_t n = traj.size();
    if (n < kMinTrajectoryLength) {
        throw Error(ErrorCode::TooShort, "compute_kinematics needs at least 5 points, got " + std::to_string(n));
    }
    const double half_rate = 0.5 * traj.frame_rate;  // 1 / (2 dt)
    KinematicSeries k;
    k.velocity.reserve(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double dx = traj.points[i + 1].x - traj.points[i - 1].x;
        const double dy = traj.points[i + 1].y - traj.points[i - 1].y;
        k.velocity.push_back(std::hypot(dx, dy) * traj.unit_scale * half_rate);
    }
    k.acceleration = detail::central_difference(k.velocity, half_rate);
    k.jerk = detail::central_difference(k.acceleration, half_rate);
    k.velocity_range = detail::range_for(traj, 1, k.velocity.size());
    k.acceleration_range = detail::range_for(traj, 2, k.acceleration.size());
    k.jerk_range = detail::range_for(traj, 3, k.jerk.size());
    return k;
}

/// Population mean and standard deviation; both are 0 for an empty series.
struct SeriesStats {
    double mean = 0.0;
    double stddev = 0.0;
};

inline SeriesStats population_stats(std::span<const double> xs) {
    if (xs.empty()) return {};
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / n)};
}

inline double mean_speed(const Trajectory& traj) {
    return population_stats(compute_kinematics(traj).velocity).mean;
}

/// Keeps trajectories whose mean speed is at least `min_mean_speed`
/// (length-units per second). Order is preserved.
inline std::vector<Trajectory> filter_stationary(std::vector<Trajectory> trajs, double min_mean_speed = 0.5) {
    std::vector<Trajectory> kept;
    kept.reserve(trajs.size());
    for (auto& t : trajs) {
        if (mean_speed(t) >= min_mean_speed) kept.push_back(std::move(t));
    }
    return kept;
}

}  // namespace svbrd
