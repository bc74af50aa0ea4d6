#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svbrd/error.hpp"
#include "svbrd/types.hpp"

namespace svbrd {

struct TimedPoint {
    std::int64_t t = 0;  ///< frame index
    double x = 0.0;      ///< longitudinal position, native units
    double y = 0.0;      ///< lateral position, native units

    friend bool operator==(const TimedPoint&, const TimedPoint&) = default;
};

/// One tracked vehicle. Positions are stored in native coordinates
/// (pixels for camera data); `unit_scale` converts them to length units.
struct Trajectory {
    std::string vehicle_id;
    std::vector<TimedPoint> points;
    double frame_rate = 30.0;
    double unit_scale = 1.0;
    UnitSystem unit_system = UnitSystem::pixel;
    std::optional<Label> label;
    std::optional<TrafficContext> context;
    /// Upstream-supplied values for atoms this library cannot derive from
    /// positions alone (e.g. lane_change_angle, following_accel_delta).
    std::map<FeatureAtom, double> extra_features;

    double dt() const { return 1.0 / frame_rate; }
    std::size_t size() const { return points.size(); }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Minimum sample count: two central-difference levels need five points.
inline constexpr std::size_t kMinTrajectoryLength = 5;
/// Tracker dropouts up to this many missing frames are interpolated.
inline constexpr std::int64_t kMaxRepairableGap = 3;

/// Sorts by frame, fills short gaps linearly, splits at long gaps and keeps
/// the longest segment (earliest on ties).
inline Trajectory validate_trajectory(Trajectory raw) {
    if (!(std::isfinite(raw.frame_rate) && raw.frame_rate > 0.0)) {
        throw Error(ErrorCode::NonPositiveParameter,
                    "frame_rate must be positive for vehicle '" + raw.vehicle_id + "'");
    }
    if (!(std::isfinite(raw.unit_scale) && raw.unit_scale > 0.0)) {
        throw Error(ErrorCode::NonPositiveParameter,
                    "unit_scale must be positive for vehicle '" + raw.vehicle_id + "'");
    }
    for (const auto& p : raw.points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error(ErrorCode::NonFinite, "non-finite coordinate at frame " + std::to_string(p.t) +
                                                  " of vehicle '" + raw.vehicle_id + "'");
        }
        if (p.t < 0) {
            throw Error(ErrorCode::InvalidFrame, "negative frame index " + std::to_string(p.t));
        }
    }
    for (const auto& [atom, value] : raw.extra_features) {
        if (!std::isfinite(value)) {
            throw Error(ErrorCode::NonFinite, "non-finite extra feature '" + std::string(to_string(atom)) + "'");
        }
    }

    std::stable_sort(raw.points.begin(), raw.points.end(),
                     [](const TimedPoint& a, const TimedPoint& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < raw.points.size(); ++i) {
        if (raw.points[i].t == raw.points[i - 1].t) {
            throw Error(ErrorCode::InvalidFrame, "duplicate frame index " + std::to_string(raw.points[i].t) +
                                                     " in vehicle '" + raw.vehicle_id + "'");
        }
    }

    std::vector<std::vector<TimedPoint>> segments;
    for (const auto& p : raw.points) {
        if (segments.empty()) {
            segments.push_back({p});
            continue;
        }
        auto& seg = segments.back();
        const TimedPoint prev = seg.back();
        const std::int64_t missing = p.t - prev.t - 1;
        if (missing > kMaxRepairableGap) {
            segments.push_back({p});
            continue;
        }
        for (std::int64_t k = 1; k <= missing; ++k) {
            const double w = static_cast<double>(k) / static_cast<double>(missing + 1);
            seg.push_back({prev.t + k, prev.x + w * (p.x - prev.x), prev.y + w * (p.y - prev.y)});
        }
        seg.push_back(p);
    }

    std::vector<TimedPoint> longest;
    for (auto& seg : segments) {
        if (seg.size() > longest.size()) longest = std::move(seg);
    }
    if (longest.size() < kMinTrajectoryLength) {
        throw Error(ErrorCode::TooShort, "vehicle '" + raw.vehicle_id + "' has " +
                                             std::to_string(longest.size()) + " usable points (need " +
                                             std::to_string(kMinTrajectoryLength) + ")");
    }
    raw.points = std::move(longest);
    return raw;
}

}  // namespace svbrd
