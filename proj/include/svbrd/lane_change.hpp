#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "svbrd/error.hpp"
#include "svbrd/trajectory.hpp"

namespace svbrd {

/// Negative lateral motion is "left", positive is "right".
enum class LaneChangeDirection { left, right };

constexpr std::string_view to_string(LaneChangeDirection d) { return d == LaneChangeDirection::left ? "left" : "right"; }

struct LaneChangeEvent {
    std::int64_t start_frame = 0;
    std::int64_t end_frame = 0;            ///< end_frame - start_frame + 1 == window
    double cumulative_displacement = 0.0;  ///< sum of |dy| inside the window, length units
    double net_displacement = 0.0;         ///< signed y(end) - y(start), length units
    LaneChangeDirection direction = LaneChangeDirection::right;

    friend bool operator==(const LaneChangeEvent&, const LaneChangeEvent&) = default;
};

struct LaneChangeParams {
    std::size_t window = 120;  ///< frames covered by one window
    double threshold = 50.0;   ///< cumulative lateral displacement, length units
};

/// Sliding-window lateral displacement detector.
///
/// A window of W frames [s, s+W-1] fires when the sum of |dy| over its W-1
/// steps exceeds the threshold and its net signed displacement exceeds
/// half the threshold (rejects lane-keeping oscillation). Overlapping
/// firing windows form one event, represented by the window with the
/// largest cumulative displacement; among windows tied with the maximum,
/// the middle one is chosen so the event is centred on the manoeuvre.
inline std::vector<LaneChangeEvent> detect_lane_changes(const Trajectory& traj, const LaneChangeParams& params = {}) {
    if (params.window < 2) throw Error(ErrorCode::InvalidArgument, "lane-change window must be >= 2 frames");
    if (!(params.threshold > 0.0) || !std::isfinite(params.threshold)) {
        throw Error(ErrorCode::InvalidArgument, "lane-change threshold must be > 0");
    }
    const std::size_t n = traj.size();
    const std::size_t w = params.window;
    if (w > n) {
        throw Error(ErrorCode::WindowLongerThanTrajectory,
                    "window " + std::to_string(w) + " exceeds trajectory length " + std::to_string(n));
    }

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = traj.points[i].y * traj.unit_scale;
    std::vector<double> step(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) step[k] = std::abs(y[k + 1] - y[k]);

    struct Window {
        std::size_t start;
        double cumulative;
        double net;
    };
    std::vector<Window> fired;
    for (std::size_t s = 0; s + w <= n; ++s) {
        double sum = 0.0;
        for (std::size_t k = s; k + 1 < s + w; ++k) sum += step[k];
        const double net = y[s + w - 1] - y[s];
        if (sum > params.threshold && std::abs(net) > 0.5 * params.threshold) fired.push_back({s, sum, net});
    }

    std::vector<LaneChangeEvent> events;
    std::size_t i = 0;
    while (i < fired.size()) {
        std::size_t j = i + 1;
        while (j < fired.size() && fired[j].start - fired[j - 1].start <= w - 1) ++j;

        double best = 0.0;
        for (std::size_t k = i; k < j; ++k) best = std::max(best, fired[k].cumulative);
        const double tol = 1e-9 * best;
        std::vector<std::size_t> tied;
        for (std::size_t k = i; k < j; ++k) {
            if (fired[k].cumulative >= best - tol) tied.push_back(k);
        }
        const Window& rep = fired[tied[tied.size() / 2]];
        events.push_back({traj.points[rep.start].t, traj.points[rep.start + w - 1].t, rep.cumulative, rep.net,
                          rep.net < 0.0 ? LaneChangeDirection::left : LaneChangeDirection::right});
        i = j;
    }
    return events;
}

}  // namespace svbrd
