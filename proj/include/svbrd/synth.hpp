#pragma once

// Seeded generator of labeled AV/HDV trajectories whose kinematic
// statistics follow a behavioral profile.
//
// Longitudinal acceleration = slow part + k * fast part.
//   slow: alternating-sign raised-cosine segments, one sign change per
//         speed fluctuation. Deceleration segments peak just below the
//         profile's cap; segments hosting a lane change hold the
//         pre-lane-change deceleration as a plateau around the manoeuvre.
//   fast: three sinusoids at 2.5-3.5 Hz with summed amplitude 1; their
//         gain k <= kMaxFastGain is calibrated so the measured jerk
//         standard deviation hits the target.
// Speed is integrated with semi-implicit Euler; lane changes are quintic
// lateral transitions and the forward velocity is reduced so the planar
// speed follows the longitudinal profile exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "svbrd/error.hpp"
#include "svbrd/features.hpp"
#include "svbrd/kinematics.hpp"
#include "svbrd/lane_change.hpp"
#include "svbrd/trajectory.hpp"
#include "svbrd/types.hpp"

namespace svbrd {

struct BehaviorProfile {
    Label label = Label::AV;
    double mean_speed = 11.0;   ///< m/s
    double speed_spread = 2.0;  ///< initial speed drawn uniformly within +-spread
    double jerk_std = 0.28;     ///< m/s^3
    double max_decel = 0.55;    ///< m/s^2
    double lane_change_rate = 0.8;         ///< per minute
    double pre_lane_change_decel = 0.25;   ///< m/s^2
    double fluctuation_rate = 3.0;         ///< per minute

    void validate() const {
        auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "profile: " + m); };
        if (!(mean_speed > 0.0)) fail("mean_speed must be > 0");
        if (!(speed_spread >= 0.0)) fail("speed_spread must be >= 0");
        if (!(jerk_std > 0.0)) fail("jerk_std must be > 0");
        if (!(max_decel > 0.0)) fail("max_decel must be > 0");
        if (!(lane_change_rate >= 0.0)) fail("lane_change_rate must be >= 0");
        if (!(pre_lane_change_decel >= 0.0)) fail("pre_lane_change_decel must be >= 0");
        if (!(fluctuation_rate >= 0.0)) fail("fluctuation_rate must be >= 0");
    }
};

inline BehaviorProfile default_av_profile() { return {}; }

inline BehaviorProfile default_hdv_profile() {
    BehaviorProfile p;
    p.label = Label::HDV;
    p.mean_speed = 12.0;
    p.jerk_std = 0.45;
    p.max_decel = 0.8;
    p.lane_change_rate = 1.2;
    p.pre_lane_change_decel = 0.1;
    p.fluctuation_rate = 1.8;
    return p;
}

struct GeneratorConfig {
    std::uint64_t seed = 42;
    std::size_t n_av = 100;
    std::size_t n_hdv = 400;
    double min_duration = 50.0;  ///< s
    double max_duration = 70.0;
    double frame_rate = 30.0;
    double noise_floor = 0.0;  ///< std of Gaussian position noise, m
    /// Scales the AV/HDV gap of jerk std, deceleration cap, pre-lane-change
    /// deceleration and fluctuation rate about their midpoints.
    double separation = 1.0;
    BehaviorProfile av = default_av_profile();
    BehaviorProfile hdv = default_hdv_profile();
    LaneChangeParams lane_change{120, 2.5};
    double lane_width = 3.5;         ///< m
    double manoeuvre_duration = 3.0; ///< s
    unsigned threads = 0;            ///< 0 = hardware concurrency

    void validate() const {
        auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "generator: " + m); };
        if (!(min_duration > 0.0 && max_duration >= min_duration)) fail("need 0 < min_duration <= max_duration");
        if (!(frame_rate > 0.0)) fail("frame_rate must be > 0");
        if (!(noise_floor >= 0.0)) fail("noise_floor must be >= 0");
        if (!(separation >= 0.0)) fail("separation must be >= 0");
        if (!(lane_width > 0.0 && manoeuvre_duration > 0.0)) fail("lane geometry must be positive");
        av.validate();
        hdv.validate();
    }
};

/// The two profiles with the separation multiplier applied.
inline std::pair<BehaviorProfile, BehaviorProfile> effective_profiles(const GeneratorConfig& cfg) {
    BehaviorProfile av = cfg.av, hdv = cfg.hdv;
    auto spread = [&](double& a, double& h) {
        const double mid = 0.5 * (a + h), half = 0.5 * (h - a) * cfg.separation;
        a = mid - half;
        h = mid + half;
    };
    spread(av.jerk_std, hdv.jerk_std);
    spread(av.max_decel, hdv.max_decel);
    spread(av.pre_lane_change_decel, hdv.pre_lane_change_decel);
    spread(av.fluctuation_rate, hdv.fluctuation_rate);
    av.validate();
    hdv.validate();
    return {av, hdv};
}

inline constexpr double kMaxFastGain = 0.09;
inline constexpr double kJerkTolerance = 1e-4;
inline constexpr int kMaxProfileAttempts = 8;

namespace synth_detail {

// Portable draws so output does not depend on the standard library's
// distribution implementations.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

inline double normal(std::mt19937_64& rng) {
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform(rng, 0.0, 1.0);
    const double u2 = uniform(rng, 0.0, 1.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double raised_cosine(double tau, double len) {
    return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * tau / len));
}

constexpr double kRise = 1.5;        // s, ramp to the deceleration peak
constexpr double kSettle = 1.0;      // s, peak down to the plateau
constexpr double kRelease = 0.75;    // s, plateau back to zero
constexpr double kLeadIn = 4.5;      // s, segment start to first manoeuvre
constexpr double kSpacing = 10.0;    // s, between manoeuvres in one segment
constexpr double kMinSegment = 2.0;  // s

struct Segment {
    double start = 0.0;
    double len = 0.0;
    int sign = 1;
    int lane_changes = 0;
    double peak = 0.0;  ///< |acceleration| peak
};

inline double envelope(const Segment& s, double plateau, double tau) {
    if (s.lane_changes == 0) return s.peak * raised_cosine(tau, s.len);
    if (tau < kRise) return s.peak * 0.5 * (1.0 - std::cos(std::numbers::pi * tau / kRise));
    if (tau < kRise + kSettle) {
        return plateau + (s.peak - plateau) * 0.5 * (1.0 + std::cos(std::numbers::pi * (tau - kRise) / kSettle));
    }
    const double release = s.len - kRelease;
    if (tau < release) return plateau;
    return plateau * 0.5 * (1.0 + std::cos(std::numbers::pi * (tau - release) / kRelease));
}

inline double smootherstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * u * (u * (u * 6.0 - 15.0) + 10.0);
}

inline double smootherstep_rate(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 30.0 * u * u * (u - 1.0) * (u - 1.0);
}

struct Manoeuvre {
    double start = 0.0;  ///< s
    double offset = 0.0; ///< signed lateral displacement, negative = left
};

struct Layout {
    std::size_t frames = 0;
    double v0 = 0.0;
    std::vector<double> slow;  ///< per-frame slow acceleration
    std::vector<Manoeuvre> manoeuvres;
    std::vector<double> noise_x, noise_y;
};

inline Layout plan_layout(const BehaviorProfile& p, const GeneratorConfig& cfg, std::mt19937_64& rng) {
    Layout L;
    const double duration = uniform(rng, cfg.min_duration, cfg.max_duration);
    L.frames = static_cast<std::size_t>(std::llround(duration * cfg.frame_rate));
    L.v0 = uniform(rng, p.mean_speed - p.speed_spread, p.mean_speed + p.speed_spread);
    const double dt = 1.0 / cfg.frame_rate;
    const double span = static_cast<double>(L.frames) * dt;

    const auto flips = static_cast<int>(std::llround(p.fluctuation_rate * duration / 60.0));
    const auto n_lc = static_cast<int>(std::llround(p.lane_change_rate * duration / 60.0));
    std::vector<Segment> segs(static_cast<std::size_t>(flips + 1));
    int sign = uniform(rng, 0.0, 1.0) < 0.5 ? 1 : -1;
    if (flips == 0 && n_lc > 0) sign = -1;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        segs[i].sign = sign;
        if (sign < 0) negatives.push_back(i);
        sign = -sign;
    }
    for (int k = 0; k < n_lc; ++k) ++segs[negatives[static_cast<std::size_t>(k) % negatives.size()]].lane_changes;

    std::vector<double> minimum(segs.size()), weight(segs.size());
    double required = 0.0, total_weight = 0.0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const int k = segs[i].lane_changes;
        minimum[i] = k == 0 ? kMinSegment : kLeadIn + kSpacing * (k - 1) + cfg.manoeuvre_duration + 1.0;
        weight[i] = uniform(rng, 0.8, 1.2);
        required += minimum[i];
        total_weight += weight[i];
    }
    const double slack = span - required;
    if (slack < 0.0) {
        throw Error(ErrorCode::InfeasibleProfile, "duration too short for the requested fluctuations and lane changes");
    }
    double t = 0.0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        segs[i].start = t;
        segs[i].len = minimum[i] + slack * weight[i] / total_weight;
        t += segs[i].len;
    }

    const double cap_hi = p.max_decel - 0.1;
    const double cap_lo = std::max(0.5 * cap_hi, p.max_decel - 0.2);
    if (!(cap_hi > 0.0) || (n_lc > 0 && p.pre_lane_change_decel > cap_hi)) {
        throw Error(ErrorCode::InfeasibleProfile, "deceleration cap leaves no room below it");
    }

    L.slow.assign(L.frames, 0.0);
    auto seg_of = [&](double time) {
        std::size_t i = 0;
        while (i + 1 < segs.size() && time >= segs[i + 1].start) ++i;
        return i;
    };
    // decelerating segments first; accelerating ones then balance the
    // speed lost
    double lost = 0.0;
    for (auto& s : segs) {
        if (s.sign < 0) s.peak = uniform(rng, cap_lo, cap_hi);
    }
    for (std::size_t f = 0; f < L.frames; ++f) {
        const double time = static_cast<double>(f) * dt;
        const auto& s = segs[seg_of(time)];
        if (s.sign > 0) continue;
        const double e = envelope(s, p.pre_lane_change_decel, time - s.start);
        L.slow[f] = -e;
        lost += e * dt;
    }
    std::size_t n_pos = 0;
    for (const auto& s : segs) n_pos += s.sign > 0;
    for (auto& s : segs) {
        if (s.sign > 0) s.peak = std::clamp(2.0 * lost / static_cast<double>(n_pos) / s.len, 0.2, 1.0);
    }
    for (std::size_t f = 0; f < L.frames; ++f) {
        const double time = static_cast<double>(f) * dt;
        const auto& s = segs[seg_of(time)];
        if (s.sign > 0) L.slow[f] = envelope(s, 0.0, time - s.start);
    }

    for (const auto& s : segs) {
        for (int k = 0; k < s.lane_changes; ++k) {
            const double dir = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
            L.manoeuvres.push_back({s.start + kLeadIn + kSpacing * k, dir * cfg.lane_width});
        }
    }
    if (cfg.noise_floor > 0.0) {
        L.noise_x.resize(L.frames);
        L.noise_y.resize(L.frames);
        for (std::size_t f = 0; f < L.frames; ++f) {
            L.noise_x[f] = cfg.noise_floor * normal(rng);
            L.noise_y[f] = cfg.noise_floor * normal(rng);
        }
    }
    return L;
}

struct FastComponent {
    std::array<double, 3> freq{}, phase{}, amp{};

    double at(double t) const {
        double s = 0.0;
        for (std::size_t i = 0; i < 3; ++i) s += amp[i] * std::sin(2.0 * std::numbers::pi * freq[i] * t + phase[i]);
        return s;
    }
};

inline FastComponent draw_fast(std::mt19937_64& rng) {
    FastComponent fc;
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        fc.freq[i] = uniform(rng, 2.5, 3.5);
        fc.phase[i] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        fc.amp[i] = uniform(rng, 0.5, 1.0);
        total += fc.amp[i];
    }
    for (auto& a : fc.amp) a /= total;
    return fc;
}

inline Trajectory realize(const Layout& L, const std::vector<double>& fast, double gain, const GeneratorConfig& cfg,
                          const std::string& id, Label label) {
    Trajectory traj;
    traj.vehicle_id = id;
    traj.frame_rate = cfg.frame_rate;
    traj.unit_scale = 1.0;
    traj.unit_system = UnitSystem::metric;
    traj.label = label;
    traj.points.reserve(L.frames);
    const double dt = 1.0 / cfg.frame_rate;
    double speed = L.v0, x = 0.0;
    for (std::size_t f = 0; f < L.frames; ++f) {
        const double t = static_cast<double>(f) * dt;
        double y = 0.0, vy = 0.0;
        for (const auto& m : L.manoeuvres) {
            const double u = (t - m.start) / cfg.manoeuvre_duration;
            y += m.offset * smootherstep(u);
            vy += m.offset * smootherstep_rate(u) / cfg.manoeuvre_duration;
        }
        if (f > 0) {
            speed += (L.slow[f - 1] + gain * fast[f - 1]) * dt;
            x += std::sqrt(std::max(speed * speed - vy * vy, 0.0)) * dt;
        }
        double px = x, py = y;
        if (!L.noise_x.empty()) {
            px += L.noise_x[f];
            py += L.noise_y[f];
        }
        traj.points.push_back({static_cast<std::int64_t>(f), px, py});
    }
    return traj;
}

inline double jerk_std(const Trajectory& t) { return population_stats(compute_kinematics(t).jerk).stddev; }

}  // namespace synth_detail

/// Realized statistics of one generated trajectory.
struct GeneratedStats {
    std::string vehicle_id;
    Label label = Label::AV;
    double duration = 0.0;
    double fast_gain = 0.0;
    int attempts = 0;
    int lane_changes_injected = 0;
    FeatureVector features;
};

struct GeneratedTrajectory {
    Trajectory trajectory;
    GeneratedStats stats;
};

/// One labeled trajectory. Throws InfeasibleProfile when no fast component
/// within the gain bound reaches the jerk target after bounded retries.
inline GeneratedTrajectory generate_trajectory(const BehaviorProfile& profile, const GeneratorConfig& cfg,
                                               std::mt19937_64& rng, const std::string& vehicle_id = "v") {
    using namespace synth_detail;
    profile.validate();
    const Layout layout = plan_layout(profile, cfg, rng);
    const double target = profile.jerk_std;
    const double dt = 1.0 / cfg.frame_rate;

    for (int attempt = 1; attempt <= kMaxProfileAttempts; ++attempt) {
        const FastComponent fc = draw_fast(rng);
        std::vector<double> fast(layout.frames);
        for (std::size_t f = 0; f < layout.frames; ++f) fast[f] = fc.at(static_cast<double>(f) * dt);
        auto measure = [&](double k) {
            return jerk_std(realize(layout, fast, k, cfg, vehicle_id, profile.label)) - target;
        };
        // Illinois variant of regula falsi on [0, kMaxFastGain]
        double a = 0.0, fa = measure(a);
        double b = kMaxFastGain, fb = measure(b);
        if (fa > 0.0 || fb < 0.0) continue;
        double k = b, fk = fb;
        int side = 0;
        for (int it = 0; it < 60 && std::abs(fk) > kJerkTolerance; ++it) {
            k = (a * fb - b * fa) / (fb - fa);
            fk = measure(k);
            if (fk > 0.0) {
                b = k;
                fb = fk;
                if (side == -1) fa /= 2.0;
                side = -1;
            } else {
                a = k;
                fa = fk;
                if (side == 1) fb /= 2.0;
                side = 1;
            }
        }
        if (std::abs(fk) > kJerkTolerance) continue;

        GeneratedTrajectory out;
        out.trajectory = realize(layout, fast, k, cfg, vehicle_id, profile.label);
        out.stats.vehicle_id = vehicle_id;
        out.stats.label = profile.label;
        out.stats.duration = static_cast<double>(layout.frames) * dt;
        out.stats.fast_gain = k;
        out.stats.attempts = attempt;
        out.stats.lane_changes_injected = static_cast<int>(layout.manoeuvres.size());
        const auto kin = compute_kinematics(out.trajectory);
        const auto events = detect_lane_changes(out.trajectory, cfg.lane_change);
        out.stats.features = summarize_features(out.trajectory, kin, events);
        return out;
    }
    throw Error(ErrorCode::InfeasibleProfile,
                "jerk target " + std::to_string(target) + " unreachable with fast gain <= 0.09 for " + vehicle_id);
}

struct Dataset {
    std::vector<Trajectory> trajectories;
    std::vector<GeneratedStats> stats;
    nlohmann::json manifest;
};

inline std::mt19937_64 trajectory_rng(std::uint64_t seed, std::size_t index, Label label) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(label)};
    return std::mt19937_64(seq);
}

namespace synth_detail {

inline nlohmann::json profile_json(const BehaviorProfile& p) {
    return {{"label", std::string(to_string(p.label))},
            {"mean_speed", p.mean_speed},
            {"speed_spread", p.speed_spread},
            {"jerk_std", p.jerk_std},
            {"max_decel", p.max_decel},
            {"lane_change_rate", p.lane_change_rate},
            {"pre_lane_change_decel", p.pre_lane_change_decel},
            {"fluctuation_rate", p.fluctuation_rate}};
}

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace synth_detail

/// n_av AV trajectories followed by n_hdv HDV trajectories plus a manifest
/// with the profiles used and each trajectory's realized statistics.
/// Output does not depend on the thread count.
inline Dataset generate_dataset(const GeneratorConfig& cfg) {
    using synth_detail::optional_json;
    cfg.validate();
    const auto [av, hdv] = effective_profiles(cfg);
    const std::size_t total = cfg.n_av + cfg.n_hdv;
    std::vector<GeneratedTrajectory> items(total);
    std::vector<std::exception_ptr> errors(total);

    auto work = [&](std::size_t i) {
        try {
            const bool is_av = i < cfg.n_av;
            const BehaviorProfile& p = is_av ? av : hdv;
            const std::size_t local = is_av ? i : i - cfg.n_av;
            char id[32];
            std::snprintf(id, sizeof id, "%s-%04zu", is_av ? "AV" : "HDV", local);
            auto rng = trajectory_rng(cfg.seed, i, p.label);
            items[i] = generate_trajectory(p, cfg, rng, id);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(total, 1)));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < total; i += threads) work(i);
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    Dataset ds;
    nlohmann::json per = nlohmann::json::array();
    std::array<double, 2> jerk_sum{}, decel_sum{}, fluct_sum{};
    std::array<std::size_t, 2> count{};
    for (auto& it : items) {
        const auto& s = it.stats;
        const std::size_t c = s.label == Label::AV ? 0 : 1;
        ++count[c];
        jerk_sum[c] += s.features.std_jerk;
        decel_sum[c] += s.features.max_decel.value_or(0.0);
        fluct_sum[c] += s.features.speed_fluctuation_rate.value_or(0.0);
        per.push_back({{"vehicle_id", s.vehicle_id},
                       {"label", std::string(to_string(s.label))},
                       {"duration", s.duration},
                       {"fast_gain", s.fast_gain},
                       {"attempts", s.attempts},
                       {"lane_changes_injected", s.lane_changes_injected},
                       {"lane_changes_detected", s.features.lane_change_count},
                       {"mean_speed", s.features.mean_speed},
                       {"std_jerk", s.features.std_jerk},
                       {"max_decel", optional_json(s.features.max_decel)},
                       {"speed_fluctuation_rate", optional_json(s.features.speed_fluctuation_rate)},
                       {"pre_lane_change_decel", optional_json(s.features.pre_lane_change_decel)}});
        ds.stats.push_back(s);
        ds.trajectories.push_back(std::move(it.trajectory));
    }
    auto mean = [&](const std::array<double, 2>& sum, std::size_t c) {
        return count[c] ? nlohmann::json(sum[c] / static_cast<double>(count[c])) : nlohmann::json();
    };
    nlohmann::json summary = {
        {"AV", {{"count", count[0]}, {"mean_std_jerk", mean(jerk_sum, 0)}, {"mean_max_decel", mean(decel_sum, 0)},
                {"mean_speed_fluctuation_rate", mean(fluct_sum, 0)}}},
        {"HDV", {{"count", count[1]}, {"mean_std_jerk", mean(jerk_sum, 1)}, {"mean_max_decel", mean(decel_sum, 1)},
                 {"mean_speed_fluctuation_rate", mean(fluct_sum, 1)}}},
        {"configured_jerk_gap", hdv.jerk_std - av.jerk_std}};
    if (count[0] && count[1]) summary["realized_jerk_gap"] = jerk_sum[1] / count[1] - jerk_sum[0] / count[0];
    ds.manifest = {{"format", "svbrd-synth-manifest"},
                   {"seed", cfg.seed},
                   {"counts", {{"AV", cfg.n_av}, {"HDV", cfg.n_hdv}}},
                   {"duration_range", {cfg.min_duration, cfg.max_duration}},
                   {"frame_rate", cfg.frame_rate},
                   {"noise_floor", cfg.noise_floor},
                   {"separation", cfg.separation},
                   {"lane_change", {{"window", cfg.lane_change.window}, {"threshold", cfg.lane_change.threshold}}},
                   {"profiles", {synth_detail::profile_json(av), synth_detail::profile_json(hdv)}},
                   {"summary", std::move(summary)},
                   {"trajectories", std::move(per)}};
    return ds;
}

}  // namespace svbrd
