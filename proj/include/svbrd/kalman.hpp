#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "svbrd/error.hpp"
#include "svbrd/trajectory.hpp"

namespace svbrd {

struct KalmanParams {
    /// Spectral density of the white-noise acceleration driving the
    /// constant-velocity model (native units^2 / s^3).
    double process_noise = 1e-2;
    /// Position measurement variance (native units^2).
    double measurement_noise = 1.0;
};

namespace detail {

struct Mat2 {
    double a = 0, b = 0, c = 0, d = 0;  // [[a, b], [c, d]]
};
struct Vec2 {
    double p = 0, v = 0;
};

/// Constant-velocity Kalman filter with a Rauch-Tung-Striebel backward pass
/// over one axis. State is [position, velocity].
inline std::vector<double> smooth_axis(const std::vector<double>& z, double dt, const KalmanParams& kp) {
    const std::size_t n = z.size();
    if (n < 2) return z;
    const double q = kp.process_noise;
    const double r = kp.measurement_noise;
    const Mat2 Q{q * dt * dt * dt / 3.0, q * dt * dt / 2.0, q * dt * dt / 2.0, q * dt};

    std::vector<Vec2> x_pred(n), x_filt(n);
    std::vector<Mat2> P_pred(n), P_filt(n);

    // Two-point initialisation; exact for noise-free linear motion.
    x_filt[0] = {z[0], (z[1] - z[0]) / dt};
    P_filt[0] = {r, r / dt, r / dt, 2.0 * r / (dt * dt)};
    x_pred[0] = x_filt[0];
    P_pred[0] = P_filt[0];

    for (std::size_t k = 1; k < n; ++k) {
        const Vec2& xp = x_filt[k - 1];
        const Mat2& P = P_filt[k - 1];
        // F P F^T + Q with F = [[1, dt], [0, 1]]
        Vec2 xk{xp.p + dt * xp.v, xp.v};
        Mat2 Pk{P.a + dt * (P.b + P.c) + dt * dt * P.d + Q.a, P.b + dt * P.d + Q.b, P.c + dt * P.d + Q.c,
                P.d + Q.d};
        x_pred[k] = xk;
        P_pred[k] = Pk;

        const double s = Pk.a + r;
        const double k0 = Pk.a / s;
        const double k1 = Pk.c / s;
        const double innov = z[k] - xk.p;
        x_filt[k] = {xk.p + k0 * innov, xk.v + k1 * innov};
        P_filt[k] = {(1 - k0) * Pk.a, (1 - k0) * Pk.b, Pk.c - k1 * Pk.a, Pk.d - k1 * Pk.b};
    }

    std::vector<Vec2> xs(n);
    xs[n - 1] = x_filt[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) {
        const Mat2& P = P_filt[k];
        const Mat2& Pn = P_pred[k + 1];
        // C = P F^T Pn^{-1}
        const Mat2 PFt{P.a + dt * P.b, P.b, P.c + dt * P.d, P.d};
        const double det = Pn.a * Pn.d - Pn.b * Pn.c;
        const Mat2 inv{Pn.d / det, -Pn.b / det, -Pn.c / det, Pn.a / det};
        const Mat2 C{PFt.a * inv.a + PFt.b * inv.c, PFt.a * inv.b + PFt.b * inv.d, PFt.c * inv.a + PFt.d * inv.c,
                     PFt.c * inv.b + PFt.d * inv.d};
        const Vec2 diff{xs[k + 1].p - x_pred[k + 1].p, xs[k + 1].v - x_pred[k + 1].v};
        xs[k] = {x_filt[k].p + C.a * diff.p + C.b * diff.v, x_filt[k].v + C.c * diff.p + C.d * diff.v};
    }

    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = xs[k].p;
    return out;
}

}  // namespace detail

/// Replaces positions with constant-velocity Kalman smoothed estimates,
/// each axis filtered independently. Frames and metadata are untouched.
inline Trajectory smooth_trajectory(Trajectory traj, const KalmanParams& params = {}) {
    if (!(params.process_noise >= 0.0) || !std::isfinite(params.process_noise)) {
        throw Error(ErrorCode::InvalidArgument, "process_noise must be finite and >= 0");
    }
    if (!(params.measurement_noise > 0.0) || !std::isfinite(params.measurement_noise)) {
        throw Error(ErrorCode::InvalidArgument, "measurement_noise must be finite and > 0");
    }
    std::vector<double> xs, ys;
    xs.reserve(traj.size());
    ys.reserve(traj.size());
    for (const auto& p : traj.points) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    const double dt = traj.dt();
    xs = detail::smooth_axis(xs, dt, params);
    ys = detail::smooth_axis(ys, dt, params);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        traj.points[i].x = xs[i];
        traj.points[i].y = ys[i];
    }
    return traj;
}

}  // namespace svbrd
