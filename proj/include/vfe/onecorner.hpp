#pragma once

// Self-similar one-corner solution X = sqrt(t) G(s / sqrt(t)) with curvature
// c0 / sqrt(t) and torsion s / (2t), its tangent asymptotes, the rotation that
// places it on a corner of the helical polygon, and the finite-difference
// curvature recovered from the exact polygon at t_{1q}.

#include "vfe/algebraic.hpp"
#include "vfe/errors.hpp"
#include "vfe/gauss.hpp"
#include "vfe/geometry.hpp"
#include "vfe/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <span>
#include <string>
#include <vector>

namespace vfe {

struct FrenetFrame {
    Vec3 T = Vec3::UnitZ();
    Vec3 n = Vec3::UnitX();
    Vec3 b = Vec3::UnitY();
};

struct SelfSimilarSolution {
    double c0 = 0.0;
    double t = 0.0;
    double S = 0.0;
    double ds = 0.0;
    std::vector<double> s;           // -S .. S, symmetric, ascending
    std::vector<FrenetFrame> frames; // one per node
    std::vector<Vec3> curve;         // X per node

    std::size_t center() const { return s.size() / 2; }
    double curvature() const { return c0 / std::sqrt(t); }
    double torsion(double arc) const { return arc / (2.0 * t); }
};

namespace detail {

struct FrenetPoint {
    FrenetFrame f;
    Vec3 x;
};

inline FrenetPoint frenet_rate(const FrenetPoint& p, double kappa, double tau)
{
    FrenetPoint d;
    d.f.T = kappa * p.f.n;
    d.f.n = -kappa * p.f.T + tau * p.f.b;
    d.f.b = -tau * p.f.n;
    d.x = p.f.T;
    return d;
}

inline FrenetPoint axpy(const FrenetPoint& p, const FrenetPoint& d, double h)
{
    return {{p.f.T + h * d.f.T, p.f.n + h * d.f.n, p.f.b + h * d.f.b}, p.x + h * d.x};
}

// Pull the frame back to the nearest rotation. The torsion grows linearly in s,
// so plain RK4 drifts off SO(3) over long tails; a Bjorck correction per RK4 step
// keeps the Gram error at rounding level.
inline void reorthonormalize(FrenetFrame& f)
{
    Mat3 F;
    F.row(0) = f.T;
    F.row(1) = f.n;
    F.row(2) = f.b;
    for (int it = 0; it < 2; ++it)
        F = 1.5 * F - 0.5 * F * F.transpose() * F;
    f.T = F.row(0);
    f.n = F.row(1);
    f.b = F.row(2);
}

// RK4 from s = 0 with signed step h for `steps` steps; returns nodes 1..steps.
inline std::vector<FrenetPoint> integrate_frenet(const FrenetPoint& start, double kappa, double t, double h,
                                                 std::size_t steps)
{
    std::vector<FrenetPoint> out;
    out.reserve(steps);
    FrenetPoint p = start;
    for (std::size_t i = 0; i < steps; ++i) {
        const double s0 = h * static_cast<double>(i);
        const double tau0 = s0 / (2.0 * t);
        const double tau_mid = (s0 + 0.5 * h) / (2.0 * t);
        const double tau1 = (s0 + h) / (2.0 * t);
        const FrenetPoint k1 = frenet_rate(p, kappa, tau0);
        const FrenetPoint k2 = frenet_rate(axpy(p, k1, 0.5 * h), kappa, tau_mid);
        const FrenetPoint k3 = frenet_rate(axpy(p, k2, 0.5 * h), kappa, tau_mid);
        const FrenetPoint k4 = frenet_rate(axpy(p, k3, h), kappa, tau1);
        const double w = h / 6.0;
        p.f.T += w * (k1.f.T + 2.0 * k2.f.T + 2.0 * k3.f.T + k4.f.T);
        p.f.n += w * (k1.f.n + 2.0 * k2.f.n + 2.0 * k3.f.n + k4.f.n);
        p.f.b += w * (k1.f.b + 2.0 * k2.f.b + 2.0 * k3.f.b + k4.f.b);
        p.x += w * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
        reorthonormalize(p.f);
        out.push_back(p);
    }
    return out;
}

} // namespace detail

/// Integrate the Frenet system outward from s = 0 in both directions on [-S, S].
inline SelfSimilarSolution selfsimilar_frame(double c0, double t, double S, double ds)
{
    if (!(c0 > 0.0))
        throw DomainError("selfsimilar_frame: c0 must be positive");
    if (!(t > 0.0))
        throw DomainError("selfsimilar_frame: t must be positive");
    if (!(ds > 0.0) || !(S >= ds))
        throw DomainError("selfsimilar_frame: need 0 < ds <= S");

    const auto steps = static_cast<std::size_t>(std::llround(S / ds));
    const double h = S / static_cast<double>(steps);
    const double kappa = c0 / std::sqrt(t);

    detail::FrenetPoint start;
    start.x = 2.0 * c0 * std::sqrt(t) * start.f.b;
    const auto fwd = detail::integrate_frenet(start, kappa, t, h, steps);
    const auto bwd = detail::integrate_frenet(start, kappa, t, -h, steps);

    SelfSimilarSolution sol;
    sol.c0 = c0;
    sol.t = t;
    sol.S = h * static_cast<double>(steps);
    sol.ds = h;
    const std::size_t n = 2 * steps + 1;
    sol.s.resize(n);
    sol.frames.resize(n);
    sol.curve.resize(n);
    for (std::size_t i = 0; i < steps; ++i) {
        const std::size_t lo = steps - 1 - i;
        const std::size_t hi = steps + 1 + i;
        sol.s[lo] = -h * static_cast<double>(i + 1);
        sol.frames[lo] = bwd[i].f;
        sol.curve[lo] = bwd[i].x;
        sol.s[hi] = h * static_cast<double>(i + 1);
        sol.frames[hi] = fwd[i].f;
        sol.curve[hi] = fwd[i].x;
    }
    sol.s[steps] = 0.0;
    sol.frames[steps] = start.f;
    sol.curve[steps] = start.x;
    return sol;
}

/// Largest deviation of the frames from orthonormality.
inline double frame_orthonormality_error(const SelfSimilarSolution& sol)
{
    double e = 0.0;
    for (const auto& f : sol.frames) {
        Mat3 g;
        g.col(0) = f.T;
        g.col(1) = f.n;
        g.col(2) = f.b;
        e = std::max(e, (g.transpose() * g - Mat3::Identity()).cwiseAbs().maxCoeff());
    }
    return e;
}

struct Asymptotes {
    Vec3 minus; // s -> -infinity
    Vec3 plus;  // s -> +infinity
    /// Component shared by both asymptotes; along T(0), which is the z-axis here.
    double symmetric() const { return plus.z(); }
    double tail_variation = 0.0;
    double angle() const { return std::acos(std::clamp(minus.dot(plus), -1.0, 1.0)); }
};

/// Tail-averaged asymptotes. T(0) = e_z makes T_z even and T_x, T_y odd in s,
/// so the averages are symmetrized to (-A_x, -A_y, A_z) and (A_x, A_y, A_z).
inline Asymptotes asymptotes(const SelfSimilarSolution& sol, double tail_tolerance = 0.05)
{
    const std::size_t n = sol.s.size();
    const std::size_t half = n / 2;
    const auto tail = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(half)));
    if (tail < 2)
        throw InsufficientDomainError(10.0 * sol.ds, "asymptotes: grid too short for tail averaging");

    auto average = [&](std::size_t first, std::size_t last, double& variation) {
        Vec3 acc = Vec3::Zero();
        for (std::size_t i = first; i < last; ++i)
            acc += sol.frames[i].T;
        acc /= static_cast<double>(last - first);
        for (std::size_t i = first; i < last; ++i)
            variation = std::max(variation, (sol.frames[i].T - acc).norm());
        return acc;
    };
    double variation = 0.0;
    const Vec3 am = average(0, tail, variation);
    const Vec3 ap = average(n - tail, n, variation);

    if (variation > tail_tolerance) {
        // oscillations in the tail decay like 1/s
        const double required = sol.S * variation / tail_tolerance;
        throw InsufficientDomainError(required, "asymptotes: tail variation " + std::to_string(variation) +
                                                    " exceeds " + std::to_string(tail_tolerance) +
                                                    "; need S of about " + std::to_string(required));
    }
    const double sym = 0.5 * (am.z() + ap.z());
    const double ax = 0.5 * (ap.x() - am.x());
    const double ay = 0.5 * (ap.y() - am.y());
    Asymptotes out;
    out.plus = Vec3(ax, ay, sym).normalized();
    out.minus = Vec3(-out.plus.x(), -out.plus.y(), out.plus.z());
    out.tail_variation = variation;
    return out;
}

/// Tangent limits of the polygon corner at s = 0: the incoming side and the outgoing side.
inline Vec3 corner_tangent_minus(const PolygonConfig& cfg) { return side_tangent(cfg, -1); }
inline Vec3 corner_tangent_plus(const PolygonConfig& cfg) { return side_tangent(cfg, 0); }

struct MatchedSolution {
    Mat3 rotation = Mat3::Identity(); // M2 * M1
    Vec3 anchor = Vec3::Zero();       // polygon corner at s = 0, t = 0
    std::vector<Vec3> curve;          // X_rot per node
    std::vector<Vec3> tangents;       // T_rot per node
};

/// Rotation taking A+ to (a, 0, b) about their common normal, then about that
/// axis until A- lands on (a cos(2 pi/M), -a sin(2 pi/M), b).
inline Mat3 matching_rotation(const Asymptotes& asym, const PolygonConfig& cfg)
{
    const Vec3 tp = corner_tangent_plus(cfg);
    const Vec3 tm = corner_tangent_minus(cfg);
    const Vec3 ap = asym.plus.normalized();
    if ((ap - asym.minus.normalized()).norm() < 1e-12 && cfg.rho0 > 1e-12)
        throw DegenerateCornerError("matching_rotation: asymptotes coincide");

    const Mat3 m1 = rotation_between(ap, tp);
    const Vec3 am = m1 * asym.minus.normalized();
    // signed angle about tp between the parts of am and tm orthogonal to tp
    const Vec3 u = am - am.dot(tp) * tp;
    const Vec3 w = tm - tm.dot(tp) * tp;
    const double ang = std::atan2(tp.dot(u.cross(w)), u.dot(w));
    const Mat3 m2 = axis_angle(tp, ang);
    return m2 * m1;
}

inline Vec3 polygon_corner_anchor(const PolygonConfig& cfg)
{
    const double M = cfg.M;
    return {-cfg.a * kPi / M, -cfg.a * kPi / (M * std::tan(kPi / M)), 0.0};
}

inline MatchedSolution rotated_solution(const SelfSimilarSolution& sol, const Mat3& rotation,
                                        const PolygonConfig& cfg)
{
    MatchedSolution m;
    m.rotation = rotation;
    m.anchor = polygon_corner_anchor(cfg);
    m.curve.reserve(sol.curve.size());
    m.tangents.reserve(sol.frames.size());
    for (std::size_t i = 0; i < sol.curve.size(); ++i) {
        m.curve.push_back(m.anchor + rotation * sol.curve[i]);
        m.tangents.push_back(rotation * sol.frames[i].T);
    }
    return m;
}

struct MatchedTrajectory {
    std::vector<double> times;
    std::vector<Vec3> points; // X_rot(0, t)
};

/// X_rot(0, t) over a set of times, re-solving the one-corner problem at each t.
/// The rotation is fitted once from the solution at the last time.
inline MatchedTrajectory rotated_trajectory(const PolygonConfig& cfg, std::span<const double> times, double S_scale,
                                            double ds_scale)
{
    if (times.empty())
        throw ArgumentError("rotated_trajectory: no times");
    const double c0 = cfg.c_theta0;
    auto solve = [&](double t) {
        if (t <= 0.0)
            return Vec3(Vec3::Zero());
        const auto sol = selfsimilar_frame(c0, t, S_scale * std::sqrt(t), ds_scale * std::sqrt(t));
        return Vec3(sol.curve[sol.center()]);
    };
    const double t_ref = *std::max_element(times.begin(), times.end());
    if (!(t_ref > 0.0))
        throw DomainError("rotated_trajectory: need a positive time");
    const auto ref = selfsimilar_frame(c0, t_ref, S_scale * std::sqrt(t_ref), ds_scale * std::sqrt(t_ref));
    const Mat3 rot = matching_rotation(asymptotes(ref), cfg);

    std::vector<std::future<Vec3>> jobs;
    jobs.reserve(times.size());
    for (double t : times)
        jobs.push_back(std::async(std::launch::async, solve, t));
    MatchedTrajectory out;
    const Vec3 x0 = polygon_corner_anchor(cfg);
    for (std::size_t i = 0; i < times.size(); ++i) {
        out.times.push_back(times[i]);
        out.points.push_back(x0 + rot * jobs[i].get());
    }
    return out;
}

/// sqrt(t_{1q}) |T(4 pi/(M q)) - T(-4 pi/(M q))| / (8 pi/(M q)) from the exact frames.
inline double curvature_fd(const FrameSet& frames, const PolygonConfig& cfg, const RationalTime& rt)
{
    if (rt.p != 1 || rt.parity != Parity::q_half_odd)
        throw PreconditionError("curvature_fd: needs p = 1 and q = 2 mod 4 (got p=" + std::to_string(rt.p) +
                                ", q=" + std::to_string(rt.q) + ")");
    const double h = 4.0 * kPi / (cfg.M * static_cast<double>(rt.q));
    const Vec3 diff = frames.tangent_at(h) - frames.tangent_at(-h);
    return std::sqrt(rt.t) * diff.norm() / (2.0 * h);
}

struct CurvatureRow {
    long long q;
    double approx;
    double error; // |c_theta0 - approx|
};

inline std::vector<CurvatureRow> curvature_table(const PolygonConfig& cfg, std::span<const long long> qs)
{
    std::vector<CurvatureRow> rows;
    for (long long q : qs) {
        const auto sol = algebraic_solution(cfg, 1, q);
        const double c = curvature_fd(sol.frames, cfg, sol.time);
        rows.push_back({q, c, std::abs(cfg.c_theta0 - c)});
    }
    return rows;
}

inline constexpr std::array<long long, 8> kCurvatureTableQ{1002, 2002, 4002, 8002, 16002, 32002, 64002, 128002};

} // namespace vfe
