#pragma once

// Exact polygon at rational times: scale the delta train, integrate the parallel
// frame across each delta by an exact rotation, rebuild the vertices, align the
// period vector with +z and place the curve at its center-of-mass height.

#include "vfe/errors.hpp"
#include "vfe/gauss.hpp"
#include "vfe/geometry.hpp"
#include "vfe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace vfe {

/// Angle between adjacent sides at t_pq: cos(rho_q/2) = cos(rho0/2)^{1/q} for q odd,
/// cos(rho0/2)^{2/q} for q even.
inline double rho_q(const PolygonConfig& cfg, long long q)
{
    if (q < 1)
        throw DomainError("rho_q: q must be >= 1");
    const double expo = (q % 2 == 1) ? 1.0 / static_cast<double>(q) : 2.0 / static_cast<double>(q);
    // sin^2(rho_q/2) = 1 - exp(2 expo log cos(rho0/2))
    const double sin2 = -std::expm1(2.0 * expo * cfg.log_cos_half_rho0());
    return 2.0 * std::asin(std::sqrt(std::max(0.0, sin2)));
}

/// Psi_theta coefficients: each delta weight times (rho_q / c_{theta,q}) e^{-i global phase}.
inline std::vector<Complex> scaled_coefficients(const DeltaTrain& train, const PolygonConfig& cfg,
                                                const RationalTime& rt)
{
    const Complex factor = std::polar(rho_q(cfg, rt.q) / train.modulus, -train.global_phase);
    std::vector<Complex> out(train.coefficients.size());
    std::transform(train.coefficients.begin(), train.coefficients.end(), out.begin(),
                   [&](const Complex& c) { return c * factor; });
    return out;
}

/// Exact jump of the parallel frame (rows T, e1, e2) across a delta with weight
/// alpha + i beta: exp of the generator with first row (0, alpha, beta), i.e. a
/// rotation by |alpha + i beta| about (0, beta, -alpha) in frame coordinates.
inline Mat3 frame_jump(const Complex& coeff)
{
    const double rho = std::abs(coeff);
    if (!(rho > 0.0))
        throw DegenerateCornerError("frame_jump: zero-modulus delta coefficient");
    const Vec3 axis(0.0, coeff.imag() / rho, -coeff.real() / rho);
    return axis_angle(axis, rho);
}

struct FrameSet {
    Mat3 initial = Mat3::Identity(); // frame on [0, first breakpoint)
    std::vector<Mat3> frames;        // frames[j] holds on [breakpoints[j], breakpoints[j+1])
    std::vector<double> breakpoints; // delta locations

    std::size_t size() const { return frames.size(); }

    /// Frame (rows T, e1, e2) at arc length s, reduced to [0, 2 pi).
    const Mat3& frame_at(double s) const
    {
        const double r = wrap_positive(s, kTwoPi);
        const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), r);
        if (it == breakpoints.begin())
            return initial;
        return frames[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
    }
    Vec3 tangent_at(double s) const { return frame_at(s).row(0).transpose(); }

    /// Ordered product of all jumps, R_{n-1} ... R_0.
    Mat3 product() const { return frames.empty() ? Mat3::Identity() : Mat3(frames.back() * initial.inverse()); }
};

inline FrameSet reconstruct_frames(const DeltaTrain& train, std::span<const Complex> coeffs)
{
    if (coeffs.size() != train.locations.size())
        throw ArgumentError("reconstruct_frames: coefficient count does not match delta count");
    FrameSet fs;
    fs.breakpoints = train.locations;
    fs.frames.reserve(coeffs.size());
    Mat3 f = fs.initial;
    for (const Complex& c : coeffs) {
        f = frame_jump(c) * f;
        fs.frames.push_back(f);
    }
    return fs;
}

struct AlgebraicCurve {
    std::vector<Vec3> vertices;      // X(0), corners..., X(2 pi)
    std::vector<double> arc;         // arc length of each vertex
    std::vector<Vec3> tangents;      // tangents[j] on [arc[j], arc[j+1])
    Mat3 rotation = Mat3::Identity(); // accumulated rigid rotation applied to the raw reconstruction
    bool aligned = false;
    Vec3 vertical_offset = Vec3::Zero();
    std::optional<double> z_rotation; // unresolved until fitted

    std::size_t corner_count() const { return vertices.size() >= 2 ? vertices.size() - 2 : 0; }
    Vec3 period_vector() const { return vertices.back() - vertices.front(); }

    Vec3 tangent_at(double s) const
    {
        const double r = wrap_positive(s, kTwoPi);
        auto it = std::upper_bound(arc.begin() + 1, arc.end() - 1, r);
        return tangents[static_cast<std::size_t>(it - arc.begin()) - 1];
    }

    /// Point at arc length s in [0, 2 pi] (extended by the period vector outside).
    Vec3 position_at(double s) const
    {
        const double periods = std::floor(s / kTwoPi);
        const double r = s - periods * kTwoPi;
        auto it = std::upper_bound(arc.begin() + 1, arc.end() - 1, r);
        const std::size_t j = static_cast<std::size_t>(it - arc.begin()) - 1;
        return vertices[j] + (r - arc[j]) * tangents[j] + periods * period_vector();
    }

    /// Mean of X(s) over s in [0, 2 pi), integrated exactly along the sides.
    Vec3 mean_position() const
    {
        Vec3 acc = Vec3::Zero();
        for (std::size_t j = 0; j + 1 < vertices.size(); ++j)
            acc += (arc[j + 1] - arc[j]) * 0.5 * (vertices[j] + vertices[j + 1]);
        return acc / kTwoPi;
    }

    void apply_rotation(const Mat3& r)
    {
        for (auto& v : vertices)
            v = r * v;
        for (auto& t : tangents)
            t = r * t;
        rotation = r * rotation;
    }
    void translate(const Vec3& d)
    {
        for (auto& v : vertices)
            v += d;
        vertical_offset += d;
    }
};

/// Rebuild X from the frames: X(0) = 0, a first stub up to the first corner,
/// sides of length 2 pi / corner_count, then the closing stub to s = 2 pi.
/// The curve is then rotated so that X(2 pi) - X(0) points along +z; when that
/// vector vanishes (b = 0) the rotation is skipped.
inline AlgebraicCurve reconstruct_curve(const FrameSet& frames)
{
    AlgebraicCurve c;
    const std::size_t n = frames.size();
    c.vertices.reserve(n + 2);
    c.arc.reserve(n + 2);
    c.tangents.reserve(n + 1);

    c.vertices.push_back(Vec3::Zero());
    c.arc.push_back(0.0);
    c.tangents.push_back(frames.initial.row(0).transpose());
    for (std::size_t j = 0; j < n; ++j) {
        const double s = frames.breakpoints[j];
        c.vertices.push_back(c.vertices.back() + (s - c.arc.back()) * c.tangents.back());
        c.arc.push_back(s);
        c.tangents.push_back(frames.frames[j].row(0).transpose());
    }
    c.vertices.push_back(c.vertices.back() + (kTwoPi - c.arc.back()) * c.tangents.back());
    c.arc.push_back(kTwoPi);

    const Vec3 v = c.period_vector();
    if (v.norm() > 1e-9) {
        c.apply_rotation(rotation_between(v, Vec3::UnitZ()));
        c.aligned = true;
    }
    return c;
}

inline double center_speed(const PolygonConfig& cfg) { return cfg.c_M; }

/// Translate so the horizontal center of mass is on the z-axis and the mean
/// height over one period is pi b + c_M t.
inline AlgebraicCurve place_vertical(AlgebraicCurve curve, const PolygonConfig& cfg, const RationalTime& rt)
{
    const Vec3 target(0.0, 0.0, kPi * cfg.b + cfg.c_M * rt.t);
    curve.translate(target - curve.mean_position());
    return curve;
}

inline AlgebraicCurve with_z_rotation(AlgebraicCurve curve, double angle)
{
    curve.apply_rotation(rot_z(angle));
    curve.z_rotation = curve.z_rotation.value_or(0.0) + angle;
    return curve;
}

/// Angle phi minimizing sum_i min_r |Rot_z(phi) v_i - r|^2 over the curve vertices.
/// Coarse scan followed by closed-form refinement with frozen correspondences.
inline double fit_z_rotation(const AlgebraicCurve& curve, std::span<const Vec3> reference, int scan_steps = 720)
{
    if (reference.empty())
        throw ArgumentError("fit_z_rotation: empty reference");
    const auto& verts = curve.vertices;

    auto nearest = [&](const Vec3& p) -> std::pair<std::size_t, double> {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < reference.size(); ++r) {
            const double d = (reference[r] - p).squaredNorm();
            if (d < bd) {
                bd = d;
                best = r;
            }
        }
        return {best, bd};
    };
    auto cost = [&](double phi) {
        const Mat3 rz = rot_z(phi);
        double acc = 0.0;
        for (const auto& v : verts)
            acc += nearest(rz * v).second;
        return acc;
    };

    double best_phi = 0.0;
    double best_cost = cost(0.0);
    for (int i = 1; i < scan_steps; ++i) {
        const double phi = kTwoPi * i / scan_steps;
        const double cst = cost(phi);
        if (cst < best_cost) {
            best_cost = cst;
            best_phi = phi;
        }
    }

    std::vector<std::size_t> match(verts.size());
    for (int iter = 0; iter < 100; ++iter) {
        const Mat3 rz = rot_z(best_phi);
        bool changed = iter == 0;
        for (std::size_t i = 0; i < verts.size(); ++i) {
            const std::size_t m = nearest(rz * verts[i]).first;
            changed = changed || m != match[i];
            match[i] = m;
        }
        double sc = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < verts.size(); ++i) {
            const Vec3& v = verts[i];
            const Vec3& r = reference[match[i]];
            sc += v.x() * r.x() + v.y() * r.y();
            ss += v.x() * r.y() - v.y() * r.x();
        }
        const double phi = std::atan2(ss, sc);
        const bool moved = std::abs(wrap_centered(phi - best_phi, kTwoPi)) > 1e-15;
        best_phi = phi;
        if (!changed && !moved)
            break;
    }
    return wrap_centered(best_phi, kTwoPi);
}

struct AlgebraicSolution {
    RationalTime time;
    DeltaTrain train;
    FrameSet frames;
    AlgebraicCurve curve; // aligned and vertically placed
};

inline AlgebraicSolution algebraic_solution(const PolygonConfig& cfg, long long p, long long q)
{
    AlgebraicSolution sol;
    sol.time = rational_time(cfg, p, q);
    sol.train = delta_train(cfg, sol.time);
    const auto coeffs = scaled_coefficients(sol.train, cfg, sol.time);
    sol.frames = reconstruct_frames(sol.train, coeffs);
    sol.curve = place_vertical(reconstruct_curve(sol.frames), cfg, sol.time);
    return sol;
}

} // namespace vfe
