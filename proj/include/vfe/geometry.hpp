#pragma once

// Helical regular M-polygons: initial tangent and curve, and the closed-form
// scalars (curvature angle, torsion angle, delta strength, center-of-mass speed)
// that every other module derives from.

#include "vfe/errors.hpp"
#include "vfe/linalg.hpp"

#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace vfe {

/// Exact rational multiple of pi: value = pi * num / den.
struct PiFraction {
    long long num = 0;
    long long den = 1;

    double value() const { return kPi * static_cast<double>(num) / static_cast<double>(den); }
    bool product_odd() const { return (num * den) % 2 != 0; }
    friend bool operator==(const PiFraction&, const PiFraction&) = default;
};

/// Third component of the initial tangent (0 planar, 1 straight line).
struct VerticalComponent {
    double value;
};

/// Torsion angle theta0 in radians.
struct TorsionAngle {
    double radians;
};

using TorsionSpec = std::variant<VerticalComponent, TorsionAngle, PiFraction>;

struct PolygonConfig {
    int M = 3;
    double b = 0.0;        // vertical tangent component
    double a = 1.0;        // horizontal tangent radius, a^2 + b^2 = 1
    double theta0 = 0.0;   // torsion angle
    double rho0 = 0.0;     // curvature angle
    double gamma = 0.0;    // Galilean frequency M theta0 / 2pi
    double c_theta0 = 0.0; // delta strength of the filament function at t = 0
    double c_M = 0.0;      // vertical speed of the center of mass
    std::optional<PiFraction> theta0_pi; // set when theta0 was given as c/d pi

    double side_length() const { return kTwoPi / M; }
    /// T_f = 2 pi / M^2.
    double time_period() const { return kTwoPi / (static_cast<double>(M) * M); }
    /// log(cos(rho0 / 2)) evaluated without cancellation for small a.
    double log_cos_half_rho0() const
    {
        const double s = a * std::sin(kPi / M);
        return 0.5 * std::log1p(-s * s);
    }
};

namespace detail {

inline double b_from_theta0(int M, double theta0)
{
    return std::tan(0.5 * theta0) / std::tan(kPi / M);
}

inline void fill_derived(PolygonConfig& cfg)
{
    const int M = cfg.M;
    const double sin_pm = std::sin(kPi / M);
    cfg.a = std::sqrt((1.0 - cfg.b) * (1.0 + cfg.b));
    cfg.rho0 = 2.0 * std::asin(cfg.a * sin_pm);
    cfg.gamma = M * cfg.theta0 / kTwoPi;
    const double log_cos = cfg.log_cos_half_rho0();
    cfg.c_theta0 = std::sqrt(-2.0 / kPi * log_cos);
    cfg.c_M = -2.0 * log_cos / ((kPi / M) * std::tan(kPi / M));
}

} // namespace detail

/// Build a configuration from M and one torsion parameterization.
/// b and theta0 are related by b = tan(theta0/2) / tan(pi/M).
inline PolygonConfig polygon_config(int M, const TorsionSpec& torsion)
{
    if (M < 3)
        throw DomainError("polygon_config: M must be >= 3 (got " + std::to_string(M) + ")");

    PolygonConfig cfg;
    cfg.M = M;
    const double theta_max = kTwoPi / M;

    if (const auto* vb = std::get_if<VerticalComponent>(&torsion)) {
        if (!(vb->value >= 0.0 && vb->value < 1.0))
            throw DomainError("polygon_config: b must lie in [0, 1) (got " + std::to_string(vb->value) + ")");
        cfg.b = vb->value;
        cfg.theta0 = 2.0 * std::atan(cfg.b * std::tan(kPi / M));
    } else {
        double theta0 = 0.0;
        if (const auto* ta = std::get_if<TorsionAngle>(&torsion)) {
            theta0 = ta->radians;
        } else {
            PiFraction f = std::get<PiFraction>(torsion);
            if (f.den <= 0 || f.num < 0)
                throw DomainError("polygon_config: theta0 fraction needs num >= 0, den > 0");
            const long long g = std::gcd(f.num, f.den);
            if (g > 1) {
                f.num /= g;
                f.den /= g;
            }
            if (f.num == 0)
                f.den = 1;
            // exact range check: num/den < 2/M
            if (f.num * M >= 2 * f.den)
                throw DomainError("polygon_config: theta0 must lie in [0, 2pi/M) (got " + std::to_string(f.num) +
                                  "/" + std::to_string(f.den) + " pi)");
            cfg.theta0_pi = f;
            theta0 = f.value();
        }
        if (!(theta0 >= 0.0 && theta0 < theta_max))
            throw DomainError("polygon_config: theta0 must lie in [0, 2pi/M) (got " + std::to_string(theta0) + ")");
        cfg.theta0 = theta0;
        cfg.b = detail::b_from_theta0(M, theta0);
    }
    detail::fill_derived(cfg);
    return cfg;
}

inline PolygonConfig polygon_config_b(int M, double b) { return polygon_config(M, VerticalComponent{b}); }
inline PolygonConfig polygon_config_theta(int M, long long num, long long den)
{
    return polygon_config(M, PiFraction{num, den});
}

/// Tangent of side k, T_k = (a cos(2pi k/M), a sin(2pi k/M), b).
inline Vec3 side_tangent(const PolygonConfig& cfg, long long k)
{
    const double ang = kTwoPi * static_cast<double>(k) / cfg.M;
    return {cfg.a * std::cos(ang), cfg.a * std::sin(ang), cfg.b};
}

/// Corner X(s_k, 0) at s_k = 2 pi k / M (any integer k).
inline Vec3 corner_position(const PolygonConfig& cfg, long long k)
{
    const int M = cfg.M;
    const double r = cfg.a * kPi / (M * std::sin(kPi / M));
    const double ang = kPi * static_cast<double>(2 * k - 1) / M;
    return {r * std::sin(ang), -r * std::cos(ang), cfg.b * kTwoPi * static_cast<double>(k) / M};
}

/// Index of the side containing s; exact corners belong to the side on their right.
inline long long side_index(const PolygonConfig& cfg, double s)
{
    return static_cast<long long>(std::floor(s * cfg.M / kTwoPi));
}

inline Vec3 initial_tangent(const PolygonConfig& cfg, double s)
{
    return side_tangent(cfg, side_index(cfg, s));
}

inline Vec3 initial_curve(const PolygonConfig& cfg, double s)
{
    const long long k = side_index(cfg, s);
    const double sk = kTwoPi * static_cast<double>(k) / cfg.M;
    return corner_position(cfg, k) + (s - sk) * side_tangent(cfg, k);
}

struct CurveSample {
    double s = 0.0;
    Vec3 position = Vec3::Zero();
    Vec3 tangent = Vec3::UnitZ();
};

/// Samples at s_j = 2 pi j / N. Nodes on a corner carry the normalized average
/// of the two adjacent side tangents, which keeps the s <-> -s mirror symmetry.
inline std::vector<CurveSample> sample_grid(const PolygonConfig& cfg, int N)
{
    if (N <= 0 || N % cfg.M != 0)
        throw ConfigError("sample_grid: N must be a positive multiple of M (N=" + std::to_string(N) +
                          ", M=" + std::to_string(cfg.M) + ")");
    const int per_side = N / cfg.M;
    std::vector<CurveSample> out(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) {
        CurveSample& smp = out[static_cast<std::size_t>(j)];
        smp.s = kTwoPi * j / N;
        const long long k = j / per_side;
        if (j % per_side == 0) {
            smp.tangent = (side_tangent(cfg, k - 1) + side_tangent(cfg, k)).normalized();
            smp.position = corner_position(cfg, k);
        } else {
            smp.tangent = side_tangent(cfg, k);
            smp.position = initial_curve(cfg, smp.s);
        }
    }
    return out;
}

} // namespace vfe
