#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>

namespace vfe {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline Mat3 rot_x(double angle)
{
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 r;
    r << 1, 0, 0,
         0, c, -s,
         0, s, c;
    return r;
}

inline Mat3 rot_z(double angle)
{
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 r;
    r << c, -s, 0,
         s, c, 0,
         0, 0, 1;
    return r;
}

/// Rotation by `angle` about the unit vector `axis` (Rodrigues).
inline Mat3 axis_angle(const Vec3& axis, double angle)
{
    Mat3 k;
    k << 0, -axis.z(), axis.y(),
         axis.z(), 0, -axis.x(),
         -axis.y(), axis.x(), 0;
    return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

/// Smallest rotation taking unit vector `from` onto unit vector `to`.
/// Antiparallel inputs rotate by pi about any axis orthogonal to `from`.
inline Mat3 rotation_between(const Vec3& from, const Vec3& to)
{
    const Vec3 f = from.normalized();
    const Vec3 t = to.normalized();
    const Vec3 cross = f.cross(t);
    const double sin_a = cross.norm();
    const double cos_a = f.dot(t);
    if (sin_a < 1e-15) {
        if (cos_a > 0)
            return Mat3::Identity();
        Vec3 ortho = std::abs(f.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
        ortho = (ortho - ortho.dot(f) * f).normalized();
        return axis_angle(ortho, kPi);
    }
    return axis_angle(cross / sin_a, std::atan2(sin_a, cos_a));
}

/// Reduce `x` to [0, period).
inline double wrap_positive(double x, double period)
{
    double r = std::fmod(x, period);
    if (r < 0)
        r += period;
    if (r >= period)
        r = 0.0;
    return r;
}

/// Reduce `x` to (-half, half] where half = period / 2.
inline double wrap_centered(double x, double period)
{
    double r = wrap_positive(x, period);
    if (r > 0.5 * period)
        r -= period;
    return r;
}

} // namespace vfe
