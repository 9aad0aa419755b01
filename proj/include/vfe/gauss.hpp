#pragma once

// Rational times t_pq = (2 pi / M^2)(p/q), generalized quadratic Gauss sums and
// the Dirac-delta train of the filament function at t_pq.

#include "vfe/errors.hpp"
#include "vfe/fft.hpp"
#include "vfe/geometry.hpp"
#include "vfe/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace vfe {

/// Which branch of the delta train applies: q odd, q = 0 mod 4, or q = 2 mod 4.
enum class Parity { q_odd, q_half_even, q_half_odd };

struct RationalTime {
    int M = 3;
    long long p = 0;
    long long q = 1;
    double t = 0.0;
    Parity parity = Parity::q_odd;
    double galilean_shift = 0.0;       // 2 theta0 p / (M q) reduced to [0, 2 pi / M)
    double galilean_shift_total = 0.0; // 2 theta0 p / (M q), unreduced
    long long corner_count = 0;        // corners per 2 pi period

    double spacing() const { return kTwoPi / static_cast<double>(corner_count); }
    bool q_even() const { return parity != Parity::q_odd; }
};

inline Parity parity_of(long long q)
{
    if (q % 2 == 1)
        return Parity::q_odd;
    return (q / 2) % 2 == 0 ? Parity::q_half_even : Parity::q_half_odd;
}

inline RationalTime rational_time(const PolygonConfig& cfg, long long p, long long q)
{
    if (q < 1)
        throw DomainError("rational_time: q must be >= 1 (got " + std::to_string(q) + ")");
    if (p < 0)
        throw DomainError("rational_time: p must be >= 0 (got " + std::to_string(p) + ")");
    const long long g = std::gcd(p, q);
    p /= g;
    q /= g;

    RationalTime rt;
    rt.M = cfg.M;
    rt.p = p;
    rt.q = q;
    rt.t = cfg.time_period() * static_cast<double>(p) / static_cast<double>(q);
    rt.parity = parity_of(q);
    rt.corner_count = rt.parity == Parity::q_odd ? cfg.M * q : cfg.M * q / 2;
    rt.galilean_shift_total = 2.0 * cfg.theta0 * static_cast<double>(p) / (cfg.M * static_cast<double>(q));
    rt.galilean_shift = wrap_positive(rt.galilean_shift_total, cfg.side_length());
    return rt;
}

namespace detail {

/// (a n^2 + b n) mod c in [0, c), exact for |a|, |b|, n, c < 2^62.
inline std::int64_t quadratic_residue(std::int64_t a, std::int64_t b, std::int64_t n, std::int64_t c)
{
    const __int128 cc = c;
    __int128 an = ((static_cast<__int128>(a) % cc) + cc) % cc;
    __int128 bn = ((static_cast<__int128>(b) % cc) + cc) % cc;
    const __int128 nn = static_cast<__int128>(n) % cc;
    const __int128 r = (an * ((nn * nn) % cc) + bn * nn) % cc;
    return static_cast<std::int64_t>(r);
}

inline std::int64_t floor_mod(std::int64_t x, std::int64_t m)
{
    std::int64_t r = x % m;
    return r < 0 ? r + m : r;
}

} // namespace detail

/// G(a, b, c) = sum_{n=0}^{c-1} exp(2 pi i (a n^2 + b n) / c), by direct summation.
/// Phases are reduced exactly in integer arithmetic before the trigonometric call.
inline Complex gauss_sum(std::int64_t a, std::int64_t b, std::int64_t c)
{
    if (c < 1)
        throw DomainError("gauss_sum: modulus must be >= 1");
    double re = 0.0, im = 0.0;
    const double inv = 1.0 / static_cast<double>(c);
    for (std::int64_t n = 0; n < c; ++n) {
        const double ang = kTwoPi * static_cast<double>(detail::quadratic_residue(a, b, n, c)) * inv;
        re += std::cos(ang);
        im += std::sin(ang);
    }
    return {re, im};
}

/// All G(a, m, c) for m = 0..c-1. Small moduli use direct sums; larger ones
/// evaluate the same sums at once as a length-c DFT of exp(2 pi i a n^2 / c).
inline std::vector<Complex> gauss_sums_all(std::int64_t a, std::int64_t c, std::int64_t direct_limit = 512)
{
    if (c < 1)
        throw DomainError("gauss_sums_all: modulus must be >= 1");
    std::vector<Complex> out(static_cast<std::size_t>(c));
    if (c <= direct_limit) {
        for (std::int64_t m = 0; m < c; ++m)
            out[static_cast<std::size_t>(m)] = gauss_sum(a, m, c);
        return out;
    }
    Dft dft(static_cast<std::size_t>(c));
    auto in = dft.input();
    const double inv = 1.0 / static_cast<double>(c);
    for (std::int64_t n = 0; n < c; ++n)
        in[static_cast<std::size_t>(n)] =
            std::polar(1.0, kTwoPi * static_cast<double>(detail::quadratic_residue(a, 0, n, c)) * inv);
    dft.backward();
    std::copy(dft.output().begin(), dft.output().end(), out.begin());
    return out;
}

struct DeltaTrain {
    std::vector<double> locations;     // sorted, one period starting at or after s = 0
    std::vector<Complex> coefficients; // one per location
    double modulus = 0.0;              // common |coefficient|, c_{theta,q}
    double global_phase = 0.0;         // (theta0^2 / 2 pi) p/q, or p/(q/2) for q even

    std::size_t size() const { return locations.size(); }
};

/// Location index window: delta i sits at s = shift_total + 2 pi i / (M q).
struct DeltaIndexRange {
    long long first = 0;
    long long count = 0;
};

namespace detail {

inline DeltaIndexRange delta_index_range(const PolygonConfig& cfg, const RationalTime& rt)
{
    // shift_total * M q / 2 pi = theta0 p / pi
    long long first = 0;
    if (cfg.theta0_pi) {
        const __int128 num = static_cast<__int128>(cfg.theta0_pi->num) * rt.p;
        const __int128 den = cfg.theta0_pi->den;
        first = -static_cast<long long>(num / den); // ceil(-num/den), num >= 0
    } else {
        first = static_cast<long long>(std::ceil(-cfg.theta0 * static_cast<double>(rt.p) / kPi));
    }
    return {first, cfg.M * rt.q};
}

inline bool admissible_residue(Parity parity, long long m)
{
    switch (parity) {
    case Parity::q_odd:
        return true;
    case Parity::q_half_even:
        return m % 2 == 0;
    case Parity::q_half_odd:
        return m % 2 == 1;
    }
    return false;
}

} // namespace detail

/// Corner locations of the polygon at t_pq in [0, 2 pi), ascending.
inline std::vector<double> delta_locations(const PolygonConfig& cfg, const RationalTime& rt)
{
    const auto range = detail::delta_index_range(cfg, rt);
    const double unit = kTwoPi / (cfg.M * static_cast<double>(rt.q));
    std::vector<double> locs;
    locs.reserve(static_cast<std::size_t>(rt.corner_count));
    for (long long i = range.first; i < range.first + range.count; ++i) {
        const long long m = detail::floor_mod(i, rt.q);
        if (detail::admissible_residue(rt.parity, m))
            locs.push_back(std::max(0.0, rt.galilean_shift_total + unit * static_cast<double>(i)));
    }
    return locs;
}

/// Dirac-delta train of psi_theta(., t_pq) over one period. Coefficient phases are
/// arg G(-p, m, q) + k theta0 + m theta0 / q plus the global phase; all moduli equal
/// c_theta0 / sqrt(q) (q odd) or c_theta0 / sqrt(q/2) (q even).
inline DeltaTrain delta_train(const PolygonConfig& cfg, const RationalTime& rt)
{
    const auto range = detail::delta_index_range(cfg, rt);
    const double unit = kTwoPi / (cfg.M * static_cast<double>(rt.q));
    const double qd = static_cast<double>(rt.q);
    const double pd = static_cast<double>(rt.p);

    DeltaTrain train;
    if (rt.parity == Parity::q_odd) {
        train.modulus = cfg.c_theta0 / std::sqrt(qd);
        train.global_phase = cfg.theta0 * cfg.theta0 / kTwoPi * pd / qd;
    } else {
        train.modulus = cfg.c_theta0 / std::sqrt(0.5 * qd);
        train.global_phase = cfg.theta0 * cfg.theta0 / kTwoPi * pd / (0.5 * qd);
    }

    const std::vector<Complex> sums = gauss_sums_all(-rt.p, rt.q);
    train.locations.reserve(static_cast<std::size_t>(rt.corner_count));
    train.coefficients.reserve(static_cast<std::size_t>(rt.corner_count));
    for (long long i = range.first; i < range.first + range.count; ++i) {
        const long long m = detail::floor_mod(i, rt.q);
        if (!detail::admissible_residue(rt.parity, m))
            continue;
        const long long k = (i - m) / rt.q;
        const double phase = std::arg(sums[static_cast<std::size_t>(m)]) + static_cast<double>(k) * cfg.theta0 +
                             static_cast<double>(m) * cfg.theta0 / qd + train.global_phase;
        train.locations.push_back(std::max(0.0, rt.galilean_shift_total + unit * static_cast<double>(i)));
        train.coefficients.push_back(std::polar(train.modulus, phase));
    }
    return train;
}

} // namespace vfe
