#pragma once

// Corner-trajectory analysis: polar/detrended channels, Fourier fingerprints,
// dominant frequency sets, Riemann-type reference series, stereographic
// projection, affine least-squares fits and the phase shift after one period.

#include "vfe/errors.hpp"
#include "vfe/evolution.hpp"
#include "vfe/fft.hpp"
#include "vfe/gauss.hpp"
#include "vfe/geometry.hpp"
#include "vfe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace vfe {

struct TrajectorySeries {
    std::vector<double> times;
    std::vector<Vec3> points; // X(0, t)
    double c_M = 0.0;         // vertical drift removed from X3

    std::size_t size() const { return times.size(); }
};

inline TrajectorySeries trajectory_series(const EvolutionResult& res, const PolygonConfig& cfg)
{
    return {res.times, res.trajectory, cfg.c_M};
}

struct TrajectoryChannels {
    std::vector<double> R;
    std::vector<double> nu;     // unwrapped azimuth, NaN where R = 0
    std::vector<double> X3tilde;
    std::vector<bool> nu_defined;
};

inline TrajectoryChannels trajectory_components(const TrajectorySeries& traj, double radius_floor = 1e-14)
{
    if (traj.points.size() != traj.times.size())
        throw ArgumentError("trajectory_components: times and points differ in length");
    TrajectoryChannels ch;
    const std::size_t n = traj.size();
    ch.R.resize(n);
    ch.nu.resize(n);
    ch.X3tilde.resize(n);
    ch.nu_defined.resize(n);
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& x = traj.points[i];
        ch.R[i] = std::hypot(x.x(), x.y());
        ch.X3tilde[i] = x.z() - traj.c_M * traj.times[i];
        if (ch.R[i] <= radius_floor) {
            ch.nu[i] = std::numeric_limits<double>::quiet_NaN();
            ch.nu_defined[i] = false;
            continue;
        }
        double a = std::atan2(x.y(), x.x());
        if (!std::isnan(prev))
            a = prev + wrap_centered(a - prev, kTwoPi); // nearest branch
        ch.nu[i] = a;
        ch.nu_defined[i] = true;
        prev = a;
    }
    return ch;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Least-squares line through the finite samples.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y)
{
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(y[i]))
            continue;
        n += 1;
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    if (n < 2 || den == 0.0)
        throw DegenerateFitError("linear_fit: fewer than two distinct abscissae");
    LinearFit f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

/// Repeat time of the corner trajectory for theta0 = pi c/d: (d/2) T_f when c d is odd, d T_f otherwise.
inline double trajectory_period(const PolygonConfig& cfg)
{
    if (!cfg.theta0_pi)
        throw ArgumentError("trajectory_period: theta0 must be given as an exact fraction of pi");
    const auto& f = *cfg.theta0_pi;
    const double d = static_cast<double>(f.den);
    return f.product_odd() ? 0.5 * d * cfg.time_period() : d * cfg.time_period();
}

struct Fingerprint {
    std::vector<int> indices;         // n = 1..n_max
    std::vector<Complex> values;      // n * coefficient(n)
    std::vector<Complex> coefficients; // coefficient(n) = mean of x e^{-2 pi i n t / period}
    double period = 0.0;
    std::string channel;
    std::string scaling = "n*coefficient";

    Complex value(int n) const { return values.at(static_cast<std::size_t>(n - 1)); }
};

namespace detail {

// Number of whole periods covered by L uniform samples of spacing dt.
inline long long whole_periods(double dt, std::size_t L, double period)
{
    const double k = dt * static_cast<double>(L) / period;
    const long long K = std::llround(k);
    if (K < 1 || std::abs(k - static_cast<double>(K)) > 1e-8 * std::max(1.0, k))
        throw ArgumentError("fingerprint: samples cover " + std::to_string(k) +
                            " periods; need a whole number");
    return K;
}

inline double uniform_spacing(std::span<const double> times)
{
    if (times.size() < 2)
        throw ArgumentError("fingerprint: need at least two samples");
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i)
        if (std::abs(times[i] - times[i - 1] - dt) > 1e-6 * dt)
            throw ArgumentError("fingerprint: samples are not uniformly spaced");
    return dt;
}

} // namespace detail

/// Fourier fingerprint of uniformly sampled data. The samples must cover a whole
/// number of periods; a closing sample equal in phase to the first is dropped.
inline Fingerprint fingerprint(std::span<const Complex> samples, std::span<const double> times, double period,
                               int n_max, std::string channel = {})
{
    if (samples.size() != times.size())
        throw ArgumentError("fingerprint: samples and times differ in length");
    if (!(period > 0.0))
        throw ArgumentError("fingerprint: period must be positive");
    const double dt = detail::uniform_spacing(times);
    std::size_t L = samples.size();
    // closed sampling [t0, t0 + K P] includes the endpoint
    {
        const double k_closed = dt * static_cast<double>(L - 1) / period;
        if (std::abs(k_closed - std::round(k_closed)) <= 1e-8 * std::max(1.0, k_closed) && k_closed >= 0.5)
            L -= 1;
    }
    const long long K = detail::whole_periods(dt, L, period);
    if (n_max < 1 || static_cast<std::size_t>(n_max) * static_cast<std::size_t>(K) >= L / 2)
        throw ArgumentError("fingerprint: n_max must satisfy n_max * periods < samples / 2");

    Dft dft(L);
    std::copy(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(L), dft.input().begin());
    dft.forward();
    Fingerprint fp;
    fp.period = period;
    fp.channel = std::move(channel);
    const double t0 = times.front();
    for (int n = 1; n <= n_max; ++n) {
        const auto bin = static_cast<std::size_t>(n) * static_cast<std::size_t>(K);
        const Complex c = dft.output()[bin] / static_cast<double>(L) * std::polar(1.0, -kTwoPi * n * t0 / period);
        fp.indices.push_back(n);
        fp.coefficients.push_back(c);
        fp.values.push_back(static_cast<double>(n) * c);
    }
    return fp;
}

inline Fingerprint fingerprint(std::span<const double> samples, std::span<const double> times, double period,
                               int n_max, std::string channel = {})
{
    std::vector<Complex> z(samples.begin(), samples.end());
    return fingerprint(std::span<const Complex>(z), times, period, n_max, std::move(channel));
}

/// Indices of the `count` largest |values|, largest first.
inline std::vector<int> dominant_indices(const Fingerprint& fp, std::size_t count)
{
    std::vector<std::size_t> order(fp.values.size());
    std::iota(order.begin(), order.end(), 0);
    count = std::min(count, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                      [&](std::size_t a, std::size_t b) { return std::abs(fp.values[a]) > std::abs(fp.values[b]); });
    std::vector<int> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(fp.indices[order[i]]);
    return out;
}

enum class FrequencyKind { cd, corners };

struct FrequencySet {
    FrequencyKind kind = FrequencyKind::cd;
    long long c = 0, d = 1; // for A_cd
    int M = 0;              // for A_M
    std::vector<long long> members;

    bool contains(long long k) const { return std::binary_search(members.begin(), members.end(), k); }
};

/// A_cd = {n (n d + c) / 2 : n in Z} intersected with N when c d is odd, without the
/// halving when c d is even; members up to `bound`.
inline FrequencySet frequency_set_cd(long long c, long long d, long long bound)
{
    if (c < 0 || d < 1 || std::gcd(c, d) != 1)
        throw ArgumentError("frequency_set_cd: need gcd(c, d) = 1 with d >= 1");
    FrequencySet fs;
    fs.kind = FrequencyKind::cd;
    fs.c = c;
    fs.d = d;
    const bool odd = (c * d) % 2 != 0;
    for (long long n = 1;; ++n) {
        bool any = false;
        for (long long m : {n, -n}) {
            long long v = m * (m * d + c);
            if (odd)
                v /= 2;
            if (v > 0 && v <= bound) {
                fs.members.push_back(v);
                any = true;
            }
            if (v <= bound)
                any = true;
        }
        if (!any)
            break;
    }
    std::sort(fs.members.begin(), fs.members.end());
    fs.members.erase(std::unique(fs.members.begin(), fs.members.end()), fs.members.end());
    return fs;
}

/// A_M = {1} union {n M +- 1 : n >= 1}, members up to `bound`.
inline FrequencySet frequency_set_corners(int M, long long bound)
{
    if (M < 1)
        throw ArgumentError("frequency_set_corners: M must be positive");
    FrequencySet fs;
    fs.kind = FrequencyKind::corners;
    fs.M = M;
    if (bound >= 1)
        fs.members.push_back(1);
    for (long long n = 1; n * M - 1 <= bound; ++n) {
        fs.members.push_back(n * M - 1);
        if (n * M + 1 <= bound)
            fs.members.push_back(n * M + 1);
    }
    std::sort(fs.members.begin(), fs.members.end());
    fs.members.erase(std::unique(fs.members.begin(), fs.members.end()), fs.members.end());
    fs.members.erase(std::remove_if(fs.members.begin(), fs.members.end(), [](long long k) { return k < 1; }),
                     fs.members.end());
    return fs;
}

/// First `count` members of a set, growing the bound until enough are found.
template <class Make>
std::vector<long long> first_members(Make make, std::size_t count)
{
    long long bound = 16;
    for (;;) {
        const FrequencySet fs = make(bound);
        if (fs.members.size() >= count)
            return {fs.members.begin(), fs.members.begin() + static_cast<std::ptrdiff_t>(count)};
        bound *= 2;
    }
}

enum class RiemannVariant { classic, phi, phi_cd, phi_M };

struct RiemannParams {
    RiemannVariant variant = RiemannVariant::phi;
    long long c = 1, d = 1; // phi_cd
    int M = 3;              // phi_M
};

struct RiemannTerm {
    long long frequency; // argument is 2 pi i frequency t / base period
    Complex weight;
};

namespace detail {

// Terms written as weight * e^{2 pi i f t / tau}; classic keeps only the imaginary
// part of the phi series, handled by the caller.
inline std::vector<RiemannTerm> riemann_terms(const RiemannParams& prm, std::size_t K, double& tau)
{
    std::vector<RiemannTerm> terms;
    terms.reserve(K);
    switch (prm.variant) {
    case RiemannVariant::classic:
    case RiemannVariant::phi:
        tau = 2.0; // e^{i pi k^2 t}
        for (std::size_t k = 1; k <= K; ++k) {
            const double kk = static_cast<double>(k) * static_cast<double>(k);
            terms.push_back({static_cast<long long>(k * k), Complex(0.0, -1.0 / (kPi * kk))});
        }
        break;
    case RiemannVariant::phi_cd: {
        tau = 1.0;
        const auto ks = first_members([&](long long b) { return frequency_set_cd(prm.c, prm.d, b); }, K);
        for (long long k : ks)
            terms.push_back({k, Complex(1.0 / static_cast<double>(k), 0.0)});
        break;
    }
    case RiemannVariant::phi_M: {
        tau = 1.0;
        const auto ks = first_members([&](long long b) { return frequency_set_corners(prm.M, b); }, K);
        for (long long k : ks)
            terms.push_back({k * k, Complex(1.0 / static_cast<double>(k * k), 0.0)});
        break;
    }
    }
    return terms;
}

// classic is Im sum e^{i pi k^2 t}/(pi k^2) = Im(i * phi)
inline Complex finish_term_sum(RiemannVariant v, const Complex& acc)
{
    return v == RiemannVariant::classic ? Complex((Complex(0.0, 1.0) * acc).imag(), 0.0) : acc;
}

} // namespace detail

/// Truncated Riemann-type series at arbitrary times.
/// classic: sum sin(pi k^2 t)/(pi k^2) (returned as a real part);
/// phi: sum e^{i pi k^2 t}/(i pi k^2); phi_cd: sum over A_cd of e^{2 pi i k t}/k;
/// phi_M: sum over A_M of e^{2 pi i k^2 t}/k^2.
inline std::vector<Complex> riemann_phi(const RiemannParams& prm, std::size_t K, std::span<const double> times)
{
    if (K < 1)
        throw ArgumentError("riemann_phi: need at least one term");
    double tau = 1.0;
    const auto terms = detail::riemann_terms(prm, K, tau);
    std::vector<Complex> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        Complex acc{};
        for (const auto& term : terms) {
            // reduce f t / tau mod 1 before the trigonometric call
            const double x = static_cast<double>(term.frequency) * times[i] / tau;
            acc += term.weight * std::polar(1.0, kTwoPi * (x - std::floor(x)));
        }
        out[i] = detail::finish_term_sum(prm.variant, acc);
    }
    return out;
}

/// Same series on the grid t_j = j tau / L, j < count, where tau is the base period
/// of the variant (2 for classic and phi, 1 otherwise). Frequencies are binned mod L
/// and resolved with one inverse FFT, so the result equals the direct sum.
inline std::vector<Complex> riemann_phi_grid(const RiemannParams& prm, std::size_t K, std::size_t L,
                                             std::size_t count)
{
    if (K < 1 || L < 1)
        throw ArgumentError("riemann_phi_grid: need K >= 1 and L >= 1");
    double tau = 1.0;
    const auto terms = detail::riemann_terms(prm, K, tau);
    Dft dft(L);
    auto bins = dft.input();
    for (const auto& term : terms)
        bins[static_cast<std::size_t>(detail::floor_mod(term.frequency, static_cast<long long>(L)))] += term.weight;
    dft.backward();
    std::vector<Complex> out(count);
    for (std::size_t j = 0; j < count; ++j) {
        const Complex v = dft.output()[j % L];
        out[j] = detail::finish_term_sum(prm.variant, v);
    }
    return out;
}

/// Stereographic projection from the south pole: z = (v1 + i v2) / (1 + v3).
inline std::vector<Complex> stereo_project(std::span<const Vec3> values, double pole_tol = 1e-9)
{
    std::vector<Complex> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double den = 1.0 + values[i].z();
        if (std::abs(den) < pole_tol)
            throw ProjectionPoleError("stereo_project: sample " + std::to_string(i) + " sits on the projection pole");
        out[i] = Complex(values[i].x(), values[i].y()) / den;
    }
    return out;
}

/// Trajectory mode: (X1 + i X2) / (1 + X3tilde).
inline std::vector<Complex> stereo_project(const TrajectorySeries& traj, double pole_tol = 1e-9)
{
    std::vector<Vec3> v(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i)
        v[i] = Vec3(traj.points[i].x(), traj.points[i].y(), traj.points[i].z() - traj.c_M * traj.times[i]);
    return stereo_project(v, pole_tol);
}

/// Inverse of the projection onto the unit sphere.
inline std::vector<Vec3> stereo_unproject(std::span<const Complex> z)
{
    std::vector<Vec3> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double r2 = std::norm(z[i]);
        out[i] = Vec3(2.0 * z[i].real(), 2.0 * z[i].imag(), 1.0 - r2) / (1.0 + r2);
    }
    return out;
}

struct AffineFit {
    double lambda = 0.0;
    Complex mu{};
    double abs_err = 0.0; // max |phi - lambda z - mu|
    double rel_err = 0.0; // max |(phi - lambda z - mu) / phi| over samples with phi != 0
};

/// Real lambda and complex mu minimizing sum |phi - lambda z - mu|^2.
inline AffineFit affine_fit(std::span<const Complex> z, std::span<const Complex> phi)
{
    if (z.size() != phi.size())
        throw ArgumentError("affine_fit: series lengths differ");
    if (z.empty())
        throw ArgumentError("affine_fit: empty series");
    const double n = static_cast<double>(z.size());
    Complex zm{}, pm{};
    for (std::size_t i = 0; i < z.size(); ++i) {
        zm += z[i];
        pm += phi[i];
    }
    zm /= n;
    pm /= n;
    double szz = 0.0, szp = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const Complex dz = z[i] - zm;
        szz += std::norm(dz);
        szp += (std::conj(dz) * (phi[i] - pm)).real();
    }
    if (!(szz > 1e-300))
        throw DegenerateFitError("affine_fit: z is constant");
    AffineFit fit;
    fit.lambda = szp / szz;
    fit.mu = pm - fit.lambda * zm;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double r = std::abs(phi[i] - fit.lambda * z[i] - fit.mu);
        fit.abs_err = std::max(fit.abs_err, r);
        if (std::abs(phi[i]) > 0.0)
            fit.rel_err = std::max(fit.rel_err, r / std::abs(phi[i]));
    }
    return fit;
}

/// Rotate by pi/2 - pi/M, clockwise by default.
inline std::vector<Complex> rotate_align(std::span<const Complex> z, int M, bool clockwise = true)
{
    const double ang = (kPi / 2.0 - kPi / M) * (clockwise ? -1.0 : 1.0);
    const Complex f = std::polar(1.0, ang);
    std::vector<Complex> out(z.size());
    std::transform(z.begin(), z.end(), out.begin(), [&](const Complex& x) { return x * f; });
    return out;
}

/// Azimuthal rotation of the polygon sides after one period T_f, in (-pi/M, pi/M].
/// `initial` and `revived` are full-grid tangents at t = 0 and t = T_f.
inline double phase_shift(std::span<const Vec3> initial, std::span<const Vec3> revived, const PolygonConfig& cfg,
                          const RationalTime& rt)
{
    if (rt.corner_count != cfg.M)
        throw PreconditionError("phase_shift: snapshot must be a revival with M corners (got " +
                                std::to_string(rt.corner_count) + ")");
    const double L = cfg.side_length();
    const Vec3 a = side_mean_tangent(initial, 0.0, L);
    const Vec3 b = side_mean_tangent(revived, rt.galilean_shift, L);
    const double da = std::atan2(b.y(), b.x()) - std::atan2(a.y(), a.x());
    double r = wrap_centered(da, L);
    if (r <= -0.5 * L)
        r += L;
    return r;
}

} // namespace vfe
