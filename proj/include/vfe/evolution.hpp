#pragma once

// Pseudo-spectral RK4 integration of the Schrodinger map T_t = T ^ T_ss for
// M-fold symmetric tangent fields. Only N/M nodes are stored:
//     v(s) = e^{-is} (T1 + i T2)(s),   w(s) = T3(s),   s_j = 2 pi j / N, j < N/M,
// both (2 pi/M)-periodic. Mode j of v carries wavenumber M j + 1 of T1 + i T2,
// mode j of w carries wavenumber M j. The corner X(0, t) follows X_t = T ^ T_s
// inside the same Runge-Kutta stages.

#include "vfe/errors.hpp"
#include "vfe/fft.hpp"
#include "vfe/gauss.hpp"
#include "vfe/geometry.hpp"
#include "vfe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace vfe {

struct ReducedState {
    int M = 3;
    int N = 0;
    double t = 0.0;
    std::vector<Complex> v; // e^{-is}(T1 + i T2) on the reduced grid
    std::vector<double> w;  // T3 on the reduced grid
    Vec3 anchor = Vec3::Zero(); // X(0, t)

    std::size_t reduced_size() const { return v.size(); }
    double ds() const { return kTwoPi / N; }
    double node(std::size_t j) const { return ds() * static_cast<double>(j); }

    /// Tangent at reduced node j (s_j < 2 pi / M).
    Vec3 tangent(std::size_t j) const
    {
        const Complex u = std::polar(1.0, node(j)) * v[j];
        return {u.real(), u.imag(), w[j]};
    }
};

/// Largest stable time step: RK4 reaches 2 sqrt(2) on the imaginary axis and the
/// stiffest mode of i d^2/ds^2 is (N/2)^2, so dt <= 2 sqrt(2) / pi^2 ds^2.
inline constexpr double kStabilityConstant = 2.0 * std::numbers::sqrt2 / (std::numbers::pi * std::numbers::pi);

inline double max_stable_dt(int N)
{
    const double ds = kTwoPi / N;
    return kStabilityConstant * ds * ds;
}

/// Pack full-grid samples into the reduced representation.
inline ReducedState reduce_state(std::span<const CurveSample> samples, const PolygonConfig& cfg,
                                 double symmetry_tol = 1e-8)
{
    const int N = static_cast<int>(samples.size());
    if (N == 0 || N % cfg.M != 0)
        throw ConfigError("reduce_state: sample count must be a positive multiple of M");
    const int n = N / cfg.M;
    ReducedState st;
    st.M = cfg.M;
    st.N = N;
    st.v.resize(static_cast<std::size_t>(n));
    st.w.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const auto& smp = samples[static_cast<std::size_t>(j)];
        const double s = kTwoPi * j / N;
        st.v[static_cast<std::size_t>(j)] =
            std::polar(1.0, -s) * Complex(smp.tangent.x(), smp.tangent.y());
        st.w[static_cast<std::size_t>(j)] = smp.tangent.z();
    }
    // every other copy must be the rotated image of the first
    for (int k = 1; k < cfg.M; ++k) {
        const Mat3 rz = rot_z(kTwoPi * k / cfg.M);
        for (int j = 0; j < n; ++j) {
            const Vec3 expect = rz * samples[static_cast<std::size_t>(j)].tangent;
            const Vec3& got = samples[static_cast<std::size_t>(k * n + j)].tangent;
            if ((expect - got).cwiseAbs().maxCoeff() > symmetry_tol)
                throw ConsistencyError("reduce_state: samples break the " + std::to_string(cfg.M) +
                                       "-fold rotational symmetry at node " + std::to_string(k * n + j));
        }
    }
    st.anchor = samples.front().position;
    return st;
}

/// Full-grid tangents T(s_j), j < N, from the symmetry T(s + 2 pi/M) = Rot_z(2 pi/M) T(s).
inline std::vector<Vec3> expand_tangents(const ReducedState& st)
{
    const std::size_t n = st.reduced_size();
    std::vector<Vec3> out(static_cast<std::size_t>(st.N));
    for (int k = 0; k < st.M; ++k) {
        const Mat3 rz = rot_z(kTwoPi * k / st.M);
        for (std::size_t j = 0; j < n; ++j)
            out[k * n + j] = rz * st.tangent(j);
    }
    return out;
}

struct EvolutionOptions {
    bool renormalize = true; // project T back onto the unit sphere after every step
    bool dealias = false;    // 2/3-rule filter after every step
};

/// Time derivative of a reduced state.
struct StateRate {
    std::vector<Complex> dv;
    std::vector<double> dw;
    Vec3 anchor = Vec3::Zero();
};

/// Spectral operators on one reduced grid; owns FFT plans and work buffers.
class ReducedSpectral {
public:
    ReducedSpectral(int M, int N) : M_(M), N_(N), n_(static_cast<std::size_t>(N / M)), dft_(n_)
    {
        if (N <= 0 || N % M != 0)
            throw ConfigError("ReducedSpectral: N must be a positive multiple of M");
        kv_.resize(n_);
        kw_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            // signed mode index in [-n/2, n/2)
            long long idx = static_cast<long long>(j);
            if (j >= (n_ + 1) / 2)
                idx -= static_cast<long long>(n_);
            kv_[j] = static_cast<double>(M * idx + 1);
            kw_[j] = static_cast<double>(M * idx);
        }
        // first derivative of a real field drops the unpaired Nyquist mode
        kw1_ = kw_;
        if (n_ % 2 == 0)
            kw1_[n_ / 2] = 0.0;
        vhat_.resize(n_);
        what_.resize(n_);
        uss_.resize(n_);
        wss_.resize(n_);
    }

    int M() const { return M_; }
    int N() const { return N_; }
    std::size_t size() const { return n_; }
    /// Full-grid wavenumber of v-mode j (T1 + i T2) and of w-mode j (T3).
    double v_wavenumber(std::size_t j) const { return kv_[j]; }
    double w_wavenumber(std::size_t j) const { return kw_[j]; }

    /// Normalized coefficients: x(s_j) = sum_k xhat_k e^{i k' s_j} on the reduced grid.
    void transform(std::span<const Complex> x, std::vector<Complex>& xhat)
    {
        std::copy(x.begin(), x.end(), dft_.input().begin());
        dft_.forward();
        const double inv = 1.0 / static_cast<double>(n_);
        xhat.resize(n_);
        for (std::size_t j = 0; j < n_; ++j)
            xhat[j] = dft_.output()[j] * inv;
    }
    void transform(std::span<const double> x, std::vector<Complex>& xhat)
    {
        auto in = dft_.input();
        for (std::size_t j = 0; j < n_; ++j)
            in[j] = x[j];
        dft_.forward();
        const double inv = 1.0 / static_cast<double>(n_);
        xhat.resize(n_);
        for (std::size_t j = 0; j < n_; ++j)
            xhat[j] = dft_.output()[j] * inv;
    }
    void synthesize(std::span<const Complex> xhat, std::vector<Complex>& x)
    {
        std::copy(xhat.begin(), xhat.end(), dft_.input().begin());
        dft_.backward();
        x.assign(dft_.output().begin(), dft_.output().end());
    }

    /// (v_t, w_t) = reduced form of T ^ T_ss, plus X_t(0) = (T ^ T_s)(0).
    void rhs(const ReducedState& st, StateRate& out)
    {
        transform(std::span<const Complex>(st.v), vhat_);
        transform(std::span<const double>(st.w), what_);

        Complex us0{}; // (T1 + i T2)_s at s = 0
        double ws0 = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            us0 += Complex(0.0, kv_[j]) * vhat_[j];
            ws0 += (Complex(0.0, kw1_[j]) * what_[j]).real();
        }
        for (std::size_t j = 0; j < n_; ++j) {
            vhat_[j] *= -kv_[j] * kv_[j];
            what_[j] *= -kw_[j] * kw_[j];
        }
        synthesize(vhat_, uss_); // e^{-is} (T1 + i T2)_ss
        synthesize(what_, wss_); // T3_ss (real part)

        out.dv.resize(n_);
        out.dw.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const double wj = st.w[j];
            const double wssj = wss_[j].real();
            const Complex& vj = st.v[j];
            const Complex& uj = uss_[j];
            // (T ^ T_ss)_1 + i (T ^ T_ss)_2 = i (T3 U - U3 u), third = Im(conj(u) U)
            out.dv[j] = Complex(0.0, 1.0) * (wj * uj - wssj * vj);
            out.dw[j] = (std::conj(vj) * uj).imag();
        }

        const Vec3 t0(st.v[0].real(), st.v[0].imag(), st.w[0]);
        const Vec3 ts0(us0.real(), us0.imag(), ws0);
        out.anchor = t0.cross(ts0);
    }

    /// Spectral antiderivative I(s_j) = int_0^{s_j} T ds on the reduced nodes,
    /// zero modes of T3 integrated as (mean tangent) * s.
    std::vector<Vec3> antiderivative(const ReducedState& st)
    {
        transform(std::span<const Complex>(st.v), vhat_);
        transform(std::span<const double>(st.w), what_);
        std::vector<Complex> a(n_), b(n_);
        // horizontal: sum_j vhat_j (e^{i k s} - 1) / (i k); v-wavenumbers never vanish for M >= 3
        Complex hconst{};
        for (std::size_t j = 0; j < n_; ++j) {
            a[j] = vhat_[j] / Complex(0.0, kv_[j]);
            hconst -= a[j];
        }
        Complex vconst{};
        for (std::size_t j = 0; j < n_; ++j) {
            if (kw_[j] == 0.0) {
                b[j] = 0.0;
            } else {
                b[j] = what_[j] / Complex(0.0, kw_[j]);
                vconst -= b[j];
            }
        }
        const double w0 = what_[0].real();
        std::vector<Complex> ha, va;
        synthesize(a, ha); // sum a_j e^{i (M j) s_j}, still missing the e^{i s} factor
        synthesize(b, va);
        std::vector<Vec3> out(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const double s = st.node(j);
            const Complex h = std::polar(1.0, s) * ha[j] + hconst;
            out[j] = Vec3(h.real(), h.imag(), va[j].real() + vconst.real() + w0 * s);
        }
        return out;
    }

    /// Integral of T over one symmetry cell [0, 2 pi / M).
    Vec3 cell_increment(const ReducedState& st)
    {
        transform(std::span<const Complex>(st.v), vhat_);
        transform(std::span<const double>(st.w), what_);
        const double L = kTwoPi / M_;
        Complex h{};
        for (std::size_t j = 0; j < n_; ++j)
            h += vhat_[j] * (std::polar(1.0, kv_[j] * L) - 1.0) / Complex(0.0, kv_[j]);
        return {h.real(), h.imag(), what_[0].real() * L};
    }

    /// Height of the center of mass over the full grid:
    /// mean_j X3(s_j) over N/M nodes plus pi b (M - 1) / M.
    double height(const ReducedState& st, double b)
    {
        transform(std::span<const double>(st.w), what_);
        // mean over nodes of int_0^{s_j} T3 = w0 mean(s_j) - sum_{k != 0} what_k / (i k)
        double mean_int = what_[0].real() * st.ds() * 0.5 * static_cast<double>(n_ - 1);
        for (std::size_t j = 1; j < n_; ++j)
            mean_int -= (what_[j] / Complex(0.0, kw_[j])).real();
        return st.anchor.z() + mean_int + kPi * b * (M_ - 1) / M_;
    }

    void dealias(ReducedState& st)
    {
        const double cutoff = static_cast<double>(N_) / 3.0;
        transform(std::span<const Complex>(st.v), vhat_);
        transform(std::span<const double>(st.w), what_);
        for (std::size_t j = 0; j < n_; ++j) {
            if (std::abs(kv_[j]) > cutoff)
                vhat_[j] = 0.0;
            if (std::abs(kw_[j]) > cutoff)
                what_[j] = 0.0;
        }
        std::vector<Complex> x;
        synthesize(vhat_, x);
        std::copy(x.begin(), x.end(), st.v.begin());
        synthesize(what_, x);
        for (std::size_t j = 0; j < n_; ++j)
            st.w[j] = x[j].real();
    }

private:
    int M_;
    int N_;
    std::size_t n_;
    Dft dft_;
    std::vector<double> kv_, kw_, kw1_;
    std::vector<Complex> vhat_, what_, uss_, wss_;
};

/// Full curve X(s_j, t), j < N, from X(0, t) plus the spectral antiderivative of T.
inline std::vector<Vec3> expand_curve(const ReducedState& st, ReducedSpectral& ops)
{
    const auto cell = ops.antiderivative(st);
    const Vec3 inc = ops.cell_increment(st);
    const std::size_t n = st.reduced_size();
    std::vector<Vec3> out(static_cast<std::size_t>(st.N));
    Vec3 offset = Vec3::Zero();
    for (int k = 0; k < st.M; ++k) {
        const Mat3 rz = rot_z(kTwoPi * k / st.M);
        for (std::size_t j = 0; j < n; ++j)
            out[k * n + j] = st.anchor + offset + rz * cell[j];
        offset += rz * inc;
    }
    return out;
}

inline std::vector<Vec3> expand_curve(const ReducedState& st)
{
    ReducedSpectral ops(st.M, st.N);
    return expand_curve(st, ops);
}

/// Classical four-stage Runge-Kutta stepper with reusable stage buffers.
class Rk4Stepper {
public:
    Rk4Stepper(int M, int N, EvolutionOptions opts = {}) : ops_(M, N), opts_(opts) {}

    ReducedSpectral& operators() { return ops_; }
    const EvolutionOptions& options() const { return opts_; }

    void step(ReducedState& st, double dt, std::size_t step_index = 0)
    {
        if (dt == 0.0)
            return;
        const std::size_t n = st.reduced_size();
        ops_.rhs(st, k1_);
        stage(st, k1_, 0.5 * dt);
        ops_.rhs(tmp_, k2_);
        stage(st, k2_, 0.5 * dt);
        ops_.rhs(tmp_, k3_);
        stage(st, k3_, dt);
        ops_.rhs(tmp_, k4_);
        const double w6 = dt / 6.0;
        for (std::size_t j = 0; j < n; ++j) {
            st.v[j] += w6 * (k1_.dv[j] + 2.0 * k2_.dv[j] + 2.0 * k3_.dv[j] + k4_.dv[j]);
            st.w[j] += w6 * (k1_.dw[j] + 2.0 * k2_.dw[j] + 2.0 * k3_.dw[j] + k4_.dw[j]);
        }
        st.anchor += w6 * (k1_.anchor + 2.0 * k2_.anchor + 2.0 * k3_.anchor + k4_.anchor);
        st.t += dt;

        if (opts_.dealias)
            ops_.dealias(st);
        double worst = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double norm = std::sqrt(std::norm(st.v[j]) + st.w[j] * st.w[j]);
            if (!std::isfinite(norm))
                throw BlowUpError(step_index, "non-finite tangent at node " + std::to_string(j));
            worst = std::max(worst, norm);
            if (opts_.renormalize) {
                st.v[j] /= norm;
                st.w[j] /= norm;
            }
        }
        if (!st.anchor.allFinite() || worst > 1e6)
            throw BlowUpError(step_index, "solution overflow");
    }

private:
    void stage(const ReducedState& st, const StateRate& k, double h)
    {
        tmp_.M = st.M;
        tmp_.N = st.N;
        tmp_.t = st.t + h;
        tmp_.v.resize(st.v.size());
        tmp_.w.resize(st.w.size());
        for (std::size_t j = 0; j < st.v.size(); ++j) {
            tmp_.v[j] = st.v[j] + h * k.dv[j];
            tmp_.w[j] = st.w[j] + h * k.dw[j];
        }
        tmp_.anchor = st.anchor + h * k.anchor;
    }

    ReducedSpectral ops_;
    EvolutionOptions opts_;
    StateRate k1_, k2_, k3_, k4_;
    ReducedState tmp_;
};

/// Single RK4 step on a copy of `st`.
inline ReducedState step_rk4(const ReducedState& st, double dt, EvolutionOptions opts = {})
{
    Rk4Stepper stepper(st.M, st.N, opts);
    ReducedState out = st;
    stepper.step(out, dt);
    return out;
}

inline ReducedState initial_state(const PolygonConfig& cfg, int N)
{
    const auto samples = sample_grid(cfg, N);
    return reduce_state(samples, cfg);
}

struct HeightSample {
    double t;
    double h;
};

struct EvolutionResult {
    std::vector<double> times;       // every recorded step
    std::vector<Vec3> trajectory;    // X(0, t)
    std::vector<HeightSample> heights;
    ReducedState final_state;
    std::vector<ReducedState> snapshots; // at the requested times, in request order
    double dt = 0.0;
};

struct EvolveRequest {
    int n_per_side = 480; // N / M
    long long Nt = 0;     // number of steps
    double t_end = 0.0;
    EvolutionOptions options;
    std::vector<double> snapshot_times;
    std::size_t record_stride = 1;
    /// Called after every accepted step (and once at t = 0) on the integrating thread.
    std::function<void(std::size_t, const ReducedState&)> observer;
};

/// Integrate from the sampled initial polygon with dt = t_end / Nt.
inline EvolutionResult evolve(const PolygonConfig& cfg, const EvolveRequest& req)
{
    if (req.n_per_side <= 0)
        throw ConfigError("evolve: N/M must be positive");
    if (req.Nt < 0 || (req.Nt == 0 && req.t_end != 0.0) || req.t_end < 0.0)
        throw ConfigError("evolve: need Nt >= 1 steps for a positive t_end");
    const int N = req.n_per_side * cfg.M;
    const double dt = req.Nt > 0 ? req.t_end / static_cast<double>(req.Nt) : 0.0;
    if (dt > max_stable_dt(N))
        throw ConfigError("evolve: dt = " + std::to_string(dt) + " exceeds the stability bound " +
                          std::to_string(max_stable_dt(N)) + " for N = " + std::to_string(N));
    const std::size_t stride = std::max<std::size_t>(1, req.record_stride);

    // map snapshot times onto step indices
    std::vector<std::pair<long long, std::size_t>> snaps;
    for (std::size_t i = 0; i < req.snapshot_times.size(); ++i) {
        const double ts = req.snapshot_times[i];
        const long long k = dt > 0 ? std::llround(ts / dt) : 0;
        const double err = std::abs(static_cast<double>(k) * dt - ts);
        if (k < 0 || k > req.Nt || err > 1e-9 * std::max(1.0, std::abs(ts)))
            throw ConfigError("evolve: snapshot time " + std::to_string(ts) + " is not a step boundary");
        snaps.emplace_back(k, i);
    }

    EvolutionResult res;
    res.dt = dt;
    res.snapshots.resize(snaps.size());
    Rk4Stepper stepper(cfg.M, N, req.options);
    ReducedState st = initial_state(cfg, N);

    const auto record = [&](long long step) {
        if (step % static_cast<long long>(stride) == 0 || step == req.Nt) {
            res.times.push_back(st.t);
            res.trajectory.push_back(st.anchor);
            res.heights.push_back({st.t, stepper.operators().height(st, cfg.b)});
        }
        for (const auto& [k, idx] : snaps)
            if (k == step)
                res.snapshots[idx] = st;
        if (req.observer)
            req.observer(static_cast<std::size_t>(step), st);
    };

    const std::size_t expected = static_cast<std::size_t>(req.Nt / static_cast<long long>(stride)) + 2;
    res.times.reserve(expected);
    res.trajectory.reserve(expected);
    res.heights.reserve(expected);

    record(0);
    for (long long k = 1; k <= req.Nt; ++k) {
        stepper.step(st, dt, static_cast<std::size_t>(k));
        st.t = static_cast<double>(k) * dt; // avoid drift of the accumulated time
        record(k);
    }
    res.final_state = std::move(st);
    return res;
}

struct CenterSpeedEstimate {
    double finite_difference = 0.0; // (h(T_f) - h(0)) / T_f
    double least_squares = 0.0;     // slope of the linear fit over all recorded heights
    double fit_residual = 0.0;      // max |h - fit|
};

inline CenterSpeedEstimate center_speed_num(const EvolutionResult& res, const PolygonConfig& cfg)
{
    const double tf = cfg.time_period();
    if (res.heights.size() < 2 || res.heights.back().t < tf * (1.0 - 1e-12))
        throw PreconditionError("center_speed_num: evolution must span at least one period T_f");
    CenterSpeedEstimate est;
    const auto it = std::min_element(res.heights.begin(), res.heights.end(), [&](const auto& x, const auto& y) {
        return std::abs(x.t - tf) < std::abs(y.t - tf);
    });
    est.finite_difference = (it->h - res.heights.front().h) / (it->t - res.heights.front().t);

    const double n = static_cast<double>(res.heights.size());
    double st = 0, sh = 0, stt = 0, sth = 0;
    for (const auto& hs : res.heights) {
        st += hs.t;
        sh += hs.h;
        stt += hs.t * hs.t;
        sth += hs.t * hs.h;
    }
    est.least_squares = (n * sth - st * sh) / (n * stt - st * st);
    const double icpt = (sh - est.least_squares * st) / n;
    for (const auto& hs : res.heights)
        est.fit_residual = std::max(est.fit_residual, std::abs(hs.h - icpt - est.least_squares * hs.t));
    return est;
}

/// Side-averaged tangent: mean of the samples with s in [start + L/4, start + 3L/4),
/// normalized. `tangents` are full-grid samples at s_j = 2 pi j / N.
inline Vec3 side_mean_tangent(std::span<const Vec3> tangents, double start, double length)
{
    const std::size_t N = tangents.size();
    const double ds = kTwoPi / static_cast<double>(N);
    const double lo = start + 0.25 * length;
    const double hi = start + 0.75 * length;
    const long long j0 = static_cast<long long>(std::ceil(lo / ds - 1e-9));
    const long long j1 = static_cast<long long>(std::ceil(hi / ds - 1e-9)); // exclusive
    if (j1 - j0 < 2)
        throw ResolutionError("side_mean_tangent: fewer than 2 samples in the inner half of a side");
    Vec3 acc = Vec3::Zero();
    for (long long j = j0; j < j1; ++j)
        acc += tangents[static_cast<std::size_t>(detail::floor_mod(j, static_cast<long long>(N)))];
    return acc.normalized();
}

struct NumericAngles {
    std::vector<double> rho;  // arccos(T_j . T_{j+1}) per side
    double rho_exact = 0.0;
    double abs_error = 0.0;
    double rel_error = 0.0;
};

/// Corner angles of a sampled tangent field at t_pq, against rho_q.
inline NumericAngles numeric_angles(std::span<const Vec3> tangents, const PolygonConfig& cfg,
                                    const RationalTime& rt, double rho_exact)
{
    const auto locs = delta_locations(cfg, rt);
    const double h = rt.spacing();
    const std::size_t n = locs.size();
    std::vector<Vec3> sides(n);
    for (std::size_t j = 0; j < n; ++j)
        sides[j] = side_mean_tangent(tangents, locs[j], h);
    NumericAngles out;
    out.rho_exact = rho_exact;
    out.rho.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double c = std::clamp(sides[j].dot(sides[(j + 1) % n]), -1.0, 1.0);
        out.rho[j] = std::acos(c);
        out.abs_error = std::max(out.abs_error, std::abs(rho_exact - out.rho[j]));
    }
    out.rel_error = out.abs_error / rho_exact;
    return out;
}

} // namespace vfe
