#include "catch_amalgamated.hpp"

#include "vfe/evolution.hpp"

#include <cmath>

using namespace vfe;
using Catch::Approx;

namespace {

// Helix T = (a cos(k s - w t), a sin(k s - w t), b) with k = 1 mod M solves
// T_t = T ^ T_ss exactly for w = k^2 b; the corner moves with T ^ T_s.
struct Helix {
    int M;
    int k;
    double a, b;

    double omega() const { return double(k) * k * b; }

    ReducedState state(int n_per_side, double t) const
    {
        ReducedState st;
        st.M = M;
        st.N = n_per_side * M;
        st.t = t;
        st.v.resize(std::size_t(n_per_side));
        st.w.assign(std::size_t(n_per_side), b);
        for (int j = 0; j < n_per_side; ++j) {
            const double s = st.node(std::size_t(j));
            st.v[std::size_t(j)] = std::polar(a, (k - 1) * s - omega() * t);
        }
        st.anchor = anchor(t);
        return st;
    }

    Vec3 anchor(double t) const
    {
        const double w = omega();
        if (w == 0.0)
            return {0.0, 0.0, k * a * a * t};
        return {-k * a * b * std::sin(w * t) / w, k * a * b * (1.0 - std::cos(w * t)) / w, k * a * a * t};
    }
};

double state_error(const ReducedState& x, const ReducedState& y)
{
    double e = (x.anchor - y.anchor).norm();
    for (std::size_t j = 0; j < x.v.size(); ++j)
        e = std::max({e, std::abs(x.v[j] - y.v[j]), std::abs(x.w[j] - y.w[j])});
    return e;
}

} // namespace

TEST_CASE("reduce and expand round trip")
{
    const auto cfg = polygon_config_b(5, 0.35);
    const auto samples = sample_grid(cfg, 5 * 24);
    const auto st = reduce_state(samples, cfg);
    REQUIRE(st.reduced_size() == 24);
    const auto full = expand_tangents(st);
    for (std::size_t j = 0; j < samples.size(); ++j)
        CHECK((full[j] - samples[j].tangent).norm() < 1e-14);

    auto broken = samples;
    broken[30].tangent.x() += 1e-6;
    CHECK_THROWS_AS(reduce_state(broken, cfg), ConsistencyError);
}

TEST_CASE("planar and constant fields")
{
    const auto planar = reduce_state(sample_grid(polygon_config_b(4, 0.0), 64), polygon_config_b(4, 0.0));
    for (double w : planar.w)
        CHECK(w == 0.0);

    ReducedState st;
    st.M = 3;
    st.N = 48;
    st.v.assign(16, Complex{});
    st.w.assign(16, 1.0);
    ReducedSpectral ops(3, 48);
    StateRate r;
    ops.rhs(st, r);
    for (std::size_t j = 0; j < 16; ++j) {
        CHECK(std::abs(r.dv[j]) == 0.0);
        CHECK(r.dw[j] == 0.0);
    }
    CHECK(r.anchor.norm() == 0.0);
}

TEST_CASE("rhs of a one-mode field matches the analytic cross product")
{
    for (int k : {1, 4, -2}) {
        const Helix hx{3, k, 0.6, 0.8};
        const auto st = hx.state(32, 0.0);
        ReducedSpectral ops(3, 96);
        StateRate r;
        ops.rhs(st, r);
        for (std::size_t j = 0; j < st.reduced_size(); ++j) {
            const double s = st.node(j);
            // T ^ T_ss = k^2 a b (sin ks, -cos ks, 0)
            const Complex horiz = double(k) * k * hx.a * hx.b * Complex(std::sin(k * s), -std::cos(k * s));
            CHECK(std::abs(r.dv[j] - std::polar(1.0, -s) * horiz) < 1e-10);
            CHECK(std::abs(r.dw[j]) < 1e-10);
        }
        CHECK((r.anchor - Vec3(-k * hx.a * hx.b, 0.0, k * hx.a * hx.a)).norm() < 1e-10);
    }
}

TEST_CASE("RK4 is fourth order in time")
{
    const Helix hx{3, 4, 0.6, 0.8};
    const double t_end = 0.2;
    EvolutionOptions opts;
    opts.renormalize = false;
    double prev = 0.0;
    for (int steps : {50, 100, 200}) {
        auto st = hx.state(16, 0.0);
        Rk4Stepper stepper(3, 48, opts);
        const double dt = t_end / steps;
        for (int i = 0; i < steps; ++i)
            stepper.step(st, dt);
        const double err = state_error(st, hx.state(16, t_end));
        if (prev > 0.0)
            CHECK(prev / err == Approx(16.0).epsilon(0.1));
        prev = err;
    }
}

TEST_CASE("zero step is the identity")
{
    const auto cfg = polygon_config_b(4, 0.3);
    const auto st = initial_state(cfg, 64);
    const auto out = step_rk4(st, 0.0);
    CHECK(state_error(st, out) == 0.0);
}

TEST_CASE("spectral curve recovery")
{
    const auto cfg = polygon_config_b(5, 0.3);
    const auto samples = sample_grid(cfg, 5 * 64);
    const auto st = reduce_state(samples, cfg);
    const auto curve = expand_curve(st);
    // a polygon has a slowly converging spectrum; compare away from the corners
    const Vec3 per = curve[64] - curve[0];
    CHECK(per.isApprox(corner_position(cfg, 1) - corner_position(cfg, 0), 0.05));
    const Helix hx{3, 4, 0.6, 0.8};
    const auto hs = hx.state(32, 0.0);
    const auto hcurve = expand_curve(hs);
    for (std::size_t j = 0; j < hcurve.size(); ++j) {
        const double s = kTwoPi * double(j) / 96.0;
        const Vec3 exact(hx.a / 4 * std::sin(4 * s), hx.a / 4 * (1 - std::cos(4 * s)), hx.b * s);
        CHECK((hcurve[j] - exact).norm() < 1e-12);
    }
}

TEST_CASE("evolve rejects unstable steps and echoes t_end = 0")
{
    const auto cfg = polygon_config_b(3, 0.4);
    EvolveRequest req;
    req.n_per_side = 64;
    req.Nt = 10;
    req.t_end = cfg.time_period();
    CHECK_THROWS_AS(evolve(cfg, req), ConfigError);
    req.Nt = 0;
    req.t_end = 0.0;
    const auto res = evolve(cfg, req);
    CHECK(res.trajectory.size() == 1);
    CHECK(state_error(res.final_state, initial_state(cfg, 192)) == 0.0);
}

TEST_CASE("planar polygon over one period")
{
    const auto cfg = polygon_config_b(3, 0.0);
    const int n = 96;
    const int N = 3 * n;
    EvolveRequest req;
    req.n_per_side = n;
    req.t_end = cfg.time_period();
    req.Nt = 2 * static_cast<long long>(std::ceil(req.t_end / max_stable_dt(N) / 2));
    req.snapshot_times = {req.t_end / 2};
    Vec3 start = Vec3::Zero();
    double mirror = 0.0;
    const Mat3 q = axis_angle(Vec3(std::cos(-kPi / 3), std::sin(-kPi / 3), 0.0), kPi);
    req.observer = [&](std::size_t step, const ReducedState& st) {
        if (step == 0)
            start = st.anchor;
        if (step % 97 != 0)
            return;
        const auto tg = expand_tangents(st);
        for (int j = 1; j < N; ++j)
            mirror = std::max(mirror, (tg[std::size_t(N - j)] - q * tg[std::size_t(j)]).norm());
    };
    const auto res = evolve(cfg, req);
    CHECK(res.trajectory.size() == std::size_t(req.Nt + 1));
    CHECK(mirror < 1e-10);

    // zero-torsion polygon recurs after T_f
    const auto tg = expand_tangents(res.final_state);
    for (int k = 0; k < 3; ++k) {
        const Vec3 side = side_mean_tangent(tg, kTwoPi * k / 3, kTwoPi / 3);
        CHECK((side - side_tangent(cfg, k)).norm() < 0.02);
    }
    // the center of mass climbs at c_M and the corner trajectory stays in a vertical plane
    const auto speed = center_speed_num(res, cfg);
    CHECK(speed.least_squares == Approx(cfg.c_M).epsilon(0.05));
    CHECK(speed.fit_residual < 1e-3 * cfg.c_M * cfg.time_period() * 10);
    const Vec3 normal(std::cos(-kPi / 3), std::sin(-kPi / 3), 0.0);
    for (const auto& x : res.trajectory)
        CHECK(std::abs((x - start).dot(normal)) < 1e-10);
}

TEST_CASE("numeric angles of exact samples")
{
    const auto cfg = polygon_config_b(4, 0.4);
    const auto rt = rational_time(cfg, 0, 1);
    const auto samples = sample_grid(cfg, 4 * 64);
    std::vector<Vec3> tg;
    for (const auto& s : samples)
        tg.push_back(s.tangent);
    const auto na = numeric_angles(tg, cfg, rt, cfg.rho0);
    CHECK(na.abs_error < 1e-12);
    const auto coarse = sample_grid(cfg, 4 * 2);
    std::vector<Vec3> tc;
    for (const auto& s : coarse)
        tc.push_back(s.tangent);
    CHECK_THROWS_AS(numeric_angles(tc, cfg, rt, cfg.rho0), ResolutionError);
}
