#include "catch_amalgamated.hpp"

#include "vfe/analysis.hpp"

#include <cmath>
#include <random>

using namespace vfe;
using Catch::Approx;

namespace {

std::vector<double> grid(std::size_t n, double dt)
{
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i)
        t[i] = dt * double(i);
    return t;
}

} // namespace

TEST_CASE("fingerprint of a pure tone")
{
    const double P = 0.7;
    const auto t = grid(401, P / 400); // closed sampling of one period
    std::vector<Complex> x(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        x[i] = std::polar(1.0, kTwoPi * 7 * t[i] / P);
    const auto fp = fingerprint(std::span<const Complex>(x), t, P, 50);
    CHECK(std::abs(fp.value(7) - 7.0) < 1e-12);
    for (int n = 1; n <= 50; ++n)
        if (n != 7)
            CHECK(std::abs(fp.value(n)) < 1e-12);
}

TEST_CASE("fingerprint round trip on a finite synthesis")
{
    std::mt19937 rng(7);
    std::normal_distribution<double> g;
    const double P = 2.5;
    const int K = 3;
    const auto t = grid(3 * 512, K * P / (3 * 512)); // open sampling of three periods
    std::vector<Complex> coef(41);
    for (auto& c : coef)
        c = {g(rng), g(rng)};
    std::vector<Complex> x(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        for (int n = 1; n <= 40; ++n)
            x[i] += coef[std::size_t(n)] * std::polar(1.0, kTwoPi * n * (t[i] + 0.3) / P);
    std::vector<double> shifted(t);
    for (auto& v : shifted)
        v += 0.3;
    const auto fp = fingerprint(std::span<const Complex>(x), shifted, P, 100);
    for (int n = 1; n <= 100; ++n) {
        const Complex expect = n <= 40 ? double(n) * coef[std::size_t(n)] : Complex{};
        CHECK(std::abs(fp.value(n) - expect) < 1e-11);
    }
    CHECK_THROWS_AS(fingerprint(std::span<const Complex>(x), shifted, P * 1.1, 10), ArgumentError);
}

TEST_CASE("dominant sets")
{
    const auto a15 = frequency_set_cd(1, 5, 25);
    CHECK(a15.members == std::vector<long long>{2, 3, 9, 11, 21, 24});
    CHECK_THROWS_AS(frequency_set_cd(2, 4, 10), ArgumentError);
    const auto a3 = frequency_set_corners(3, 10);
    CHECK(a3.members == std::vector<long long>{1, 2, 4, 5, 7, 8, 10});

    // brute force: k in A_cd iff k = n (n d + c)/h for some integer n
    for (long long c : {1, 2, 3})
        for (long long d : {5, 7, 12}) {
            if (std::gcd(c, d) != 1)
                continue;
            const long long h = (c * d) % 2 ? 2 : 1;
            const auto fs = frequency_set_cd(c, d, 2000);
            for (long long k = 1; k <= 2000; ++k) {
                bool found = false;
                for (long long n = -100; n <= 100 && !found; ++n)
                    found = n * (n * d + c) == h * k;
                CHECK(fs.contains(k) == found);
            }
        }
}

TEST_CASE("riemann series")
{
    const std::vector<double> t0{0.0};
    const auto phi = riemann_phi({RiemannVariant::phi}, 20000, t0);
    CHECK(std::abs(phi[0].real()) < 1e-15);
    CHECK(std::abs(phi[0].imag()) == Approx(kPi / 6).epsilon(1e-4));

    for (auto v : {RiemannVariant::classic, RiemannVariant::phi, RiemannVariant::phi_cd, RiemannVariant::phi_M}) {
        RiemannParams prm{v, 1, 5, 3};
        const std::size_t L = 256;
        const double tau = (v == RiemannVariant::classic || v == RiemannVariant::phi) ? 2.0 : 1.0;
        std::vector<double> t(300);
        for (std::size_t j = 0; j < t.size(); ++j)
            t[j] = tau * double(j) / double(L);
        const auto direct = riemann_phi(prm, 200, t);
        const auto fast = riemann_phi_grid(prm, 200, L, t.size());
        for (std::size_t j = 0; j < t.size(); ++j)
            CHECK(std::abs(direct[j] - fast[j]) < 1e-12);
    }
    const std::vector<double> tq{0.37};
    const auto cl = riemann_phi({RiemannVariant::classic}, 3, tq);
    double expect = 0.0;
    for (int k = 1; k <= 3; ++k)
        expect += std::sin(kPi * k * k * 0.37) / (kPi * k * k);
    CHECK(cl[0].real() == Approx(expect).epsilon(1e-13));
}

TEST_CASE("stereographic projection")
{
    const std::vector<Vec3> pts{Vec3::UnitZ(), Vec3::UnitX()};
    const auto z = stereo_project(pts);
    CHECK(std::abs(z[0]) == 0.0);
    CHECK(std::abs(z[1] - Complex(1.0, 0.0)) < 1e-15);
    CHECK_THROWS_AS(stereo_project(std::vector<Vec3>{-Vec3::UnitZ()}), ProjectionPoleError);

    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    std::vector<Vec3> sphere;
    for (int i = 0; i < 1000; ++i) {
        Vec3 v(g(rng), g(rng), g(rng));
        v.normalize();
        if (v.z() > -0.9)
            sphere.push_back(v);
    }
    const auto back = stereo_unproject(stereo_project(sphere));
    for (std::size_t i = 0; i < sphere.size(); ++i)
        CHECK((back[i] - sphere[i]).norm() < 1e-12);
}

TEST_CASE("affine fit")
{
    std::vector<Complex> phi;
    for (int i = 0; i < 50; ++i)
        phi.push_back(std::polar(1.0 + 0.01 * i, 0.3 * i));
    const auto same = affine_fit(phi, phi);
    CHECK(same.lambda == Approx(1.0));
    CHECK(std::abs(same.mu) < 1e-14);
    CHECK(same.abs_err < 1e-14);

    std::vector<Complex> z;
    for (const auto& p : phi)
        z.push_back(2.0 * p + Complex(1, 1));
    const auto f = affine_fit(z, phi);
    CHECK(f.lambda == Approx(0.5));
    CHECK(std::abs(f.mu - Complex(-0.5, -0.5)) < 1e-13);

    // residual unchanged by z -> e^{i a} z' with z' = e^{-i a} z
    std::vector<Complex> noisy;
    for (std::size_t i = 0; i < phi.size(); ++i)
        noisy.push_back(phi[i] + 0.05 * std::polar(1.0, 1.7 * double(i)));
    const Complex rot = std::polar(1.0, 0.8);
    std::vector<Complex> z1;
    for (const auto& v : noisy)
        z1.push_back(rot * (std::conj(rot) * v));
    CHECK(affine_fit(noisy, phi).abs_err == Approx(affine_fit(z1, phi).abs_err).epsilon(1e-12));

    CHECK_THROWS_AS(affine_fit(std::vector<Complex>(5, Complex(1, 1)), std::vector<Complex>(5)), DegenerateFitError);
}

TEST_CASE("rotate align")
{
    const std::vector<Complex> z{{1.0, 0.0}, {0.0, 2.0}};
    const auto r = rotate_align(z, 3);
    CHECK(std::abs(r[0] - std::polar(1.0, -kPi / 6)) < 1e-15);
    const auto back = rotate_align(r, 3, false);
    CHECK(std::abs(back[1] - z[1]) < 1e-15);
}

TEST_CASE("trajectory channels")
{
    TrajectorySeries tr;
    tr.c_M = 0.5;
    for (int i = 0; i < 100; ++i) {
        const double t = 0.1 * i;
        tr.times.push_back(t);
        tr.points.push_back(Vec3(std::cos(-0.9 * t), std::sin(-0.9 * t), 0.5 * t + 0.1));
    }
    const auto ch = trajectory_components(tr);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        CHECK(ch.R[i] == Approx(1.0));
        CHECK(ch.X3tilde[i] == Approx(0.1));
        CHECK(ch.nu[i] == Approx(-0.9 * tr.times[i]).margin(1e-12));
    }
    CHECK(linear_fit(tr.times, ch.nu).slope == Approx(-0.9));
}

TEST_CASE("phase shift preconditions")
{
    const auto cfg = polygon_config_b(5, 0.0);
    const auto samples = sample_grid(cfg, 5 * 32);
    std::vector<Vec3> tg;
    for (const auto& s : samples)
        tg.push_back(s.tangent);
    CHECK(phase_shift(tg, tg, cfg, rational_time(cfg, 1, 1)) == Approx(0.0).margin(1e-15));
    CHECK_THROWS_AS(phase_shift(tg, tg, cfg, rational_time(cfg, 1, 3)), PreconditionError);
}
