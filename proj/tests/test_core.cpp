#include <doctest.h>

#include "vptrap/core.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace vptrap;

namespace {

// Linear flow as an explicit 4x4 matrix on (x1, x2, v1, v2).
Mat4 flow_matrix(double t) {
    Mat4 m;
    const double c = std::cosh(t), s = std::sinh(t);
    for (int a = 0; a < 2; ++a) {
        m(a, a) = c;
        m(a, 2 + a) = s;
        m(2 + a, a) = s;
        m(2 + a, 2 + a) = c;
    }
    return m;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("to_hyperbolic examples") {
    auto z = to_hyperbolic({1, 1}, {1, 1});
    CHECK(z.s == Vec2{0, 0});
    CHECK(z.u == Vec2{1, 1});
    z = to_hyperbolic({2, 0}, {0, 0});
    CHECK(z.s == Vec2{1, 0});
    CHECK(z.u == Vec2{1, 0});
}

TEST_CASE("hyperbolic roundtrip on random points") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-100.0, 100.0);
    int exact = 0;
    for (int k = 0; k < 1000; ++k) {
        const Vec2 x{U(rng), U(rng)}, v{U(rng), U(rng)};
        const auto p = from_hyperbolic(to_hyperbolic(x, v));
        // Halving and re-adding can lose the last bit when x and v differ in exponent.
        CHECK(std::abs(p.x.x - x.x) <= 2 * std::numeric_limits<double>::epsilon() * std::abs(x.x) + 1e-300 +
                                           std::numeric_limits<double>::epsilon() * std::abs(v.x));
        CHECK(std::abs(p.v.y - v.y) <= 2 * std::numeric_limits<double>::epsilon() * std::abs(v.y) + 1e-300 +
                                           std::numeric_limits<double>::epsilon() * std::abs(x.y));
        if (p.x == x && p.v == v) ++exact;
    }
    CHECK(exact > 500);
    // Dyadic inputs are reproduced bit for bit.
    for (int a = -8; a <= 8; ++a) {
        const Vec2 x{a * 0.375, a * -1.25}, v{a * 2.5, 0.0625};
        const auto p = from_hyperbolic(to_hyperbolic(x, v));
        CHECK(p.x == x);
        CHECK(p.v == v);
    }
}

TEST_CASE("linear_flow closed form at t = ln 2") {
    const auto p = linear_flow({1, 0}, {0, 0}, std::log(2.0));
    CHECK(p.x.x == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(p.v.x == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(p.x.y == 0.0);
}

TEST_CASE("linear_flow identity, stable direction and composition") {
    const auto id = linear_flow({0.3, -2}, {1.5, 4}, 0.0);
    CHECK(id.x == Vec2{0.3, -2});
    CHECK(id.v == Vec2{1.5, 4});
    for (double t : {0.5, 3.0, 9.0}) {
        const auto p = linear_flow({1, 0}, {-1, 0}, t);
        CHECK(rel(p.x.x, std::exp(-t)) < 1e-12);
        CHECK(rel(p.v.x, -std::exp(-t)) < 1e-12);
    }
    const Vec2 x{0.7, -0.2}, v{-0.1, 0.9};
    const auto a = linear_flow(x, v, 1.7);
    const auto b = linear_flow(linear_flow(a.x, a.v, 0.0).x, a.v, 0.0);
    const auto two = linear_flow(a.x, a.v, 2.1);
    const auto one = linear_flow(x, v, 3.8);
    CHECK(rel(two.x.x, one.x.x) < 1e-13);
    CHECK(rel(two.v.y, one.v.y) < 1e-13);
    CHECK(b.x == a.x);
}

TEST_CASE("linear flow is symplectic") {
    for (double t : {0.1, 1.0, 5.0, 10.0}) {
        const HyperbolicPair hp(t);
        CHECK(std::abs(hp.c * hp.c - hp.s * hp.s - 1.0) <= 8 * std::numeric_limits<double>::epsilon() * hp.c * hp.c);
        CHECK(std::abs(flow_matrix(t).det() - 1.0) < 1e-14 * std::cosh(t) * std::cosh(t) * 4);
    }
    // In hyperbolic form the flow is diag(e^{-t}, e^{t}) and the determinant is exact.
    Mat4 d;
    for (int a = 0; a < 2; ++a) {
        d(a, a) = std::exp(-3.0);
        d(2 + a, 2 + a) = std::exp(3.0);
    }
    CHECK(std::abs(d.det() - 1.0) < 1e-14);
}

TEST_CASE("conserved weights") {
    const auto w0 = conserved_weights(0.0, {0.4, 1.0}, {-2.0, 0.5});
    const auto z = to_hyperbolic({0.4, 1.0}, {-2.0, 0.5});
    CHECK(w0.z_plus == z.s);
    CHECK(w0.z_minus == z.u);

    const auto w1 = conserved_weights(1.0, {1, 0}, {0, 0});
    CHECK(rel(w1.z_plus.x, std::numbers::e / 2) < 1e-15);
    CHECK(rel(w1.z_minus.x, 1 / (2 * std::numbers::e)) < 1e-15);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int k = 0; k < 50; ++k) {
        const Vec2 x{U(rng), U(rng)}, v{U(rng), U(rng)};
        const auto ref = conserved_weights(0.0, x, v);
        double worst = 0.0;
        for (int t = 0; t <= 10; ++t) {
            const auto z = linear_flow(to_hyperbolic(x, v), static_cast<double>(t));
            const auto c = conserved_weights(static_cast<double>(t), z);
            worst = std::max({worst, rel(c.z_plus.x, ref.z_plus.x), rel(c.z_plus.y, ref.z_plus.y),
                              rel(c.z_minus.x, ref.z_minus.x), rel(c.z_minus.y, ref.z_minus.y)});
        }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("conserved weights overflow names the particle") {
    try {
        conserved_weights(800.0, {1, 0}, {0, 0}, 42);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("42") != std::string::npos);
    }
}

TEST_CASE("phase Jacobian by 1D quadrature") {
    // int g(x, v) dx dv over a 1D phase plane with g = exp(-s^2 - 2u^2) in (s, u):
    // the (s,u) integral is pi/sqrt(2); the (x,v) integral must be that times the per-axis factor.
    const int m = 1200;
    const double L = 12.0, h = 2 * L / m;
    double sum_xv = 0.0;
    for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= m; ++j) {
            const double x = -L + i * h, v = -L + j * h;
            const double s = 0.5 * (x - v), u = 0.5 * (x + v);
            sum_xv += std::exp(-s * s - 2 * u * u);
        }
    sum_xv *= h * h;
    const double su = std::numbers::pi / std::sqrt(2.0);
    const double per_axis = sum_xv / su;
    CHECK(per_axis == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(per_axis * per_axis == doctest::Approx(kPhaseJacobian).epsilon(1e-10));
}

TEST_CASE("closed-form initial mass") {
    SimConfig cfg;
    const double oracle = 4.0 * cfg.epsilon * std::pow(2 * std::numbers::pi, 2);
    CHECK(initial_mass_closed_form(cfg) == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(initial_mass_closed_form(cfg) == doctest::Approx(1.5791367041742973).epsilon(1e-14));
}

TEST_CASE("sample_initial mass, symmetry and determinism") {
    SimConfig cfg;
    cfg.n_particles = 20000;
    const auto a = sample_initial(cfg);
    CHECK(a.size() == static_cast<std::size_t>(effective_particle_count(20000)));
    CHECK(a.size() % 2 == 1);
    CHECK(rel(a.total_mass(), initial_mass_closed_form(cfg)) < 1e-3);

    Vec2 mom{}, pos{};
    double wsum = 0.0;
    for (const auto& p : a.particles) {
        mom += p.w * p.v();
        pos += p.w * p.x();
        wsum += p.w;
        CHECK(p.w >= 0.0);
    }
    CHECK(mom.max_abs() < 1e-12 * wsum);
    CHECK(pos.max_abs() < 1e-12 * wsum);

    const auto b = sample_initial(cfg);
    REQUIRE(a.size() == b.size());
    bool same = true;
    for (std::size_t k = 0; k < a.size(); ++k)
        same = same && a.particles[k].z.s == b.particles[k].z.s && a.particles[k].z.u == b.particles[k].z.u &&
               a.particles[k].w == b.particles[k].w;
    CHECK(same);

    cfg.epsilon = 0.0;
    const auto z = sample_initial(cfg);
    double wmax = 0.0;
    for (const auto& p : z.particles) wmax = std::max(wmax, std::abs(p.w));
    CHECK(wmax == 0.0);
}

TEST_CASE("sample_initial gradient matches finite differences of f0") {
    SimConfig cfg;
    cfg.n_particles = 101;
    cfg.sigma_s = 0.8;
    cfg.sigma_u = 1.3;
    const auto e = sample_initial(cfg);
    const double d = 1e-6;
    for (std::size_t k = 0; k < e.size(); k += 10) {
        const auto& p = e.particles[k];
        const PhasePoint xv = from_hyperbolic(p.z0);
        for (int c = 0; c < 4; ++c) {
            PhasePoint lo = xv, hi = xv;
            double* l = c < 2 ? (c == 0 ? &lo.x.x : &lo.x.y) : (c == 2 ? &lo.v.x : &lo.v.y);
            double* r = c < 2 ? (c == 0 ? &hi.x.x : &hi.x.y) : (c == 2 ? &hi.v.x : &hi.v.y);
            *l -= d;
            *r += d;
            const double fd = (initial_density(cfg, to_hyperbolic(hi.x, hi.v)) -
                               initial_density(cfg, to_hyperbolic(lo.x, lo.v))) / (2 * d);
            CHECK(p.f0_grad[c] == doctest::Approx(fd).epsilon(1e-5).scale(cfg.epsilon));
        }
    }
}

TEST_CASE("SimConfig validation names the field") {
    SimConfig cfg;
    cfg.mu = 0;
    try {
        cfg.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field == "physics.mu");
    }
    cfg = {};
    cfg.grid_n = 100;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.norm_M = 5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.sample_times = {0, 2, 1};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("Mat4 determinant") {
    Mat4 m = Mat4::identity();
    m(0, 1) = 3;
    m(2, 0) = -1;
    m(3, 3) = 2;
    CHECK(m.det() == doctest::Approx(2.0));
    CHECK((m * Mat4::identity()).det() == doctest::Approx(2.0));
}
