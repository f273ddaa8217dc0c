#include <doctest.h>

#include "vptrap/integrator.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <numbers>

using namespace vptrap;

namespace {

SimConfig small_config(double eps = 1e-2, int mu = 1) {
    SimConfig cfg;
    cfg.epsilon = eps;
    cfg.mu = mu;
    cfg.n_particles = 4001;
    cfg.grid_n = 64;
    return cfg;
}

Particle probe(Vec2 x, Vec2 v) {
    Particle p;
    p.z = to_hyperbolic(x, v);
    p.z0 = p.z;
    return p;
}

// Reference two-body trajectories with the exact log kernel.
using State8 = std::array<double, 8>;  // x1 x2 (particle a), v1 v2, then particle b

State8 two_body_reference(const State8& y0, double w, int mu, double T) {
    namespace ode = boost::numeric::odeint;
    auto rhs = [&](const State8& y, State8& dy, double) {
        const double dx = y[0] - y[4], dyy = y[1] - y[5];
        const double r2 = dx * dx + dyy * dyy;
        const double g = w / (2 * std::numbers::pi * r2);
        // grad phi at a is g (x_a - x_b); at b it is the negative.
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = y[0] - mu * g * dx;
        dy[3] = y[1] - mu * g * dyy;
        dy[4] = y[6];
        dy[5] = y[7];
        dy[6] = y[4] + mu * g * dx;
        dy[7] = y[5] + mu * g * dyy;
    };
    State8 y = y0;
    ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<State8>>(1e-12, 1e-12), rhs, y, 0.0,
                            T, 1e-3);
    return y;
}

}  // namespace

TEST_CASE("coupling off reproduces the linear flow over t = 10") {
    auto cfg = small_config();
    cfg.coupling = false;
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));
    const double mass0 = st.ensemble.total_mass();
    for (int k = 0; k < 1000; ++k) integ.step(st, 1e-2);
    double worst = 0.0, worst_w = 0.0;
    for (const auto& p : st.ensemble.particles) {
        const auto x0 = from_hyperbolic(p.z0);
        const auto L = linear_flow(x0.x, x0.v, st.t);
        const double scale = std::max({L.x.norm(), L.v.norm(), 1e-300});
        worst = std::max({worst, (p.x() - L.x).norm() / scale, (p.v() - L.v).norm() / scale});
        const auto c = conserved_weights(st.t, p.z);
        const double sc = std::max({p.z0.s.max_abs(), p.z0.u.max_abs(), 1e-300});
        worst_w = std::max({worst_w, (c.z_plus - p.z0.s).max_abs() / sc, (c.z_minus - p.z0.u).max_abs() / sc});
        CHECK(p.drift == Vec2{0, 0});
    }
    CHECK(worst < 1e-9);
    CHECK(worst_w < 1e-10);
    CHECK(st.ensemble.total_mass() == mass0);

    // Tangent matrices are the exact linear flow: diag(e^{-t}, e^{t}) in (s, u).
    const auto& J = st.ensemble.particles[7].J;
    CHECK(J(0, 0) == doctest::Approx(std::exp(-10.0)).epsilon(1e-9));
    CHECK(J(3, 3) == doctest::Approx(std::exp(10.0)).epsilon(1e-9));
    CHECK(J(0, 2) == 0.0);
}

TEST_CASE("nonlinear run: mass, det J and drift consistency") {
    const auto cfg = small_config();
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));
    const double mass0 = st.ensemble.total_mass();
    double worst_det = 0.0, worst_drift = 0.0;
    for (int k = 0; k < 800; ++k) {
        integ.step(st, 1e-2);
        if (k % 100 == 99) {
            const double et = std::exp(st.t);
            for (const auto& p : st.ensemble.particles) {
                worst_det = std::max(worst_det, std::abs(p.J.det() - 1.0));
                const Vec2 direct = et * (p.x() - p.v()) - (from_hyperbolic(p.z0).x - from_hyperbolic(p.z0).v);
                worst_drift = std::max(worst_drift, (direct - p.drift).max_abs());
            }
            CHECK(st.ensemble.total_mass() == mass0);
        }
    }
    CHECK(worst_det < 1e-6);
    CHECK(worst_drift < 1e-6);
}

namespace {

// max over particles and t = 1..8 of |drift(t)| / (eps (1 + t))
double drift_constant(double eps) {
    const auto cfg = small_config(eps);
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));
    double worst = 0.0;
    for (int T = 1; T <= 8; ++T) {
        integ.advance_to(st, T, 1e-2);
        for (const auto& p : st.ensemble.particles)
            worst = std::max(worst, p.drift.norm() / (eps * (1.0 + T)));
    }
    return worst;
}

}  // namespace

TEST_CASE("drift accumulator grows at most linearly, uniformly in epsilon") {
    const double c2 = drift_constant(1e-2), c3 = drift_constant(1e-3);
    MESSAGE("drift constants: eps=1e-2 " << c2 << ", eps=1e-3 " << c3);
    CHECK(c2 > 1.0);
    CHECK(c3 <= c2 * 1.05);
}

TEST_CASE("drift accumulator stays within ten epsilon (1 + t)") {
    const double c2 = drift_constant(1e-2), c3 = drift_constant(1e-3);
    MESSAGE("drift constants: eps=1e-2 " << c2 << ", eps=1e-3 " << c3);
    CHECK(c2 <= 10.0);
    CHECK(c3 <= 10.0);
}

TEST_CASE("tangent matrix matches finite differences of the flow") {
    auto cfg = small_config(5e-2);
    auto ens = sample_initial(cfg);
    // Zero-weight probes feel the field without changing it.
    const Vec2 x0{0.4, -0.3}, v0{0.2, 0.5};
    const double d = 1e-6;
    ens.particles.push_back(probe(x0, v0));
    for (int c = 0; c < 4; ++c) {
        Vec2 x = x0, v = v0;
        (c == 0 ? x.x : c == 1 ? x.y : c == 2 ? v.x : v.y) += d;
        ens.particles.push_back(probe(x, v));
    }
    const std::size_t base = ens.size() - 5;
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(std::move(ens));
    for (int k = 0; k < 400; ++k) integ.step(st, 1e-2);

    const auto& P = st.ensemble.particles;
    const Mat4 J = tangent_xv(P[base].J);
    double worst = 0.0;
    for (int c = 0; c < 4; ++c) {
        const Vec2 dx = (1.0 / d) * (P[base + 1 + c].x() - P[base].x());
        const Vec2 dv = (1.0 / d) * (P[base + 1 + c].v() - P[base].v());
        const std::array<double, 4> fd{dx.x, dx.y, dv.x, dv.y};
        double norm = 0.0, err = 0.0;
        for (int r = 0; r < 4; ++r) {
            norm = std::max(norm, std::abs(fd[r]));
            err = std::max(err, std::abs(fd[r] - J(r, c)));
        }
        worst = std::max(worst, err / norm);
    }
    MESSAGE("finite-difference Jacobian relative error " << worst);
    CHECK(worst < 1e-3);

    // The nonlinear part is visible: J differs from the linear flow.
    const auto Lin = [&](int r, int c) {
        const double ch = std::cosh(st.t), sh = std::sinh(st.t);
        if ((r < 2) == (c < 2)) return r % 2 == c % 2 ? ch : 0.0;
        return r % 2 == c % 2 ? sh : 0.0;
    };
    double dev = 0.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) dev = std::max(dev, std::abs(J(r, c) - Lin(r, c)));
    CHECK(dev > 1e-4);
}

TEST_CASE("coupling sign bends two-particle trajectories as the exact ODE does") {
    const double w = 1.0, T = 1.5, dt = 2e-3;
    const State8 y0{1.0, 0.2, -0.9, 0.0, -1.0, -0.2, 0.9, 0.0};
    std::array<Vec2, 2> corr_grid[2], corr_ref[2];
    for (int m = 0; m < 2; ++m) {
        const int mu = m == 0 ? 1 : -1;
        ParticleEnsemble ens;
        for (int a = 0; a < 2; ++a) {
            auto p = probe({y0[4 * a], y0[4 * a + 1]}, {y0[4 * a + 2], y0[4 * a + 3]});
            p.w = w;
            ens.particles.push_back(p);
        }
        IntegratorOptions opt;
        opt.mu = mu;
        opt.grid_n = 256;
        Integrator integ(opt);
        auto st = integ.initialize(std::move(ens));
        integ.advance_to(st, T, dt);
        const State8 ref = two_body_reference(y0, w, mu, T);
        for (int a = 0; a < 2; ++a) {
            const auto L = linear_flow({y0[4 * a], y0[4 * a + 1]}, {y0[4 * a + 2], y0[4 * a + 3]}, T);
            corr_grid[m][a] = st.ensemble.particles[a].x() - L.x;
            corr_ref[m][a] = Vec2{ref[4 * a], ref[4 * a + 1]} - L.x;
        }
    }
    for (int a = 0; a < 2; ++a) {
        // Attractive and repulsive corrections point in opposite directions.
        CHECK(corr_ref[0][a].dot(corr_ref[1][a]) < 0.0);
        CHECK(corr_grid[0][a].dot(corr_grid[1][a]) < 0.0);
        for (int m = 0; m < 2; ++m) {
            const double rel = (corr_grid[m][a] - corr_ref[m][a]).norm() / corr_ref[m][a].norm();
            MESSAGE("mu index " << m << " particle " << a << " relative correction error " << rel);
            CHECK(rel < 2e-2);
        }
    }
}

TEST_CASE("regrid is a no-op for interior particles and keeps mass") {
    auto cfg = small_config();
    cfg.grid_policy = "bbox";
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));
    const auto spec = st.field.spec();
    CHECK_FALSE(integ.regrid(st));
    CHECK(st.regrids.empty());
    CHECK(integ.target_spec(st, st.t) == spec);

    const double mass = st.field.rho.sum() * spec.h * spec.h;
    for (auto& p : st.ensemble.particles) p.z.u *= 1.5;
    CHECK(integ.regrid(st));
    integ.refresh_field(st);
    const auto& g2 = st.field.spec();
    CHECK(g2.h > spec.h);
    CHECK(st.field.rho.sum() * g2.h * g2.h == doctest::Approx(mass).epsilon(1e-12));
}

TEST_CASE("bounding-box policy: regrid count over t = 8") {
    auto cfg = small_config();
    cfg.grid_policy = "bbox";
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));
    integ.advance_to(st, 8.0, 1e-2);
    MESSAGE("regrids " << st.regrids.size());
    CHECK(st.regrids.size() >= 1);
    CHECK(st.regrids.size() <= 44);
}

TEST_CASE("max extent aborts with advice") {
    auto cfg = small_config();
    cfg.grid_policy = "bbox";
    cfg.grid_max_extent = 20.0;
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));
    try {
        integ.advance_to(st, 6.0, 1e-2);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("grid.max_extent") != std::string::npos);
    }
}
