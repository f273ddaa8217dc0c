#include <doctest.h>

#include "vptrap/diagnostics.hpp"

#include <cmath>
#include <numbers>

using namespace vptrap;

namespace {

SimConfig small_config(double eps = 1e-2) {
    SimConfig cfg;
    cfg.epsilon = eps;
    cfg.n_particles = 40001;
    cfg.grid_n = 64;
    return cfg;
}

}  // namespace

TEST_CASE("fit_rate recovers synthetic exponents") {
    std::vector<double> t, y, ye;
    for (int k = 0; k <= 16; ++k) {
        t.push_back(0.5 * k);
        y.push_back(2.0 * std::pow(1.0 + t.back(), 1.5) * std::exp(-2.0 * t.back()));
        ye.push_back(0.3 * std::exp(-0.7 * t.back()));
    }
    const auto f = fit_rate(t, y, RateModel::Full);
    CHECK(f.k == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(f.lambda == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::exp(f.log_c) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(f.residual < 1e-10);
    CHECK(f.used == 17);

    const auto g = fit_rate(t, ye, RateModel::ExpOnly, 2.0);
    CHECK(g.k == 0.0);
    CHECK(g.lambda == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(g.used == 13);
}

TEST_CASE("fit_rate excludes non-positive samples and needs five") {
    std::vector<double> t{0, 1, 2, 3, 4, 5, 6}, y;
    for (double x : t) y.push_back(std::exp(-x));
    y[2] = 0.0;
    y[4] = -1.0;
    const auto f = fit_rate(t, y, RateModel::ExpOnly);
    CHECK(f.excluded == std::vector<std::size_t>{2, 4});
    CHECK(f.lambda == doctest::Approx(1.0).epsilon(1e-10));
    y[5] = std::nan("");
    CHECK_THROWS_AS(fit_rate(t, y, RateModel::ExpOnly), NumericalError);
    CHECK_THROWS_AS(fit_rate(t, std::vector<double>{1, 2}, RateModel::Full), NumericalError);
}

TEST_CASE("test-function s = 0 integrals match quadrature") {
    for (auto g : test_function_registry()) {
        g.u_width = 1.0;
        const int n = 1200;
        const double L = g.name == "gaussian" ? 9.0 : 1.0, h = 2 * L / n;
        double acc = 0.0;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) acc += g({0, 0}, {-L + (i + 0.5) * h, -L + (j + 0.5) * h});
        CAPTURE(g.name);
        CHECK(acc * h * h == doctest::Approx(g.integral_at_s0()).epsilon(1e-5));
    }
    CHECK_THROWS_AS(make_test_function("box"), ConfigError);
}

TEST_CASE("stable average: mass bookkeeping and the Gaussian profile") {
    const auto cfg = small_config();
    const auto ens = sample_initial(cfg);
    const auto grid = stable_average_grid(cfg);
    const auto qa = stable_average(ens, 0.0, grid);
    CHECK(qa.dropped == 0);
    CHECK(kPhaseJacobian * qa.q.sum() * grid.h * grid.h == doctest::Approx(ens.total_mass()).epsilon(1e-12));

    // int fbar0(s, u) ds = eps 2 pi sigma_s^2 exp(-|u|^2 / 2 sigma_u^2) in (s,u) measure
    const double peak = cfg.epsilon * 2 * std::numbers::pi;
    const int c = grid.n / 2;
    CHECK(qa.q.at(c, c) == doctest::Approx(peak).epsilon(0.05));

    // Shrinking the grid drops particles but keeps the books balanced.
    const auto small = GridSpec::centered({0, 0}, 1.0, 17);
    const auto qb = stable_average(ens, 0.0, small);
    CHECK(qb.dropped > 0);
    CHECK(kPhaseJacobian * qb.q.sum() * small.h * small.h + qb.dropped_mass ==
          doctest::Approx(ens.total_mass()).epsilon(1e-12));
}

TEST_CASE("linear flow leaves the stable average and weak functionals unchanged") {
    auto cfg = small_config();
    cfg.coupling = false;
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));
    const auto grid = stable_average_grid(cfg);
    const auto q0 = stable_average(st.ensemble, 0.0, grid).q;
    TestFunction g{"gaussian", 0.7, 1.3, {}};
    const double w0 = weak_functional(st.ensemble, 0.0, g);
    integ.advance_to(st, 5.0, 1e-2);
    const auto q5 = stable_average(st.ensemble, st.t, grid).q;
    CHECK(sup_difference(q0, q5) < 1e-12 * q0.max_abs());
    // Widths transported by the flow: g_t(s, u) = g(e^t s, e^{-t} u) gives the
    // same sum, times e^{2t}.
    TestFunction g5{"gaussian", 0.7 * std::exp(-5.0), 1.3 * std::exp(5.0), {}};
    CHECK(weak_functional(st.ensemble, st.t, g5) * std::exp(-10.0) == doctest::Approx(w0).epsilon(1e-12));
    const auto e = hamiltonian(st, cfg.mu, false);
    CHECK(e.potential == 0.0);
}

TEST_CASE("epsilon = 0 gives zero diagnostics") {
    auto cfg = small_config(0.0);
    cfg.n_particles = 2001;
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));
    integ.advance_to(st, 2.0, 1e-2);
    const auto d = measure(st, cfg);
    CHECK(d.mass == 0.0);
    CHECK(d.sup_e2t_rho == 0.0);
    CHECK(d.q.q.max_abs() == 0.0);
    for (const auto& [name, v] : d.weak) CHECK(v == 0.0);
    CHECK(d.energy.total == 0.0);
    CHECK(d.deriv.sup_Sf == 0.0);
}

TEST_CASE("derivative bounds at t = 0 equal the analytic gradient maxima") {
    const auto cfg = small_config();
    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));
    const auto b = derivative_bounds(st, cfg.norm_M);
    // |d_s f0| = eps |s_i| e^{-...} / sigma^2 peaks at e^{-1/2} eps per axis
    CHECK(b.sup_Sf <= cfg.epsilon * std::exp(-0.5) * (1 + 1e-12));
    CHECK(b.sup_Sf > 0.9 * cfg.epsilon * std::exp(-0.5));
    CHECK(b.flagged == 0);
    for (const auto& p : st.ensemble.particles) {
        const auto g = gradient_su(p);
        const Vec2 ds = (-p.f0_val) * p.z.s, du = (-p.f0_val) * p.z.u;
        CHECK(g[0] == doctest::Approx(ds.x).epsilon(1e-12));
        CHECK(g[3] == doctest::Approx(du.y).epsilon(1e-12));
        break;
    }
}
