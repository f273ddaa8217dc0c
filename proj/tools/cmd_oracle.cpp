#include "layout.hpp"

#include "vptrap/integrator.hpp"
#include "vptrap/poisson.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <iostream>
#include <numbers>

namespace vptrap::cli {

namespace {

constexpr std::int64_t kOracleCap = 2000;

// Exact N-body flow with the log kernel: x'' = x - mu grad phi(x).
std::vector<PhasePoint> nbody_reference(const ParticleEnsemble& ens, int mu, bool coupling, double T) {
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    const std::size_t n = ens.size();
    State y(4 * n);
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& p = ens.particles[k];
        y[4 * k] = p.x().x, y[4 * k + 1] = p.x().y, y[4 * k + 2] = p.v().x, y[4 * k + 3] = p.v().y;
        w[k] = p.w;
    }
    auto rhs = [&](const State& s, State& ds, double) {
        for (std::size_t k = 0; k < n; ++k) {
            ds[4 * k] = s[4 * k + 2];
            ds[4 * k + 1] = s[4 * k + 3];
            ds[4 * k + 2] = s[4 * k];
            ds[4 * k + 3] = s[4 * k + 1];
        }
        if (!coupling) return;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                const double dx = s[4 * a] - s[4 * b], dy = s[4 * a + 1] - s[4 * b + 1];
                const double r2 = dx * dx + dy * dy;
                if (r2 == 0.0) continue;
                const double g = mu / (2 * std::numbers::pi * r2);
                ds[4 * a + 2] -= g * w[b] * dx;
                ds[4 * a + 3] -= g * w[b] * dy;
                ds[4 * b + 2] += g * w[a] * dx;
                ds[4 * b + 3] += g * w[a] * dy;
            }
    };
    ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<State>>(1e-11, 1e-11), rhs, y, 0.0, T,
                            1e-3);
    std::vector<PhasePoint> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = {{y[4 * k], y[4 * k + 1]}, {y[4 * k + 2], y[4 * k + 3]}};
    return out;
}

}  // namespace

int cmd_oracle(const fs::path& config, const GlobalOptions& opt) {
    const auto cfg = io::parse_config(read_input(config));
    if (cfg.n_particles > kOracleCap)
        throw ConfigError("particles.n", "oracle: particles.n = " + std::to_string(cfg.n_particles) +
                                             " exceeds the direct-sum cap of " + std::to_string(kOracleCap));
    io::OutputDir out(resolve_output(opt, config));
    auto manifest = manifest_base("oracle", &cfg, opt);
    out.write("config.txt", io::serialize_config(cfg));

    Integrator integ(IntegratorOptions::from_config(cfg));
    auto st = integ.initialize(sample_initial(cfg));

    // Grid force against the direct sum at t = 0.
    const auto direct = direct_sum_force(st.ensemble);
    io::CsvTable force({"t", "index", "x1", "x2", "grid_E1", "grid_E2", "direct_E1", "direct_E2", "abs_error"});
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < st.ensemble.size(); ++k) {
        const auto& p = st.ensemble.particles[k];
        const Vec2 g = st.field.E.sample(p.x()).value_or(Vec2{NAN, NAN});
        const Vec2 d = direct.grad_phi[k];
        num += (g - d).dot(g - d);
        den += d.dot(d);
        force.add_row({0.0, static_cast<double>(k), p.x().x, p.x().y, g.x, g.y, d.x, d.y, (g - d).norm()});
    }
    const double force_rms = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
    out.write("oracle_force.csv", force.str());
    // Sub-cell neighbours in the sampled ensemble are smoothed by CIC; the
    // separated ensemble isolates the solver error.
    const auto sep = separated_random_ensemble(
        st.field.spec(), std::min<std::size_t>(500, static_cast<std::size_t>(cfg.grid_n) * cfg.grid_n / 200), 8.0, cfg.seed);
    const double force_rms_sep = grid_direct_rms_error(sep, st.field.spec());

    // Radial Gaussian of the same mass on the same grid against the enclosed-mass formula.
    const auto spec = st.field.spec();
    const double sig = cfg.sigma_u, mass = std::max(st.ensemble.total_mass(), 1.0);
    ScalarField2D rho(spec);
    for (int j = 0; j < spec.n; ++j)
        for (int i = 0; i < spec.n; ++i) {
            const Vec2 x = spec.node(i, j);
            rho.at(i, j) = mass / (2 * std::numbers::pi * sig * sig) * std::exp(-x.dot(x) / (2 * sig * sig));
        }
    const auto E = gradient(solve_free_space(rho));
    io::CsvTable radial({"t", "r", "grid_Er", "exact_Er", "rel_error"});
    double radial_max = 0.0;
    const double half = 0.5 * (spec.upper() - spec.origin.x);
    for (int k = 0; k <= 60; ++k) {
        const double r = sig + 3.0 * sig * k / 60.0;
        if (r > 0.9 * half) break;
        const auto g = E.sample({r, 0.0});
        const double exact = mass * (1 - std::exp(-r * r / (2 * sig * sig))) / (2 * std::numbers::pi * r);
        const double rel = std::abs(g->x - exact) / exact;
        radial_max = std::max(radial_max, rel);
        radial.add_row({0.0, r, g->x, exact, rel});
    }
    out.write("oracle_radial.csv", radial.str());

    // Trajectories against the exact N-body flow.
    const double T = std::min(cfg.t_final, 1.0);
    const auto ens0 = st.ensemble;
    integ.advance_to(st, T, cfg.dt);
    const auto ref = nbody_reference(ens0, cfg.mu, cfg.coupling, T);
    double emax = 0.0, esum = 0.0, cmax = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        const auto& p = st.ensemble.particles[k];
        const double e = std::max((p.x() - ref[k].x).norm(), (p.v() - ref[k].v).norm());
        const auto x0 = from_hyperbolic(p.z0);
        const auto lin = linear_flow(x0.x, x0.v, T);
        emax = std::max(emax, e);
        esum += e * e;
        cmax = std::max(cmax, (ref[k].x - lin.x).norm());
    }
    const double erms = ref.empty() ? 0.0 : std::sqrt(esum / ref.size());
    io::CsvTable traj({"t", "max_error", "rms_error", "max_nonlinear_correction"});
    traj.add_row({T, emax, erms, cmax});
    out.write("oracle_trajectory.csv", traj.str());

    io::CsvTable summary({"t", "force_rms_rel_error_ensemble", "force_rms_rel_error_separated", "radial_max_rel_error", "trajectory_max_error",
                          "trajectory_max_nonlinear_correction"});
    summary.add_row({T, force_rms, force_rms_sep, radial_max, emax, cmax});
    out.write("oracle_summary.csv", summary.str());
    manifest["status"] = "ok";
    write_manifest(out, manifest);

    std::cout << "force rms rel error, ensemble  " << force_rms << "\n"
              << "force rms rel error, separated " << force_rms_sep << "\n"
              << "radial field max rel error " << radial_max << "\n"
              << "trajectory max error       " << emax << " (nonlinear correction " << cmax << ") at t=" << T << "\n";
    return 0;
}

}  // namespace vptrap::cli
