#include "vptrap/driver.hpp"

#include <chrono>

namespace vptrap {

RunResult run_simulation(const SimConfig& cfg, const RunHooks& hooks, double track_from) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunResult r;
    Integrator integ(IntegratorOptions::from_config(cfg));
    r.state = integ.initialize(sample_initial(cfg));
    r.track = ParticleTrack::from_ensemble(r.state.ensemble);
    try {
        for (double T : cfg.sample_times) {
            integ.advance_to(r.state, T, cfg.dt);
            r.series.samples.push_back(measure(r.state, cfg));
            r.x_grids.push_back(r.state.field.spec());
            if (cfg.snapshot_particles && T >= track_from - 1e-12) r.track.add_snapshot(r.state.ensemble, T);
            if (hooks.on_sample) hooks.on_sample(r.state, r.series.samples.back());
        }
        if (cfg.sample_times.empty() || cfg.sample_times.back() < cfg.t_final)
            integ.advance_to(r.state, cfg.t_final, cfg.dt);
    } catch (const NumericalError& e) {
        r.failure = e.what();
    } catch (const OutOfDomainError& e) {
        r.failure = e.what();
    }
    fit_series_rates(r.series);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

void fit_series_rates(DiagnosticsSeries& series) {
    std::vector<double> t, d;
    for (std::size_t k = 1; k < series.samples.size(); ++k) {
        t.push_back(series.samples[k].t);
        d.push_back(sup_difference(series.samples[k].q.q, series.samples[k - 1].q.q));
    }
    try {
        series.fitted_rates["stable_average"] = fit_rate(t, d, RateModel::ExpOnly, 2.0);
    } catch (const NumericalError&) {
    }
}

}  // namespace vptrap
