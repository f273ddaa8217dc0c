// One simulation run from a config: integrate to t_final, measure at the
// sample times and keep the particle snapshots the scattering step needs.
#pragma once

#include "vptrap/diagnostics.hpp"
#include "vptrap/integrator.hpp"
#include "vptrap/scattering.hpp"

#include <functional>
#include <string>

namespace vptrap {

struct RunResult {
    SimState state;
    DiagnosticsSeries series;
    ParticleTrack track;
    std::vector<GridSpec> x_grids;   ///< simulation grid at each sample
    double wall_seconds = 0.0;
    std::string failure;             ///< empty on success
};

struct RunHooks {
    /// Called after each sample is measured.
    std::function<void(const SimState&, const DiagnosticsSample&)> on_sample;
};

/// Snapshots are kept for sample times >= track_from (when
/// cfg.snapshot_particles). NumericalError is caught and reported in
/// `failure`, leaving the samples taken so far.
RunResult run_simulation(const SimConfig& cfg, const RunHooks& hooks = {}, double track_from = 3.0);

/// Exponential rate of the successive stable-average differences
/// ||Q(t_k) - Q(t_{k-1})||, fitted from t >= 2; absent with too few samples.
void fit_series_rates(DiagnosticsSeries& series);

}  // namespace vptrap
