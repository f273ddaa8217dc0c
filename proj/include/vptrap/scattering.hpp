// Scattering data: the limit Q_inf of the stable averages, the asymptotic
// potential (Delta phi_asymp = rho_inf on the u~ plane), per-particle modified
// scattering coordinates and the reconstructed scattering state.
#pragma once

#include "vptrap/core.hpp"
#include "vptrap/diagnostics.hpp"
#include "vptrap/grid.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vptrap {

/// Particle positions at one time; per-particle constants live in ParticleTrack.
struct PhaseSnapshot {
    double t = 0.0;
    std::vector<HyperPoint> z;
};

/// What the scattering extraction needs from a run.
struct ParticleTrack {
    std::vector<double> w;
    std::vector<double> vol;
    std::vector<double> f0;
    std::vector<double> det_j;            ///< det J at the last snapshot
    std::vector<PhaseSnapshot> snapshots; ///< increasing in t

    static ParticleTrack from_ensemble(const ParticleEnsemble& e);
    void add_snapshot(const ParticleEnsemble& e, double t);
    const PhaseSnapshot* at(double t, double tol = 1e-9) const;
    double total_mass() const;
};

/// u~ grid of the asymptotic fields: the simulation's x grid at time t scaled
/// by e^{-t}, so the asymptotic solve uses the discretisation the run used.
GridSpec asymptotic_grid(const GridSpec& x_grid, double t);

/// Stable average from a snapshot (same estimator as diagnostics).
ScalarField2D stable_average(const PhaseSnapshot& snap, std::span<const double> w, const GridSpec& utilde);

struct QInfEstimate {
    ScalarField2D q_inf;
    double error = 0.0;                 ///< ||Q(t2) - Q(t1)||_inf
    std::vector<double> times;          ///< snapshot times used, >= t1
    std::vector<double> successive;     ///< ||Q(t_{k+1}) - Q(t_k)||_inf
    std::vector<std::string> warnings;
    std::vector<double> picard_change;  ///< |dq_inf|_inf per Picard step
};

/// q_inf = Q(t2); needs t2 > t1 >= 2 and snapshots at both times.
QInfEstimate estimate_q_inf(const ParticleTrack& track, double t1, double t2, const GridSpec& utilde);

struct AsymptoticField {
    ScalarField2D phi;       ///< phi_asymp with Delta phi_asymp = kPhaseJacobian * q_inf
    VectorField2D grad;      ///< grad phi_asymp
    ScalarField2D source;    ///< the right-hand side kPhaseJacobian * q_inf
};

/// The asymptotic Poisson equation; the source is the u~-density of the
/// late-time spatial density, kPhaseJacobian q_inf in (x,v) mass units.
AsymptoticField solve_asymptotic_poisson(const ScalarField2D& q_inf);

struct ScatterPoint {
    Vec2 s_inf;
    Vec2 u_inf;
    double f_val = 0.0;
    bool resolved = false;
};

struct ScatteringCoords {
    double t = 0.0;
    std::vector<ScatterPoint> points;
    std::size_t unresolved = 0;
};

/// u_inf = e^{-t}u, s_inf = e^t s - (mu t/2) G(u_inf); with `correction`
/// false the last term is dropped (control). Unresolved where u_inf is off G's grid.
ScatteringCoords scattering_coords(const PhaseSnapshot& snap, std::span<const double> f0,
                                   const VectorField2D& G, int mu, bool correction = true);

/// The modified stable characteristic read forwards: (s_inf, u_inf) -> (s, u) at time t,
/// s = e^{-t}(s_inf + (mu t/2) G(u_inf)), u = e^t u_inf.
std::optional<HyperPoint> modified_characteristic(double t, const Vec2& s_inf, const Vec2& u_inf,
                                                  const VectorField2D& G, int mu);

/// Scattering state stored as the two per-axis phase-plane marginals
/// F_i(s^i, u^i) of fbar_inf, in (s,u) measure.
struct FInfGrid {
    std::array<ScalarField2D, 2> density;  ///< CIC of w/4
    std::array<ScalarField2D, 2> value;    ///< CIC of f_val (vol/4) det J
    std::array<ScalarField2D, 2> counts;   ///< particles per node (nearest)
    double resolved_fraction = 0.0;
    double mass = 0.0;                     ///< kPhaseJacobian h^2 sum density (axis 0)
};

/// +-5 sigma per axis, 128 nodes. Throws NumericalError below 90% resolved.
FInfGrid reconstruct_f_inf(const ScatteringCoords& coords, const ParticleTrack& track, const SimConfig& cfg);

/// RMS relative difference of the two estimators over nodes with >= min_count particles.
double estimator_agreement(const FInfGrid& f, int min_count = 10);

struct ConservationReport {
    double mass_initial = 0.0;       ///< sum w
    double mass_f_inf = 0.0;         ///< from the reconstructed grid
    double mass_rel_error = 0.0;
    double kinetic_grid = 0.0;       ///< -8 sum_i int s u F_i
    double kinetic_particles = 0.0;  ///< -2 sum_p w u_inf . s_inf
    double potential = 0.0;          ///< (mu/2) int phi_asymp rho_inf
    double h_initial = 0.0;
    double h_f_inf = 0.0;
    double h_rel_error = 0.0;        ///< |H_inf - H_0| / max(|H_0|, eps^2)
};

ConservationReport asymptotic_conservation_check(const FInfGrid& f, const ScatteringCoords& coords,
                                                 const ParticleTrack& track, const AsymptoticField& field,
                                                 int mu, double h_initial, double epsilon);

/// Per-particle convergence of scattering coordinates over snapshot times.
struct ConvergenceTable {
    std::vector<double> times;
    std::vector<double> sup_diff;       ///< max_p |(s,u)_inf(t_{k+1}) - (s,u)_inf(t_k)|
    std::vector<double> control_diff;   ///< same with the correction zeroed
    double slope_corrected = 0.0;       ///< max_p |fitted slope of s_inf(t)|
    double slope_control = 0.0;         ///< max_p |fitted slope of e^t s(t)|
};

ConvergenceTable scattering_convergence(const ParticleTrack& track, std::span<const double> times,
                                        const VectorField2D& G, int mu);

/// Point value of q_inf at u from a least-squares quadratic over the nodes
/// within `radius`; single nodes on a fine grid carry sampling noise.
double q_inf_value(const ScalarField2D& q_inf, Vec2 u, double radius);

/// Dirac limit of the weak functional: q_inf(ubar) * int g(0, u) du.
double weak_prediction(const ScalarField2D& q_inf, const TestFunction& g, Vec2 ubar, double radius);

/// max over u~ nodes of |profile - G(u~)| where both are available.
double force_profile_error(const VectorField2D& profile, const VectorField2D& G);

struct ScatteringState {
    QInfEstimate q;
    AsymptoticField field;
    ScatteringCoords coords;
    FInfGrid f_inf;
    double t_extracted = 0.0;
};

struct ScatterOptions {
    double t1 = -1.0;        ///< default t_f - 2
    double t2 = -1.0;        ///< default last snapshot
    int picard = 0;          ///< extra re-extractions with the updated q_inf
};

ScatteringState extract_scattering(const ParticleTrack& track, const GridSpec& x_grid_at_t2,
                                   const SimConfig& cfg, const ScatterOptions& opt = {});

}  // namespace vptrap
