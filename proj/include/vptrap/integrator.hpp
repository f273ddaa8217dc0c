// Time evolution of the characteristic system dx/dt = v, dv/dt = x - mu grad phi
// by kick-drift-kick splitting with the exact hyperbolic drift. Each kick also
// advances the per-particle tangent matrix and the modified-weight drift
// accumulator.
#pragma once

#include "vptrap/core.hpp"
#include "vptrap/grid.hpp"
#include "vptrap/poisson.hpp"

#include <memory>
#include <string>
#include <vector>

namespace vptrap {

struct FieldCache {
    ScalarField2D rho;
    ScalarField2D phi;
    VectorField2D E;        ///< grad phi
    const GridSpec& spec() const { return rho.spec; }
};

struct RegridEvent {
    double t = 0.0;
    GridSpec old_spec;
    GridSpec new_spec;
};

enum class GridPolicy { Comoving, BoundingBox };

struct IntegratorOptions {
    int mu = 1;
    bool coupling = true;
    int grid_n = 256;
    GridPolicy policy = GridPolicy::Comoving;
    double max_extent = 1e12;

    static IntegratorOptions from_config(const SimConfig& cfg);
};

struct SimState {
    double t = 0.0;
    ParticleEnsemble ensemble;
    FieldCache field;
    long step_count = 0;

    // Grid placement. Comoving grids follow the linear-flow image of the
    // base extents (a_s e^{-(t - base_t)} + a_u e^{t - base_t}).
    double base_t = 0.0;
    double base_as = 0.0;
    double base_au = 0.0;
    double base_margin = 1.05;
    GridSpec fixed_spec;  ///< current grid under the bounding-box policy
    std::vector<RegridEvent> regrids;
};

class Integrator {
public:
    explicit Integrator(IntegratorOptions opts);

    const IntegratorOptions& options() const { return opts_; }

    /// Builds the initial state and its field at time t0.
    SimState initialize(ParticleEnsemble ensemble, double t0 = 0.0);

    /// One kick-drift-kick step of length dt.
    void step(SimState& state, double dt);

    /// Advances in steps of at most dt until state.t reaches t_end exactly.
    void advance_to(SimState& state, double t_end, double dt);

    /// Re-places the grid when a particle is within two cells of its edge.
    /// Returns false (no-op) when every particle is well inside.
    bool regrid(SimState& state);

    /// Grid the policy prescribes at time t for this state.
    GridSpec target_spec(const SimState& state, double t) const;

    /// Deposits, solves and differentiates on the policy grid at state.t.
    void refresh_field(SimState& state);

private:
    IntegratorOptions opts_;
    FreeSpaceSolver solver_;
};

/// Velocity half-kick v <- v - tau mu E(x), the matching tangent update
/// (velocity rows gain -tau mu DE(x), DE the derivative of the interpolated
/// field, i.e. second differences of phi) and the drift-accumulator
/// increment tau mu e^t E(x). `t` is the time at which the field is valid.
void half_kick(ParticleEnsemble& ensemble, const FieldCache& field, int mu, double tau, double t);

/// Exact linear flow over dt for positions and tangent matrices.
void exact_drift(ParticleEnsemble& ensemble, double dt);

/// True when every particle is at least `cells` cells inside the grid.
bool all_inside(const ParticleEnsemble& ensemble, const GridSpec& spec, int cells);

/// Tangent matrix in (x,v) variables, d(x,v)(t)/d(x,v)(0).
Mat4 tangent_xv(const Mat4& J_su);

}  // namespace vptrap
