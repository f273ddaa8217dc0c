// Free-space 2D Poisson solver: Delta phi = rho with phi = (1/2pi) log|.| * rho,
// evaluated by zero-padded spectral convolution; plus cloud-in-cell
// deposition/interpolation and an O(N^2) direct-sum oracle.
#pragma once

#include "vptrap/core.hpp"
#include "vptrap/grid.hpp"

#include <memory>
#include <span>
#include <vector>

namespace vptrap {

/// Mean of log r over the unit square centred on the origin:
/// (1/2)(log(1/2) - 3 + pi/2).
double unit_cell_mean_log();

/// Bilinear deposition of point weights; density = weight / h^2.
/// Throws OutOfDomainError when a point is within one cell of the edge.
ScalarField2D deposit(std::span<const Vec2> positions, std::span<const double> weights,
                      const GridSpec& spec);
ScalarField2D deposit(const ParticleEnsemble& ensemble, const GridSpec& spec);

/// Reusable solver for one grid size; holds the FFTW plans and the
/// transformed kernel for unit spacing. Not thread-safe per instance.
class FreeSpaceSolver {
public:
    explicit FreeSpaceSolver(int n);
    ~FreeSpaceSolver();
    FreeSpaceSolver(const FreeSpaceSolver&) = delete;
    FreeSpaceSolver& operator=(const FreeSpaceSolver&) = delete;

    int n() const { return n_; }
    ScalarField2D solve(const ScalarField2D& rho);

private:
    struct Impl;
    int n_;
    std::unique_ptr<Impl> impl_;
};

/// One-shot solve using a cached solver for rho's grid size.
ScalarField2D solve_free_space(const ScalarField2D& rho);

/// Second-order central differences inside, one-sided second order on edges.
VectorField2D gradient(const ScalarField2D& phi);
/// Second differences of phi (xx, xy, yy).
TensorField2D hessian(const ScalarField2D& phi);

/// Per-particle kick acceleration -mu E(x_p), E bilinearly interpolated.
std::vector<Vec2> force_at(const ParticleEnsemble& ensemble, const VectorField2D& E, int mu);

struct DirectSum {
    std::vector<Vec2> grad_phi;        ///< grad phi at each particle
    std::size_t coincident_pairs = 0;  ///< pairs at identical positions (skipped)
};

/// grad phi(x_i) = (1/2pi) sum_{j != i} w_j (x_i - x_j)/|x_i - x_j|^2.
DirectSum direct_sum_force(const ParticleEnsemble& ensemble);
DirectSum direct_sum_force(std::span<const Vec2> positions, std::span<const double> weights);

/// (1/2pi) sum_{i != j} w_i w_j log|x_i - x_j|, i.e. int phi rho without self terms.
double direct_sum_energy(const ParticleEnsemble& ensemble);

/// `count` equal-weight particles (total weight 1) uniformly in the central
/// 85% of g, pairwise at least `min_cells` cells apart. The direct-sum oracle
/// ensemble: CIC smoothing error is negligible at that separation.
ParticleEnsemble separated_random_ensemble(const GridSpec& g, std::size_t count, double min_cells, std::uint64_t seed);

/// RMS over particles of |grid grad phi - direct grad phi| relative to the
/// RMS direct value; 0 when both vanish.
double grid_direct_rms_error(const ParticleEnsemble& ensemble, const GridSpec& g);

/// h^2 sum phi rho on the grid.
double field_energy(const ScalarField2D& rho, const ScalarField2D& phi);

}  // namespace vptrap
