// Measurable counterparts of the decay and convergence estimates: density and
// force profiles on the rescaled unstable coordinate u~ = e^{-t} x, normalised
// stable averages, the Hamiltonian, derivative bounds via the tangent flow,
// weak functionals and decay-rate fits.
#pragma once

#include "vptrap/core.hpp"
#include "vptrap/grid.hpp"
#include "vptrap/integrator.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace vptrap {

/// Fixed u~ grid for density/force profiles: +-4 sigma_u, 64 nodes per axis.
GridSpec profile_grid(const SimConfig& cfg);
/// Fixed u~ grid for the stable average: +-6.5 sigma_u, 33 nodes per axis.
GridSpec stable_average_grid(const SimConfig& cfg);

struct DensityProfile {
    double sup_e2t_rho = 0.0;    ///< max over grid nodes of e^{2t} rho(t, x)
    ScalarField2D profile;       ///< e^{2t} rho(t, e^t u~); NaN where missing
    std::size_t missing = 0;
};

DensityProfile density_profile(const SimState& state, const GridSpec& utilde);

/// e^t grad phi(t, e^t u~) on the u~ grid; NaN where the x grid does not reach.
VectorField2D force_profile(const SimState& state, const GridSpec& utilde);

struct StableAverage {
    ScalarField2D q;            ///< e^{2t} int fbar(t, s, e^t u~) ds, (s,u) measure
    std::size_t dropped = 0;    ///< particles whose u~ fell outside the grid
    double dropped_mass = 0.0;
};

/// Cloud-in-cell estimate of the stable average from particles at u~ = e^{-t}u.
/// h^2 sum(q) * kPhaseJacobian + dropped mass = total mass.
StableAverage stable_average(const ParticleEnsemble& ensemble, double t, const GridSpec& utilde);

struct Energy {
    double kinetic = 0.0;    ///< (1/2) sum w (|v|^2 - |x|^2) = -2 sum w u.s
    double potential = 0.0;  ///< (mu/2) int phi rho
    double total = 0.0;
};

/// Hamiltonian with the log-kernel potential energy (mu/2) int phi rho, which
/// equals -(mu/2) int |grad phi|^2 up to the divergent boundary term.
Energy hamiltonian(const SimState& state, int mu, bool coupling = true);

struct DerivativeBounds {
    double sup_Sf = 0.0;           ///< max_p max_i |e^{-t} (d_x - d_v)_i f|
    double sup_Uf = 0.0;           ///< max_p max_i |e^{t} (d_x + d_v)_i f|
    double uf_ratio = 0.0;         ///< sup_Uf / (1 + t)
    double weighted_Sf = 0.0;      ///< with <z_plus>^M <z_minus>^M
    double weighted_Uf = 0.0;
    std::size_t flagged = 0;       ///< particles with |det J| < 1e-3 (excluded)
};

/// Gradient of f at particle p's current point in (s, u) variables:
/// J^{-T} applied to the initial (s,u)-gradient.
std::array<double, 4> gradient_su(const Particle& p);

DerivativeBounds derivative_bounds(const SimState& state, int norm_M);

/// Smooth test function of (s, u) with a closed-form s = 0 integral.
struct TestFunction {
    std::string name;       ///< "gaussian" or "cosine"
    double s_width = 1.0;   ///< Gaussian s-width or cosine radius in s
    double u_width = 400.0; ///< Gaussian u-width or cosine radius in u
    Vec2 u_center{};        ///< fixed centre in u

    double operator()(const Vec2& s, const Vec2& u) const;
    /// int g(0, u) du over R^2.
    double integral_at_s0() const;
};

/// The registry: a Gaussian bump and a cosine bump sized to the t = 8 support.
std::vector<TestFunction> test_function_registry();
TestFunction make_test_function(const std::string& name);

/// e^{2t} sum_p (w_p / 4) g(s_p, u_p - e^t ubar).
double weak_functional(const ParticleEnsemble& ensemble, double t, const TestFunction& g,
                       Vec2 ubar = {0.0, 0.0});

enum class RateModel { Full, ExpOnly };

struct RateFit {
    double k = 0.0;          ///< polynomial exponent (0 for ExpOnly)
    double lambda = 0.0;     ///< exponential rate
    double log_c = 0.0;
    double residual = 0.0;   ///< RMS of log residuals
    std::size_t used = 0;
    std::vector<std::size_t> excluded;  ///< indices of non-positive samples
};

/// Least squares of log y = log c + k log(1 + t) - lambda t over samples
/// with t >= t_min. Needs >= 5 usable samples (NumericalError otherwise).
RateFit fit_rate(std::span<const double> times, std::span<const double> values, RateModel model,
                 double t_min = 0.0);

/// Everything measured at one sample time.
struct DiagnosticsSample {
    double t = 0.0;
    double mass = 0.0;
    double sup_e2t_rho = 0.0;
    Energy energy;
    DensityProfile density;
    VectorField2D force;
    StableAverage q;
    DerivativeBounds deriv;
    std::map<std::string, double> weak;
    std::size_t regrids = 0;
};

DiagnosticsSample measure(const SimState& state, const SimConfig& cfg);

struct DiagnosticsSeries {
    std::vector<DiagnosticsSample> samples;
    std::map<std::string, RateFit> fitted_rates;

    std::vector<double> times() const;
    const DiagnosticsSample* at(double t, double tol = 1e-9) const;
};

/// sup-norm of a - b over nodes where both are finite.
double sup_difference(const ScalarField2D& a, const ScalarField2D& b);

}  // namespace vptrap
