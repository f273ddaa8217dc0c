// Pass/fail checks of the acceptance thresholds on measured series. Shared by
// the acceptance binary and `vptrap report`, which works from files.
#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>

namespace vptrap::criteria {

struct Verdict {
    bool pass = false;
    std::string detail;
};

inline constexpr double kEnergyDrift = 1e-2;
inline constexpr double kDtRatioLow = 3.5, kDtRatioHigh = 4.5;
inline constexpr double kDensityFactor = 2.0;
inline constexpr double kGeometricRatio = 0.6;
inline constexpr double kForceFactor = 2.0;
inline constexpr double kControlSlopeFactor = 5.0;
inline constexpr double kSfFactor = 10.0;
inline constexpr double kWeakTolerance = 5e-2;
inline constexpr double kMassTolerance = 1e-2;
inline constexpr double kScatterEnergyTolerance = 5e-2;

/// Mass bitwise constant and max |H(t) - H(0)| / |H(0)| < 1%.
Verdict mass_and_energy(std::span<const double> mass, std::span<const double> energy);
/// drift(dt) / drift(dt/2) within [3.5, 4.5].
Verdict dt_halving(double drift_dt, double drift_half);
/// sup e^{2t} rho within a factor 2 of its first value at every sample.
Verdict density_decay(std::span<const double> t, std::span<const double> sup_rho);
/// Every consecutive ratio d[k+1]/d[k] <= 0.6.
Verdict geometric(std::span<const double> diffs, const std::string& what);
Verdict force_profile(double err_t5, double err_t7);
Verdict control_slope(double slope_control, double slope_corrected);
/// sup Sf <= 10 sup Sf(0) and sup Uf/(1+t) <= 10 times its t = 0 value.
Verdict derivative_bounds(std::span<const double> t, std::span<const double> sf, std::span<const double> uf_ratio);
/// name -> (value, prediction), each within 5%.
Verdict weak_limits(const std::map<std::string, std::pair<double, double>>& values);
Verdict scattering_conservation(double mass_rel_error, double energy_rel_error);

}  // namespace vptrap::criteria
