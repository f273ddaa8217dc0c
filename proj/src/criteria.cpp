#include "vptrap/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vptrap::criteria {

namespace {

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

}  // namespace

Verdict mass_and_energy(std::span<const double> mass, std::span<const double> energy) {
    if (mass.empty() || energy.empty()) return {false, "no samples"};
    bool bitwise = true;
    for (double m : mass) bitwise = bitwise && m == mass[0];
    double drift = 0.0;
    for (double h : energy) drift = std::max(drift, std::abs(h - energy[0]) / std::abs(energy[0]));
    return {bitwise && drift < kEnergyDrift,
            std::string(bitwise ? "mass bitwise constant" : "mass changed") +
                fmt(", max |dH|/|H0| = %.3e (limit %.0e)", drift, kEnergyDrift)};
}

Verdict dt_halving(double drift_dt, double drift_half) {
    const double r = drift_dt / drift_half;
    return {r >= kDtRatioLow && r <= kDtRatioHigh, fmt("drift ratio %.4f (limits %.1f-%.1f)", r, kDtRatioLow, kDtRatioHigh)};
}

Verdict density_decay(std::span<const double> t, std::span<const double> sup_rho) {
    if (sup_rho.empty()) return {false, "no samples"};
    double lo = INFINITY, hi = 0.0, t_hi = 0.0;
    for (std::size_t k = 0; k < sup_rho.size(); ++k) {
        const double r = sup_rho[k] / sup_rho[0];
        lo = std::min(lo, r);
        if (r > hi) hi = r, t_hi = t[k];
    }
    return {hi <= kDensityFactor && lo >= 1.0 / kDensityFactor,
            fmt("sup e^2t rho / initial in [%.4f, %.4f], max at t=%g", lo, hi, t_hi)};
}

Verdict geometric(std::span<const double> diffs, const std::string& what) {
    if (diffs.size() < 2) return {false, what + ": fewer than two differences"};
    double worst = 0.0;
    std::string list;
    for (std::size_t k = 0; k + 1 < diffs.size(); ++k) {
        const double r = diffs[k + 1] / diffs[k];
        worst = std::max(worst, std::isfinite(r) ? r : INFINITY);
        list += (k ? " " : "") + fmt("%.3f", r);
    }
    return {worst <= kGeometricRatio, what + " ratios " + list + fmt(" (limit %.1f)", kGeometricRatio)};
}

Verdict force_profile(double err_t5, double err_t7) {
    const double f = err_t5 / err_t7;
    return {f >= kForceFactor, fmt("error t=5 %.3e, t=7 %.3e, factor %.1f", err_t5, err_t7, f)};
}

Verdict control_slope(double slope_control, double slope_corrected) {
    const double f = slope_control / slope_corrected;
    return {f >= kControlSlopeFactor,
            fmt("control slope %.3e, corrected %.3e, factor %.0f", slope_control, slope_corrected, f)};
}

Verdict derivative_bounds(std::span<const double> t, std::span<const double> sf, std::span<const double> uf_ratio) {
    if (sf.empty()) return {false, "no samples"};
    double s = 0.0, u = 0.0;
    for (std::size_t k = 0; k < sf.size(); ++k) {
        s = std::max(s, sf[k] / sf[0]);
        u = std::max(u, uf_ratio[k] / uf_ratio[0]);
    }
    return {s <= kSfFactor && u <= kSfFactor,
            fmt("max Sf/Sf(0) %.3f, max (Uf/(1+t))/Uf(0) %.3f through t=%g", s, u, t.back())};
}

Verdict weak_limits(const std::map<std::string, std::pair<double, double>>& values) {
    if (values.empty()) return {false, "no test functions"};
    bool ok = true;
    std::string d;
    for (const auto& [name, vp] : values) {
        const double rel = vp.first / vp.second - 1.0;
        ok = ok && std::abs(rel) <= kWeakTolerance;
        d += (d.empty() ? "" : ", ") + name + fmt(" %+.3f%%", 100 * rel);
    }
    return {ok, d + fmt(" (limit %.0f%%)", 100 * kWeakTolerance)};
}

Verdict scattering_conservation(double mass_rel_error, double energy_rel_error) {
    return {mass_rel_error <= kMassTolerance && energy_rel_error <= kScatterEnergyTolerance,
            fmt("mass rel %.2e (limit 1e-2), energy rel %.3e (limit 5e-2)", mass_rel_error, energy_rel_error)};
}

}  // namespace vptrap::criteria
