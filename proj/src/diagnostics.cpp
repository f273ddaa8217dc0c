#include "vptrap/diagnostics.hpp"

#include "vptrap/poisson.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace vptrap {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double bracket(const Vec2& z) { return std::sqrt(1.0 + z.dot(z)); }

// Cosine bump cos^2(pi r / 2) on r < 1.
double cos_bump(double r) {
    if (r >= 1.0) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * r);
    return c * c;
}

}  // namespace

GridSpec profile_grid(const SimConfig& cfg) {
    return GridSpec::centered({0, 0}, 4.0 * cfg.sigma_u, 64);
}

GridSpec stable_average_grid(const SimConfig& cfg) {
    return GridSpec::centered({0, 0}, 6.5 * cfg.sigma_u, 33);
}

DensityProfile density_profile(const SimState& state, const GridSpec& utilde) {
    DensityProfile out;
    const double e2t = std::exp(2.0 * state.t), et = std::exp(state.t);
    const auto& rho = state.field.rho;
    for (double v : rho.values) out.sup_e2t_rho = std::max(out.sup_e2t_rho, e2t * v);
    out.profile = ScalarField2D(utilde);
    for (int j = 0; j < utilde.n; ++j)
        for (int i = 0; i < utilde.n; ++i) {
            const auto v = rho.sample(et * utilde.node(i, j));
            if (v) {
                out.profile.at(i, j) = e2t * *v;
            } else {
                out.profile.at(i, j) = kNaN;
                ++out.missing;
            }
        }
    return out;
}

VectorField2D force_profile(const SimState& state, const GridSpec& utilde) {
    VectorField2D out(utilde);
    const double et = std::exp(state.t);
    for (int j = 0; j < utilde.n; ++j)
        for (int i = 0; i < utilde.n; ++i) {
            const auto e = state.field.E.sample(et * utilde.node(i, j));
            out.at(i, j) = e ? et * *e : Vec2{kNaN, kNaN};
        }
    return out;
}

StableAverage stable_average(const ParticleEnsemble& ensemble, double t, const GridSpec& utilde) {
    StableAverage out;
    out.q = ScalarField2D(utilde);
    const double emt = std::exp(-t);
    const double inv_area = 1.0 / (utilde.h * utilde.h);
    for (const auto& p : ensemble.particles) {
        const double m = p.w / kPhaseJacobian;
        const auto st = cic_stencil(utilde, emt * p.z.u, 0);
        if (!st) {
            ++out.dropped;
            out.dropped_mass += p.w;
            continue;
        }
        const auto w = st->weights();
        out.q.at(st->i, st->j) += m * w[0] * inv_area;
        out.q.at(st->i + 1, st->j) += m * w[1] * inv_area;
        out.q.at(st->i, st->j + 1) += m * w[2] * inv_area;
        out.q.at(st->i + 1, st->j + 1) += m * w[3] * inv_area;
    }
    return out;
}

Energy hamiltonian(const SimState& state, int mu, bool coupling) {
    Energy e;
    for (const auto& p : state.ensemble.particles) e.kinetic += -2.0 * p.w * p.z.u.dot(p.z.s);
    if (coupling) e.potential = 0.5 * mu * field_energy(state.field.rho, state.field.phi);
    e.total = e.kinetic + e.potential;
    return e;
}

std::array<double, 4> gradient_su(const Particle& p) {
    const auto& g = p.f0_grad;
    // d_s = d_x - d_v, d_u = d_x + d_v per axis
    const std::array<double, 4> g0{g[0] - g[2], g[1] - g[3], g[0] + g[2], g[1] + g[3]};
    return p.J.transpose().solve(g0);
}

DerivativeBounds derivative_bounds(const SimState& state, int norm_M) {
    DerivativeBounds out;
    const double et = std::exp(state.t), emt = std::exp(-state.t);
    for (const auto& p : state.ensemble.particles) {
        if (std::abs(p.J.det()) < 1e-3) {
            ++out.flagged;
            continue;
        }
        const auto g = gradient_su(p);
        const double sf = emt * std::max(std::abs(g[0]), std::abs(g[1]));
        const double uf = et * std::max(std::abs(g[2]), std::abs(g[3]));
        const double wgt = std::pow(bracket(et * p.z.s), norm_M) * std::pow(bracket(emt * p.z.u), norm_M);
        out.sup_Sf = std::max(out.sup_Sf, sf);
        out.sup_Uf = std::max(out.sup_Uf, uf);
        out.weighted_Sf = std::max(out.weighted_Sf, wgt * sf);
        out.weighted_Uf = std::max(out.weighted_Uf, wgt * uf);
    }
    out.uf_ratio = out.sup_Uf / (1.0 + state.t);
    return out;
}

double TestFunction::operator()(const Vec2& s, const Vec2& u) const {
    const Vec2 du = u - u_center;
    if (name == "gaussian")
        return std::exp(-s.dot(s) / (2 * s_width * s_width) - du.dot(du) / (2 * u_width * u_width));
    if (name == "cosine") return cos_bump(s.norm() / s_width) * cos_bump(du.norm() / u_width);
    throw ConfigError("diagnostics.test_function", "unknown test function '" + name + "'");
}

double TestFunction::integral_at_s0() const {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (name == "gaussian") return two_pi * u_width * u_width;
    // 2 pi b^2 int_0^1 r cos^2(pi r/2) dr = 2 pi b^2 (1/4 - 1/pi^2)
    if (name == "cosine") return two_pi * u_width * u_width * (0.25 - 1.0 / (std::numbers::pi * std::numbers::pi));
    throw ConfigError("diagnostics.test_function", "unknown test function '" + name + "'");
}

TestFunction make_test_function(const std::string& name) {
    // Widths in u are chosen so that at t = 8 the window covers |u~| of a few
    // tenths, enough particles for a stable sum.
    if (name == "gaussian") return {"gaussian", 1.0, 400.0, {}};
    if (name == "cosine") return {"cosine", 2.0, 800.0, {}};
    throw ConfigError("diagnostics.test_function", "unknown test function '" + name + "'");
}

std::vector<TestFunction> test_function_registry() {
    return {make_test_function("gaussian"), make_test_function("cosine")};
}

double weak_functional(const ParticleEnsemble& ensemble, double t, const TestFunction& g, Vec2 ubar) {
    const double e2t = std::exp(2.0 * t);
    const Vec2 shift = std::exp(t) * ubar;
    double acc = 0.0;
    for (const auto& p : ensemble.particles) {
        if (p.w == 0.0) continue;
        acc += (p.w / kPhaseJacobian) * g(p.z.s, p.z.u - shift);
    }
    return e2t * acc;
}

RateFit fit_rate(std::span<const double> times, std::span<const double> values, RateModel model,
                 double t_min) {
    if (times.size() != values.size()) throw NumericalError("fit_rate: times and values differ in length");
    RateFit fit;
    std::vector<std::array<double, 3>> rows;
    std::vector<double> rhs;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < t_min) continue;
        if (!(values[k] > 0.0) || !std::isfinite(values[k])) {
            fit.excluded.push_back(k);
            continue;
        }
        rows.push_back({1.0, std::log1p(times[k]), -times[k]});
        rhs.push_back(std::log(values[k]));
    }
    fit.used = rows.size();
    if (fit.used < 5) {
        std::ostringstream os;
        os << "fit_rate: need at least 5 positive samples, have " << fit.used;
        throw NumericalError(os.str());
    }
    // Normal equations over the active columns.
    const std::vector<int> cols = model == RateModel::Full ? std::vector<int>{0, 1, 2} : std::vector<int>{0, 2};
    const int m = static_cast<int>(cols.size());
    double A[3][4] = {};
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (int a = 0; a < m; ++a) {
            for (int b = 0; b < m; ++b) A[a][b] += rows[r][cols[a]] * rows[r][cols[b]];
            A[a][m] += rows[r][cols[a]] * rhs[r];
        }
    for (int c = 0; c < m; ++c) {
        int piv = c;
        for (int r = c + 1; r < m; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        for (int k = 0; k <= m; ++k) std::swap(A[c][k], A[piv][k]);
        if (A[c][c] == 0.0) throw NumericalError("fit_rate: degenerate sample times");
        for (int r = 0; r < m; ++r) {
            if (r == c) continue;
            const double f = A[r][c] / A[c][c];
            for (int k = c; k <= m; ++k) A[r][k] -= f * A[c][k];
        }
    }
    double coef[3] = {0.0, 0.0, 0.0};
    for (int a = 0; a < m; ++a) coef[cols[a]] = A[a][m] / A[a][a];
    fit.log_c = coef[0];
    fit.k = coef[1];
    fit.lambda = coef[2];
    double ss = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double pred = coef[0] + coef[1] * rows[r][1] + coef[2] * rows[r][2];
        ss += (rhs[r] - pred) * (rhs[r] - pred);
    }
    fit.residual = std::sqrt(ss / static_cast<double>(rows.size()));
    return fit;
}

DiagnosticsSample measure(const SimState& state, const SimConfig& cfg) {
    DiagnosticsSample d;
    d.t = state.t;
    d.mass = state.ensemble.total_mass();
    d.density = density_profile(state, profile_grid(cfg));
    d.sup_e2t_rho = d.density.sup_e2t_rho;
    d.energy = hamiltonian(state, cfg.mu, cfg.coupling);
    d.force = force_profile(state, profile_grid(cfg));
    d.q = stable_average(state.ensemble, state.t, stable_average_grid(cfg));
    d.deriv = derivative_bounds(state, cfg.norm_M);
    for (const auto& g : test_function_registry()) d.weak[g.name] = weak_functional(state.ensemble, state.t, g);
    d.weak["gaussian_shift"] =
        weak_functional(state.ensemble, state.t, make_test_function("gaussian"), {0.5 * cfg.sigma_u, 0.0});
    d.regrids = state.regrids.size();
    return d;
}

std::vector<double> DiagnosticsSeries::times() const {
    std::vector<double> t;
    for (const auto& s : samples) t.push_back(s.t);
    return t;
}

const DiagnosticsSample* DiagnosticsSeries::at(double t, double tol) const {
    for (const auto& s : samples)
        if (std::abs(s.t - t) <= tol) return &s;
    return nullptr;
}

double sup_difference(const ScalarField2D& a, const ScalarField2D& b) {
    if (!(a.spec == b.spec)) throw NumericalError("sup_difference: grids differ");
    double m = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        const double d = a.values[k] - b.values[k];
        if (std::isfinite(d)) m = std::max(m, std::abs(d));
    }
    return m;
}

}  // namespace vptrap
