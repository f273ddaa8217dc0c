#include "vptrap/integrator.hpp"

#include "vptrap/parallel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace vptrap {

namespace {

// Nodes kept clear of the particle extent on each side of a fresh grid.
constexpr int kPadCells = 3;
// A particle closer than this to the edge triggers a regrid.
constexpr int kTriggerCells = 2;

struct Extents {
    double as = 0.0;
    double au = 0.0;
    Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Vec2 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
};

Extents measure(const ParticleEnsemble& ens) {
    Extents e;
    for (const auto& p : ens.particles) {
        e.as = std::max(e.as, p.z.s.max_abs());
        e.au = std::max(e.au, p.z.u.max_abs());
        const Vec2 x = p.x();
        e.lo = {std::min(e.lo.x, x.x), std::min(e.lo.y, x.y)};
        e.hi = {std::max(e.hi.x, x.x), std::max(e.hi.y, x.y)};
    }
    return e;
}

// Half-width that leaves kPadCells of nodes beyond `reach`.
double padded_half(double reach, int n) {
    return reach / (1.0 - 2.0 * kPadCells / static_cast<double>(n - 1));
}

}  // namespace

IntegratorOptions IntegratorOptions::from_config(const SimConfig& cfg) {
    IntegratorOptions o;
    o.mu = cfg.mu;
    o.coupling = cfg.coupling;
    o.grid_n = cfg.grid_n;
    o.policy = cfg.grid_policy == "bbox" ? GridPolicy::BoundingBox : GridPolicy::Comoving;
    o.max_extent = cfg.grid_max_extent;
    return o;
}

Integrator::Integrator(IntegratorOptions opts) : opts_(opts), solver_(opts.grid_n) {
    if (opts_.mu != 1 && opts_.mu != -1) throw ConfigError("physics.mu", "mu must be +1 or -1");
}

bool all_inside(const ParticleEnsemble& ensemble, const GridSpec& spec, int cells) {
    const double lo_x = spec.origin.x + cells * spec.h, hi_x = spec.upper() - cells * spec.h;
    const double lo_y = spec.origin.y + cells * spec.h, hi_y = spec.origin.y + (spec.n - 1 - cells) * spec.h;
    for (const auto& p : ensemble.particles) {
        const Vec2 x = p.x();
        if (!(x.x >= lo_x && x.x <= hi_x && x.y >= lo_y && x.y <= hi_y)) return false;
    }
    return true;
}

GridSpec Integrator::target_spec(const SimState& state, double t) const {
    if (opts_.policy == GridPolicy::BoundingBox) return state.fixed_spec;
    const double tau = t - state.base_t;
    double reach = state.base_margin * (state.base_as * std::exp(-tau) + state.base_au * std::exp(tau));
    if (!(reach > 0.0)) reach = 1.0;
    return GridSpec::centered({0.0, 0.0}, padded_half(reach, opts_.grid_n), opts_.grid_n);
}

SimState Integrator::initialize(ParticleEnsemble ensemble, double t0) {
    SimState st;
    st.t = t0;
    st.ensemble = std::move(ensemble);
    const Extents e = measure(st.ensemble);
    st.base_t = t0;
    st.base_as = e.as;
    st.base_au = e.au;
    if (opts_.policy == GridPolicy::BoundingBox) {
        const double reach = std::max({std::abs(e.lo.x), std::abs(e.lo.y), std::abs(e.hi.x), std::abs(e.hi.y), 1e-300});
        st.fixed_spec = GridSpec::centered({0.0, 0.0}, padded_half(1.2 * reach, opts_.grid_n), opts_.grid_n);
    }
    refresh_field(st);
    return st;
}

bool Integrator::regrid(SimState& state) {
    const GridSpec current = target_spec(state, state.t);
    if (all_inside(state.ensemble, current, kTriggerCells)) return false;

    const Extents e = measure(state.ensemble);
    GridSpec next;
    if (opts_.policy == GridPolicy::Comoving) {
        state.base_t = state.t;
        state.base_as = e.as;
        state.base_au = e.au;
        state.base_margin = 1.2;
        next = target_spec(state, state.t);
    } else {
        // Bounding box inflated by 20% plus padding, origin snapped to a multiple of h.
        const Vec2 center = 0.5 * (e.lo + e.hi);
        const double reach = 0.6 * std::max(e.hi.x - e.lo.x, e.hi.y - e.lo.y);
        next = GridSpec::centered(center, padded_half(std::max(reach, 1e-300), opts_.grid_n), opts_.grid_n);
        next.origin = {std::floor(next.origin.x / next.h) * next.h, std::floor(next.origin.y / next.h) * next.h};
        // Snapping moves the box by < h; widen by one cell to keep the padding.
        next.h *= 1.0 + 1.0 / (opts_.grid_n - 1);
        state.fixed_spec = next;
    }
    const double half = 0.5 * (next.n - 1) * next.h;
    if (half > opts_.max_extent) {
        std::ostringstream os;
        os << "regrid at t=" << state.t << " needs half-width " << half << " > grid.max_extent "
           << opts_.max_extent << "; increase grid.n or grid.max_extent";
        throw NumericalError(os.str());
    }
    state.regrids.push_back({state.t, current, next});
    return true;
}

void Integrator::refresh_field(SimState& state) {
    GridSpec spec = target_spec(state, state.t);
    if (!all_inside(state.ensemble, spec, kTriggerCells)) {
        regrid(state);
        spec = target_spec(state, state.t);
        if (!all_inside(state.ensemble, spec, 1)) {
            std::ostringstream os;
            os << "particles still outside the grid after regrid at t=" << state.t;
            throw NumericalError(os.str());
        }
    }
    FieldCache& f = state.field;
    f.rho = deposit(state.ensemble, spec);
    f.phi = solver_.solve(f.rho);
    f.E = gradient(f.phi);
    if (!f.E.all_finite()) throw NumericalError("non-finite force field at t=" + std::to_string(state.t));
}

void half_kick(ParticleEnsemble& ensemble, const FieldCache& field, int mu, double tau, double t) {
    const double kick = tau * mu;
    const double acc = kick * std::exp(t);
    const GridSpec& spec = field.spec();
    parallel_for(ensemble.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            Particle& p = ensemble.particles[k];
            const Vec2 x = p.x();
            const auto st = cic_stencil(spec, x, 1);
            if (!st) {
                std::ostringstream os;
                os << "kick: particle " << k << " at (" << x.x << ", " << x.y << ") outside field grid";
                throw OutOfDomainError(k, x.x, x.y, os.str());
            }
            const auto w = st->weights();
            const int i = st->i, j = st->j;
            const Vec2& e00 = field.E.at(i, j);
            const Vec2& e10 = field.E.at(i + 1, j);
            const Vec2& e01 = field.E.at(i, j + 1);
            const Vec2& e11 = field.E.at(i + 1, j + 1);
            const Vec2 e = w[0] * e00 + w[1] * e10 + w[2] * e01 + w[3] * e11;
            // Derivative of the interpolated field, so J is the exact tangent of the kick.
            const Vec2 dEdx = (1.0 / spec.h) * ((1 - st->ty) * (e10 - e00) + st->ty * (e11 - e01));
            const Vec2 dEdy = (1.0 / spec.h) * ((1 - st->tx) * (e01 - e00) + st->tx * (e11 - e10));

            // v -= kick E  <=>  s += kick E / 2, u -= kick E / 2
            const Vec2 half_dv = (0.5 * kick) * e;
            p.z.s += half_dv;
            p.z.u -= half_dv;
            p.drift += acc * e;

            // Tangent: ds' = ds + (kick/2) DE (ds + du), du' = du - (kick/2) DE (ds + du)
            for (int col = 0; col < 4; ++col) {
                const double dx1 = p.J(0, col) + p.J(2, col);
                const double dx2 = p.J(1, col) + p.J(3, col);
                const double q1 = 0.5 * kick * (dEdx.x * dx1 + dEdy.x * dx2);
                const double q2 = 0.5 * kick * (dEdx.y * dx1 + dEdy.y * dx2);
                p.J(0, col) += q1;
                p.J(1, col) += q2;
                p.J(2, col) -= q1;
                p.J(3, col) -= q2;
            }
        }
    });
}

void exact_drift(ParticleEnsemble& ensemble, double dt) {
    const double contract = std::exp(-dt), expand = std::exp(dt);
    parallel_for(ensemble.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            Particle& p = ensemble.particles[k];
            p.z.s *= contract;
            p.z.u *= expand;
            for (int col = 0; col < 4; ++col) {
                p.J(0, col) *= contract;
                p.J(1, col) *= contract;
                p.J(2, col) *= expand;
                p.J(3, col) *= expand;
            }
        }
    });
}

void Integrator::step(SimState& state, double dt) {
    if (!(dt > 0.0)) throw NumericalError("step: dt must be positive");
    if (opts_.coupling) half_kick(state.ensemble, state.field, opts_.mu, 0.5 * dt, state.t);
    exact_drift(state.ensemble, dt);
    state.t += dt;
    try {
        refresh_field(state);
    } catch (const OutOfDomainError&) {
        // One retry on a freshly placed grid before giving up.
        regrid(state);
        refresh_field(state);
    }
    if (opts_.coupling) half_kick(state.ensemble, state.field, opts_.mu, 0.5 * dt, state.t);
    ++state.step_count;
}

void Integrator::advance_to(SimState& state, double t_end, double dt) {
    // Step count chosen up front so sample times are hit without drift in t.
    const double span = t_end - state.t;
    if (span <= 1e-12) return;
    const long steps = std::max(1L, std::lround(std::ceil(span / dt - 1e-9)));
    const double h = span / static_cast<double>(steps);
    const double t0 = state.t;
    for (long k = 1; k <= steps; ++k) {
        step(state, h);
        state.t = t0 + span * static_cast<double>(k) / static_cast<double>(steps);
    }
    state.t = t_end;
}

Mat4 tangent_xv(const Mat4& J_su) {
    // (x, v) = T (s, u) with x = s + u, v = u - s; T^{-1}: s = (x - v)/2, u = (x + v)/2.
    Mat4 T, Tinv;
    for (int a = 0; a < 2; ++a) {
        T(a, a) = 1.0;       T(a, 2 + a) = 1.0;
        T(2 + a, a) = -1.0;  T(2 + a, 2 + a) = 1.0;
        Tinv(a, a) = 0.5;    Tinv(a, 2 + a) = -0.5;
        Tinv(2 + a, a) = 0.5; Tinv(2 + a, 2 + a) = 0.5;
    }
    return T * J_su * Tinv;
}

}  // namespace vptrap
