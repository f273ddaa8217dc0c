#include "vptrap/scattering.hpp"

#include "vptrap/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vptrap {

namespace {

// Adds m/h^2 bilinearly at p; false when p is off the grid.
bool cic_add(ScalarField2D& f, Vec2 p, double m) {
    const auto st = cic_stencil(f.spec, p, 0);
    if (!st) return false;
    const auto w = st->weights();
    const double a = m / (f.spec.h * f.spec.h);
    f.at(st->i, st->j) += a * w[0];
    f.at(st->i + 1, st->j) += a * w[1];
    f.at(st->i, st->j + 1) += a * w[2];
    f.at(st->i + 1, st->j + 1) += a * w[3];
    return true;
}

void nearest_add(ScalarField2D& f, Vec2 p) {
    const int i = static_cast<int>(std::lround((p.x - f.spec.origin.x) / f.spec.h));
    const int j = static_cast<int>(std::lround((p.y - f.spec.origin.y) / f.spec.h));
    if (i < 0 || j < 0 || i >= f.spec.n || j >= f.spec.n) return;
    f.at(i, j) += 1.0;
}

double slope(std::span<const double> t, std::span<const double> y) {
    double tm = 0, ym = 0;
    for (std::size_t k = 0; k < t.size(); ++k) tm += t[k], ym += y[k];
    tm /= t.size();
    ym /= t.size();
    double num = 0, den = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        num += (t[k] - tm) * (y[k] - ym);
        den += (t[k] - tm) * (t[k] - tm);
    }
    return num / den;
}

}  // namespace

ParticleTrack ParticleTrack::from_ensemble(const ParticleEnsemble& e) {
    ParticleTrack tr;
    tr.w.reserve(e.size());
    tr.vol.reserve(e.size());
    tr.f0.reserve(e.size());
    for (const auto& p : e.particles) {
        tr.w.push_back(p.w);
        tr.vol.push_back(p.vol);
        tr.f0.push_back(p.f0_val);
    }
    tr.det_j.assign(e.size(), 1.0);
    return tr;
}

void ParticleTrack::add_snapshot(const ParticleEnsemble& e, double t) {
    if (e.size() != w.size()) throw NumericalError("particle track: ensemble size changed");
    if (!snapshots.empty() && !(t > snapshots.back().t)) throw NumericalError("particle track: times must increase");
    PhaseSnapshot s;
    s.t = t;
    s.z.reserve(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) {
        s.z.push_back(e.particles[k].z);
        det_j[k] = e.particles[k].J.det();
    }
    snapshots.push_back(std::move(s));
}

const PhaseSnapshot* ParticleTrack::at(double t, double tol) const {
    for (const auto& s : snapshots)
        if (std::abs(s.t - t) <= tol) return &s;
    return nullptr;
}

double ParticleTrack::total_mass() const {
    double m = 0.0;
    for (double x : w) m += x;
    return m;
}

GridSpec asymptotic_grid(const GridSpec& x_grid, double t) { return x_grid.scaled(std::exp(t)); }

ScalarField2D stable_average(const PhaseSnapshot& snap, std::span<const double> w, const GridSpec& utilde) {
    ScalarField2D q(utilde);
    const double emt = std::exp(-snap.t);
    for (std::size_t k = 0; k < snap.z.size(); ++k) cic_add(q, emt * snap.z[k].u, w[k] / kPhaseJacobian);
    return q;
}

QInfEstimate estimate_q_inf(const ParticleTrack& track, double t1, double t2, const GridSpec& utilde) {
    if (!(t1 >= 2.0) || !(t2 > t1)) {
        std::ostringstream os;
        os << "estimate_q_inf: need t2 > t1 >= 2, got t1=" << t1 << " t2=" << t2;
        throw NumericalError(os.str());
    }
    const auto* s1 = track.at(t1);
    const auto* s2 = track.at(t2);
    if (!s1 || !s2) throw NumericalError("estimate_q_inf: no particle snapshot at t1 or t2");

    QInfEstimate out;
    out.q_inf = stable_average(*s2, track.w, utilde);
    out.error = sup_difference(out.q_inf, stable_average(*s1, track.w, utilde));

    ScalarField2D prev;
    for (const auto& s : track.snapshots) {
        if (s.t < t1 - 1e-9 || s.t > t2 + 1e-9) continue;
        auto q = stable_average(s, track.w, utilde);
        if (!out.times.empty()) out.successive.push_back(sup_difference(q, prev));
        out.times.push_back(s.t);
        prev = std::move(q);
    }
    for (std::size_t k = 1; k < out.successive.size(); ++k)
        if (!(out.successive[k] < out.successive[k - 1])) {
            std::ostringstream os;
            os << "successive differences stop decreasing at t=" << out.times[k + 1]
               << " (resolution floor reached)";
            out.warnings.push_back(os.str());
            break;
        }
    double qmin = 0.0;
    for (double v : out.q_inf.values) qmin = std::min(qmin, v);
    if (qmin < 0.0) out.warnings.push_back("q_inf has negative values");
    return out;
}

AsymptoticField solve_asymptotic_poisson(const ScalarField2D& q_inf) {
    if (!q_inf.all_finite()) throw NumericalError("solve_asymptotic_poisson: q_inf is not finite");
    AsymptoticField f;
    f.source = q_inf;
    for (double& v : f.source.values) v *= kPhaseJacobian;
    f.phi = solve_free_space(f.source);
    f.grad = gradient(f.phi);
    return f;
}

ScatteringCoords scattering_coords(const PhaseSnapshot& snap, std::span<const double> f0, const VectorField2D& G,
                                   int mu, bool correction) {
    if (snap.t < 1.0) throw NumericalError("scattering_coords: need t >= 1");
    ScatteringCoords out;
    out.t = snap.t;
    out.points.resize(snap.z.size());
    const double et = std::exp(snap.t), emt = std::exp(-snap.t);
    const double c = 0.5 * mu * snap.t;
    for (std::size_t k = 0; k < snap.z.size(); ++k) {
        auto& q = out.points[k];
        q.u_inf = emt * snap.z[k].u;
        q.f_val = f0[k];
        const auto g = G.sample(q.u_inf);
        q.resolved = g.has_value();
        if (!q.resolved) {
            ++out.unresolved;
            q.s_inf = et * snap.z[k].s;
            continue;
        }
        q.s_inf = correction ? et * snap.z[k].s - c * *g : et * snap.z[k].s;
    }
    return out;
}

std::optional<HyperPoint> modified_characteristic(double t, const Vec2& s_inf, const Vec2& u_inf,
                                                  const VectorField2D& G, int mu) {
    const auto g = G.sample(u_inf);
    if (!g) return std::nullopt;
    return HyperPoint{std::exp(-t) * (s_inf + (0.5 * mu * t) * *g), std::exp(t) * u_inf};
}

FInfGrid reconstruct_f_inf(const ScatteringCoords& coords, const ParticleTrack& track, const SimConfig& cfg) {
    const std::size_t n = coords.points.size();
    const double frac = n ? 1.0 - static_cast<double>(coords.unresolved) / static_cast<double>(n) : 0.0;
    if (frac < 0.9) {
        std::ostringstream os;
        os << "reconstruct_f_inf: only " << 100.0 * frac
           << "% of particles resolved; use a larger u~ grid (grid.n or the run's grid extent)";
        throw NumericalError(os.str());
    }
    const auto plane = GridSpec::centered({0, 0}, 5.0 * std::max(cfg.sigma_s, cfg.sigma_u), 128);
    FInfGrid f;
    f.resolved_fraction = frac;
    for (int a = 0; a < 2; ++a) {
        f.density[a] = ScalarField2D(plane);
        f.value[a] = ScalarField2D(plane);
        f.counts[a] = ScalarField2D(plane);
    }
    for (std::size_t k = 0; k < n; ++k) {
        const auto& p = coords.points[k];
        if (!p.resolved) continue;
        const double m = track.w[k] / kPhaseJacobian;
        const double mv = p.f_val * (track.vol[k] / kPhaseJacobian) * track.det_j[k];
        const Vec2 pl[2] = {{p.s_inf.x, p.u_inf.x}, {p.s_inf.y, p.u_inf.y}};
        for (int a = 0; a < 2; ++a) {
            cic_add(f.density[a], pl[a], m);
            cic_add(f.value[a], pl[a], mv);
            nearest_add(f.counts[a], pl[a]);
        }
    }
    f.mass = kPhaseJacobian * plane.h * plane.h * f.density[0].sum();
    return f;
}

double estimator_agreement(const FInfGrid& f, int min_count) {
    double ss = 0.0;
    std::size_t cells = 0;
    for (int a = 0; a < 2; ++a)
        for (std::size_t k = 0; k < f.density[a].values.size(); ++k) {
            if (f.counts[a].values[k] < min_count) continue;
            const double d = f.density[a].values[k];
            if (!(d > 0.0)) continue;
            const double r = (f.value[a].values[k] - d) / d;
            ss += r * r;
            ++cells;
        }
    return cells ? std::sqrt(ss / static_cast<double>(cells)) : 0.0;
}

ConservationReport asymptotic_conservation_check(const FInfGrid& f, const ScatteringCoords& coords,
                                                 const ParticleTrack& track, const AsymptoticField& field,
                                                 int mu, double h_initial, double epsilon) {
    ConservationReport r;
    r.mass_initial = track.total_mass();
    r.mass_f_inf = f.mass;
    r.mass_rel_error = std::abs(r.mass_f_inf - r.mass_initial) / r.mass_initial;

    // -8 sum_i int s u F_i ds du, on the nodes of each plane
    for (int a = 0; a < 2; ++a) {
        const auto& g = f.density[a].spec;
        double acc = 0.0;
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                const Vec2 node = g.node(i, j);
                acc += node.x * node.y * f.density[a].at(i, j);
            }
        r.kinetic_grid += -8.0 * g.h * g.h * acc;
    }
    for (std::size_t k = 0; k < coords.points.size(); ++k) {
        const auto& p = coords.points[k];
        if (p.resolved) r.kinetic_particles += -2.0 * track.w[k] * p.u_inf.dot(p.s_inf);
    }
    r.potential = 0.5 * mu * field_energy(field.source, field.phi);
    r.h_initial = h_initial;
    r.h_f_inf = r.kinetic_grid + r.potential;
    r.h_rel_error = std::abs(r.h_f_inf - h_initial) / std::max(std::abs(h_initial), epsilon * epsilon);
    return r;
}

ConvergenceTable scattering_convergence(const ParticleTrack& track, std::span<const double> times,
                                        const VectorField2D& G, int mu) {
    ConvergenceTable tab;
    std::vector<ScatteringCoords> cor, ctl;
    for (double t : times) {
        const auto* s = track.at(t);
        if (!s) {
            std::ostringstream os;
            os << "scattering_convergence: no particle snapshot at t=" << t;
            throw NumericalError(os.str());
        }
        tab.times.push_back(t);
        cor.push_back(scattering_coords(*s, track.f0, G, mu, true));
        ctl.push_back(scattering_coords(*s, track.f0, G, mu, false));
    }
    auto sup_diff = [](const ScatteringCoords& a, const ScatteringCoords& b) {
        double m = 0.0;
        for (std::size_t k = 0; k < a.points.size(); ++k) {
            const auto &p = a.points[k], &q = b.points[k];
            if (!p.resolved || !q.resolved) continue;
            m = std::max({m, (p.s_inf - q.s_inf).max_abs(), (p.u_inf - q.u_inf).max_abs()});
        }
        return m;
    };
    for (std::size_t k = 1; k < tab.times.size(); ++k) {
        tab.sup_diff.push_back(sup_diff(cor[k], cor[k - 1]));
        tab.control_diff.push_back(sup_diff(ctl[k], ctl[k - 1]));
    }
    if (tab.times.size() >= 2) {
        const std::size_t np = track.w.size(), nt = tab.times.size();
        std::vector<double> y(nt);
        for (std::size_t p = 0; p < np; ++p) {
            if (track.w[p] == 0.0) continue;
            bool ok = true;
            for (std::size_t k = 0; k < nt; ++k) ok = ok && cor[k].points[p].resolved;
            if (!ok) continue;
            for (int c = 0; c < 2; ++c) {
                for (std::size_t k = 0; k < nt; ++k) y[k] = c ? cor[k].points[p].s_inf.y : cor[k].points[p].s_inf.x;
                tab.slope_corrected = std::max(tab.slope_corrected, std::abs(slope(tab.times, y)));
                for (std::size_t k = 0; k < nt; ++k) y[k] = c ? ctl[k].points[p].s_inf.y : ctl[k].points[p].s_inf.x;
                tab.slope_control = std::max(tab.slope_control, std::abs(slope(tab.times, y)));
            }
        }
    }
    return tab;
}

double force_profile_error(const VectorField2D& profile, const VectorField2D& G) {
    double m = 0.0;
    for (int j = 0; j < profile.spec.n; ++j)
        for (int i = 0; i < profile.spec.n; ++i) {
            const Vec2 a = profile.at(i, j);
            if (!std::isfinite(a.x) || !std::isfinite(a.y)) continue;
            const auto g = G.sample(profile.spec.node(i, j));
            if (!g) continue;
            m = std::max(m, (a - *g).max_abs());
        }
    return m;
}

double q_inf_value(const ScalarField2D& q, Vec2 u, double radius) {
    // basis 1, dx, dy, dx^2, dx dy, dy^2 in units of radius
    double A[6][7] = {};
    std::size_t used = 0;
    for (int j = 0; j < q.spec.n; ++j)
        for (int i = 0; i < q.spec.n; ++i) {
            const Vec2 d = (1.0 / radius) * (q.spec.node(i, j) - u);
            if (d.dot(d) > 1.0 || !std::isfinite(q.at(i, j))) continue;
            const double b[6] = {1.0, d.x, d.y, d.x * d.x, d.x * d.y, d.y * d.y};
            for (int r = 0; r < 6; ++r) {
                for (int c = 0; c < 6; ++c) A[r][c] += b[r] * b[c];
                A[r][6] += b[r] * q.at(i, j);
            }
            ++used;
        }
    if (used < 12) throw NumericalError("q_inf_value: too few nodes within the fit radius");
    for (int c = 0; c < 6; ++c) {
        int piv = c;
        for (int r = c + 1; r < 6; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        std::swap(A[c], A[piv]);
        for (int r = 0; r < 6; ++r) {
            if (r == c) continue;
            const double f = A[r][c] / A[c][c];
            for (int k = c; k < 7; ++k) A[r][k] -= f * A[c][k];
        }
    }
    return A[0][6] / A[0][0];
}

double weak_prediction(const ScalarField2D& q_inf, const TestFunction& g, Vec2 ubar, double radius) {
    return q_inf_value(q_inf, ubar, radius) * g.integral_at_s0();
}

ScatteringState extract_scattering(const ParticleTrack& track, const GridSpec& x_grid_at_t2, const SimConfig& cfg,
                                   const ScatterOptions& opt) {
    if (track.snapshots.empty()) throw NumericalError("extract_scattering: no particle snapshots");
    const double t2 = opt.t2 > 0 ? opt.t2 : track.snapshots.back().t;
    const double t1 = opt.t1 > 0 ? opt.t1 : t2 - 2.0;
    ScatteringState st;
    st.t_extracted = t2;
    const auto ugrid = asymptotic_grid(x_grid_at_t2, t2);
    st.q = estimate_q_inf(track, t1, t2, ugrid);
    st.field = solve_asymptotic_poisson(st.q.q_inf);
    st.coords = scattering_coords(*track.at(t2), track.f0, st.field.grad, cfg.mu, true);
    // Picard step: the u~ marginal of the reconstructed coordinates as the new source.
    for (int it = 0; it < opt.picard; ++it) {
        ScalarField2D q(ugrid);
        for (std::size_t k = 0; k < st.coords.points.size(); ++k)
            cic_add(q, st.coords.points[k].u_inf, track.w[k] / kPhaseJacobian);
        st.q.picard_change.push_back(sup_difference(q, st.q.q_inf));
        st.q.q_inf = std::move(q);
        st.field = solve_asymptotic_poisson(st.q.q_inf);
        st.coords = scattering_coords(*track.at(t2), track.f0, st.field.grad, cfg.mu, true);
    }
    st.f_inf = reconstruct_f_inf(st.coords, track, cfg);
    return st;
}

}  // namespace vptrap
