#include "vptrap/poisson.hpp"

#include "vptrap/parallel.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

namespace vptrap {

namespace {

constexpr double kInv2Pi = 0.5 / std::numbers::pi;

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

[[noreturn]] void throw_out_of_domain(std::size_t index, Vec2 p, const GridSpec& g) {
    std::ostringstream os;
    os << "particle " << index << " at (" << p.x << ", " << p.y << ") is outside the grid interior ["
       << g.origin.x + g.h << ", " << g.upper() - g.h << "]^2; re-grid required";
    throw OutOfDomainError(index, p.x, p.y, os.str());
}

}  // namespace

double unit_cell_mean_log() {
    // int_0^a int_0^a log(x^2 + y^2) = a^2 (log(2a^2) - 3 + pi/2); a = 1/2, four quadrants, halve for log r.
    return 0.5 * (std::log(0.5) - 3.0 + 0.5 * std::numbers::pi);
}

ScalarField2D deposit(std::span<const Vec2> positions, std::span<const double> weights,
                      const GridSpec& spec) {
    spec.validate();
    const std::size_t count = positions.size();
    const int chunks = static_cast<int>(std::clamp<std::size_t>(count / 20000, 1, 8));
    std::vector<ScalarField2D> partial(chunks, ScalarField2D(spec));
    parallel_chunks(count, chunks, [&](int c, std::size_t lo, std::size_t hi) {
        ScalarField2D& rho = partial[c];
        for (std::size_t p = lo; p < hi; ++p) {
            const auto st = cic_stencil(spec, positions[p], 1);
            if (!st) throw_out_of_domain(p, positions[p], spec);
            const auto w = st->weights();
            const double m = weights[p];
            rho.at(st->i, st->j) += w[0] * m;
            rho.at(st->i + 1, st->j) += w[1] * m;
            rho.at(st->i, st->j + 1) += w[2] * m;
            rho.at(st->i + 1, st->j + 1) += w[3] * m;
        }
    });
    ScalarField2D rho = std::move(partial[0]);
    for (int c = 1; c < chunks; ++c)
        for (std::size_t k = 0; k < rho.values.size(); ++k) rho.values[k] += partial[c].values[k];
    const double inv_area = 1.0 / (spec.h * spec.h);
    for (double& v : rho.values) v *= inv_area;
    return rho;
}

ScalarField2D deposit(const ParticleEnsemble& ensemble, const GridSpec& spec) {
    std::vector<Vec2> pos(ensemble.size());
    std::vector<double> w(ensemble.size());
    for (std::size_t p = 0; p < ensemble.size(); ++p) {
        pos[p] = ensemble.particles[p].x();
        w[p] = ensemble.particles[p].w;
    }
    return deposit(pos, w, spec);
}

struct FreeSpaceSolver::Impl {
    int m = 0;  // padded size
    double* real = nullptr;
    fftw_complex* spec = nullptr;
    fftw_complex* kernel = nullptr;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    ~Impl() {
        std::lock_guard lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
        fftw_free(real);
        fftw_free(spec);
        fftw_free(kernel);
    }
};

FreeSpaceSolver::FreeSpaceSolver(int n) : n_(n), impl_(std::make_unique<Impl>()) {
    if (n < 2) throw NumericalError("free-space solver needs n >= 2");
    auto& I = *impl_;
    I.m = 2 * n;
    const std::size_t real_size = static_cast<std::size_t>(I.m) * I.m;
    const std::size_t cplx_size = static_cast<std::size_t>(I.m) * (I.m / 2 + 1);
    I.real = fftw_alloc_real(real_size);
    I.spec = fftw_alloc_complex(cplx_size);
    I.kernel = fftw_alloc_complex(cplx_size);
    {
        std::lock_guard lock(planner_mutex());
        I.forward = fftw_plan_dft_r2c_2d(I.m, I.m, I.real, I.spec, FFTW_ESTIMATE);
        I.backward = fftw_plan_dft_c2r_2d(I.m, I.m, I.spec, I.real, FFTW_ESTIMATE);
    }

    // Kernel (1/2pi) log r on unit spacing, wrapped for circular convolution.
    for (int b = 0; b < I.m; ++b) {
        const double dy = b < n ? b : b - I.m;
        for (int a = 0; a < I.m; ++a) {
            const double dx = a < n ? a : a - I.m;
            const double r2 = dx * dx + dy * dy;
            I.real[static_cast<std::size_t>(b) * I.m + a] =
                r2 == 0.0 ? kInv2Pi * unit_cell_mean_log() : kInv2Pi * 0.5 * std::log(r2);
        }
    }
    fftw_execute_dft_r2c(I.forward, I.real, I.kernel);
}

FreeSpaceSolver::~FreeSpaceSolver() = default;

ScalarField2D FreeSpaceSolver::solve(const ScalarField2D& rho) {
    if (rho.spec.n != n_) throw NumericalError("solver/grid size mismatch");
    if (!rho.all_finite()) throw NumericalError("free-space solve: density contains non-finite values");
    auto& I = *impl_;
    const std::size_t m = I.m;
    std::fill(I.real, I.real + m * m, 0.0);
    for (int j = 0; j < n_; ++j)
        for (int i = 0; i < n_; ++i) I.real[j * m + i] = rho.at(i, j);
    fftw_execute_dft_r2c(I.forward, I.real, I.spec);
    const std::size_t cplx = m * (m / 2 + 1);
    for (std::size_t k = 0; k < cplx; ++k) {
        const double ar = I.spec[k][0], ai = I.spec[k][1];
        const double br = I.kernel[k][0], bi = I.kernel[k][1];
        I.spec[k][0] = ar * br - ai * bi;
        I.spec[k][1] = ar * bi + ai * br;
    }
    fftw_execute_dft_c2r(I.backward, I.spec, I.real);

    const double h = rho.spec.h;
    const double scale = h * h / static_cast<double>(m * m);
    // Spacing h shifts the kernel by (1/2pi) log h times the total mass.
    const double shift = kInv2Pi * std::log(h) * h * h * rho.sum();
    ScalarField2D phi(rho.spec);
    for (int j = 0; j < n_; ++j)
        for (int i = 0; i < n_; ++i) phi.at(i, j) = scale * I.real[j * m + i] + shift;
    return phi;
}

ScalarField2D solve_free_space(const ScalarField2D& rho) {
    static std::mutex cache_mutex;
    static std::map<int, std::unique_ptr<FreeSpaceSolver>> cache;
    std::lock_guard lock(cache_mutex);
    auto& slot = cache[rho.spec.n];
    if (!slot) slot = std::make_unique<FreeSpaceSolver>(rho.spec.n);
    return slot->solve(rho);
}

namespace {

// d/d(axis) of f with second-order stencils; axis 0 = x (i), 1 = y (j).
ScalarField2D derivative(const ScalarField2D& f, int axis) {
    const GridSpec& g = f.spec;
    ScalarField2D d(g);
    const int n = g.n;
    const double inv2h = 0.5 / g.h;
    auto val = [&](int i, int j, int k) { return axis == 0 ? f.at(k, j) : f.at(i, k); };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int k = axis == 0 ? i : j;
            double r;
            if (k == 0)
                r = (-3.0 * val(i, j, 0) + 4.0 * val(i, j, 1) - val(i, j, 2)) * inv2h;
            else if (k == n - 1)
                r = (3.0 * val(i, j, n - 1) - 4.0 * val(i, j, n - 2) + val(i, j, n - 3)) * inv2h;
            else
                r = (val(i, j, k + 1) - val(i, j, k - 1)) * inv2h;
            d.at(i, j) = r;
        }
    return d;
}

ScalarField2D second_derivative(const ScalarField2D& f, int axis) {
    const GridSpec& g = f.spec;
    ScalarField2D d(g);
    const int n = g.n;
    const double inv_h2 = 1.0 / (g.h * g.h);
    auto val = [&](int i, int j, int k) { return axis == 0 ? f.at(k, j) : f.at(i, k); };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int k = axis == 0 ? i : j;
            double r;
            if (k == 0)
                r = 2.0 * val(i, j, 0) - 5.0 * val(i, j, 1) + 4.0 * val(i, j, 2) - val(i, j, 3);
            else if (k == n - 1)
                r = 2.0 * val(i, j, n - 1) - 5.0 * val(i, j, n - 2) + 4.0 * val(i, j, n - 3) -
                    val(i, j, n - 4);
            else
                r = val(i, j, k + 1) - 2.0 * val(i, j, k) + val(i, j, k - 1);
            d.at(i, j) = r * inv_h2;
        }
    return d;
}

}  // namespace

VectorField2D gradient(const ScalarField2D& phi) {
    const auto dx = derivative(phi, 0);
    const auto dy = derivative(phi, 1);
    VectorField2D E(phi.spec);
    for (std::size_t k = 0; k < E.values.size(); ++k) E.values[k] = {dx.values[k], dy.values[k]};
    return E;
}

TensorField2D hessian(const ScalarField2D& phi) {
    const auto xx = second_derivative(phi, 0);
    const auto yy = second_derivative(phi, 1);
    const auto xy = derivative(derivative(phi, 1), 0);
    TensorField2D H(phi.spec);
    for (std::size_t k = 0; k < H.values.size(); ++k)
        H.values[k] = {xx.values[k], xy.values[k], yy.values[k]};
    for (const auto& t : H.values)
        if (!std::isfinite(t.xx) || !std::isfinite(t.xy) || !std::isfinite(t.yy))
            throw NumericalError("non-finite Hessian sample");
    return H;
}

std::vector<Vec2> force_at(const ParticleEnsemble& ensemble, const VectorField2D& E, int mu) {
    std::vector<Vec2> F(ensemble.size());
    parallel_for(ensemble.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const Vec2 x = ensemble.particles[p].x();
            const auto st = cic_stencil(E.spec, x, 1);
            if (!st) throw_out_of_domain(p, x, E.spec);
            const auto w = st->weights();
            const Vec2 e = w[0] * E.at(st->i, st->j) + w[1] * E.at(st->i + 1, st->j) +
                           w[2] * E.at(st->i, st->j + 1) + w[3] * E.at(st->i + 1, st->j + 1);
            F[p] = (-static_cast<double>(mu)) * e;
        }
    });
    return F;
}

DirectSum direct_sum_force(std::span<const Vec2> pos, std::span<const double> w) {
    DirectSum out;
    const std::size_t n = pos.size();
    out.grad_phi.assign(n, Vec2{});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const Vec2 d = pos[i] - pos[j];
            const double r2 = d.dot(d);
            if (r2 == 0.0) {
                ++out.coincident_pairs;
                continue;
            }
            const Vec2 k = (kInv2Pi / r2) * d;
            out.grad_phi[i] += w[j] * k;
            out.grad_phi[j] -= w[i] * k;
        }
    return out;
}

DirectSum direct_sum_force(const ParticleEnsemble& ensemble) {
    std::vector<Vec2> pos(ensemble.size());
    std::vector<double> w(ensemble.size());
    for (std::size_t p = 0; p < ensemble.size(); ++p) {
        pos[p] = ensemble.particles[p].x();
        w[p] = ensemble.particles[p].w;
    }
    return direct_sum_force(pos, w);
}

double direct_sum_energy(const ParticleEnsemble& ensemble) {
    const std::size_t n = ensemble.size();
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 xi = ensemble.particles[i].x();
        for (std::size_t j = i + 1; j < n; ++j) {
            const Vec2 d = xi - ensemble.particles[j].x();
            const double r2 = d.dot(d);
            if (r2 == 0.0) continue;
            e += ensemble.particles[i].w * ensemble.particles[j].w * 0.5 * std::log(r2);
        }
    }
    return 2.0 * kInv2Pi * e;
}

double field_energy(const ScalarField2D& rho, const ScalarField2D& phi) {
    double e = 0.0;
    for (std::size_t k = 0; k < rho.values.size(); ++k) e += rho.values[k] * phi.values[k];
    return rho.spec.h * rho.spec.h * e;
}

ParticleEnsemble separated_random_ensemble(const GridSpec& g, std::size_t count, double min_cells, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Vec2 c{g.origin.x + 0.5 * (g.n - 1) * g.h, g.origin.y + 0.5 * (g.n - 1) * g.h};
    const double half = 0.85 * 0.5 * (g.n - 1) * g.h;
    std::uniform_real_distribution<double> U(-half, half);
    const double min_sep = min_cells * g.h;
    ParticleEnsemble ens;
    std::size_t tries = 0;
    while (ens.particles.size() < count) {
        if (++tries > 1000 * count) throw NumericalError("separated_random_ensemble: cannot place particles that far apart");
        const Vec2 x = c + Vec2{U(rng), U(rng)};
        bool ok = true;
        for (const auto& p : ens.particles) ok = ok && (p.x() - x).norm() >= min_sep;
        if (!ok) continue;
        Particle p;
        p.z = {0.5 * x, 0.5 * x};
        p.z0 = p.z;
        p.w = 1.0 / static_cast<double>(count);
        ens.particles.push_back(p);
    }
    return ens;
}

double grid_direct_rms_error(const ParticleEnsemble& ensemble, const GridSpec& g) {
    const auto E = gradient(solve_free_space(deposit(ensemble, g)));
    const auto direct = direct_sum_force(ensemble).grad_phi;
    double err = 0.0, ref = 0.0;
    for (std::size_t k = 0; k < ensemble.size(); ++k) {
        const Vec2 e = E.sample(ensemble.particles[k].x()).value_or(Vec2{NAN, NAN}) - direct[k];
        err += e.dot(e);
        ref += direct[k].dot(direct[k]);
    }
    return ref > 0.0 ? std::sqrt(err / ref) : std::sqrt(err);
}

}  // namespace vptrap
