// Phase-space data model for the 2D Vlasov-Poisson system with the
// unstable trapping potential -|x|^2/2.
//
// Characteristics:  dx/dt = v,  dv/dt = x - mu grad phi(x),  Delta phi = rho.
// Hyperbolic coordinates s = (x - v)/2, u = (x + v)/2 diagonalise the
// linearised flow: s contracts like e^{-t}, u expands like e^{t}.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vptrap {

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration; `field` names the offending key.
struct ConfigError : Error {
    ConfigError(std::string field, const std::string& what, int line = 0)
        : Error(what), field(std::move(field)), line(line) {}
    std::string field;
    int line;
};

/// A value left the representable floating-point range.
struct RangeError : Error {
    using Error::Error;
};

/// A particle lies outside the usable interior of a grid.
struct OutOfDomainError : Error {
    OutOfDomainError(std::size_t index, double px, double py, const std::string& what)
        : Error(what), index(index), x(px), y(py) {}
    std::size_t index;
    double x, y;
};

/// Non-finite data or an unrecoverable failure of a numerical step.
struct NumericalError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Small value types

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double a) { x *= a; y *= a; return *this; }
    friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
    friend constexpr Vec2 operator*(double a, Vec2 b) { return b *= a; }
    friend constexpr Vec2 operator*(Vec2 b, double a) { return b *= a; }
    friend constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;

    constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double max_abs() const { return std::max(std::abs(x), std::abs(y)); }
};

struct HyperPoint {
    Vec2 s;  ///< stable coordinate (x - v)/2
    Vec2 u;  ///< unstable coordinate (x + v)/2
};

struct PhasePoint {
    Vec2 x;
    Vec2 v;
};

/// Row-major 4x4 matrix acting on (a1, a2, b1, b2).
struct Mat4 {
    std::array<double, 16> a{};

    static Mat4 identity() {
        Mat4 m;
        for (int i = 0; i < 4; ++i) m(i, i) = 1.0;
        return m;
    }
    double& operator()(int r, int c) { return a[4 * r + c]; }
    double operator()(int r, int c) const { return a[4 * r + c]; }

    friend Mat4 operator*(const Mat4& l, const Mat4& r) {
        Mat4 m;
        for (int i = 0; i < 4; ++i)
            for (int k = 0; k < 4; ++k) {
                const double lik = l(i, k);
                for (int j = 0; j < 4; ++j) m(i, j) += lik * r(k, j);
            }
        return m;
    }
    std::array<double, 4> apply(const std::array<double, 4>& v) const {
        std::array<double, 4> out{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) out[i] += (*this)(i, j) * v[j];
        return out;
    }
    Mat4 transpose() const {
        Mat4 m;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) m(i, j) = (*this)(j, i);
        return m;
    }
    /// Determinant by Gaussian elimination with partial pivoting.
    double det() const;
    /// Solves M x = b; throws NumericalError when singular.
    std::array<double, 4> solve(std::array<double, 4> b) const;
};

// ---------------------------------------------------------------------------
// Configuration

struct SimConfig {
    int mu = 1;                    ///< coupling sign: +1 attractive, -1 repulsive
    double epsilon = 1e-2;         ///< amplitude of f0
    double sigma_s = 1.0;
    double sigma_u = 1.0;
    std::int64_t n_particles = 160000;
    int grid_n = 256;
    double dt = 1e-2;
    double t_final = 8.0;
    std::vector<double> sample_times{0, 1, 2, 3, 4, 5, 6, 7, 8};
    int norm_M = 6;
    std::uint64_t seed = 1;

    bool coupling = true;          ///< false switches the self-consistent kick off
    std::string grid_policy = "comoving";  ///< "comoving" or "bbox"
    double grid_max_extent = 1e12; ///< largest admissible grid half-width
    bool reproducible = false;
    bool snapshot_particles = true;

    /// Throws ConfigError naming the first violated constraint.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Particles

/// Lagrangian marker. The state is held in hyperbolic coordinates; x and v
/// are derived. Storing (s, u) keeps e^t s and e^{-t} u accurate to a few ulp
/// over long runs, where x - v would cancel catastrophically.
struct Particle {
    HyperPoint z;                       ///< current (s, u)
    HyperPoint z0;                      ///< initial (s, u)
    double w = 0.0;                     ///< weight in (x,v) measure
    double vol = 0.0;                   ///< initial (x,v) phase volume, w = f0_val * vol
    double f0_val = 0.0;
    std::array<double, 4> f0_grad{};    ///< (d_x1, d_x2, d_v1, d_v2) f0 at z0
    Mat4 J = Mat4::identity();          ///< d(s,u)(t) / d(s,u)(0)
    Vec2 drift;                         ///< accumulates e^t (x - v) - (x0 - v0)

    Vec2 x() const { return z.s + z.u; }
    Vec2 v() const { return z.u - z.s; }
};

struct ParticleEnsemble {
    std::vector<Particle> particles;
    std::int64_t requested_count = 0;
    double box_s = 0.0;   ///< truncation half-width in s (per component)
    double box_u = 0.0;   ///< truncation half-width in u
    std::uint64_t lattice_multiplier = 0;

    std::size_t size() const { return particles.size(); }
    double total_mass() const;
};

// ---------------------------------------------------------------------------
// Operations

HyperPoint to_hyperbolic(const Vec2& x, const Vec2& v);
PhasePoint from_hyperbolic(const HyperPoint& z);

/// cosh t and sinh t built from a single pair exp(t), exp(-t).
struct HyperbolicPair {
    double c;
    double s;
    explicit HyperbolicPair(double t) {
        const double ep = std::exp(t), em = std::exp(-t);
        c = 0.5 * (ep + em);
        s = 0.5 * (ep - em);
    }
};

PhasePoint linear_flow(const Vec2& x, const Vec2& v, double t);
/// The same flow in hyperbolic form: s -> e^{-t}s, u -> e^{t}u.
HyperPoint linear_flow(const HyperPoint& z, double t);

struct ConservedWeights {
    Vec2 z_plus;   ///< e^t (x - v)/2
    Vec2 z_minus;  ///< e^{-t} (x + v)/2
};

/// Throws RangeError (mentioning `index` when given) on overflow.
ConservedWeights conserved_weights(double t, const Vec2& x, const Vec2& v,
                                   std::int64_t index = -1);
ConservedWeights conserved_weights(double t, const HyperPoint& z, std::int64_t index = -1);

/// Value of the anisotropic Gaussian initial datum in (s,u).
double initial_density(const SimConfig& cfg, const HyperPoint& z);

/// Closed-form L1_{x,v} mass of the untruncated initial datum.
double initial_mass_closed_form(const SimConfig& cfg);

/// Jacobian det d(x,v)/d(s,u) in 2+2 dimensions.
inline constexpr double kPhaseJacobian = 4.0;

/// Deterministic quasi-uniform sampling of f0 over the +-6 sigma box.
ParticleEnsemble sample_initial(const SimConfig& cfg);

/// Effective particle count used for a request (nearest odd number >= 3).
std::int64_t effective_particle_count(std::int64_t requested);

}  // namespace vptrap
