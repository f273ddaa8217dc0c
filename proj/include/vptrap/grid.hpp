// Uniform node-centred Cartesian grids and the cloud-in-cell stencil shared by
// deposition and interpolation.
#pragma once

#include "vptrap/core.hpp"

#include <array>
#include <optional>
#include <vector>

namespace vptrap {

/// Nodes sit at origin + (i, j) h for 0 <= i, j < n. Values are row-major
/// with j (the y index) as the row.
struct GridSpec {
    Vec2 origin;
    double h = 1.0;
    int n = 16;

    void validate() const;
    Vec2 node(int i, int j) const { return {origin.x + i * h, origin.y + j * h}; }
    double upper() const { return origin.x + (n - 1) * h; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * n + i; }
    std::size_t size() const { return static_cast<std::size_t>(n) * n; }

    /// Grid centred at `center` with half-width `half` (node to node).
    static GridSpec centered(Vec2 center, double half, int n);
    /// Same nodes in coordinates divided by `factor`.
    GridSpec scaled(double factor) const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Bilinear weights of a point: lower-left node (i, j) and fractions (tx, ty).
struct CicStencil {
    int i = 0, j = 0;
    double tx = 0.0, ty = 0.0;
    std::array<double, 4> weights() const {
        return {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    }
};

/// Stencil for p if the four nodes lie at least `margin` nodes inside the
/// grid, otherwise nullopt.
std::optional<CicStencil> cic_stencil(const GridSpec& g, Vec2 p, int margin = 1);

struct ScalarField2D {
    GridSpec spec;
    std::vector<double> values;

    ScalarField2D() = default;
    explicit ScalarField2D(const GridSpec& s) : spec(s), values(s.size(), 0.0) {}

    double& at(int i, int j) { return values[spec.index(i, j)]; }
    double at(int i, int j) const { return values[spec.index(i, j)]; }
    double sum() const;
    double max_abs() const;
    bool all_finite() const;
    /// Bilinear interpolation; nullopt outside the node hull.
    std::optional<double> sample(Vec2 p) const;
};

struct VectorField2D {
    GridSpec spec;
    std::vector<Vec2> values;

    VectorField2D() = default;
    explicit VectorField2D(const GridSpec& s) : spec(s), values(s.size()) {}

    Vec2& at(int i, int j) { return values[spec.index(i, j)]; }
    const Vec2& at(int i, int j) const { return values[spec.index(i, j)]; }
    bool all_finite() const;
    std::optional<Vec2> sample(Vec2 p) const;
};

/// Symmetric 2x2 tensor per node (xx, xy, yy).
struct SymTensor2 {
    double xx = 0.0, xy = 0.0, yy = 0.0;
};

struct TensorField2D {
    GridSpec spec;
    std::vector<SymTensor2> values;

    TensorField2D() = default;
    explicit TensorField2D(const GridSpec& s) : spec(s), values(s.size()) {}

    SymTensor2& at(int i, int j) { return values[spec.index(i, j)]; }
    const SymTensor2& at(int i, int j) const { return values[spec.index(i, j)]; }
    std::optional<SymTensor2> sample(Vec2 p) const;
};

}  // namespace vptrap
