#include "vptrap/grid.hpp"

#include <cmath>

namespace vptrap {

void GridSpec::validate() const {
    if (!(h > 0.0) || !std::isfinite(h)) throw NumericalError("grid spacing must be positive and finite");
    if (n < 16) throw NumericalError("grid needs at least 16 nodes per axis");
}

GridSpec GridSpec::centered(Vec2 center, double half, int n) {
    GridSpec g;
    g.n = n;
    g.h = 2.0 * half / (n - 1);
    g.origin = {center.x - half, center.y - half};
    return g;
}

GridSpec GridSpec::scaled(double factor) const {
    GridSpec g = *this;
    g.origin = (1.0 / factor) * origin;
    g.h = h / factor;
    return g;
}

std::optional<CicStencil> cic_stencil(const GridSpec& g, Vec2 p, int margin) {
    const double fx = (p.x - g.origin.x) / g.h;
    const double fy = (p.y - g.origin.y) / g.h;
    if (!(fx >= margin) || !(fy >= margin)) return std::nullopt;
    const double top = static_cast<double>(g.n - 1 - margin);
    if (!(fx <= top) || !(fy <= top)) return std::nullopt;
    CicStencil st;
    st.i = static_cast<int>(std::floor(fx));
    st.j = static_cast<int>(std::floor(fy));
    // A point exactly on the last admissible node uses the cell to its left.
    if (st.i > g.n - 2 - margin) st.i = g.n - 2 - margin;
    if (st.j > g.n - 2 - margin) st.j = g.n - 2 - margin;
    st.tx = fx - st.i;
    st.ty = fy - st.j;
    return st;
}

double ScalarField2D::sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

double ScalarField2D::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

bool ScalarField2D::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

std::optional<double> ScalarField2D::sample(Vec2 p) const {
    const auto st = cic_stencil(spec, p, 0);
    if (!st) return std::nullopt;
    const auto w = st->weights();
    return w[0] * at(st->i, st->j) + w[1] * at(st->i + 1, st->j) + w[2] * at(st->i, st->j + 1) +
           w[3] * at(st->i + 1, st->j + 1);
}

bool VectorField2D::all_finite() const {
    for (const auto& v : values)
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) return false;
    return true;
}

std::optional<Vec2> VectorField2D::sample(Vec2 p) const {
    const auto st = cic_stencil(spec, p, 0);
    if (!st) return std::nullopt;
    const auto w = st->weights();
    return w[0] * at(st->i, st->j) + w[1] * at(st->i + 1, st->j) + w[2] * at(st->i, st->j + 1) +
           w[3] * at(st->i + 1, st->j + 1);
}

std::optional<SymTensor2> TensorField2D::sample(Vec2 p) const {
    const auto st = cic_stencil(spec, p, 0);
    if (!st) return std::nullopt;
    const auto w = st->weights();
    const SymTensor2* c[4] = {&at(st->i, st->j), &at(st->i + 1, st->j), &at(st->i, st->j + 1),
                              &at(st->i + 1, st->j + 1)};
    SymTensor2 r;
    for (int k = 0; k < 4; ++k) {
        r.xx += w[k] * c[k]->xx;
        r.xy += w[k] * c[k]->xy;
        r.yy += w[k] * c[k]->yy;
    }
    return r;
}

}  // namespace vptrap
