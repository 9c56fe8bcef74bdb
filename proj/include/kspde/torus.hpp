#ifndef KSPDE_TORUS_HPP
#define KSPDE_TORUS_HPP

// Periodic grids on the unit torus, gridded scalar fields, central-difference
// operators, norms and fractional seminorms.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "kspde/errors.hpp"

namespace kspde {

/// Uniform cell-centred grid on the unit torus in one or two dimensions.
class TorusGrid {
public:
    TorusGrid() = default;
    TorusGrid(int dim, int points_per_axis) : dim_(dim), n_(points_per_axis) {
        if (dim != 1 && dim != 2)
            throw InvalidParameter("torus dimension must be 1 or 2, got " + std::to_string(dim));
        if (points_per_axis < 4)
            throw InvalidParameter("torus needs at least 4 points per axis, got " +
                                   std::to_string(points_per_axis));
    }

    int dim() const noexcept { return dim_; }
    int points_per_axis() const noexcept { return n_; }
    double spacing() const noexcept { return 1.0 / n_; }
    std::size_t cells() const noexcept {
        return dim_ == 1 ? static_cast<std::size_t>(n_) : static_cast<std::size_t>(n_) * n_;
    }
    double cell_measure() const noexcept { return std::pow(spacing(), dim_); }

    /// Periodic reduction of an axis index into [0, n).
    int wrap(long i) const noexcept {
        long r = i % n_;
        return static_cast<int>(r < 0 ? r + n_ : r);
    }

    std::size_t index(long i) const noexcept { return static_cast<std::size_t>(wrap(i)); }
    std::size_t index(long i, long j) const noexcept {
        return static_cast<std::size_t>(wrap(i)) * n_ + static_cast<std::size_t>(wrap(j));
    }

    /// Axis indices of a flat (row-major) index.
    std::array<int, 2> coords(std::size_t flat) const noexcept {
        if (dim_ == 1) return {static_cast<int>(flat), 0};
        return {static_cast<int>(flat / n_), static_cast<int>(flat % n_)};
    }

    /// Cell-centre coordinate along an axis.
    double coordinate(std::size_t flat, int axis) const noexcept {
        return (coords(flat)[axis] + 0.5) * spacing();
    }

    std::array<double, 2> point(std::size_t flat) const noexcept {
        return {coordinate(flat, 0), dim_ == 2 ? coordinate(flat, 1) : 0.0};
    }

    /// Flat index of the neighbour `offset` cells away along `axis`.
    std::size_t shift(std::size_t flat, int axis, long offset) const noexcept {
        auto c = coords(flat);
        if (dim_ == 1) return index(c[0] + offset);
        if (axis == 0) return index(c[0] + offset, c[1]);
        return index(c[0], c[1] + offset);
    }

    /// Flat index of `flat` displaced by the offset cell `by` (both read as axis vectors).
    std::size_t displace(std::size_t flat, std::size_t by) const noexcept {
        auto a = coords(flat);
        auto b = coords(by);
        if (dim_ == 1) return index(a[0] + b[0]);
        return index(a[0] + b[0], a[1] + b[1]);
    }

    /// Diameter of the unit cube [0,1]^N.
    double diameter() const noexcept { return std::sqrt(static_cast<double>(dim_)); }

    friend bool operator==(const TorusGrid&, const TorusGrid&) = default;

private:
    int dim_ = 1;
    int n_ = 4;
};

/// Signed minimal-image offset (in cells) of an axis offset index in [0, n).
inline int signed_offset(int o, int n) noexcept { return o <= n / 2 ? o : o - n; }

/// Shortest periodic distance between two points of the unit torus.
inline double torus_distance(const std::array<double, 2>& x, const std::array<double, 2>& y,
                             int dim) noexcept {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) {
        double d = std::fabs(x[a] - y[a]);
        d -= std::floor(d);
        d = std::min(d, 1.0 - d);
        s += d * d;
    }
    return std::sqrt(s);
}

/// Gridded function u(x) on a torus grid.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const TorusGrid& grid, double fill = 0.0)
        : grid_(grid), values_(grid.cells(), fill) {}
    ScalarField(const TorusGrid& grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.cells())
            throw DimensionError("field has " + std::to_string(values_.size()) +
                                 " values, grid has " + std::to_string(grid_.cells()) + " cells");
    }

    template <class F>
    static ScalarField from_function(const TorusGrid& grid, F&& f) {
        ScalarField u(grid);
        for (std::size_t i = 0; i < grid.cells(); ++i) u.values_[i] = f(grid.point(i));
        return u;
    }

    const TorusGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double& operator[](std::size_t i) noexcept { return values_[i]; }

    double integral() const noexcept {
        double s = 0.0;
        for (double v : values_) s += v;
        return s * grid_.cell_measure();
    }
    /// Spatial mean; equals the integral on the unit torus.
    double mean() const noexcept { return integral(); }
    double max_abs() const noexcept {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::fabs(v));
        return m;
    }
    double min() const noexcept { return *std::min_element(values_.begin(), values_.end()); }
    double max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }
    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    ScalarField& operator+=(const ScalarField& o) {
        check_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        check_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    ScalarField& operator*=(double c) noexcept {
        for (double& v : values_) v *= c;
        return *this;
    }
    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double c, ScalarField a) { return a *= c; }
    friend ScalarField operator*(ScalarField a, double c) { return a *= c; }

    void check_same(const ScalarField& o) const {
        if (!(grid_ == o.grid_)) throw GridMismatch("fields live on different grids");
    }

private:
    TorusGrid grid_;
    std::vector<double> values_;
};

/// N component fields on a common grid.
using VectorField = std::vector<ScalarField>;

/// (Δx^N Σ|u_i|^p)^{1/p}.
inline double lp_norm(const ScalarField& u, double p) {
    if (!(p >= 1.0)) throw InvalidExponent("L^p norm needs p >= 1");
    double s = 0.0;
    if (p == 1.0) {
        for (double v : u.values()) s += std::fabs(v);
        return s * u.grid().cell_measure();
    }
    if (p == 2.0) {
        for (double v : u.values()) s += v * v;
        return std::sqrt(s * u.grid().cell_measure());
    }
    for (double v : u.values()) s += std::pow(std::fabs(v), p);
    return std::pow(s * u.grid().cell_measure(), 1.0 / p);
}

/// ‖u‖_p^p without the final root.
inline double lp_norm_pow(const ScalarField& u, double p) {
    if (!(p >= 1.0)) throw InvalidExponent("L^p norm needs p >= 1");
    double s = 0.0;
    for (double v : u.values()) s += std::pow(std::fabs(v), p);
    return s * u.grid().cell_measure();
}

inline double l1_distance(const ScalarField& a, const ScalarField& b) {
    a.check_same(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s * a.grid().cell_measure();
}

/// Gagliardo double integral ∬ |u(x)-u(y)| / |x-y|^{N+λ} with torus distance, self pairs excluded.
inline double w_seminorm(const ScalarField& u, double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw InvalidExponent("W^{λ,1} seminorm needs λ in (0,1)");
    const auto& g = u.grid();
    const int n = g.points_per_axis();
    const double h = g.spacing();
    // Offset weights |o|^{-(N+λ)} for every nonzero offset cell.
    std::vector<double> weight(g.cells(), 0.0);
    for (std::size_t o = 1; o < g.cells(); ++o) {
        auto c = g.coords(o);
        double d2 = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
            double d = signed_offset(c[a], n) * h;
            d2 += d * d;
        }
        weight[o] = std::pow(d2, -0.5 * (g.dim() + lambda));
    }
    double s = 0.0;
    for (std::size_t x = 0; x < g.cells(); ++x) {
        const double ux = u[x];
        for (std::size_t o = 1; o < g.cells(); ++o) s += std::fabs(ux - u[g.displace(x, o)]) * weight[o];
    }
    return s * g.cell_measure() * g.cell_measure();
}

/// Standard compactly supported bump exp(-1/(1-r^2)) on r = |x|/width < 1.
inline double bump_profile(double r) noexcept {
    if (r >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - r * r));
}

enum class MollifierKind { spatial, scalar };

/// Approximation to the identity ϱ_τ on the torus (spatial) or ψ_δ on the real line (scalar).
struct MollifierKernel {
    MollifierKind kind = MollifierKind::spatial;
    double width = 0.1;
    std::function<double(double)> profile = bump_profile;

    MollifierKernel with_width(double w) const {
        MollifierKernel k = *this;
        k.width = w;
        return k;
    }

    /// Discrete periodised kernel over all offset cells, scaled so Σ w Δx^N = 1.
    std::vector<double> weights(const TorusGrid& g) const {
        if (kind != MollifierKind::spatial)
            throw ConfigurationError("grid weights requested from a scalar mollifier");
        if (!(width > 0.0)) throw InvalidParameter("mollifier width must be positive");
        const int n = g.points_per_axis();
        const double h = g.spacing();
        const int images = static_cast<int>(std::ceil(width)) + 1;
        std::vector<double> w(g.cells(), 0.0);
        double total = 0.0;
        for (std::size_t o = 0; o < g.cells(); ++o) {
            auto c = g.coords(o);
            std::array<double, 2> d{signed_offset(c[0], n) * h,
                                    g.dim() == 2 ? signed_offset(c[1], n) * h : 0.0};
            double acc = 0.0;
            for (int m0 = -images; m0 <= images; ++m0) {
                const double d0 = d[0] + m0;
                if (g.dim() == 1) {
                    acc += profile(std::fabs(d0) / width);
                    continue;
                }
                for (int m1 = -images; m1 <= images; ++m1) {
                    const double d1 = d[1] + m1;
                    acc += profile(std::sqrt(d0 * d0 + d1 * d1) / width);
                }
            }
            w[o] = acc;
            total += acc;
        }
        const double scale = 1.0 / (total * g.cell_measure());
        for (double& v : w) v *= scale;
        return w;
    }

    struct Quadrature {
        std::vector<double> nodes;
        std::vector<double> weights;
    };

    /// Symmetric midpoint quadrature of ψ_δ on [-δ, δ] with discretely normalised weights.
    Quadrature quadrature(int points) const {
        if (!(width > 0.0)) throw InvalidParameter("mollifier width must be positive");
        Quadrature q;
        const double step = 2.0 * width / points;
        double total = 0.0;
        for (int i = 0; i < points; ++i) {
            const double s = -width + (i + 0.5) * step;
            q.nodes.push_back(s);
            q.weights.push_back(profile(std::fabs(s) / width));
            total += q.weights.back();
        }
        for (double& w : q.weights) w /= total;
        return q;
    }
};

/// Geometric ladder τ_j = 2 D_N 2^{-j}, j = 1..count.
inline std::vector<double> tau_ladder(const TorusGrid& g, int count = 12) {
    std::vector<double> taus;
    for (int j = 1; j <= count; ++j) taus.push_back(2.0 * g.diameter() * std::ldexp(1.0, -j));
    return taus;
}

/// τ^{-λ} ∬ |u(x)-u(y)| ϱ_τ(x-y) dx dy for a single τ.
inline double mollified_difference(const ScalarField& u, double lambda, const MollifierKernel& kernel) {
    const auto& g = u.grid();
    const auto w = kernel.weights(g);
    std::vector<std::size_t> support;
    for (std::size_t o = 1; o < w.size(); ++o)
        if (w[o] > 0.0) support.push_back(o);
    double s = 0.0;
    for (std::size_t x = 0; x < g.cells(); ++x) {
        const double ux = u[x];
        for (std::size_t o : support) s += std::fabs(ux - u[g.displace(x, o)]) * w[o];
    }
    return s * g.cell_measure() * g.cell_measure() / std::pow(kernel.width, lambda);
}

/// Supremum over a τ-ladder of the mollified difference quotient.
inline double mollified_seminorm(const ScalarField& u, double lambda,
                                 const MollifierKernel& prototype = {},
                                 const std::vector<double>& ladder = {}) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw InvalidExponent("mollified seminorm needs λ in (0,1)");
    const auto taus = ladder.empty() ? tau_ladder(u.grid()) : ladder;
    if (taus.empty()) throw ConfigurationError("empty τ-ladder");
    double best = 0.0;
    for (double tau : taus) best = std::max(best, mollified_difference(u, lambda, prototype.with_width(tau)));
    return best;
}

/// Periodic central differences, one component per axis.
inline VectorField gradient(const ScalarField& u) {
    const auto& g = u.grid();
    const double inv = 1.0 / (2.0 * g.spacing());
    VectorField grad(g.dim(), ScalarField(g));
    for (int a = 0; a < g.dim(); ++a)
        for (std::size_t x = 0; x < g.cells(); ++x)
            grad[a][x] = (u[g.shift(x, a, 1)] - u[g.shift(x, a, -1)]) * inv;
    return grad;
}

inline ScalarField divergence(const VectorField& v) {
    if (v.empty()) throw DimensionError("divergence of an empty vector field");
    const auto& g = v.front().grid();
    if (static_cast<int>(v.size()) != g.dim())
        throw DimensionError("vector field has " + std::to_string(v.size()) + " components on a " +
                             std::to_string(g.dim()) + "-D grid");
    for (const auto& c : v)
        if (!(c.grid() == g)) throw GridMismatch("vector field components on different grids");
    const double inv = 1.0 / (2.0 * g.spacing());
    ScalarField d(g);
    for (int a = 0; a < g.dim(); ++a)
        for (std::size_t x = 0; x < g.cells(); ++x)
            d[x] += (v[a][g.shift(x, a, 1)] - v[a][g.shift(x, a, -1)]) * inv;
    return d;
}

/// Σ_x u·v Δx^N.
inline double inner(const ScalarField& u, const ScalarField& v) {
    u.check_same(v);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s * u.grid().cell_measure();
}

/// Discrete Fourier coefficients û_k = Δx^N Σ u_j e^{-2πi k·x_j}, row-major over k.
inline std::vector<std::complex<double>> fourier_coefficients(const ScalarField& u) {
    const auto& g = u.grid();
    const int n = g.points_per_axis();
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> out(g.cells());
    if (g.dim() == 1) {
        std::vector<double> in(u.values());
        fft.fwd(out, in);
    } else {
        std::vector<std::complex<double>> row_in(n), row_out(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) row_in[j] = u[g.index(i, j)];
            fft.fwd(row_out, row_in);
            for (int j = 0; j < n; ++j) out[g.index(i, j)] = row_out[j];
        }
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) row_in[i] = out[g.index(i, j)];
            fft.fwd(row_out, row_in);
            for (int i = 0; i < n; ++i) out[g.index(i, j)] = row_out[i];
        }
    }
    const double scale = g.cell_measure();
    for (auto& c : out) c *= scale;
    return out;
}

/// |2πk|² for the flat frequency index (symmetric frequency range).
inline double wave_number_squared(const TorusGrid& g, std::size_t flat) {
    auto c = g.coords(flat);
    double k2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
        const double k = 2.0 * std::numbers::pi * signed_offset(c[a], g.points_per_axis());
        k2 += k * k;
    }
    return k2;
}

/// (Σ_k (1+|2πk|²)^{-s} |û_k|²)^{1/2}.
inline double h_negative_norm(const ScalarField& u, double s) {
    if (!(s > 0.0)) throw InvalidExponent("H^{-s} norm needs s > 0");
    const auto coeff = fourier_coefficients(u);
    double acc = 0.0;
    for (std::size_t k = 0; k < coeff.size(); ++k)
        acc += std::pow(1.0 + wave_number_squared(u.grid(), k), -s) * std::norm(coeff[k]);
    return std::sqrt(acc);
}

/// (Σ_k |û_k|²)^{1/2}; equals the L² norm by Parseval.
inline double spectral_l2(const ScalarField& u) {
    double acc = 0.0;
    for (const auto& c : fourier_coefficients(u)) acc += std::norm(c);
    return std::sqrt(acc);
}

/// Periodic convolution (u * ϱ)(x) = Σ_o ϱ(o) u(x-o) Δx^N.
inline ScalarField convolve(const ScalarField& u, const MollifierKernel& kernel) {
    const auto& g = u.grid();
    const auto w = kernel.weights(g);
    std::vector<std::size_t> support;
    for (std::size_t o = 0; o < w.size(); ++o)
        if (w[o] > 0.0) support.push_back(o);
    ScalarField out(g);
    const double h = g.cell_measure();
    for (std::size_t x = 0; x < g.cells(); ++x) {
        double s = 0.0;
        for (std::size_t o : support) {
            // x - o: negate the offset along each axis.
            auto c = g.coords(o);
            std::size_t neg = g.dim() == 1 ? g.index(-c[0]) : g.index(-c[0], -c[1]);
            s += w[o] * u[g.displace(x, neg)];
        }
        out[x] = s * h;
    }
    return out;
}

// Snapshot file format: header `N n time`, then n^N values in row-major order.

inline void write_field(std::ostream& os, const ScalarField& u, double time) {
    const auto& g = u.grid();
    std::ostringstream buf;
    buf.precision(17);
    buf << g.dim() << ' ' << g.points_per_axis() << ' ' << time << '\n';
    const int n = g.points_per_axis();
    for (std::size_t i = 0; i < u.size(); ++i) {
        buf << u[i];
        buf << ((g.dim() == 1 || (i + 1) % n == 0) ? '\n' : ' ');
    }
    os << buf.str();
}

struct FieldSnapshot {
    ScalarField field;
    double time = 0.0;
};

inline FieldSnapshot read_field(std::istream& is) {
    int dim = 0, n = 0;
    double time = 0.0;
    if (!(is >> dim >> n >> time)) throw ConfigurationError("field file: malformed header `N n time`");
    TorusGrid g(dim, n);
    std::vector<double> values(g.cells());
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!(is >> values[i]))
            throw ConfigurationError("field file: expected " + std::to_string(values.size()) +
                                     " values, read " + std::to_string(i));
    return {ScalarField(g, std::move(values)), time};
}

}  // namespace kspde

#endif  // KSPDE_TORUS_HPP
