#ifndef KSPDE_COEFFS_HPP
#define KSPDE_COEFFS_HPP

// Flux B and its derivative b, the diffusion matrix A(x) with its square root,
// and their ε-regularisations (mollify + truncate for B, A + εI for A).

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kspde/errors.hpp"
#include "kspde/torus.hpp"

namespace kspde {

using ScalarFunction = std::function<double(double)>;

/// Smooth cutoff χ: 1 on |ξ| ≤ 1/2, 0 on |ξ| ≥ 1, monotone in between.
struct Cutoff {
    static double transition(double y) noexcept {
        // e^{-1/y} / (e^{-1/y} + e^{-1/(1-y)}) on (0,1)
        if (y <= 0.0) return 0.0;
        if (y >= 1.0) return 1.0;
        const double a = std::exp(-1.0 / y);
        const double b = std::exp(-1.0 / (1.0 - y));
        return a / (a + b);
    }
    static double transition_derivative(double y) noexcept {
        if (y <= 0.0 || y >= 1.0) return 0.0;
        const double a = std::exp(-1.0 / y);
        const double b = std::exp(-1.0 / (1.0 - y));
        const double s = a + b;
        return a * b * (1.0 / (y * y) + 1.0 / ((1.0 - y) * (1.0 - y))) / (s * s);
    }
    static double value(double t) noexcept { return 1.0 - transition(2.0 * std::fabs(t) - 1.0); }
    static double derivative(double t) noexcept {
        const double sgn = t < 0.0 ? -1.0 : 1.0;
        return -2.0 * sgn * transition_derivative(2.0 * std::fabs(t) - 1.0);
    }
};

/// χ_ε(ξ) = χ(εξ).
struct Truncation {
    double epsilon;

    explicit Truncation(double eps) : epsilon(eps) {
        if (!(eps > 0.0 && eps < 1.0)) throw InvalidParameter("truncation needs ε in (0,1)");
    }
    double operator()(double xi) const noexcept { return Cutoff::value(epsilon * xi); }
    double derivative(double xi) const noexcept { return epsilon * Cutoff::derivative(epsilon * xi); }
    double plateau() const noexcept { return 0.5 / epsilon; }
    double support() const noexcept { return 1.0 / epsilon; }
};

/// Flux components B_i with derivatives b_i and polynomial growth |b(ξ)| ≤ C(1+|ξ|^{p-1}).
struct FluxSpec {
    std::string name = "zero";
    std::vector<ScalarFunction> components;
    std::vector<ScalarFunction> derivatives;
    double growth_exponent = 2.0;
    double growth_constant = 1.0;
    /// Viscosity the flux was regularised at; 0 for the raw flux.
    double epsilon = 0.0;

    int dim() const noexcept { return static_cast<int>(components.size()); }

    bool is_zero() const noexcept { return name == "zero"; }

    /// Euclidean norm of b(ξ).
    double speed(double xi) const {
        double s = 0.0;
        for (const auto& b : derivatives) {
            const double v = b(xi);
            s += v * v;
        }
        return std::sqrt(s);
    }

    /// Largest |b_i(ξ)| over a sampled symmetric range.
    double max_speed(double range, int samples = 2001) const {
        double m = 0.0;
        for (int s = 0; s < samples; ++s) {
            const double xi = -range + 2.0 * range * s / (samples - 1);
            for (const auto& b : derivatives) m = std::max(m, std::fabs(b(xi)));
        }
        return m;
    }
};

inline FluxSpec zero_flux(int dim) {
    FluxSpec f;
    f.name = "zero";
    for (int i = 0; i < dim; ++i) {
        f.components.emplace_back([](double) { return 0.0; });
        f.derivatives.emplace_back([](double) { return 0.0; });
    }
    return f;
}

/// B_i(ξ) = scale·ξ²/2 along every axis.
inline FluxSpec burgers_flux(int dim, double scale = 1.0) {
    FluxSpec f;
    f.name = "burgers";
    for (int i = 0; i < dim; ++i) {
        f.components.emplace_back([scale](double xi) { return 0.5 * scale * xi * xi; });
        f.derivatives.emplace_back([scale](double xi) { return scale * xi; });
    }
    f.growth_exponent = 2.0;
    f.growth_constant = std::fabs(scale) * std::sqrt(static_cast<double>(dim));
    return f;
}

/// B_i(ξ) = speed·ξ along every axis.
inline FluxSpec linear_flux(int dim, double speed = 1.0) {
    FluxSpec f;
    f.name = "linear";
    for (int i = 0; i < dim; ++i) {
        f.components.emplace_back([speed](double xi) { return speed * xi; });
        f.derivatives.emplace_back([speed](double) { return speed; });
    }
    f.growth_exponent = 2.0;
    f.growth_constant = std::max(std::fabs(speed) * std::sqrt(static_cast<double>(dim)), 1e-300);
    return f;
}

/// max over a sampled range of |b(ξ)| / (1 + |ξ|^{p-1}).
inline double fitted_growth_constant(const FluxSpec& flux, double range, int samples = 4001) {
    double c = 0.0;
    for (int s = 0; s < samples; ++s) {
        const double xi = -range + 2.0 * range * s / (samples - 1);
        c = std::max(c, flux.speed(xi) / (1.0 + std::pow(std::fabs(xi), flux.growth_exponent - 1.0)));
    }
    return c;
}

namespace detail {

/// Uniform table with linear interpolation, extended by its end values outside [lo, hi].
struct Table {
    double lo = 0.0;
    double step = 1.0;
    std::vector<double> values;

    double operator()(double x) const noexcept {
        const double pos = (x - lo) / step;
        if (!(pos > 0.0)) return values.front();
        if (pos >= static_cast<double>(values.size() - 1)) return values.back();
        const auto i = std::min(static_cast<std::size_t>(pos), values.size() - 2);
        const double t = pos - static_cast<double>(i);
        return (1.0 - t) * values[i] + t * values[i + 1];
    }
    double hi() const noexcept { return lo + step * static_cast<double>(values.size() - 1); }
};

}  // namespace detail

/// Tables are built on |ξ| ≤ min(1/ε, this bound); beyond it the regularised flux is
/// evaluated by direct quadrature.
inline constexpr double kFluxTableRadius = 64.0;
inline constexpr int kConvolutionNodes = 64;

/// B^ε_i = (B_i * ψ_ε) χ_ε, tabulated with spacing ε/8 and linearly interpolated.
inline FluxSpec regularize_flux(const FluxSpec& flux, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidParameter("flux regularisation needs ε in (0,1)");
    const Truncation chi(eps);
    const MollifierKernel psi{MollifierKind::scalar, eps};
    const auto quad = std::make_shared<MollifierKernel::Quadrature>(psi.quadrature(kConvolutionNodes));

    FluxSpec out;
    out.name = flux.name;
    out.growth_exponent = flux.growth_exponent;
    out.growth_constant = flux.growth_constant;
    out.epsilon = eps;
    if (flux.is_zero()) {
        out.components = flux.components;
        out.derivatives = flux.derivatives;
        return out;
    }

    const double radius = std::min(chi.support(), kFluxTableRadius);
    const double step = eps / 8.0;
    const auto count = static_cast<std::size_t>(std::ceil(2.0 * radius / step)) + 1;

    for (int i = 0; i < flux.dim(); ++i) {
        const ScalarFunction B = flux.components[i];
        const ScalarFunction b = flux.derivatives[i];
        auto smooth_B = [B, quad](double xi) {
            double s = 0.0;
            for (std::size_t q = 0; q < quad->nodes.size(); ++q) s += quad->weights[q] * B(xi - quad->nodes[q]);
            return s;
        };
        auto smooth_b = [b, quad](double xi) {
            double s = 0.0;
            for (std::size_t q = 0; q < quad->nodes.size(); ++q) s += quad->weights[q] * b(xi - quad->nodes[q]);
            return s;
        };
        auto exact_B = [smooth_B, chi](double xi) {
            return std::fabs(xi) >= chi.support() ? 0.0 : smooth_B(xi) * chi(xi);
        };
        auto exact_b = [smooth_B, smooth_b, chi](double xi) {
            if (std::fabs(xi) >= chi.support()) return 0.0;
            return smooth_b(xi) * chi(xi) + smooth_B(xi) * chi.derivative(xi);
        };

        auto tB = std::make_shared<detail::Table>();
        auto tb = std::make_shared<detail::Table>();
        tB->lo = tb->lo = -radius;
        tB->step = tb->step = 2.0 * radius / static_cast<double>(count - 1);
        tB->values.resize(count);
        tb->values.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            const double xi = -radius + tB->step * static_cast<double>(k);
            tB->values[k] = exact_B(xi);
            tb->values[k] = exact_b(xi);
        }
        out.components.emplace_back([tB, exact_B](double xi) {
            return (xi >= tB->lo && xi <= tB->hi()) ? (*tB)(xi) : exact_B(xi);
        });
        out.derivatives.emplace_back([tb, exact_b](double xi) {
            return (xi >= tb->lo && xi <= tb->hi()) ? (*tb)(xi) : exact_b(xi);
        });
    }
    return out;
}

/// Engquist–Osher splitting B = B⁺ + B⁻ with B⁺' = max(b,0), B⁻' = min(b,0), tabulated on [-R, R].
struct UpwindSplit {
    std::vector<detail::Table> plus;
    std::vector<detail::Table> minus;
    double radius = 0.0;

    double flux(int axis, double left, double right) const noexcept {
        return plus[axis](left) + minus[axis](right);
    }
};

inline UpwindSplit split_flux(const FluxSpec& flux, double radius, double step = 1e-3) {
    UpwindSplit s;
    s.radius = radius;
    const auto count = static_cast<std::size_t>(std::ceil(2.0 * radius / step)) + 1;
    const double h = 2.0 * radius / static_cast<double>(count - 1);
    const std::size_t mid = count / 2;
    for (int i = 0; i < flux.dim(); ++i) {
        detail::Table p, m;
        p.lo = m.lo = -radius;
        p.step = m.step = h;
        p.values.assign(count, 0.0);
        m.values.assign(count, 0.0);
        std::vector<double> bp(count), bm(count);
        for (std::size_t k = 0; k < count; ++k) {
            const double b = flux.derivatives[i](-radius + h * static_cast<double>(k));
            bp[k] = std::max(b, 0.0);
            bm[k] = std::min(b, 0.0);
        }
        // Anchor B⁺ at B(ξ_mid), B⁻ at 0, integrate outward by the trapezoid rule.
        p.values[mid] = flux.components[i](-radius + h * static_cast<double>(mid));
        for (std::size_t k = mid + 1; k < count; ++k) {
            p.values[k] = p.values[k - 1] + 0.5 * h * (bp[k - 1] + bp[k]);
            m.values[k] = m.values[k - 1] + 0.5 * h * (bm[k - 1] + bm[k]);
        }
        for (std::size_t k = mid; k-- > 0;) {
            p.values[k] = p.values[k + 1] - 0.5 * h * (bp[k + 1] + bp[k]);
            m.values[k] = m.values[k + 1] - 0.5 * h * (bm[k + 1] + bm[k]);
        }
        s.plus.push_back(std::move(p));
        s.minus.push_back(std::move(m));
    }
    return s;
}

using Matrix = Eigen::MatrixXd;

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kPsdClamp = 1e-10;

/// Symmetric PSD square root. Eigenvalues in [-1e-10, 0) are clamped to zero.
inline Matrix sqrt_matrix(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("square root of a non-square matrix");
    const double scale = std::max(1.0, a.norm());
    if ((a - a.transpose()).norm() > kSymmetryTolerance * scale)
        throw NotPsd("matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -kPsdClamp)
            throw NotPsd("matrix has negative eigenvalue " + std::to_string(ev[i]));
        ev[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    Matrix s = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (s + s.transpose());
}

/// A(x) sampled at grid points, its square root σ(x), and the viscosity ε already added.
struct DiffusionSpec {
    std::string name = "zero";
    TorusGrid grid;
    std::vector<Matrix> matrix_field;
    std::vector<Matrix> sqrt_field;
    double epsilon = 0.0;

    const Matrix& matrix(std::size_t x) const { return matrix_field[x]; }

    /// A(x) without the εI perturbation.
    Matrix base_matrix(std::size_t x) const {
        return matrix_field[x] - epsilon * Matrix::Identity(grid.dim(), grid.dim());
    }

    double lambda_max() const {
        double m = 0.0;
        for (const auto& a : matrix_field) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
            m = std::max(m, es.eigenvalues().maxCoeff());
        }
        return m;
    }

    double lambda_min() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& a : matrix_field) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
            m = std::min(m, es.eigenvalues().minCoeff());
        }
        return m;
    }

    bool has_off_diagonal() const {
        if (grid.dim() == 1) return false;
        return std::any_of(matrix_field.begin(), matrix_field.end(),
                           [](const Matrix& a) { return a(0, 1) != 0.0; });
    }

    /// max over nearest-neighbour pairs of ‖σ(x) - σ(y)‖ / |x - y|.
    double sqrt_lipschitz() const {
        double m = 0.0;
        for (std::size_t x = 0; x < grid.cells(); ++x)
            for (int a = 0; a < grid.dim(); ++a) {
                const auto y = grid.shift(x, a, 1);
                m = std::max(m, (sqrt_field[x] - sqrt_field[y]).norm() / grid.spacing());
            }
        return m;
    }
};

template <class F>
DiffusionSpec make_diffusion(std::string name, const TorusGrid& grid, F&& matrix_at) {
    DiffusionSpec d;
    d.name = std::move(name);
    d.grid = grid;
    d.matrix_field.reserve(grid.cells());
    d.sqrt_field.reserve(grid.cells());
    for (std::size_t x = 0; x < grid.cells(); ++x) {
        Matrix a = matrix_at(grid.point(x));
        if (a.rows() != grid.dim() || a.cols() != grid.dim())
            throw DimensionError("diffusion matrix size does not match grid dimension");
        d.sqrt_field.push_back(sqrt_matrix(a));
        d.matrix_field.push_back(std::move(a));
    }
    return d;
}

/// A = scale·I.
inline DiffusionSpec heat_diffusion(const TorusGrid& g, double scale = 1.0) {
    return make_diffusion("heat", g, [&](auto) { return Matrix(scale * Matrix::Identity(g.dim(), g.dim())); });
}

/// A = 0.
inline DiffusionSpec hyperbolic_diffusion(const TorusGrid& g) {
    return make_diffusion("hyperbolic", g, [&](auto) { return Matrix(Matrix::Zero(g.dim(), g.dim())); });
}

/// A(x) = diag(a(x)) with a(x) = max(0, sin 2πx₁)²; degenerate on half the torus.
inline DiffusionSpec degenerate_diffusion(const TorusGrid& g, double scale = 1.0) {
    return make_diffusion("degenerate", g, [&](const std::array<double, 2>& x) {
        const double s = std::max(0.0, std::sin(2.0 * std::numbers::pi * x[0]));
        return Matrix(scale * s * s * Matrix::Identity(g.dim(), g.dim()));
    });
}

/// Constant anisotropic PSD matrix, diagonally dominant in 2-D.
inline DiffusionSpec anisotropic_diffusion(const TorusGrid& g, double scale = 1.0) {
    return make_diffusion("anisotropic", g, [&](auto) {
        Matrix a(g.dim(), g.dim());
        if (g.dim() == 1)
            a << 0.5;
        else
            a << 1.0, 0.25, 0.25, 0.5;
        return Matrix(scale * a);
    });
}

/// A^ε = A + εI applied on top of an unperturbed spec.
inline DiffusionSpec perturb_diffusion(const DiffusionSpec& spec, double eps) {
    if (!(eps >= 0.0)) throw InvalidParameter("diffusion perturbation needs ε >= 0");
    DiffusionSpec d = spec;
    const int n = spec.grid.dim();
    for (std::size_t x = 0; x < d.matrix_field.size(); ++x) {
        d.matrix_field[x] = spec.matrix_field[x] + eps * Matrix::Identity(n, n);
        d.sqrt_field[x] = sqrt_matrix(d.matrix_field[x]);
    }
    d.epsilon = spec.epsilon + eps;
    return d;
}

}  // namespace kspde

#endif  // KSPDE_COEFFS_HPP
