#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kspde/solver.hpp"

using namespace kspde;

namespace {

constexpr double pi = std::numbers::pi;

ScalarField sine(const TorusGrid& g, double amp = 1.0, double shift = 0.0) {
    return ScalarField::from_function(g, [=](const std::array<double, 2>& x) { return shift + amp * std::sin(2.0 * pi * x[0]); });
}

SolverConfig config(double eps, double dt, double t_end, int save_every = 1) {
    SolverConfig c;
    c.epsilon = eps;
    c.dt = dt;
    c.t_end = t_end;
    c.save_every = save_every;
    return c;
}

WienerPath dummy() { return sample_path(0, 1, 1.0, 1); }

double total_variation(const ScalarField& u) {
    double tv = 0.0;
    const auto& g = u.grid();
    for (std::size_t i = 0; i < g.cells(); ++i) tv += std::fabs(u[g.shift(i, 0, 1)] - u[i]);
    return tv;
}

}  // namespace

TEST(SolverConfig, StepsMustDivide) {
    EXPECT_EQ(config(0.0, 1e-3, 0.1).steps(), 100);
    EXPECT_THROW(config(0.0, 1.6e-3, 0.1).steps(), ConfigurationError);
}

TEST(Solver, ConstantIsSteady) {
    TorusGrid g(1, 64);
    const Coefficients c{burgers_flux(1), heat_diffusion(g)};
    const auto t = run(ScalarField(g, 0.3), c, zero_noise(1), dummy(), config(0.05, 1e-4, 0.01, 10));
    for (const auto& s : t.snapshots)
        for (double v : s.field.values()) EXPECT_EQ(v, 0.3);
}

TEST(Solver, ZeroStaysZeroUnderLinearNoise) {
    TorusGrid g(1, 32);
    const Coefficients c{burgers_flux(1), hyperbolic_diffusion(g)};
    const auto cfg = config(0.1, 1e-3, 0.05);
    const auto path = sample_path(4, cfg.steps(), cfg.dt, 10);
    const auto t = run(ScalarField(g), c, linear_noise(1, 10), path, cfg);
    EXPECT_EQ(t.snapshots.back().field.max_abs(), 0.0);
}

TEST(Solver, HeatMatchesExactDecay) {
    TorusGrid g(1, 128);
    const Coefficients c{zero_flux(1), heat_diffusion(g)};
    const auto t = run(sine(g), c, zero_noise(1), dummy(), config(0.0, 1e-5, 0.01, 100));
    const auto& last = t.snapshots.back();
    const auto exact = sine(g, std::exp(-4.0 * pi * pi * last.time));
    EXPECT_NEAR(last.time, 0.01, 1e-12);
    EXPECT_LT(l1_distance(last.field, exact), 1e-3);
}

TEST(Solver, SemiImplicitHeatMatchesExactDecay) {
    TorusGrid g(1, 128);
    const Coefficients c{zero_flux(1), heat_diffusion(g)};
    auto cfg = config(0.0, 1e-4, 0.01, 100);
    cfg.scheme = TimeScheme::semi_implicit;
    const auto t = run(sine(g), c, zero_noise(1), dummy(), cfg);
    const auto exact = sine(g, std::exp(-4.0 * pi * pi * 0.01));
    EXPECT_LT(l1_distance(t.snapshots.back().field, exact), 2e-3);
}

TEST(Solver, MeanMovesWithConstantMode) {
    TorusGrid g(1, 64);
    const Coefficients c{burgers_flux(1), heat_diffusion(g)};
    const auto cfg = config(0.0, 1e-4, 0.02, 50);
    const auto path = sample_path(17, cfg.steps(), cfg.dt, 8);
    const auto u0 = sine(g);
    const auto t = run(u0, c, additive_noise(1, 8), path, cfg);
    for (const auto& s : t.snapshots) {
        const long k = std::lround(s.time / cfg.dt);
        EXPECT_NEAR(s.field.mean() - u0.mean(), path.beta(k, 0), 1e-10);
    }
}

TEST(Solver, BurgersTotalVariationDoesNotGrow) {
    TorusGrid g(1, 256);
    const Coefficients c{burgers_flux(1), hyperbolic_diffusion(g)};
    const auto t = run(sine(g), c, zero_noise(1), dummy(), config(0.005, 5e-4, 0.3));
    for (std::size_t i = 1; i < t.snapshots.size(); ++i)
        EXPECT_LE(total_variation(t.snapshots[i].field), total_variation(t.snapshots[i - 1].field) + 1e-12);
}

TEST(Solver, RerunIsBitIdentical) {
    TorusGrid g(1, 64);
    const Coefficients c{burgers_flux(1), heat_diffusion(g, 0.1)};
    const auto cfg = config(0.05, 1e-4, 0.02, 20);
    const auto path = sample_path(99, cfg.steps(), cfg.dt, 20);
    const auto a = run(sine(g), c, bounded_noise(1, 64), path, cfg);
    const auto b = run(sine(g), c, bounded_noise(1, 64), path, cfg);
    ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) EXPECT_EQ(a.snapshots[i].field.values(), b.snapshots[i].field.values());
}

TEST(Solver, CflViolationIsReported) {
    TorusGrid g(1, 128);
    const Coefficients c{zero_flux(1), heat_diffusion(g)};
    EXPECT_THROW(run(sine(g), c, zero_noise(1), dummy(), config(0.0, 1e-3, 0.01)), ConfigurationError);
}

TEST(Solver, PathShapeChecked) {
    TorusGrid g(1, 32);
    const Coefficients c{zero_flux(1), heat_diffusion(g)};
    const auto cfg = config(0.0, 1e-4, 0.01);
    EXPECT_THROW(run(sine(g), c, additive_noise(1, 4), sample_path(1, 10, 1e-4, 4), cfg), ConfigurationError);
    EXPECT_THROW(run(sine(g), c, additive_noise(1, 4), sample_path(1, 100, 1e-4, 2), cfg), ConfigurationError);
}

TEST(Sweep, EqualViscositiesGiveZero) {
    TorusGrid g(1, 64);
    const Coefficients c{burgers_flux(1), hyperbolic_diffusion(g)};
    const auto cfg = config(0.0, 5e-4, 0.05);
    const auto path = sample_path(3, cfg.steps(), cfg.dt, 10);
    const auto r = viscosity_sweep(sine(g), c, bounded_noise(1, 10), path, {0.1, 0.1}, cfg);
    ASSERT_EQ(r.distances.size(), 1u);
    EXPECT_EQ(r.distances[0], 0.0);
    EXPECT_THROW(viscosity_sweep(sine(g), c, zero_noise(1), path, {0.1}, cfg), ConfigurationError);
    EXPECT_THROW(viscosity_sweep(sine(g), c, zero_noise(1), path, {0.05, 0.1}, cfg), ConfigurationError);
}

TEST(Sweep, PureViscosityMatchesHeatKernel) {
    TorusGrid g(1, 64);
    const Coefficients c{zero_flux(1), hyperbolic_diffusion(g)};
    const double t_end = 0.5;
    const auto r = viscosity_sweep(sine(g), c, zero_noise(1), dummy(), {0.1, 0.05}, config(0.0, 5e-4, t_end));
    // ∫₀ᵀ (2/π)|e^{-4π²·0.1t} - e^{-4π²·0.05t}| dt by midpoint rule.
    const int m = 100000;
    double oracle = 0.0;
    for (int i = 0; i < m; ++i) {
        const double t = (i + 0.5) * t_end / m;
        oracle += (2.0 / pi) * std::fabs(std::exp(-0.4 * pi * pi * t) - std::exp(-0.2 * pi * pi * t)) * t_end / m;
    }
    EXPECT_NEAR(r.distances[0] / oracle, 1.0, 0.1);
}

TEST(Compare, HeatDistanceDecaysExactly) {
    TorusGrid g(1, 256);
    const Coefficients c{zero_flux(1), heat_diffusion(g)};
    const auto r = comparison_run(sine(g), ScalarField(g), c, zero_noise(1), dummy(), config(0.0, 5e-6, 0.02, 400));
    for (std::size_t i = 0; i < r.times.size(); ++i)
        EXPECT_NEAR(r.distances[i], (2.0 / pi) * std::exp(-4.0 * pi * pi * r.times[i]), 1e-3);
}

TEST(Compare, OrderedDataStayOrdered) {
    TorusGrid g(1, 128);
    const Coefficients c{burgers_flux(1), hyperbolic_diffusion(g)};
    const auto cfg = config(0.05, 2.5e-4, 0.2, 20);
    const auto path = sample_path(8, cfg.steps(), cfg.dt, 20);
    const auto r = comparison_run(sine(g, 1.0, 0.5), sine(g), c, additive_noise(1, 20), path, cfg);
    for (std::size_t i = 0; i < r.a.snapshots.size(); ++i)
        for (std::size_t x = 0; x < g.cells(); ++x) EXPECT_GE(r.a.snapshots[i].field[x], r.b.snapshots[i].field[x]);
}

TEST(Solver, TwoDimensionalAnisotropicConservesMass) {
    TorusGrid g(2, 32);
    const Coefficients c{burgers_flux(2), anisotropic_diffusion(g, 0.1)};
    auto u0 = ScalarField::from_function(g, [](const std::array<double, 2>& x) { return std::sin(2 * pi * x[0]) * std::cos(2 * pi * x[1]) + 0.2; });
    auto cfg = config(0.05, 1e-3, 0.05);
    cfg.scheme = TimeScheme::semi_implicit;
    const auto t = run(u0, c, zero_noise(2), dummy(), cfg);
    EXPECT_NEAR(t.snapshots.back().field.mean(), u0.mean(), 1e-9);
}
