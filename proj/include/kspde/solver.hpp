#ifndef KSPDE_SOLVER_HPP
#define KSPDE_SOLVER_HPP

// Euler–Maruyama integration of the nondegenerate approximation
//   du + div B^ε(u) dt = div(A^ε ∇u) dt + Φ^ε(u) dW
// on the torus, plus the viscosity-sweep and comparison drivers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "kspde/coeffs.hpp"
#include "kspde/errors.hpp"
#include "kspde/noise.hpp"
#include "kspde/torus.hpp"

namespace kspde {

enum class TimeScheme { explicit_euler, semi_implicit };
enum class FluxScheme { central, upwind };

inline std::string to_string(TimeScheme s) { return s == TimeScheme::explicit_euler ? "explicit" : "semi_implicit"; }
inline std::string to_string(FluxScheme s) { return s == FluxScheme::upwind ? "upwind" : "central"; }

struct SolverConfig {
    double epsilon = 0.0;  // 0 runs the unregularised equation
    double dt = 1e-4;
    double t_end = 0.1;
    TimeScheme scheme = TimeScheme::explicit_euler;
    FluxScheme flux_scheme = FluxScheme::upwind;
    int save_every = 1;
    double cfl_safety = 0.9;
    double blowup_threshold = 1e8;
    double cg_tolerance = 1e-10;

    long steps() const {
        const double ratio = t_end / dt;
        const long s = std::lround(ratio);
        if (s < 1 || std::fabs(ratio - static_cast<double>(s)) > 1e-9 * std::max(1.0, ratio))
            throw ConfigurationError("t_end = " + std::to_string(t_end) + " is not a whole number of dt = " +
                                     std::to_string(dt) + " steps");
        return s;
    }
};

/// Raw (unregularised) coefficients of the degenerate problem.
struct Coefficients {
    FluxSpec flux;
    DiffusionSpec diffusion;
};

/// Everything the time stepper needs at one viscosity: B^ε with its upwind split, A^ε and its
/// stencil, Φ^ε bound to the grid. Immutable once built and shareable across paths.
class Problem {
public:
    Problem(const TorusGrid& grid, const Coefficients& coeffs, const NoiseModel& noise, const SolverConfig& config,
            double expected_range = 2.0)
        : grid_(grid), config_(config), base_diffusion_(coeffs.diffusion) {
        if (coeffs.flux.dim() != grid.dim()) throw DimensionError("flux dimension differs from grid dimension");
        if (!(coeffs.diffusion.grid == grid)) throw GridMismatch("diffusion sampled on a different grid");
        if (!(config.epsilon >= 0.0 && config.epsilon < 1.0))
            throw InvalidParameter("viscosity must satisfy 0 <= epsilon < 1");
        if (!(config.dt > 0.0)) throw InvalidParameter("dt must be positive");
        if (config.save_every < 1) throw InvalidParameter("save_every must be >= 1");
        const double eps = config.epsilon;
        flux_ = eps > 0.0 ? regularize_flux(coeffs.flux, eps) : coeffs.flux;
        diffusion_ = perturb_diffusion(coeffs.diffusion, eps);
        noise_model_ = eps > 0.0 ? truncate_coefficients(noise, eps) : noise;
        noise_ = std::make_shared<NoiseOperator>(noise_model_, grid);

        if (!flux_.is_zero()) {
            split_radius_ = eps > 0.0 ? 1.0 / eps : std::max(64.0, 8.0 * expected_range);
            const double step = eps > 0.0 ? std::min(1e-3, eps / 8.0) : 1e-3;
            split_ = split_flux(flux_, split_radius_, step);
        }
        max_speed_ = flux_.is_zero() ? 0.0 : flux_.max_speed(expected_range);
        lambda_max_ = diffusion_.lambda_max();
        off_diagonal_ = diffusion_.has_off_diagonal();
        build_face_coefficients();
        if (config.scheme == TimeScheme::semi_implicit) build_implicit_matrix();
    }

    const TorusGrid& grid() const noexcept { return grid_; }
    const SolverConfig& config() const noexcept { return config_; }
    const FluxSpec& flux() const noexcept { return flux_; }
    const DiffusionSpec& diffusion() const noexcept { return diffusion_; }
    /// A without εI.
    const DiffusionSpec& base_diffusion() const noexcept { return base_diffusion_; }
    const NoiseModel& noise_model() const noexcept { return noise_model_; }
    const NoiseOperator& noise() const noexcept { return *noise_; }

    /// Combined explicit stability number dt·(N max|b|/Δx + 2N λ_max(A^ε)/Δx²).
    double cfl_number() const noexcept {
        const double h = grid_.spacing();
        const int n = grid_.dim();
        return config_.dt * (n * max_speed_ / h + 2.0 * n * lambda_max_ / (h * h));
    }

    void check_cfl() const {
        if (config_.scheme == TimeScheme::explicit_euler) {
            if (cfl_number() > config_.cfl_safety)
                throw ConfigurationError("explicit step violates the CFL bound: dt·(N max|b|/dx + 2N λmax/dx²) = " +
                                         std::to_string(cfl_number()) + " > cfl_safety = " +
                                         std::to_string(config_.cfl_safety));
        } else {
            const double adv = config_.dt * grid_.dim() * max_speed_ / grid_.spacing();
            if (adv > config_.cfl_safety)
                throw ConfigurationError("semi-implicit step violates the advective CFL bound: " + std::to_string(adv));
        }
    }

    /// Largest stable explicit dt for this problem at safety factor `safety`.
    double stable_dt(double safety) const noexcept {
        const double h = grid_.spacing();
        const int n = grid_.dim();
        const double rate = n * max_speed_ / h + 2.0 * n * lambda_max_ / (h * h);
        return rate > 0.0 ? safety / rate : 1.0;
    }

    /// Conservative flux divergence div_h B^ε(u).
    ScalarField flux_divergence(const ScalarField& u) const {
        ScalarField d(grid_);
        if (flux_.is_zero()) return d;
        const double inv = 1.0 / grid_.spacing();
        std::vector<double> face(grid_.cells());
        for (int a = 0; a < grid_.dim(); ++a) {
            for (std::size_t x = 0; x < grid_.cells(); ++x) {
                const double l = u[x], r = u[grid_.shift(x, a, 1)];
                face[x] = config_.flux_scheme == FluxScheme::upwind
                              ? split_.flux(a, l, r)
                              : 0.5 * (flux_.components[a](l) + flux_.components[a](r));
            }
            for (std::size_t x = 0; x < grid_.cells(); ++x) d[x] += (face[x] - face[grid_.shift(x, a, -1)]) * inv;
        }
        return d;
    }

    /// Discrete div(A^ε ∇u): compact face stencil on the diagonal, central cross terms off it.
    ScalarField diffusion_apply(const ScalarField& u) const {
        ScalarField out(grid_);
        const double h2 = grid_.spacing() * grid_.spacing();
        for (int a = 0; a < grid_.dim(); ++a) {
            const auto& fc = face_coeff_[a];
            for (std::size_t x = 0; x < grid_.cells(); ++x) {
                const auto xp = grid_.shift(x, a, 1), xm = grid_.shift(x, a, -1);
                out[x] += (fc[x] * (u[xp] - u[x]) - fc[xm] * (u[x] - u[xm])) / h2;
            }
        }
        if (off_diagonal_) {
            const double inv = 1.0 / (2.0 * grid_.spacing());
            for (int a = 0; a < 2; ++a) {
                const int b = 1 - a;
                ScalarField flux(grid_);
                for (std::size_t x = 0; x < grid_.cells(); ++x)
                    flux[x] = diffusion_.matrix(x)(a, b) * (u[grid_.shift(x, b, 1)] - u[grid_.shift(x, b, -1)]) * inv;
                for (std::size_t x = 0; x < grid_.cells(); ++x)
                    out[x] += (flux[grid_.shift(x, a, 1)] - flux[grid_.shift(x, a, -1)]) * inv;
            }
        }
        return out;
    }

    /// -⟨u, div_h(A^ε∇u)⟩: the scheme's discrete Dirichlet energy.
    double dirichlet_form(const ScalarField& u) const { return -inner(u, diffusion_apply(u)); }

    /// One step with the noise increments of the active modes.
    ScalarField step(const ScalarField& u, std::span<const double> increments, long step_index = 0) const {
        ScalarField rhs = u;
        if (!flux_.is_zero()) rhs -= config_.dt * flux_divergence(u);
        if (!noise_model_.is_zero() && noise_->active_modes() > 0) rhs += noise_->apply(u, increments);
        ScalarField next(grid_);
        if (config_.scheme == TimeScheme::explicit_euler) {
            next = rhs + config_.dt * diffusion_apply(u);
        } else {
            next = solve_implicit(rhs, u);
        }
        double m = 0.0;
        for (double v : next.values()) {
            if (!std::isfinite(v)) throw BlowUp("non-finite value at step " + std::to_string(step_index), step_index);
            m = std::max(m, std::fabs(v));
        }
        if (m > config_.blowup_threshold)
            throw BlowUp("max|u| = " + std::to_string(m) + " exceeds blow-up threshold at step " +
                             std::to_string(step_index),
                         step_index);
        return next;
    }

    /// Increments the active modes take from a path step (shared-path coupling: first modes).
    std::span<const double> increments(const WienerPath& path, long s) const {
        return path.step(s).subspan(0, static_cast<std::size_t>(noise_->active_modes()));
    }

    void check_path(const WienerPath& path, long steps) const {
        if (noise_model_.is_zero()) return;
        if (path.steps < steps)
            throw ConfigurationError("Wiener path has " + std::to_string(path.steps) + " steps, run needs " +
                                     std::to_string(steps));
        if (std::fabs(path.dt - config_.dt) > 1e-12 * config_.dt)
            throw ConfigurationError("Wiener path dt differs from solver dt");
        if (path.modes < noise_->active_modes())
            throw ConfigurationError("Wiener path has " + std::to_string(path.modes) + " modes, noise needs " +
                                     std::to_string(noise_->active_modes()));
    }

private:
    void build_face_coefficients() {
        face_coeff_.assign(grid_.dim(), std::vector<double>(grid_.cells()));
        for (int a = 0; a < grid_.dim(); ++a)
            for (std::size_t x = 0; x < grid_.cells(); ++x)
                face_coeff_[a][x] =
                    0.5 * (diffusion_.matrix(x)(a, a) + diffusion_.matrix(grid_.shift(x, a, 1))(a, a));
    }

    void build_implicit_matrix() {
        const auto n = static_cast<Eigen::Index>(grid_.cells());
        std::vector<Eigen::Triplet<double>> trip;
        // Column j of L is L applied to the unit vector e_j; stencils are local so probe per cell.
        ScalarField e(grid_);
        for (std::size_t j = 0; j < grid_.cells(); ++j) {
            e[j] = 1.0;
            const ScalarField col = diffusion_apply(e);
            e[j] = 0.0;
            for (std::size_t i = 0; i < grid_.cells(); ++i) {
                const double v = (i == j ? 1.0 : 0.0) - config_.dt * col[i];
                if (v != 0.0) trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), v);
            }
        }
        auto m = std::make_shared<Eigen::SparseMatrix<double>>(n, n);
        m->setFromTriplets(trip.begin(), trip.end());
        implicit_ = m;
        cg_ = std::make_shared<Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper>>();
        cg_->setTolerance(config_.cg_tolerance);
        cg_->setMaxIterations(10 * static_cast<int>(n) + 100);
        cg_->compute(*implicit_);
    }

    ScalarField solve_implicit(const ScalarField& rhs, const ScalarField& guess) const {
        Eigen::Map<const Eigen::VectorXd> b(rhs.values().data(), static_cast<Eigen::Index>(rhs.size()));
        Eigen::Map<const Eigen::VectorXd> x0(guess.values().data(), static_cast<Eigen::Index>(guess.size()));
        Eigen::VectorXd x = cg_->solveWithGuess(b, x0);
        if (cg_->info() != Eigen::Success || cg_->error() > config_.cg_tolerance)
            throw SolverError("conjugate gradient did not converge, relative residual " +
                                  std::to_string(cg_->error()),
                              cg_->error());
        return ScalarField(grid_, std::vector<double>(x.data(), x.data() + x.size()));
    }

    TorusGrid grid_;
    SolverConfig config_;
    DiffusionSpec base_diffusion_;
    FluxSpec flux_;
    DiffusionSpec diffusion_;
    NoiseModel noise_model_;
    std::shared_ptr<NoiseOperator> noise_;
    UpwindSplit split_;
    double split_radius_ = 0.0;
    double max_speed_ = 0.0;
    double lambda_max_ = 0.0;
    bool off_diagonal_ = false;
    std::vector<std::vector<double>> face_coeff_;
    std::shared_ptr<Eigen::SparseMatrix<double>> implicit_;
    std::shared_ptr<Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper>> cg_;
};

/// Range used for the advective CFL bound: max|u₀| + 1.
inline double expected_range(const ScalarField& u0) { return u0.max_abs() + 1.0; }

/// One Euler–Maruyama step built from raw coefficients (regularised at config.epsilon).
inline ScalarField step(const ScalarField& u, const Coefficients& coeffs, const NoiseModel& noise,
                        std::span<const double> increments, const SolverConfig& config) {
    Problem p(u.grid(), coeffs, noise, config, expected_range(u));
    p.check_cfl();
    return p.step(u, increments);
}

struct Snapshot {
    double time = 0.0;
    ScalarField field;
};

struct StepDiagnostics {
    long step = 0;
    double time = 0.0;
    double max_abs_u = 0.0;
    double l2 = 0.0;
    double mean = 0.0;
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    SolverConfig config;
    std::uint64_t path_seed = 0;
    std::vector<StepDiagnostics> diagnostics;

    const TorusGrid& grid() const { return snapshots.front().field.grid(); }
    std::vector<double> times() const {
        std::vector<double> t;
        for (const auto& s : snapshots) t.push_back(s.time);
        return t;
    }
};

inline StepDiagnostics diagnose(long step, double time, const ScalarField& u) {
    return {step, time, u.max_abs(), lp_norm(u, 2.0), u.mean()};
}

/// Integrates from u0 over [0, T] on the given path, snapshotting every save_every steps and at T.
inline Trajectory run(const ScalarField& u0, const Problem& problem, const WienerPath& path) {
    if (!u0.all_finite()) throw InvalidParameter("initial datum has non-finite values");
    if (!(u0.grid() == problem.grid())) throw GridMismatch("initial datum on a different grid than the problem");
    const auto& cfg = problem.config();
    const long steps = cfg.steps();
    problem.check_cfl();
    problem.check_path(path, steps);

    Trajectory traj;
    traj.config = cfg;
    traj.path_seed = path.seed;
    traj.snapshots.push_back({0.0, u0});
    traj.diagnostics.push_back(diagnose(0, 0.0, u0));
    ScalarField u = u0;
    const bool noisy = !problem.noise_model().is_zero() && problem.noise().active_modes() > 0;
    for (long s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s + 1) * cfg.dt;
        try {
            u = noisy ? problem.step(u, problem.increments(path, s), s) : problem.step(u, {}, s);
        } catch (const BlowUp& e) {
            throw BlowUp(std::string(e.what()) + " (t = " + std::to_string(t) + ")", e.step());
        } catch (const SolverError& e) {
            throw SolverError(std::string(e.what()) + " (t = " + std::to_string(t) + ")", e.residual());
        }
        traj.diagnostics.push_back(diagnose(s + 1, t, u));
        if ((s + 1) % cfg.save_every == 0 || s + 1 == steps) traj.snapshots.push_back({t, u});
    }
    return traj;
}

inline Trajectory run(const ScalarField& u0, const Coefficients& coeffs, const NoiseModel& noise,
                      const WienerPath& path, const SolverConfig& config) {
    Problem p(u0.grid(), coeffs, noise, config, expected_range(u0));
    return run(u0, p, path);
}

/// ∫₀ᵀ ‖u(t) - v(t)‖_{L¹} dt by the trapezoid rule over common snapshot times.
inline double l1_time_distance(const Trajectory& a, const Trajectory& b) {
    if (a.snapshots.size() != b.snapshots.size())
        throw ConfigurationError("trajectories have different snapshot counts");
    double acc = 0.0;
    double prev = l1_distance(a.snapshots[0].field, b.snapshots[0].field);
    for (std::size_t i = 1; i < a.snapshots.size(); ++i) {
        if (std::fabs(a.snapshots[i].time - b.snapshots[i].time) > 1e-12)
            throw ConfigurationError("trajectories have different snapshot times");
        const double cur = l1_distance(a.snapshots[i].field, b.snapshots[i].field);
        acc += 0.5 * (prev + cur) * (a.snapshots[i].time - a.snapshots[i - 1].time);
        prev = cur;
    }
    return acc;
}

struct SweepReport {
    std::vector<double> epsilons;
    /// distances[i] = L¹(0,T;L¹) distance between runs at epsilons[i] and epsilons[i+1].
    std::vector<double> distances;
    bool monotone = true;
};

/// Vanishing-viscosity sweep: one run per ε on the same path, distances between consecutive runs.
inline SweepReport viscosity_sweep(const ScalarField& u0, const Coefficients& coeffs, const NoiseModel& noise,
                                   const WienerPath& path, const std::vector<double>& epsilons,
                                   const SolverConfig& base) {
    if (epsilons.size() < 2) throw ConfigurationError("viscosity sweep needs at least two ε values");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0 && epsilons[i] < 1.0)) throw ConfigurationError("sweep ε must lie in (0,1)");
        if (i > 0 && epsilons[i] > epsilons[i - 1]) throw ConfigurationError("sweep ε values must be descending");
    }
    SweepReport rep;
    rep.epsilons = epsilons;
    Trajectory prev;
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        SolverConfig cfg = base;
        cfg.epsilon = epsilons[i];
        Trajectory cur = run(u0, coeffs, noise, path, cfg);
        if (i > 0) rep.distances.push_back(l1_time_distance(prev, cur));
        prev = std::move(cur);
    }
    for (std::size_t i = 1; i < rep.distances.size(); ++i)
        if (!(rep.distances[i] < rep.distances[i - 1])) rep.monotone = false;
    return rep;
}

struct ContractionReport {
    std::vector<double> times;
    std::vector<double> distances;
    Trajectory a;
    Trajectory b;
};

/// Evolves two initial data under the same path and records ‖u_a(t) - u_b(t)‖_{L¹} per snapshot.
inline ContractionReport comparison_run(const ScalarField& u0_a, const ScalarField& u0_b, const Problem& problem,
                                        const WienerPath& path) {
    u0_a.check_same(u0_b);
    ContractionReport rep;
    rep.a = run(u0_a, problem, path);
    rep.b = run(u0_b, problem, path);
    for (std::size_t i = 0; i < rep.a.snapshots.size(); ++i) {
        rep.times.push_back(rep.a.snapshots[i].time);
        rep.distances.push_back(l1_distance(rep.a.snapshots[i].field, rep.b.snapshots[i].field));
    }
    return rep;
}

inline ContractionReport comparison_run(const ScalarField& u0_a, const ScalarField& u0_b, const Coefficients& coeffs,
                                        const NoiseModel& noise, const WienerPath& path, const SolverConfig& config) {
    u0_a.check_same(u0_b);
    Problem p(u0_a.grid(), coeffs, noise, config, std::max(expected_range(u0_a), expected_range(u0_b)));
    return comparison_run(u0_a, u0_b, p, path);
}

}  // namespace kspde

#endif  // KSPDE_SOLVER_HPP
