#ifndef KSPDE_VERIFY_HPP
#define KSPDE_VERIFY_HPP

// Monte-Carlo harness: ensembles of paths, fixed-order reduction, statistical verdicts.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "kspde/coeffs.hpp"
#include "kspde/errors.hpp"
#include "kspde/noise.hpp"
#include "kspde/solver.hpp"
#include "kspde/torus.hpp"

namespace kspde {

enum class Experiment { contraction, energy, regularity, cauchy, continuity };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::contraction: return "contraction";
        case Experiment::energy: return "energy";
        case Experiment::regularity: return "regularity";
        case Experiment::cauchy: return "cauchy";
        case Experiment::continuity: return "continuity";
    }
    return "?";
}

struct EnsembleSpec {
    int path_count = 2;
    std::uint64_t root_seed = 0;
    Experiment experiment = Experiment::contraction;
    double confidence_multiplier = 3.0;
    int workers = 1;
    /// Allowed growth of a level per halving of ε, relative to the mean level.
    double relative_slope_tolerance = 0.1;

    void validate() const {
        if (path_count < 1) throw InvalidParameter("ensemble needs at least one path");
        if (!(confidence_multiplier >= 0.0)) throw InvalidParameter("confidence multiplier must be >= 0");
        if (workers < 1) throw InvalidParameter("worker count must be >= 1");
    }

    std::vector<std::uint64_t> seeds() const {
        std::vector<std::uint64_t> s(path_count);
        for (int i = 0; i < path_count; ++i) s[i] = path_seed(root_seed, static_cast<std::uint64_t>(i));
        return s;
    }
};

/// One model configuration: coefficients, noise and solver settings.
struct Setup {
    std::string label = "setup";
    Coefficients coeffs;
    NoiseModel noise;
    SolverConfig config;
    double scheme_constant = 0.0;  // C_s in tol_s = C_s (Δx + Δt)

    const TorusGrid& grid() const { return coeffs.diffusion.grid; }
};

enum class Verdict { pass, fail, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

/// margin ≥ c·se → pass, margin ≤ -c·se → fail, otherwise inconclusive.
inline Verdict judge(double margin, double std_error, double c) {
    const double band = c * std_error;
    if (margin >= band) return Verdict::pass;
    if (margin <= -band) return Verdict::fail;
    return Verdict::inconclusive;
}

inline Verdict combine(Verdict a, Verdict b) {
    if (a == Verdict::fail || b == Verdict::fail) return Verdict::fail;
    if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
    return Verdict::pass;
}

struct Statistic {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Sample mean and standard error (sample sd / √M; 0 for a single sample).
inline Statistic summarize(const std::vector<double>& v) {
    Statistic s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() < 2) return s;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std_error = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    return s;
}

/// Least-squares slope of y against x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

struct ReportRow {
    std::string curve;
    double x = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
};

struct RunReport {
    std::string experiment;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<ReportRow> rows;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> per_path_columns;
    std::vector<std::vector<double>> per_path;  // [path][column]
    std::vector<std::pair<std::string, double>> fitted;
    double margin = 0.0;
    double margin_std_error = 0.0;
    Verdict verdict = Verdict::pass;
    std::string summary;

    void meta(std::string key, std::string value) { metadata.emplace_back(std::move(key), std::move(value)); }
    void meta(std::string key, double value) {
        std::ostringstream s;
        s.precision(17);
        s << value;
        metadata.emplace_back(std::move(key), s.str());
    }
    double fitted_value(const std::string& key) const {
        for (const auto& [k, v] : fitted)
            if (k == key) return v;
        throw RangeError("no fitted value named " + key);
    }
    std::vector<ReportRow> curve(const std::string& name) const {
        std::vector<ReportRow> out;
        for (const auto& r : rows)
            if (r.curve == name) out.push_back(r);
        return out;
    }
};

/// Runs f(i) for i in [0, count) on `workers` threads; results in index order.
template <class F>
auto parallel_map(int count, int workers, F&& f) -> std::vector<decltype(f(0))> {
    using R = decltype(f(0));
    std::vector<R> out(count);
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) out[i] = f(i);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    int error_index = count;
    std::mutex lock;
    auto body = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                out[i] = f(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(lock);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(workers, count); ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

namespace detail {

inline WienerPath path_for(const Setup& setup, std::uint64_t seed) {
    if (setup.noise.is_zero()) return sample_path(seed, 1, setup.config.dt, 1);
    return sample_path(seed, setup.config.steps(), setup.config.dt, std::max(1, setup.noise.k_max()));
}

/// Wraps a per-path failure with its index and seed.
template <class F>
auto guarded(int index, std::uint64_t seed, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const BlowUp& e) {
        throw BlowUp("path " + std::to_string(index) + " (seed " + std::to_string(seed) + "): " + e.what(),
                     e.step());
    } catch (const Error& e) {
        throw Error("path " + std::to_string(index) + " (seed " + std::to_string(seed) + "): " + e.what());
    }
}

/// Snapshot times produced by run() for a config.
inline std::vector<double> snapshot_times(const SolverConfig& cfg) {
    std::vector<double> t{0.0};
    const long steps = cfg.steps();
    for (long s = 1; s <= steps; ++s)
        if (s % cfg.save_every == 0 || s == steps) t.push_back(static_cast<double>(s) * cfg.dt);
    return t;
}

inline void describe(RunReport& r, const Setup& setup, const EnsembleSpec& spec) {
    const auto& g = setup.grid();
    r.meta("experiment", r.experiment);
    r.meta("setup", setup.label);
    r.meta("dim", std::to_string(g.dim()));
    r.meta("n", std::to_string(g.points_per_axis()));
    r.meta("flux", setup.coeffs.flux.name);
    r.meta("diffusion", setup.coeffs.diffusion.name);
    r.meta("noise", setup.noise.name);
    r.meta("noise_profile", to_string(setup.noise.profile));
    r.meta("k_max", std::to_string(setup.noise.k_max()));
    r.meta("alpha", setup.noise.alpha);
    r.meta("epsilon", setup.config.epsilon);
    r.meta("dt", setup.config.dt);
    r.meta("t_end", setup.config.t_end);
    r.meta("scheme", to_string(setup.config.scheme));
    r.meta("flux_scheme", to_string(setup.config.flux_scheme));
    r.meta("save_every", std::to_string(setup.config.save_every));
    r.meta("paths", std::to_string(spec.path_count));
    r.meta("root_seed", std::to_string(spec.root_seed));
    r.meta("confidence", spec.confidence_multiplier);
}

inline void check_ladder(const std::vector<double>& ladder) {
    if (ladder.empty()) throw ConfigurationError("ε-ladder is empty");
    for (double e : ladder)
        if (!(e > 0.0 && e < 1.0)) throw ConfigurationError("ε-ladder values must lie in (0,1)");
}

/// Uniformity across an ε-ladder: per-path slopes of level vs log2(1/ε), judged against a
/// tolerance proportional to the mean level.
inline void judge_uniformity(RunReport& r, const std::vector<double>& ladder,
                             const std::vector<std::vector<double>>& levels, const EnsembleSpec& spec) {
    if (ladder.size() < 2) {
        r.verdict = Verdict::pass;
        r.summary = "single ε: level recorded, no trend to test";
        return;
    }
    std::vector<double> x;
    for (double e : ladder) x.push_back(std::log2(1.0 / e));
    std::vector<double> slopes, all;
    for (const auto& row : levels) {
        slopes.push_back(ols_slope(x, row));
        for (double v : row) all.push_back(v);
    }
    const Statistic s = summarize(slopes);
    const double tol = spec.relative_slope_tolerance * std::fabs(summarize(all).mean);
    r.fitted.emplace_back("slope_mean", s.mean);
    r.fitted.emplace_back("slope_std_error", s.std_error);
    r.fitted.emplace_back("slope_tolerance", tol);
    r.margin = tol - s.mean;
    r.margin_std_error = s.std_error;
    r.verdict = judge(r.margin, s.std_error, spec.confidence_multiplier);
    std::ostringstream m;
    m.precision(6);
    m << "slope vs log2(1/eps) = " << s.mean << " +- " << s.std_error << " (tolerance " << tol << ")";
    r.summary = m.str();
}

}  // namespace detail

/// Convolution with ϱ_width (unit-mass bump).
inline ScalarField mollify_initial(const ScalarField& u0, double width) {
    if (!(width > 0.0)) throw InvalidParameter("mollification width must be positive");
    return convolve(u0, MollifierKernel{MollifierKind::spatial, width});
}

/// σ = min{α/(α+1), 1/2}.
inline double regularity_exponent(double alpha) {
    if (!(alpha > 0.0)) throw InvalidParameter("noise model needs α > 0 for the regularity exponent");
    return std::min(alpha / (alpha + 1.0), 0.5);
}

/// C_s such that the heat-case L¹ distance of sin(2πx) and 0 deviates from (2/π)e^{-4π²t} by at most
/// C_s (Δx + Δt) on the given grid and scheme.
inline double calibrate_scheme_constant(const TorusGrid& grid, const SolverConfig& config) {
    Coefficients heat{zero_flux(grid.dim()), heat_diffusion(grid)};
    SolverConfig cfg = config;
    cfg.epsilon = 0.0;
    const auto noise = zero_noise(grid.dim());
    const auto u0 = ScalarField::from_function(
        grid, [](const std::array<double, 2>& x) { return std::sin(2.0 * std::numbers::pi * x[0]); });
    Problem probe(grid, heat, noise, cfg, expected_range(u0));
    if (cfg.scheme == TimeScheme::explicit_euler && probe.cfl_number() > cfg.cfl_safety) {
        // Refine dt to a stable divisor of the original step.
        const long factor = static_cast<long>(std::ceil(probe.cfl_number() / (0.5 * cfg.cfl_safety)));
        cfg.dt = config.dt / static_cast<double>(factor);
    }
    cfg.save_every = std::max<int>(1, static_cast<int>(cfg.steps() / 50));
    Problem p(grid, heat, noise, cfg, expected_range(u0));
    const auto traj = run(u0, p, sample_path(0, 1, cfg.dt, 1));
    const ScalarField zero(grid);
    double defect = 0.0;
    for (const auto& s : traj.snapshots) {
        const double exact = 2.0 / std::numbers::pi * std::exp(-4.0 * std::numbers::pi * std::numbers::pi * s.time);
        defect = std::max(defect, std::fabs(l1_distance(s.field, zero) - exact));
    }
    return defect / (grid.spacing() + config.dt);
}

/// 𝔼‖u_a(t) - u_b(t)‖_{L¹} ≤ 𝔼‖u_a(0) - u_b(0)‖_{L¹} + tol_s at every snapshot.
inline RunReport contraction_test(const ScalarField& u0_a, const ScalarField& u0_b, const Setup& setup,
                                  const EnsembleSpec& spec) {
    spec.validate();
    u0_a.check_same(u0_b);
    if (!(setup.config.epsilon > 0.0)) throw ConfigurationError("contraction test needs ε > 0");
    RunReport r;
    r.experiment = "contraction";
    detail::describe(r, setup, spec);
    const double tol = setup.scheme_constant * (setup.grid().spacing() + setup.config.dt);
    r.meta("scheme_constant", setup.scheme_constant);
    r.meta("scheme_tolerance", tol);
    r.seeds = spec.seeds();
    const Problem problem(setup.grid(), setup.coeffs, setup.noise, setup.config,
                          std::max(expected_range(u0_a), expected_range(u0_b)));
    r.per_path = parallel_map(spec.path_count, spec.workers, [&](int i) {
        return detail::guarded(i, r.seeds[i], [&] {
            return comparison_run(u0_a, u0_b, problem, detail::path_for(setup, r.seeds[i])).distances;
        });
    });
    const auto times = detail::snapshot_times(setup.config);
    for (double t : times) {
        std::ostringstream c;
        c.precision(6);
        c << "t=" << t;
        r.per_path_columns.push_back(c.str());
    }
    std::vector<double> d0;
    for (const auto& row : r.per_path) d0.push_back(row[0]);
    const Statistic init = summarize(d0);
    const double bound = init.mean + tol;
    r.verdict = Verdict::pass;
    r.margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < times.size(); ++k) {
        std::vector<double> col;
        for (const auto& row : r.per_path) col.push_back(row[k]);
        const Statistic s = summarize(col);
        r.rows.push_back({"distance", times[k], s.mean, s.std_error, bound});
        const double margin = bound - s.mean;
        r.verdict = combine(r.verdict, judge(margin, s.std_error, spec.confidence_multiplier));
        if (margin - spec.confidence_multiplier * s.std_error <
            r.margin - spec.confidence_multiplier * r.margin_std_error) {
            r.margin = margin;
            r.margin_std_error = s.std_error;
        }
    }
    r.fitted.emplace_back("initial_distance", init.mean);
    r.fitted.emplace_back("scheme_tolerance", tol);
    std::ostringstream m;
    m.precision(6);
    m << "worst margin " << r.margin << " (std error " << r.margin_std_error << ")";
    r.summary = m.str();
    return r;
}

/// Per-path ‖u(t)‖_p^p at every snapshot for one setup.
inline std::vector<std::vector<double>> ensemble_energy(const ScalarField& u0, const Setup& setup, int p,
                                                        const EnsembleSpec& spec) {
    const auto seeds = spec.seeds();
    const Problem problem(setup.grid(), setup.coeffs, setup.noise, setup.config, expected_range(u0));
    return parallel_map(spec.path_count, spec.workers, [&](int i) {
        return detail::guarded(i, seeds[i], [&] {
            const auto traj = run(u0, problem, detail::path_for(setup, seeds[i]));
            std::vector<double> e;
            for (const auto& s : traj.snapshots) e.push_back(lp_norm_pow(s.field, p));
            return e;
        });
    });
}

/// sup_t 𝔼‖u^ε(t)‖_p^p across an ε-ladder; pass iff no significant growth as ε decreases.
inline RunReport energy_test(const ScalarField& u0, const Setup& setup, int p, const std::vector<double>& ladder,
                             const EnsembleSpec& spec) {
    if (p != 2 && p != 4 && p != 6) throw InvalidExponent("energy test supports p in {2, 4, 6}, got " + std::to_string(p));
    spec.validate();
    detail::check_ladder(ladder);
    RunReport r;
    r.experiment = "energy";
    detail::describe(r, setup, spec);
    r.meta("p", std::to_string(p));
    r.seeds = spec.seeds();
    const double e0 = lp_norm_pow(u0, p);
    std::vector<std::vector<double>> levels(spec.path_count, std::vector<double>(ladder.size()));
    double worst = 0.0;
    for (std::size_t j = 0; j < ladder.size(); ++j) {
        Setup s = setup;
        s.config.epsilon = ladder[j];
        const auto energies = ensemble_energy(u0, s, p, spec);
        const auto times = detail::snapshot_times(s.config);
        const std::string curve = "energy_eps=" + std::to_string(ladder[j]);
        double sup_mean = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            std::vector<double> col;
            for (const auto& row : energies) col.push_back(row[k]);
            const Statistic st = summarize(col);
            r.rows.push_back({curve, times[k], st.mean, st.std_error, 0.0});
            sup_mean = std::max(sup_mean, st.mean);
        }
        for (int i = 0; i < spec.path_count; ++i)
            levels[i][j] = *std::max_element(energies[i].begin(), energies[i].end());
        std::vector<double> sups;
        for (const auto& l : levels) sups.push_back(l[j]);
        const Statistic st = summarize(sups);
        r.rows.push_back({"sup_energy", ladder[j], st.mean, st.std_error, 0.0});
        r.fitted.emplace_back("max_mean_eps=" + std::to_string(ladder[j]), sup_mean);
        worst = std::max(worst, st.mean);
    }
    const double c = worst / (1.0 + e0);
    r.fitted.emplace_back("C", c);
    for (auto& row : r.rows) row.bound = c * (1.0 + e0);
    for (double e : ladder) r.per_path_columns.push_back("sup_eps=" + std::to_string(e));
    r.per_path = levels;
    detail::judge_uniformity(r, ladder, levels, spec);
    return r;
}

/// 𝔼 p^σ_ϱ(u^ε(t)) across snapshots and an ε-ladder with σ from the noise α.
inline RunReport regularity_test(const ScalarField& u0, const Setup& setup, const std::vector<double>& ladder,
                                 const EnsembleSpec& spec, int max_snapshots = 9) {
    const double sigma = regularity_exponent(setup.noise.alpha);
    spec.validate();
    detail::check_ladder(ladder);
    RunReport r;
    r.experiment = "regularity";
    detail::describe(r, setup, spec);
    r.meta("sigma", sigma);
    r.seeds = spec.seeds();
    const double p0 = mollified_seminorm(u0, sigma);
    std::vector<std::vector<double>> levels(spec.path_count, std::vector<double>(ladder.size()));
    double worst = 0.0;
    for (std::size_t j = 0; j < ladder.size(); ++j) {
        Setup s = setup;
        s.config.epsilon = ladder[j];
        const Problem problem(s.grid(), s.coeffs, s.noise, s.config, expected_range(u0));
        const auto per = parallel_map(spec.path_count, spec.workers, [&](int i) {
            return detail::guarded(i, r.seeds[i], [&] {
                const auto traj = run(u0, problem, detail::path_for(s, r.seeds[i]));
                const std::size_t n = traj.snapshots.size();
                const std::size_t stride = std::max<std::size_t>(1, (n - 1 + max_snapshots - 2) / (max_snapshots - 1));
                std::vector<std::pair<double, double>> v;
                for (std::size_t k = 0; k < n; k += stride)
                    v.emplace_back(traj.snapshots[k].time, mollified_seminorm(traj.snapshots[k].field, sigma));
                if ((n - 1) % stride != 0)
                    v.emplace_back(traj.snapshots.back().time, mollified_seminorm(traj.snapshots.back().field, sigma));
                return v;
            });
        });
        const std::string curve = "seminorm_eps=" + std::to_string(ladder[j]);
        for (std::size_t k = 0; k < per[0].size(); ++k) {
            std::vector<double> col;
            for (const auto& row : per) col.push_back(row[k].second);
            const Statistic st = summarize(col);
            r.rows.push_back({curve, per[0][k].first, st.mean, st.std_error, 0.0});
            worst = std::max(worst, st.mean);
        }
        for (int i = 0; i < spec.path_count; ++i) {
            double m = 0.0;
            for (const auto& [t, v] : per[i]) m = std::max(m, v);
            levels[i][j] = m;
        }
    }
    const double c = worst / (1.0 + p0);
    r.fitted.emplace_back("sigma", sigma);
    r.fitted.emplace_back("initial_seminorm", p0);
    r.fitted.emplace_back("C_T", c);
    for (auto& row : r.rows) row.bound = c * (1.0 + p0);
    for (double e : ladder) r.per_path_columns.push_back("sup_eps=" + std::to_string(e));
    r.per_path = levels;
    detail::judge_uniformity(r, ladder, levels, spec);
    return r;
}

/// max over snapshot pairs of ‖u(t) - u(s)‖_{H^{-2}} / |t - s|^λ.
inline double holder_quotient(const Trajectory& traj, double lambda) {
    if (!(lambda > 0.0 && lambda < 0.5)) throw InvalidParameter("Hölder exponent must lie in (0, 1/2)");
    const double span = traj.snapshots.back().time - traj.snapshots.front().time;
    if (!(span > 0.0) || static_cast<double>(traj.snapshots.size() - 1) < 32.0 * span)
        throw ConfigurationError("continuity test needs at least 32 snapshots per unit time, got " +
                                 std::to_string(traj.snapshots.size()) + " over t = " + std::to_string(span));
    const auto& g = traj.grid();
    std::vector<double> weight(g.cells());
    for (std::size_t f = 0; f < g.cells(); ++f) weight[f] = std::pow(1.0 + wave_number_squared(g, f), -2.0);
    std::vector<std::vector<std::complex<double>>> hats;
    for (const auto& s : traj.snapshots) hats.push_back(fourier_coefficients(s.field));
    double best = 0.0;
    for (std::size_t a = 0; a < hats.size(); ++a)
        for (std::size_t b = a + 1; b < hats.size(); ++b) {
            double acc = 0.0;
            for (std::size_t f = 0; f < g.cells(); ++f) acc += weight[f] * std::norm(hats[a][f] - hats[b][f]);
            const double dt = traj.snapshots[b].time - traj.snapshots[a].time;
            best = std::max(best, std::sqrt(acc) / std::pow(dt, lambda));
        }
    return best;
}

inline RunReport continuity_test(const ScalarField& u0, const Setup& setup, double lambda,
                                 const std::vector<double>& ladder, const EnsembleSpec& spec) {
    spec.validate();
    detail::check_ladder(ladder);
    RunReport r;
    r.experiment = "continuity";
    detail::describe(r, setup, spec);
    r.meta("lambda", lambda);
    r.meta("sobolev_index", "-2");
    r.seeds = spec.seeds();
    std::vector<std::vector<double>> levels(spec.path_count, std::vector<double>(ladder.size()));
    for (std::size_t j = 0; j < ladder.size(); ++j) {
        Setup s = setup;
        s.config.epsilon = ladder[j];
        const Problem problem(s.grid(), s.coeffs, s.noise, s.config, expected_range(u0));
        const auto q = parallel_map(spec.path_count, spec.workers, [&](int i) {
            return detail::guarded(i, r.seeds[i],
                                   [&] { return holder_quotient(run(u0, problem, detail::path_for(s, r.seeds[i])), lambda); });
        });
        for (int i = 0; i < spec.path_count; ++i) levels[i][j] = q[i];
        const Statistic st = summarize(q);
        r.rows.push_back({"holder_quotient", ladder[j], st.mean, st.std_error, 0.0});
    }
    double worst = 0.0;
    for (const auto& row : r.rows) worst = std::max(worst, row.mean);
    for (auto& row : r.rows) row.bound = worst;
    r.fitted.emplace_back("C", worst);
    for (double e : ladder) r.per_path_columns.push_back("quotient_eps=" + std::to_string(e));
    r.per_path = levels;
    detail::judge_uniformity(r, ladder, levels, spec);
    return r;
}

/// Consecutive L¹(0,T;L¹) distances along a descending ε-ladder on shared paths; with `mollify`
/// each run starts from u₀ * ϱ_ε.
inline RunReport cauchy_test(const ScalarField& u0, const Setup& setup, const std::vector<double>& ladder,
                             const EnsembleSpec& spec, bool mollify = true) {
    spec.validate();
    if (ladder.size() < 3) throw ConfigurationError("Cauchy test needs at least three ε values");
    detail::check_ladder(ladder);
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (!(ladder[i] < ladder[i - 1])) throw ConfigurationError("Cauchy ladder must be strictly decreasing");
    RunReport r;
    r.experiment = "cauchy";
    detail::describe(r, setup, spec);
    r.meta("mollify_initial", mollify ? "true" : "false");
    r.seeds = spec.seeds();
    std::vector<Problem> problems;
    std::vector<ScalarField> starts;
    for (double e : ladder) {
        SolverConfig cfg = setup.config;
        cfg.epsilon = e;
        starts.push_back(mollify ? mollify_initial(u0, e) : u0);
        problems.emplace_back(setup.grid(), setup.coeffs, setup.noise, cfg, expected_range(u0));
    }
    r.per_path = parallel_map(spec.path_count, spec.workers, [&](int i) {
        return detail::guarded(i, r.seeds[i], [&] {
            const auto path = detail::path_for(setup, r.seeds[i]);
            std::vector<double> d;
            Trajectory prev = run(starts[0], problems[0], path);
            for (std::size_t j = 1; j < ladder.size(); ++j) {
                Trajectory cur = run(starts[j], problems[j], path);
                d.push_back(l1_time_distance(prev, cur));
                prev = std::move(cur);
            }
            return d;
        });
    });
    for (std::size_t j = 1; j < ladder.size(); ++j)
        r.per_path_columns.push_back("d(" + std::to_string(ladder[j - 1]) + "," + std::to_string(ladder[j]) + ")");
    for (std::size_t j = 0; j + 1 < ladder.size(); ++j) {
        std::vector<double> col;
        for (const auto& row : r.per_path) col.push_back(row[j]);
        const Statistic st = summarize(col);
        r.rows.push_back({"distance", ladder[j + 1], st.mean, st.std_error, 0.0});
    }
    // Each consecutive pair must shrink: paired differences d_j - d_{j+1} > 0.
    r.verdict = Verdict::pass;
    r.margin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 2 < ladder.size(); ++j) {
        std::vector<double> diff;
        for (const auto& row : r.per_path) diff.push_back(row[j] - row[j + 1]);
        const Statistic st = summarize(diff);
        r.rows[j + 1].bound = r.rows[j].mean;
        r.verdict = combine(r.verdict, judge(st.mean, st.std_error, spec.confidence_multiplier));
        if (st.mean < r.margin) {
            r.margin = st.mean;
            r.margin_std_error = st.std_error;
        }
    }
    r.rows[0].bound = r.rows[0].mean;
    std::ostringstream m;
    m.precision(6);
    m << "smallest decrease " << r.margin << " (std error " << r.margin_std_error << ")";
    r.summary = m.str();
    return r;
}

// ---------------------------------------------------------------------------
// Report output.

inline void write_report_text(std::ostream& os, const RunReport& r) {
    std::ostringstream b;
    b.precision(10);
    b << "experiment: " << r.experiment << '\n';
    for (const auto& [k, v] : r.metadata) b << "  " << k << " = " << v << '\n';
    b << "verdict: " << to_string(r.verdict) << '\n';
    if (!r.summary.empty()) b << "  " << r.summary << '\n';
    for (const auto& [k, v] : r.fitted) b << "  fitted " << k << " = " << v << '\n';
    b << "curve x mean std_error bound\n";
    for (const auto& row : r.rows)
        b << row.curve << ' ' << row.x << ' ' << row.mean << ' ' << row.std_error << ' ' << row.bound << '\n';
    os << b.str();
}

/// Header comment lines, then `curve,x,mean,std_error,bound`.
inline void write_report_csv(std::ostream& os, const RunReport& r) {
    std::ostringstream b;
    b.precision(17);
    for (const auto& [k, v] : r.metadata) b << "# " << k << " = " << v << '\n';
    b << "# verdict = " << to_string(r.verdict) << '\n';
    b << "curve,x,mean,std_error,bound\n";
    for (const auto& row : r.rows)
        b << row.curve << ',' << row.x << ',' << row.mean << ',' << row.std_error << ',' << row.bound << '\n';
    os << b.str();
}

inline void write_per_path_csv(std::ostream& os, const RunReport& r) {
    std::ostringstream b;
    b.precision(17);
    for (const auto& [k, v] : r.metadata) b << "# " << k << " = " << v << '\n';
    b << "path,seed";
    for (const auto& c : r.per_path_columns) b << ',' << c;
    b << '\n';
    for (std::size_t i = 0; i < r.per_path.size(); ++i) {
        b << i << ',' << r.seeds[i];
        for (double v : r.per_path[i]) b << ',' << v;
        b << '\n';
    }
    os << b.str();
}

}  // namespace kspde

#endif  // KSPDE_VERIFY_HPP
