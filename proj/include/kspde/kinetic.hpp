#ifndef KSPDE_KINETIC_HPP
#define KSPDE_KINETIC_HPP

// Kinetic layer: f = 1_{u>ξ} on a ξ-grid, the dissipation measures
//   n1 = (∇u)ᵀ A (∇u) δ_{u=ξ},  n2 = ε |∇u|² δ_{u=ξ},
// and the weak-form defect of the kinetic identity along a trajectory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kspde/coeffs.hpp"
#include "kspde/errors.hpp"
#include "kspde/noise.hpp"
#include "kspde/solver.hpp"
#include "kspde/torus.hpp"

namespace kspde {

/// Uniform bins on [xi_min, xi_max] with centres ξ_j.
struct XiGrid {
    double xi_min = -1.0;
    double xi_max = 1.0;
    int bins = 128;

    XiGrid() = default;
    XiGrid(double lo, double hi, int m) : xi_min(lo), xi_max(hi), bins(m) {
        if (m < 8) throw InvalidParameter("ξ-grid needs at least 8 bins");
        if (!(hi > lo)) throw InvalidParameter("ξ-grid needs xi_max > xi_min");
    }

    double width() const noexcept { return (xi_max - xi_min) / bins; }
    double center(int j) const noexcept { return xi_min + (j + 0.5) * width(); }

    /// Nearest-bin index of a value; throws when the value is outside the grid.
    int bin_of(double v) const {
        if (!(v >= xi_min && v <= xi_max))
            throw RangeError("value " + std::to_string(v) + " outside ξ-grid [" + std::to_string(xi_min) + ", " +
                             std::to_string(xi_max) + "]; rebuild the grid from the trajectory");
        return std::min(static_cast<int>((v - xi_min) / width()), bins - 1);
    }

    /// Number of centres strictly below v, i.e. Σ_j 1_{v > ξ_j}.
    int count_below(double v) const noexcept {
        const double pos = (v - xi_min) / width() - 0.5;
        if (pos <= 0.0) return 0;
        return std::min(static_cast<int>(std::ceil(pos)), bins);
    }
};

/// [min u - 5Δξ, max u + 5Δξ] over all snapshots with m bins.
inline XiGrid auto_xi_grid(const Trajectory& traj, int bins = 128) {
    double lo = traj.snapshots.front().field.min(), hi = traj.snapshots.front().field.max();
    for (const auto& s : traj.snapshots) {
        lo = std::min(lo, s.field.min());
        hi = std::max(hi, s.field.max());
    }
    double range = hi - lo;
    if (range <= 0.0) range = 1.0;
    const double d = range / (bins - 10);
    return XiGrid(lo - 5.0 * d, lo - 5.0 * d + bins * d, bins);
}

/// f(i, j) = 1 iff u_i > ξ_j, row-major [cells × bins].
inline std::vector<std::uint8_t> kinetic_function(const ScalarField& u, const XiGrid& xi) {
    std::vector<std::uint8_t> f(u.size() * static_cast<std::size_t>(xi.bins), 0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const int c = xi.count_below(u[i]);
        std::fill_n(f.begin() + static_cast<std::ptrdiff_t>(i * xi.bins), c, std::uint8_t{1});
    }
    return f;
}

enum class MeasureKind { n1, n2, total };

/// Nearest-bin deposit of a kinetic measure: each (cell, slab) sample lands in one ξ-bin.
struct KineticMeasureEstimate {
    struct Deposit {
        std::uint32_t cell;
        std::uint32_t slab;
        std::uint32_t bin;
        double mass;
    };

    TorusGrid grid;
    XiGrid xi;
    std::vector<double> times;  // snapshot times; slab k spans [times[k], times[k+1])
    std::vector<Deposit> deposits;
    MeasureKind kind = MeasureKind::n1;

    std::size_t slabs() const noexcept { return times.empty() ? 0 : times.size() - 1; }

    double total_mass() const noexcept {
        double s = 0.0;
        for (const auto& d : deposits) s += d.mass;
        return s;
    }

    /// Density at (cell, slab, bin): mass / (Δx^N Δt Δξ).
    double density(std::size_t cell, std::size_t slab, int bin) const {
        double m = 0.0;
        for (const auto& d : deposits)
            if (d.cell == cell && d.slab == slab && static_cast<int>(d.bin) == bin) m += d.mass;
        return m / (grid.cell_measure() * (times[slab + 1] - times[slab]) * xi.width());
    }
};

/// Mass deposited in bins with |ξ_j| ≥ R.
inline double tail_mass(const KineticMeasureEstimate& m, double radius) {
    if (!(radius >= 0.0)) throw InvalidParameter("tail radius must be nonnegative");
    double s = 0.0;
    for (const auto& d : m.deposits)
        if (std::fabs(m.xi.center(static_cast<int>(d.bin))) >= radius) s += d.mass;
    return s;
}

struct MeasurePair {
    KineticMeasureEstimate n1;
    KineticMeasureEstimate n2;

    KineticMeasureEstimate total() const {
        KineticMeasureEstimate t = n1;
        t.kind = MeasureKind::total;
        for (std::size_t i = 0; i < t.deposits.size(); ++i) t.deposits[i].mass += n2.deposits[i].mass;
        return t;
    }
};

/// (∇u)ᵀ A (∇u) per cell with central differences and the raw (unperturbed) A.
inline ScalarField dirichlet_density(const ScalarField& u, const DiffusionSpec& a) {
    const auto grad = gradient(u);
    const auto& g = u.grid();
    ScalarField out(g);
    for (std::size_t x = 0; x < g.cells(); ++x) {
        const Matrix& m = a.matrix(x);
        double s = 0.0;
        for (int i = 0; i < g.dim(); ++i)
            for (int j = 0; j < g.dim(); ++j) s += grad[i][x] * m(i, j) * grad[j][x];
        out[x] = s;
    }
    return out;
}

inline ScalarField gradient_squared(const ScalarField& u) {
    const auto grad = gradient(u);
    ScalarField out(u.grid());
    for (const auto& c : grad)
        for (std::size_t x = 0; x < out.size(); ++x) out[x] += c[x] * c[x];
    return out;
}

/// Left-point slab deposits of n1 and n2 from the trajectory's snapshots.
inline MeasurePair accumulate_measures(const Trajectory& traj, const Coefficients& coeffs, double eps,
                                       const XiGrid& xi) {
    if (std::fabs(eps - traj.config.epsilon) > 1e-15)
        throw ConfigurationError("measure ε = " + std::to_string(eps) + " differs from trajectory ε = " +
                                 std::to_string(traj.config.epsilon));
    const auto& g = traj.grid();
    MeasurePair out;
    for (auto* m : {&out.n1, &out.n2}) {
        m->grid = g;
        m->xi = xi;
        m->times = traj.times();
    }
    out.n1.kind = MeasureKind::n1;
    out.n2.kind = MeasureKind::n2;
    const double cell = g.cell_measure();
    for (std::size_t k = 0; k + 1 < traj.snapshots.size(); ++k) {
        const auto& u = traj.snapshots[k].field;
        const double dt = traj.snapshots[k + 1].time - traj.snapshots[k].time;
        const auto e1 = dirichlet_density(u, coeffs.diffusion);
        const auto e2 = gradient_squared(u);
        for (std::size_t x = 0; x < g.cells(); ++x) {
            const auto bin = static_cast<std::uint32_t>(xi.bin_of(u[x]));
            out.n1.deposits.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(k), bin,
                                       e1[x] * cell * dt});
            out.n2.deposits.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(k), bin,
                                       eps * e2[x] * cell * dt});
        }
    }
    return out;
}

/// Sparse dump: header lines, then `x_index time_slab xi_index mass` for nonzero deposits.
inline void write_measure(std::ostream& os, const KineticMeasureEstimate& m) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "# grid " << m.grid.dim() << ' ' << m.grid.points_per_axis() << '\n';
    buf << "# xi " << m.xi.xi_min << ' ' << m.xi.xi_max << ' ' << m.xi.bins << '\n';
    buf << "# slabs " << m.slabs() << '\n';
    buf << "# kind " << (m.kind == MeasureKind::n1 ? "n1" : m.kind == MeasureKind::n2 ? "n2" : "total") << '\n';
    for (const auto& d : m.deposits)
        if (d.mass != 0.0) buf << d.cell << ' ' << d.slab << ' ' << d.bin << ' ' << d.mass << '\n';
    os << buf.str();
}

// ---------------------------------------------------------------------------
// Test functions φ(x, ξ) = s(x) θ(ξ) with s trigonometric and θ a smooth bump.

struct XiBump {
    double center = 0.0;
    double radius = 1.0;

    double operator()(double xi) const noexcept { return bump_profile(std::fabs(xi - center) / radius); }
    double derivative(double xi) const noexcept {
        const double r = (xi - center) / radius;
        if (std::fabs(r) >= 1.0) return 0.0;
        const double d = 1.0 - r * r;
        return std::exp(-1.0 / d) * (-2.0 * r / (d * d)) / radius;
    }
};

struct TestFunction {
    std::string id;
    SpatialMode space;
    XiBump bump;

    double value(const std::array<double, 2>& x, double xi) const { return space(x) * bump(xi); }

    /// ∇s(x).
    std::array<double, 2> space_gradient(const std::array<double, 2>& x) const {
        if (space.kind == SpatialMode::Kind::constant) return {0.0, 0.0};
        const double w = 2.0 * std::numbers::pi;
        const double phase = w * (space.wave[0] * x[0] + space.wave[1] * x[1]);
        const double d = space.kind == SpatialMode::Kind::cosine ? -std::sin(phase) : std::cos(phase);
        return {space.scale * w * space.wave[0] * d, space.scale * w * space.wave[1] * d};
    }

    /// Δs(x).
    double space_laplacian(const std::array<double, 2>& x) const {
        const double w = 2.0 * std::numbers::pi;
        const double k2 = w * w * (space.wave[0] * space.wave[0] + space.wave[1] * space.wave[1]);
        return -k2 * space(x);
    }
};

/// Tensor products of {1, cos 2πx₁, sin 2πx₁, cos 4πx₁} with a centred and an offset bump
/// whose supports cover [lo, hi].
inline std::vector<TestFunction> default_battery(double lo, double hi) {
    using K = SpatialMode::Kind;
    const std::vector<std::pair<std::string, SpatialMode>> spaces = {
        {"one", {K::constant, {0, 0}, 1.0}},
        {"cos1", {K::cosine, {1, 0}, 1.0}},
        {"sin1", {K::sine, {1, 0}, 1.0}},
        {"cos2", {K::cosine, {2, 0}, 1.0}},
    };
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    const std::vector<std::pair<std::string, XiBump>> bumps = {
        {"centered", {mid, 1.25 * half}},
        {"offset", {mid + 0.5 * half, 1.25 * half}},
    };
    std::vector<TestFunction> battery;
    for (const auto& [sid, s] : spaces)
        for (const auto& [bid, b] : bumps) battery.push_back({sid + "_" + bid, s, b});
    return battery;
}

struct ResidualEntry {
    std::string phi_id;
    double time = 0.0;
    double residual = 0.0;
};

struct ResidualReport {
    std::vector<ResidualEntry> entries;
    double max_abs = 0.0;
    double l2 = 0.0;  // root mean square over entries
};

inline void write_residual_csv(std::ostream& os, const ResidualReport& r) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "phi_id,time,residual\n";
    for (const auto& e : r.entries) buf << e.phi_id << ',' << e.time << ',' << e.residual << '\n';
    os << buf.str();
}

/// Defect of the discrete kinetic identity
///   ⟨f(t),φ⟩ - ⟨f₀,φ⟩ - ∫⟨f, b^ε·∇φ⟩ - ∫⟨f, Σ∂_j(A_ij∂_iφ)⟩ - ε∫⟨f,Δφ⟩
///     - ∫⟨δ_{u=ξ}Φ^ε dW, φ⟩ - ½∫⟨δ_{u=ξ}G²_ε, ∂_ξφ⟩ + ⟨m^ε, ∂_ξφ⟩([0,t))
/// at every snapshot time. Time integrals are left-point sums over snapshot slabs; the Itô sum
/// uses the path increments accumulated over each slab.
inline ResidualReport kinetic_residual(const Trajectory& traj, const Coefficients& coeffs, const NoiseModel& noise,
                                       const WienerPath& path, const MeasurePair& measures,
                                       const std::vector<TestFunction>& battery) {
    if (battery.empty()) throw ConfigurationError("kinetic residual needs a nonempty test battery");
    const auto& g = traj.grid();
    const auto& cfg = traj.config;
    const double eps = cfg.epsilon;
    const XiGrid& xi = measures.n1.xi;
    const double cell = g.cell_measure();
    const double dxi = xi.width();
    const int m = xi.bins;
    const std::size_t cells = g.cells();
    const std::size_t snaps = traj.snapshots.size();

    const Problem problem(g, coeffs, noise, cfg, expected_range(traj.snapshots.front().field));
    const auto& flux = problem.flux();
    const auto& nop = problem.noise();
    const bool noisy = !problem.noise_model().is_zero() && nop.active_modes() > 0;
    if (noisy) problem.check_path(path, cfg.steps());

    // Step index of every snapshot, for slab-wise Wiener increments.
    std::vector<long> snap_step(snaps);
    for (std::size_t k = 0; k < snaps; ++k) snap_step[k] = std::lround(traj.snapshots[k].time / cfg.dt);

    // Bin data per snapshot: count of centres below u and nearest bin of u.
    std::vector<std::vector<int>> below(snaps, std::vector<int>(cells));
    std::vector<std::vector<int>> bin(snaps, std::vector<int>(cells));
    for (std::size_t k = 0; k < snaps; ++k)
        for (std::size_t x = 0; x < cells; ++x) {
            const double v = traj.snapshots[k].field[x];
            below[k][x] = xi.count_below(v);
            bin[k][x] = xi.bin_of(v);
        }

    // Measure mass per (slab, cell) from the supplied estimate (n1 + n2), deposit bins alongside.
    std::vector<double> mmass((snaps > 0 ? snaps - 1 : 0) * cells, 0.0);
    std::vector<std::uint32_t> mbin(mmass.size(), 0);
    for (const auto* est : {&measures.n1, &measures.n2})
        for (const auto& d : est->deposits) {
            const std::size_t idx = static_cast<std::size_t>(d.slab) * cells + d.cell;
            mmass[idx] += d.mass;
            mbin[idx] = d.bin;
        }

    ResidualReport rep;
    double sq = 0.0;
    for (const auto& phi : battery) {
        // Prefix sums over bins: P[c] = Σ_{j<c} θ(ξ_j)Δξ and Σ_{j<c} θ(ξ_j) b_a(ξ_j)Δξ.
        std::vector<double> ptheta(m + 1, 0.0);
        std::vector<std::vector<double>> pflux(g.dim(), std::vector<double>(m + 1, 0.0));
        std::vector<double> theta(m), dtheta(m);
        for (int j = 0; j < m; ++j) {
            const double c = xi.center(j);
            theta[j] = phi.bump(c);
            dtheta[j] = phi.bump.derivative(c);
            ptheta[j + 1] = ptheta[j] + theta[j] * dxi;
            if (!flux.is_zero())
                for (int a = 0; a < g.dim(); ++a)
                    pflux[a][j + 1] = pflux[a][j] + theta[j] * flux.derivatives[a](c) * dxi;
        }
        // Spatial factors on the grid.
        ScalarField s(g), lap(g);
        VectorField grad_s(g.dim(), ScalarField(g));
        for (std::size_t x = 0; x < cells; ++x) {
            const auto p = g.point(x);
            s[x] = phi.space(p);
            lap[x] = phi.space_laplacian(p);
            const auto gs = phi.space_gradient(p);
            for (int a = 0; a < g.dim(); ++a) grad_s[a][x] = gs[a];
        }
        // Σ_ij ∂_j(A_ij ∂_i s) with raw A, central differences of A∇s.
        VectorField agrad(g.dim(), ScalarField(g));
        for (std::size_t x = 0; x < cells; ++x) {
            const Matrix& a = coeffs.diffusion.matrix(x);
            for (int j = 0; j < g.dim(); ++j) {
                double v = 0.0;
                for (int i = 0; i < g.dim(); ++i) v += a(i, j) * grad_s[i][x];
                agrad[j][x] = v;
            }
        }
        const ScalarField div_agrad = divergence(agrad);

        auto pair_f = [&](std::size_t k) {
            double acc = 0.0;
            for (std::size_t x = 0; x < cells; ++x) acc += s[x] * ptheta[below[k][x]];
            return acc * cell;
        };

        const double f0 = pair_f(0);
        double integral = 0.0;  // running sum of all time-integrated terms (flux + A + ε + noise + Itô - m)
        for (std::size_t k = 0; k < snaps; ++k) {
            if (k > 0) {
                const std::size_t sl = k - 1;  // slab [t_{k-1}, t_k) with left-point state
                const double dt = traj.snapshots[k].time - traj.snapshots[sl].time;
                const auto& u = traj.snapshots[sl].field;
                double flux_t = 0.0, a_t = 0.0, eps_t = 0.0, noise_t = 0.0, ito_t = 0.0, m_t = 0.0;
                for (std::size_t x = 0; x < cells; ++x) {
                    const int c = below[sl][x];
                    if (!flux.is_zero())
                        for (int a = 0; a < g.dim(); ++a) flux_t += grad_s[a][x] * pflux[a][c];
                    a_t += div_agrad[x] * ptheta[c];
                    eps_t += lap[x] * ptheta[c];
                    const std::size_t idx = sl * cells + x;
                    m_t += mmass[idx] * s[x] * dtheta[mbin[idx]];
                }
                flux_t *= cell * dt;
                a_t *= cell * dt;
                eps_t *= eps * cell * dt;
                if (noisy) {
                    // Slab-summed increments, then Σ_x Σ_k g_k(x,u) φ(x, ξ_bin) ΔW_k.
                    std::vector<double> dw(nop.active_modes(), 0.0);
                    for (long st = snap_step[sl]; st < snap_step[k]; ++st) {
                        const auto inc = problem.increments(path, st);
                        for (int q = 0; q < nop.active_modes(); ++q) dw[q] += inc[q];
                    }
                    const ScalarField gdw = nop.apply(u, dw);
                    const ScalarField g2 = nop.g_squared(u);
                    for (std::size_t x = 0; x < cells; ++x) {
                        const int b = bin[sl][x];
                        noise_t += gdw[x] * s[x] * theta[b];
                        ito_t += g2[x] * s[x] * dtheta[b];
                    }
                    noise_t *= cell;
                    ito_t *= 0.5 * cell * dt;
                }
                integral += flux_t + a_t + eps_t + noise_t + ito_t - m_t;
            }
            const double r = pair_f(k) - f0 - integral;
            rep.entries.push_back({phi.id, traj.snapshots[k].time, r});
            rep.max_abs = std::max(rep.max_abs, std::fabs(r));
            sq += r * r;
        }
    }
    rep.l2 = std::sqrt(sq / static_cast<double>(rep.entries.size()));
    return rep;
}

}  // namespace kspde

#endif  // KSPDE_KINETIC_HPP
