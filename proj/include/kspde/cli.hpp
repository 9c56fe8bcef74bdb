#ifndef KSPDE_CLI_HPP
#define KSPDE_CLI_HPP

// Experiment orchestration: builds model objects from a config, runs the command, writes artifacts.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kspde/coeffs.hpp"
#include "kspde/config.hpp"
#include "kspde/errors.hpp"
#include "kspde/kinetic.hpp"
#include "kspde/noise.hpp"
#include "kspde/solver.hpp"
#include "kspde/torus.hpp"
#include "kspde/verify.hpp"

namespace kspde {

namespace fs = std::filesystem;

inline TorusGrid make_grid(const ExperimentConfig& c) { return TorusGrid(c.dim, c.n); }

inline Coefficients make_coefficients(const ExperimentConfig& c, const TorusGrid& g) {
    Coefficients k;
    if (c.flux == "zero") k.flux = zero_flux(c.dim);
    else if (c.flux == "burgers") k.flux = burgers_flux(c.dim, c.flux_scale);
    else k.flux = linear_flux(c.dim, c.flux_scale);
    if (c.diffusion == "heat") k.diffusion = heat_diffusion(g, c.diffusion_scale);
    else if (c.diffusion == "hyperbolic") k.diffusion = hyperbolic_diffusion(g);
    else if (c.diffusion == "degenerate") k.diffusion = degenerate_diffusion(g, c.diffusion_scale);
    else k.diffusion = anisotropic_diffusion(g, c.diffusion_scale);
    return k;
}

inline NoiseModel make_noise_model(const ExperimentConfig& c) {
    NoiseModel m;
    if (c.noise == "zero") m = zero_noise(c.dim, c.noise_modes);
    else if (c.noise == "additive") m = additive_noise(c.dim, c.noise_modes, c.noise_scale);
    else if (c.noise == "linear") m = linear_noise(c.dim, c.noise_modes, c.noise_scale);
    else m = bounded_noise(c.dim, c.noise_modes, c.noise_scale);
    m.alpha = c.alpha;
    return m;
}

inline ScalarField make_initial(const std::string& name, double amplitude, const TorusGrid& g) {
    return ScalarField::from_function(g, [&](const std::array<double, 2>& x) {
        const double w = 2.0 * std::numbers::pi * x[0];
        if (name == "sin") return amplitude * std::sin(w);
        if (name == "cos") return amplitude * std::cos(w);
        if (name == "constant") return amplitude;
        if (name == "step") return x[0] < 0.5 ? amplitude : 0.0;
        return 0.0;
    });
}

inline SolverConfig make_solver_config(const ExperimentConfig& c, double eps) {
    SolverConfig s;
    s.epsilon = eps;
    s.dt = c.dt;
    s.t_end = c.t_end;
    s.scheme = c.scheme == "explicit" ? TimeScheme::explicit_euler : TimeScheme::semi_implicit;
    s.flux_scheme = c.flux_scheme == "upwind" ? FluxScheme::upwind : FluxScheme::central;
    s.save_every = c.save_every;
    s.cfl_safety = c.cfl_safety;
    return s;
}

inline Setup make_setup(const ExperimentConfig& c, const TorusGrid& g) {
    Setup s;
    s.label = c.flux + "/" + c.diffusion + "/" + c.noise;
    s.coeffs = make_coefficients(c, g);
    s.noise = make_noise_model(c);
    s.config = make_solver_config(c, c.epsilon);
    return s;
}

inline EnsembleSpec make_ensemble(const ExperimentConfig& c) {
    EnsembleSpec e;
    e.path_count = c.paths;
    e.root_seed = c.seed;
    e.confidence_multiplier = c.confidence;
    e.workers = c.workers;
    e.relative_slope_tolerance = c.slope_tolerance;
    if (c.experiment == "energy") e.experiment = Experiment::energy;
    else if (c.experiment == "regularity") e.experiment = Experiment::regularity;
    else if (c.experiment == "cauchy") e.experiment = Experiment::cauchy;
    else if (c.experiment == "continuity") e.experiment = Experiment::continuity;
    return e;
}

/// Writes artifact files into one directory, each with the config hash and root seed.
class ArtifactWriter {
public:
    ArtifactWriter(const ExperimentConfig& c, fs::path dir)
        : dir_(std::move(dir)), hash_(hash_hex(config_hash(c))), seed_(c.seed) {
        fs::create_directories(dir_);
    }

    const fs::path& dir() const noexcept { return dir_; }
    const std::string& hash() const noexcept { return hash_; }

    std::string header(char comment = '#') const {
        return std::string(1, comment) + " config_hash = " + hash_ + "\n" + std::string(1, comment) +
               " root_seed = " + std::to_string(seed_) + "\n";
    }

    void write(const std::string& name, const std::string& body, bool with_header = true) const {
        std::ofstream f(dir_ / name, std::ios::binary);
        if (!f) throw Error("cannot open " + (dir_ / name).string() + " for writing");
        if (with_header) f << header();
        f << body;
        if (!f) throw Error("write to " + (dir_ / name).string() + " failed");
    }

    /// Columnar `t value` pairs for one curve.
    void write_curve(const std::string& name, const std::vector<double>& t, const std::vector<double>& v) const {
        std::ostringstream b;
        b.precision(17);
        b << "# t value\n";
        for (std::size_t i = 0; i < t.size(); ++i) b << t[i] << ' ' << v[i] << '\n';
        write(name, b.str());
    }

private:
    fs::path dir_;
    std::string hash_;
    std::uint64_t seed_;
};

namespace detail {

inline std::string diagnostics_csv(const Trajectory& traj) {
    std::ostringstream b;
    b.precision(17);
    b << "step,time,max_abs_u,l2,mean\n";
    for (const auto& d : traj.diagnostics)
        b << d.step << ',' << d.time << ',' << d.max_abs_u << ',' << d.l2 << ',' << d.mean << '\n';
    return b.str();
}

inline void write_trajectory(const ArtifactWriter& w, const Trajectory& traj, const std::string& prefix) {
    fs::create_directories(w.dir() / (prefix + "snapshots"));
    std::ostringstream index;
    index.precision(17);
    index << "# path_seed = " << traj.path_seed << "\n# file time\n";
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
        std::ostringstream name;
        name << prefix << "snapshots/snap_" << std::setw(6) << std::setfill('0') << k << ".txt";
        std::ostringstream body;
        write_field(body, traj.snapshots[k].field, traj.snapshots[k].time);
        w.write(name.str(), body.str(), false);
        index << name.str() << ' ' << traj.snapshots[k].time << '\n';
    }
    w.write(prefix + "index.txt", index.str());
    w.write(prefix + "diagnostics.csv", diagnostics_csv(traj));
    std::vector<double> t, l2, mx;
    for (const auto& d : traj.diagnostics) {
        t.push_back(d.time);
        l2.push_back(d.l2);
        mx.push_back(d.max_abs_u);
    }
    w.write_curve(prefix + "l2.dat", t, l2);
    w.write_curve(prefix + "max_abs_u.dat", t, mx);
}

inline WienerPath single_path(const ExperimentConfig& c, const NoiseModel& noise, const SolverConfig& s) {
    const std::uint64_t seed = path_seed(c.seed, 0);
    if (noise.is_zero()) return sample_path(seed, 1, s.dt, 1);
    return sample_path(seed, s.steps(), s.dt, std::max(1, noise.k_max()));
}

inline std::string sanitize(const std::string& s) {
    std::string out;
    for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_') ? ch : '_';
    return out;
}

inline nlohmann::ordered_json report_json(const RunReport& r, const std::string& hash) {
    nlohmann::ordered_json j;
    j["experiment"] = r.experiment;
    j["config_hash"] = hash;
    auto& meta = j["metadata"];
    meta = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.metadata) meta[k] = v;
    j["verdict"] = to_string(r.verdict);
    j["summary"] = r.summary;
    j["margin"] = r.margin;
    j["margin_std_error"] = r.margin_std_error;
    auto& fit = j["fitted"];
    fit = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.fitted) fit[k] = v;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : r.rows)
        j["rows"].push_back({{"curve", row.curve}, {"x", row.x}, {"mean", row.mean},
                             {"std_error", row.std_error}, {"bound", row.bound}});
    j["seeds"] = r.seeds;
    return j;
}

}  // namespace detail

inline void write_report(const ArtifactWriter& w, const RunReport& r) {
    std::ostringstream txt, csv, per;
    write_report_text(txt, r);
    write_report_csv(csv, r);
    write_per_path_csv(per, r);
    w.write(r.experiment + "_report.txt", txt.str());
    w.write(r.experiment + "_report.csv", csv.str());
    w.write(r.experiment + "_per_path.csv", per.str());
    w.write(r.experiment + "_report.json", detail::report_json(r, w.hash()).dump(2) + "\n", false);
    std::vector<std::string> curves;
    for (const auto& row : r.rows)
        if (std::find(curves.begin(), curves.end(), row.curve) == curves.end()) curves.push_back(row.curve);
    for (const auto& c : curves) {
        std::vector<double> x, m;
        for (const auto& row : r.curve(c)) {
            x.push_back(row.x);
            m.push_back(row.mean);
        }
        w.write_curve(r.experiment + "_" + detail::sanitize(c) + ".dat", x, m);
    }
}

struct ExecutionResult {
    int status = 0;  // 0 pass/complete, 1 fail verdict, 2 error
    std::string message;
};

inline ExecutionResult run_command(const ExperimentConfig& c, const ArtifactWriter& w) {
    const TorusGrid g = make_grid(c);
    const Setup setup = make_setup(c, g);
    const ScalarField u0 = make_initial(c.initial, c.initial_amplitude, g);
    std::ostringstream msg;
    msg.precision(10);

    if (c.command == "solve") {
        const auto path = detail::single_path(c, setup.noise, setup.config);
        const auto traj = run(u0, setup.coeffs, setup.noise, path, setup.config);
        detail::write_trajectory(w, traj, "");
        msg << "solve: " << traj.snapshots.size() << " snapshots, final L2 = " << lp_norm(traj.snapshots.back().field, 2);
        return {0, msg.str()};
    }
    if (c.command == "sweep") {
        if (c.epsilons.size() < 2) throw ConfigurationError("sweep needs at least two epsilons");
        const auto path = detail::single_path(c, setup.noise, setup.config);
        const auto rep = viscosity_sweep(u0, setup.coeffs, setup.noise, path, c.epsilons, setup.config);
        std::ostringstream b;
        b.precision(17);
        b << "eps_a,eps_b,distance\n";
        std::vector<double> x;
        for (std::size_t i = 0; i < rep.distances.size(); ++i) {
            b << rep.epsilons[i] << ',' << rep.epsilons[i + 1] << ',' << rep.distances[i] << '\n';
            x.push_back(rep.epsilons[i + 1]);
        }
        w.write("sweep.csv", b.str());
        w.write_curve("sweep.dat", x, rep.distances);
        msg << "sweep: " << rep.distances.size() << " distances, monotone = " << (rep.monotone ? "yes" : "no");
        return {0, msg.str()};
    }
    if (c.command == "compare") {
        const ScalarField u0b = make_initial(c.initial_b, c.initial_b_amplitude, g);
        const auto path = detail::single_path(c, setup.noise, setup.config);
        const auto rep = comparison_run(u0, u0b, setup.coeffs, setup.noise, path, setup.config);
        std::ostringstream b;
        b.precision(17);
        b << "time,distance\n";
        for (std::size_t i = 0; i < rep.times.size(); ++i) b << rep.times[i] << ',' << rep.distances[i] << '\n';
        w.write("compare.csv", b.str());
        w.write_curve("compare.dat", rep.times, rep.distances);
        msg << "compare: final distance " << rep.distances.back() << " (initial " << rep.distances.front() << ")";
        return {0, msg.str()};
    }
    if (c.command == "measure") {
        const auto path = detail::single_path(c, setup.noise, setup.config);
        const auto traj = run(u0, setup.coeffs, setup.noise, path, setup.config);
        detail::write_trajectory(w, traj, "");
        const XiGrid xi = c.xi_auto ? auto_xi_grid(traj, c.xi_bins) : XiGrid(c.xi_min, c.xi_max, c.xi_bins);
        const auto m = accumulate_measures(traj, setup.coeffs, setup.config.epsilon, xi);
        std::ostringstream n1, n2, res;
        write_measure(n1, m.n1);
        write_measure(n2, m.n2);
        w.write("measure_n1.txt", n1.str());
        w.write("measure_n2.txt", n2.str());
        const auto battery = default_battery(xi.xi_min, xi.xi_max);
        const auto rep = kinetic_residual(traj, setup.coeffs, setup.noise, path, m, battery);
        write_residual_csv(res, rep);
        w.write("residual.csv", res.str());
        std::ostringstream s;
        s.precision(17);
        double lo = traj.snapshots[0].field.min(), hi = traj.snapshots[0].field.max();
        for (const auto& sn : traj.snapshots) {
            lo = std::min(lo, sn.field.min());
            hi = std::max(hi, sn.field.max());
        }
        const double r = std::max(std::fabs(lo), std::fabs(hi)) + xi.width();
        s << "quantity,value\n";
        s << "n1_total," << m.n1.total_mass() << '\n';
        s << "n2_total," << m.n2.total_mass() << '\n';
        s << "tail_radius," << r << '\n';
        s << "n1_tail," << tail_mass(m.n1, r) << '\n';
        s << "n2_tail," << tail_mass(m.n2, r) << '\n';
        s << "residual_max," << rep.max_abs << '\n';
        s << "residual_rms," << rep.l2 << '\n';
        w.write("measure_summary.csv", s.str());
        msg << "measure: n1 = " << m.n1.total_mass() << ", n2 = " << m.n2.total_mass()
            << ", residual max = " << rep.max_abs;
        return {0, msg.str()};
    }
    // verify
    const EnsembleSpec spec = make_ensemble(c);
    RunReport rep;
    if (c.experiment == "contraction") {
        Setup s = setup;
        s.scheme_constant =
            c.scheme_constant < 0.0 ? calibrate_scheme_constant(g, s.config) : c.scheme_constant;
        rep = contraction_test(u0, make_initial(c.initial_b, c.initial_b_amplitude, g), s, spec);
    } else if (c.experiment == "energy") {
        rep = energy_test(u0, setup, c.p, c.epsilons, spec);
    } else if (c.experiment == "regularity") {
        rep = regularity_test(u0, setup, c.epsilons, spec);
    } else if (c.experiment == "continuity") {
        rep = continuity_test(u0, setup, c.lambda, c.epsilons, spec);
    } else {
        rep = cauchy_test(u0, setup, c.epsilons, spec, c.mollify);
    }
    write_report(w, rep);
    msg << "verify " << rep.experiment << ": " << to_string(rep.verdict) << " (" << rep.summary << ")";
    return {rep.verdict == Verdict::fail ? 1 : 0, msg.str()};
}

/// Runs a validated config into `out`; errors leave an INCOMPLETE marker and return status 2.
inline ExecutionResult execute(const ExperimentConfig& c) {
    const fs::path out(c.out);
    try {
        validate(c);
        ArtifactWriter w(c, out);
        fs::remove(out / "INCOMPLETE");
        w.write("config.txt", emit(c));
        auto result = run_command(c, w);
        return result;
    } catch (const std::exception& e) {
        std::error_code ec;
        fs::create_directories(out, ec);
        std::ofstream marker(out / "INCOMPLETE");
        marker << c.command << ": " << e.what() << '\n';
        return {2, c.command + ": " + e.what()};
    }
}

}  // namespace kspde

#endif  // KSPDE_CLI_HPP
