#ifndef KSPDE_CONFIG_HPP
#define KSPDE_CONFIG_HPP

// Flat `key = value` experiment configuration.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kspde/errors.hpp"

namespace kspde {

struct ExperimentConfig {
    std::string command = "solve";       // solve | sweep | compare | measure | verify
    std::string experiment = "contraction";  // verify only

    int dim = 1;
    int n = 128;

    std::string flux = "zero";  // zero | burgers | linear
    double flux_scale = 1.0;
    std::string diffusion = "heat";  // heat | hyperbolic | degenerate | anisotropic
    double diffusion_scale = 1.0;
    std::string noise = "zero";  // zero | additive | linear | bounded
    int noise_modes = 64;
    double noise_scale = 1.0;
    double alpha = 1.0;

    std::string initial = "sin";  // sin | cos | zero | constant | step
    double initial_amplitude = 1.0;
    std::string initial_b = "zero";
    double initial_b_amplitude = 1.0;

    double epsilon = 0.0;
    std::vector<double> epsilons = {0.1, 0.05, 0.025};
    double dt = 1e-4;
    double t_end = 0.1;
    std::string scheme = "explicit";  // explicit | semi_implicit
    std::string flux_scheme = "upwind";  // upwind | central
    double cfl_safety = 0.9;
    int save_every = 1;

    int paths = 2;
    std::uint64_t seed = 0;
    double confidence = 3.0;
    int workers = 1;
    double slope_tolerance = 0.1;
    int p = 2;
    double lambda = 0.45;
    bool mollify = true;
    double scheme_constant = -1.0;  // negative: calibrate on the heat case

    int xi_bins = 128;
    bool xi_auto = true;
    double xi_min = -2.0;
    double xi_max = 2.0;

    std::string out = "out";

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

[[noreturn]] inline void config_error(int line, const std::string& what) {
    throw ConfigurationError(line > 0 ? "line " + std::to_string(line) + ": " + what : what);
}

inline double parse_double(const std::string& key, const std::string& v, int line) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        config_error(line, "key '" + key + "' expects a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(d))
        config_error(line, "key '" + key + "' expects a number, got '" + v + "'");
    return d;
}

inline long long parse_integer(const std::string& key, const std::string& v, int line) {
    std::size_t used = 0;
    long long d = 0;
    try {
        d = std::stoll(v, &used);
    } catch (const std::exception&) {
        config_error(line, "key '" + key + "' expects an integer, got '" + v + "'");
    }
    if (used != v.size()) config_error(line, "key '" + key + "' expects an integer, got '" + v + "'");
    return d;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v, int line) {
    std::size_t used = 0;
    std::uint64_t d = 0;
    if (!v.empty() && v[0] == '-') config_error(line, "key '" + key + "' expects an unsigned integer, got '" + v + "'");
    try {
        d = std::stoull(v, &used);
    } catch (const std::exception&) {
        config_error(line, "key '" + key + "' expects an unsigned integer, got '" + v + "'");
    }
    if (used != v.size()) config_error(line, "key '" + key + "' expects an unsigned integer, got '" + v + "'");
    return d;
}

inline bool parse_bool(const std::string& key, const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    config_error(line, "key '" + key + "' expects true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v, int line) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item), line));
    if (out.empty()) config_error(line, "key '" + key + "' expects a comma-separated list of numbers");
    return out;
}

inline void one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed,
                   int line) {
    for (const char* a : allowed)
        if (v == a) return;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    config_error(line, "key '" + key + "' must be one of {" + list + "}, got '" + v + "'");
}

}  // namespace detail

/// Checks cross-field constraints; `lines` maps keys to source lines for messages.
inline void validate(const ExperimentConfig& c, const std::map<std::string, int>& lines = {}) {
    auto at = [&](const std::string& k) {
        const auto it = lines.find(k);
        return it == lines.end() ? 0 : it->second;
    };
    using detail::config_error;
    using detail::one_of;
    one_of("command", c.command, {"solve", "sweep", "compare", "measure", "verify"}, at("command"));
    one_of("experiment", c.experiment, {"contraction", "energy", "regularity", "cauchy", "continuity"},
           at("experiment"));
    if (c.dim != 1 && c.dim != 2) config_error(at("dim"), "dim must be 1 or 2");
    if (c.n < 4) config_error(at("n"), "n must be at least 4");
    one_of("flux", c.flux, {"zero", "burgers", "linear"}, at("flux"));
    one_of("diffusion", c.diffusion, {"heat", "hyperbolic", "degenerate", "anisotropic"}, at("diffusion"));
    if (!(c.diffusion_scale >= 0.0)) config_error(at("diffusion_scale"), "diffusion_scale must be >= 0");
    one_of("noise", c.noise, {"zero", "additive", "linear", "bounded"}, at("noise"));
    if (c.noise_modes < 1) config_error(at("noise_modes"), "noise_modes must be >= 1");
    if (!(c.alpha > 0.0)) config_error(at("alpha"), "alpha must be > 0");
    one_of("initial", c.initial, {"sin", "cos", "zero", "constant", "step"}, at("initial"));
    one_of("initial_b", c.initial_b, {"sin", "cos", "zero", "constant", "step"}, at("initial_b"));
    if (!(c.epsilon >= 0.0 && c.epsilon < 1.0))
        config_error(at("epsilon"), "epsilon = " + detail::format_double(c.epsilon) +
                                        " violates the viscosity requirement epsilon in (0,1) (0 disables regularisation)");
    for (double e : c.epsilons)
        if (!(e > 0.0 && e < 1.0))
            config_error(at("epsilons"), "epsilons entry " + detail::format_double(e) +
                                             " violates the viscosity requirement epsilon in (0,1)");
    if (!(c.dt > 0.0)) config_error(at("dt"), "dt must be > 0");
    if (!(c.t_end > 0.0)) config_error(at("t_end"), "t_end must be > 0");
    const double ratio = c.t_end / c.dt;
    if (std::fabs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
        config_error(at("t_end"), "t_end must be an integer multiple of dt");
    one_of("scheme", c.scheme, {"explicit", "semi_implicit"}, at("scheme"));
    one_of("flux_scheme", c.flux_scheme, {"upwind", "central"}, at("flux_scheme"));
    if (!(c.cfl_safety > 0.0 && c.cfl_safety <= 1.0)) config_error(at("cfl_safety"), "cfl_safety must lie in (0,1]");
    if (c.save_every < 1) config_error(at("save_every"), "save_every must be >= 1");
    if (c.paths < 1) config_error(at("paths"), "paths must be >= 1");
    if (!(c.confidence >= 0.0)) config_error(at("confidence"), "confidence must be >= 0");
    if (c.workers < 1) config_error(at("workers"), "workers must be >= 1");
    if (!(c.slope_tolerance >= 0.0)) config_error(at("slope_tolerance"), "slope_tolerance must be >= 0");
    if (c.p != 2 && c.p != 4 && c.p != 6) config_error(at("p"), "p must be 2, 4 or 6");
    if (!(c.lambda > 0.0 && c.lambda < 0.5)) config_error(at("lambda"), "lambda must lie in (0, 1/2)");
    if (c.xi_bins < 8) config_error(at("xi_bins"), "xi_bins must be >= 8");
    if (!c.xi_auto && !(c.xi_max > c.xi_min)) config_error(at("xi_range"), "xi_range needs lo < hi");
    if (c.out.empty()) config_error(at("out"), "out must not be empty");
}

/// Parses `key = value` lines (`#` starts a comment), applies defaults and validates.
inline ExperimentConfig parse_config(const std::string& text, const std::string& command = "") {
    ExperimentConfig c;
    if (!command.empty()) c.command = command;
    std::map<std::string, int> lines;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    using namespace detail;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) config_error(line, "expected 'key = value', got '" + body + "'");
        const std::string key = trim(body.substr(0, eq));
        const std::string v = trim(body.substr(eq + 1));
        if (v.empty()) config_error(line, "key '" + key + "' has no value");
        if (lines.count(key)) config_error(line, "duplicate key '" + key + "'");
        lines[key] = line;

        auto integer = [&](int& dst) { dst = static_cast<int>(parse_integer(key, v, line)); };
        auto real = [&](double& dst) { dst = parse_double(key, v, line); };
        if (key == "command") {
            if (command.empty()) c.command = v;
        } else if (key == "experiment") c.experiment = v;
        else if (key == "dim") integer(c.dim);
        else if (key == "n") integer(c.n);
        else if (key == "flux") c.flux = v;
        else if (key == "flux_scale") real(c.flux_scale);
        else if (key == "diffusion") c.diffusion = v;
        else if (key == "diffusion_scale") real(c.diffusion_scale);
        else if (key == "noise") c.noise = v;
        else if (key == "noise_modes") integer(c.noise_modes);
        else if (key == "noise_scale") real(c.noise_scale);
        else if (key == "alpha") real(c.alpha);
        else if (key == "initial") c.initial = v;
        else if (key == "initial_amplitude") real(c.initial_amplitude);
        else if (key == "initial_b") c.initial_b = v;
        else if (key == "initial_b_amplitude") real(c.initial_b_amplitude);
        else if (key == "epsilon") real(c.epsilon);
        else if (key == "epsilons") c.epsilons = parse_list(key, v, line);
        else if (key == "dt") real(c.dt);
        else if (key == "t_end") real(c.t_end);
        else if (key == "scheme") c.scheme = v;
        else if (key == "flux_scheme") c.flux_scheme = v;
        else if (key == "cfl_safety") real(c.cfl_safety);
        else if (key == "save_every") integer(c.save_every);
        else if (key == "paths") integer(c.paths);
        else if (key == "seed") c.seed = parse_unsigned(key, v, line);
        else if (key == "confidence") real(c.confidence);
        else if (key == "workers") integer(c.workers);
        else if (key == "slope_tolerance") real(c.slope_tolerance);
        else if (key == "p") integer(c.p);
        else if (key == "lambda") real(c.lambda);
        else if (key == "mollify") c.mollify = parse_bool(key, v, line);
        else if (key == "scheme_constant") {
            if (v == "auto")
                c.scheme_constant = -1.0;
            else
                real(c.scheme_constant);
        } else if (key == "xi_bins") integer(c.xi_bins);
        else if (key == "xi_range") {
            if (v == "auto") {
                c.xi_auto = true;
            } else {
                const auto r = parse_list(key, v, line);
                if (r.size() != 2) config_error(line, "xi_range expects 'auto' or 'lo, hi'");
                c.xi_auto = false;
                c.xi_min = r[0];
                c.xi_max = r[1];
            }
        } else if (key == "out") c.out = v;
        else config_error(line, "unknown key '" + key + "'");
    }
    validate(c, lines);
    return c;
}

/// Every key with its effective value, in a fixed order; parse_config(emit(c)) == c.
inline std::string emit(const ExperimentConfig& c, bool with_out = true) {
    using detail::format_double;
    std::ostringstream s;
    auto kv = [&](const char* k, const std::string& v) { s << k << " = " << v << '\n'; };
    kv("command", c.command);
    kv("experiment", c.experiment);
    kv("dim", std::to_string(c.dim));
    kv("n", std::to_string(c.n));
    kv("flux", c.flux);
    kv("flux_scale", format_double(c.flux_scale));
    kv("diffusion", c.diffusion);
    kv("diffusion_scale", format_double(c.diffusion_scale));
    kv("noise", c.noise);
    kv("noise_modes", std::to_string(c.noise_modes));
    kv("noise_scale", format_double(c.noise_scale));
    kv("alpha", format_double(c.alpha));
    kv("initial", c.initial);
    kv("initial_amplitude", format_double(c.initial_amplitude));
    kv("initial_b", c.initial_b);
    kv("initial_b_amplitude", format_double(c.initial_b_amplitude));
    kv("epsilon", format_double(c.epsilon));
    std::string list;
    for (double e : c.epsilons) list += (list.empty() ? "" : ", ") + format_double(e);
    kv("epsilons", list);
    kv("dt", format_double(c.dt));
    kv("t_end", format_double(c.t_end));
    kv("scheme", c.scheme);
    kv("flux_scheme", c.flux_scheme);
    kv("cfl_safety", format_double(c.cfl_safety));
    kv("save_every", std::to_string(c.save_every));
    kv("paths", std::to_string(c.paths));
    kv("seed", std::to_string(c.seed));
    kv("confidence", format_double(c.confidence));
    kv("workers", std::to_string(c.workers));
    kv("slope_tolerance", format_double(c.slope_tolerance));
    kv("p", std::to_string(c.p));
    kv("lambda", format_double(c.lambda));
    kv("mollify", c.mollify ? "true" : "false");
    kv("scheme_constant", c.scheme_constant < 0.0 ? "auto" : format_double(c.scheme_constant));
    kv("xi_bins", std::to_string(c.xi_bins));
    kv("xi_range", c.xi_auto ? "auto" : format_double(c.xi_min) + ", " + format_double(c.xi_max));
    if (with_out) kv("out", c.out);
    return s.str();
}

/// FNV-1a over the emitted config without the output directory or worker count.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
    ExperimentConfig h = c;
    h.workers = 1;
    const std::string text = emit(h, false);
    std::uint64_t x = 1469598103934665603ull;
    for (unsigned char ch : text) {
        x ^= ch;
        x *= 1099511628211ull;
    }
    return x;
}

inline std::string hash_hex(std::uint64_t h) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

}  // namespace kspde

#endif  // KSPDE_CONFIG_HPP
