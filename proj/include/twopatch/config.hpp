#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "twopatch/eigen.hpp"
#include "twopatch/error.hpp"
#include "twopatch/ibm.hpp"
#include "twopatch/io.hpp"
#include "twopatch/model.hpp"
#include "twopatch/pde.hpp"
#include "twopatch/thresholds.hpp"

namespace twopatch {

struct SweepAxis {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    int steps = 2;

    double value(int k) const { return steps == 1 ? min : min + (max - min) * k / (steps - 1); }
    bool operator==(const SweepAxis&) const = default;
};

/// Everything a CLI run needs. Defaults are the reference setting:
/// n = 2, U = 1/6, lambda_var = 1/300, mu = sqrt(U lambda_var), rmax = 1/18.
struct ExperimentConfig {
    // model
    int n = 2;
    std::optional<double> mu;  // unset: sqrt(U * lambda_var)
    double rmax1 = 1.0 / 18.0;
    double rmax2 = 1.0 / 18.0;
    double m_D = 0.5;
    std::string migration = "symmetric";  // symmetric | general
    double delta = 0.05;
    double d11 = 0.05, d12 = 0.05, d21 = 0.05, d22 = 0.05;
    std::string growth = "malthusian";  // malthusian | logistic

    // grid; 0 selects the eigen defaults
    double L = 0.0;
    int m = 0;

    // time integration
    double t_end = 300.0;
    double dt_init = 1e-2;
    double rel_tol = 1e-6;
    double abs_tol = 1e-9;
    double record_every = 1.0;
    std::vector<double> init_center;      // empty: origin
    std::optional<double> init_variance;  // unset: mu
    double init_mass = 1.0;               // per habitat

    // eigenvalue
    double tol_domain = 1e-6;
    bool richardson = true;

    // individual-based model
    double U = 1.0 / 6.0;
    double lambda_var = 1.0 / 300.0;
    long N0 = 10000;
    long T = 300;
    int replicates = 50;
    long max_individuals = 10'000'000;

    // phase diagram
    SweepAxis sweep_x{"delta", 0.0, 0.1, 6};
    SweepAxis sweep_y{"m_D", 0.0, 1.0, 6};
    bool phase_ibm = true;
    bool phase_svg = true;
    double classify_tol = 1e-4;

    // threshold search
    std::string threshold_parameter = "delta";
    double threshold_lo = 0.01;
    double threshold_hi = 0.2;
    double threshold_tol = 1e-4;

    // run
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string output = "out";

    double effective_mu() const { return mu ? *mu : std::sqrt(U * lambda_var); }
    double effective_init_variance() const { return init_variance ? *init_variance : effective_mu(); }

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

struct ConfigKey {
    const char* name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::optional<std::string>(const ExperimentConfig&)> get;
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

inline long parse_long(const std::string& s) {
    const double v = parse_double(s);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ValidationError("not an integer: '" + s + "'");
    return static_cast<long>(v);
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ValidationError("not a boolean: '" + s + "'");
}

inline std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ValidationError("not an unsigned 64-bit integer: '" + s + "'");
    return v;
}

inline std::string join_numbers(const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + format_number(v[k]);
    return s;
}

inline SweepAxis parse_axis(const std::string& s) {
    const auto parts = split_list(s);
    if (parts.size() != 4) throw ValidationError("sweep axis needs 'name,min,max,steps', got '" + s + "'");
    return {parts[0], parse_double(parts[1]), parse_double(parts[2]), static_cast<int>(parse_long(parts[3]))};
}

inline std::string emit_axis(const SweepAxis& a) {
    return a.name + "," + format_number(a.min) + "," + format_number(a.max) + "," + std::to_string(a.steps);
}

template <class T>
ConfigKey number_key(const char* name, T ExperimentConfig::*field) {
    return {name,
            [field](ExperimentConfig& c, const std::string& v) {
                if constexpr (std::is_same_v<T, double>) c.*field = parse_double(v);
                else c.*field = static_cast<T>(parse_long(v));
            },
            [field](const ExperimentConfig& c) -> std::optional<std::string> {
                if constexpr (std::is_same_v<T, double>) return format_number(c.*field);
                else return std::to_string(c.*field);
            }};
}

inline ConfigKey optional_key(const char* name, std::optional<double> ExperimentConfig::*field) {
    return {name, [field](ExperimentConfig& c, const std::string& v) { c.*field = parse_double(v); },
            [field](const ExperimentConfig& c) -> std::optional<std::string> {
                if (!(c.*field)) return std::nullopt;
                return format_number(*(c.*field));
            }};
}

inline ConfigKey string_key(const char* name, std::string ExperimentConfig::*field) {
    return {name, [field](ExperimentConfig& c, const std::string& v) { c.*field = v; },
            [field](const ExperimentConfig& c) -> std::optional<std::string> { return c.*field; }};
}

inline ConfigKey bool_key(const char* name, bool ExperimentConfig::*field) {
    return {name, [field](ExperimentConfig& c, const std::string& v) { c.*field = parse_bool(v); },
            [field](const ExperimentConfig& c) -> std::optional<std::string> {
                return std::string(c.*field ? "true" : "false");
            }};
}

inline ConfigKey axis_key(const char* name, SweepAxis ExperimentConfig::*field) {
    return {name, [field](ExperimentConfig& c, const std::string& v) { c.*field = parse_axis(v); },
            [field](const ExperimentConfig& c) -> std::optional<std::string> { return emit_axis(c.*field); }};
}

inline const std::vector<ConfigKey>& config_keys() {
    using C = ExperimentConfig;
    static const std::vector<ConfigKey> keys = {
        number_key("n", &C::n),
        optional_key("mu", &C::mu),
        number_key("rmax1", &C::rmax1),
        number_key("rmax2", &C::rmax2),
        number_key("m_D", &C::m_D),
        string_key("migration", &C::migration),
        number_key("delta", &C::delta),
        number_key("d11", &C::d11),
        number_key("d12", &C::d12),
        number_key("d21", &C::d21),
        number_key("d22", &C::d22),
        string_key("growth", &C::growth),
        number_key("L", &C::L),
        number_key("m", &C::m),
        number_key("t_end", &C::t_end),
        number_key("dt_init", &C::dt_init),
        number_key("rel_tol", &C::rel_tol),
        number_key("abs_tol", &C::abs_tol),
        number_key("record_every", &C::record_every),
        {"init_center",
         [](C& c, const std::string& v) {
             c.init_center.clear();
             for (const auto& s : split_list(v)) c.init_center.push_back(parse_double(s));
         },
         [](const C& c) -> std::optional<std::string> {
             if (c.init_center.empty()) return std::nullopt;
             return join_numbers(c.init_center);
         }},
        optional_key("init_variance", &C::init_variance),
        number_key("init_mass", &C::init_mass),
        number_key("tol_domain", &C::tol_domain),
        bool_key("richardson", &C::richardson),
        number_key("U", &C::U),
        number_key("lambda_var", &C::lambda_var),
        number_key("N0", &C::N0),
        number_key("T", &C::T),
        number_key("replicates", &C::replicates),
        number_key("max_individuals", &C::max_individuals),
        axis_key("sweep_x", &C::sweep_x),
        axis_key("sweep_y", &C::sweep_y),
        bool_key("phase_ibm", &C::phase_ibm),
        bool_key("phase_svg", &C::phase_svg),
        number_key("classify_tol", &C::classify_tol),
        string_key("threshold_parameter", &C::threshold_parameter),
        number_key("threshold_lo", &C::threshold_lo),
        number_key("threshold_hi", &C::threshold_hi),
        number_key("threshold_tol", &C::threshold_tol),
        {"seed", [](C& c, const std::string& v) { c.seed = parse_u64(v); },
         [](const C& c) -> std::optional<std::string> { return std::to_string(c.seed); }},
        number_key("threads", &C::threads),
        string_key("output", &C::output),
    };
    return keys;
}

}  // namespace detail

/// Every problem with the configuration, one message per entry.
inline std::vector<std::string> config_problems(const ExperimentConfig& c) {
    std::vector<std::string> errs;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) errs.push_back(msg);
    };
    check(c.n == 1 || c.n == 2, "n must be 1 or 2");
    check(c.effective_mu() > 0.0 && std::isfinite(c.effective_mu()), "mu must be > 0");
    check(std::isfinite(c.rmax1) && std::isfinite(c.rmax2), "rmax1 and rmax2 must be finite");
    check(c.m_D >= 0.0 && std::isfinite(c.m_D), "m_D must be >= 0");
    check(c.migration == "symmetric" || c.migration == "general", "migration must be 'symmetric' or 'general'");
    if (c.migration == "symmetric") {
        check(c.delta >= 0.0 && std::isfinite(c.delta), "delta must be >= 0");
        check(c.rmax1 == c.rmax2, "symmetric migration needs rmax1 == rmax2");
    } else {
        check(c.d11 > 0.0 && c.d12 > 0.0 && c.d21 > 0.0 && c.d22 > 0.0, "d11, d12, d21, d22 must be > 0");
    }
    check(c.growth == "malthusian" || c.growth == "logistic", "growth must be 'malthusian' or 'logistic'");
    if (c.growth == "logistic") check(c.migration == "symmetric", "logistic growth needs symmetric migration");
    check(c.L >= 0.0 && std::isfinite(c.L), "L must be >= 0 (0 = automatic)");
    check(c.m == 0 || (c.m >= 3 && c.m % 2 == 1), "m must be 0 (automatic) or odd and >= 3");
    check((c.L == 0.0) == (c.m == 0), "L and m must be both set or both 0");
    check(c.t_end >= 0.0 && std::isfinite(c.t_end), "t_end must be >= 0");
    check(c.dt_init > 0.0, "dt_init must be > 0");
    check(c.rel_tol >= 100.0 * std::numeric_limits<double>::epsilon(), "rel_tol must be >= 100 * machine epsilon");
    check(c.abs_tol > 0.0, "abs_tol must be > 0");
    check(c.record_every > 0.0, "record_every must be > 0");
    check(c.init_center.empty() || c.init_center.size() == static_cast<std::size_t>(c.n),
          "init_center must have n entries");
    check(c.effective_init_variance() > 0.0, "init_variance must be > 0");
    check(c.init_mass > 0.0 && std::isfinite(c.init_mass), "init_mass must be > 0");
    check(c.tol_domain > 0.0, "tol_domain must be > 0");
    check(c.U >= 0.0, "U must be >= 0");
    check(c.lambda_var > 0.0, "lambda_var must be > 0");
    check(c.N0 >= 0, "N0 must be >= 0");
    check(c.T >= 0, "T must be >= 0");
    check(c.replicates >= 1, "replicates must be >= 1");
    check(c.max_individuals >= 1, "max_individuals must be >= 1");
    check(c.sweep_x.steps >= 2 && c.sweep_y.steps >= 2, "sweep steps must be >= 2");
    check(c.sweep_x.name == "delta" && c.sweep_y.name == "m_D", "sweep axes must be sweep_x = delta,... and sweep_y = m_D,...");
    check(c.sweep_x.min >= 0.0 && c.sweep_x.max >= c.sweep_x.min, "sweep_x range must satisfy 0 <= min <= max");
    check(c.sweep_y.min >= 0.0 && c.sweep_y.max >= c.sweep_y.min, "sweep_y range must satisfy 0 <= min <= max");
    check(c.classify_tol >= 0.0, "classify_tol must be >= 0");
    try {
        parse_threshold_parameter(c.threshold_parameter);
    } catch (const ValidationError& e) {
        errs.push_back(e.what());
    }
    check(c.threshold_lo < c.threshold_hi, "threshold_lo must be < threshold_hi");
    check(c.threshold_tol > 0.0, "threshold_tol must be > 0");
    check(!c.output.empty(), "output must not be empty");
    return errs;
}

inline void validate(const ExperimentConfig& c) {
    const auto errs = config_problems(c);
    if (errs.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw ValidationError(msg);
}

/// Parses `key = value` lines; '#' starts a comment. All problems are reported together.
inline ExperimentConfig parse_config(const std::string& text, bool check = true) {
    ExperimentConfig c;
    std::vector<std::string> errs;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errs.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto& keys = detail::config_keys();
        const auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return key == k.name; });
        if (it == keys.end()) {
            errs.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
            continue;
        }
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            errs.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        seen.push_back(key);
        try {
            it->set(c, value);
        } catch (const ValidationError& e) {
            errs.push_back("line " + std::to_string(lineno) + ": " + key + ": " + e.what());
        }
    }
    if (check && errs.empty()) errs = config_problems(c);
    if (!errs.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw ValidationError(msg);
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string emit_config(const ExperimentConfig& c) {
    std::string out;
    for (const auto& k : detail::config_keys())
        if (const auto v = k.get(c)) out += std::string(k.name) + " = " + *v + "\n";
    return out;
}

inline ModelParams model_params(const ExperimentConfig& c) {
    const Growth g = c.growth == "logistic" ? Growth::Logistic : Growth::Malthusian;
    if (c.migration == "general")
        return ModelParams::general(c.n, c.effective_mu(), c.rmax1, c.rmax2, c.m_D,
                                    GeneralMigration{c.d11, c.d12, c.d21, c.d22});
    return ModelParams::symmetric(c.n, c.effective_mu(), c.rmax1, c.m_D, c.delta, g);
}

inline IbmParams ibm_params(const ExperimentConfig& c) {
    require(c.migration == "symmetric", "the individual-based model needs symmetric migration");
    IbmParams p;
    p.n = c.n;
    p.U = c.U;
    p.lambda_var = c.lambda_var;
    p.delta = c.delta;
    p.rmax = c.rmax1;
    p.beta = beta_of(c.m_D);
    p.N0 = c.N0;
    p.T = c.T;
    p.max_individuals = static_cast<std::size_t>(c.max_individuals);
    return p;
}

inline SolverConfig solver_config(const ExperimentConfig& c) {
    return {c.dt_init, c.rel_tol, c.abs_tol, c.t_end, c.record_every};
}

inline LimitSettings limit_settings(const ExperimentConfig& c) {
    LimitSettings s;
    s.tol_domain = c.tol_domain;
    s.richardson = c.richardson;
    return s;
}

/// Grid for time integration: explicit (L, m) or the eigenvalue defaults.
inline Grid pde_grid(const ExperimentConfig& c, const ModelParams& p) {
    if (c.m > 0) return Grid(c.n, c.L, c.m);
    const GridSpec s = grid_for(default_half_width(p), default_spacing(p));
    return Grid(c.n, s.L, s.m);
}

}  // namespace twopatch
