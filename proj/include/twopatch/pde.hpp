#pragma once

#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twopatch/error.hpp"
#include "twopatch/grid.hpp"
#include "twopatch/io.hpp"
#include "twopatch/model.hpp"
#include "twopatch/rk45.hpp"

namespace twopatch {

struct SolverConfig {
    double dt_init = 1e-2;
    double rel_tol = 1e-6;
    double abs_tol = 1e-9;
    double t_end = 300.0;
    double record_every = 1.0;

    void validate() const {
        require(dt_init > 0.0 && std::isfinite(dt_init), "SolverConfig: dt_init must be > 0");
        require(rel_tol >= 100.0 * std::numeric_limits<double>::epsilon(),
                "SolverConfig: rel_tol must be >= 100 * machine epsilon");
        require(abs_tol > 0.0, "SolverConfig: abs_tol must be > 0");
        require(t_end >= 0.0 && std::isfinite(t_end), "SolverConfig: t_end must be >= 0");
        require(record_every > 0.0, "SolverConfig: record_every must be > 0");
    }
};

struct Diagnostics {
    double N1 = 0.0;
    double N2 = 0.0;
    std::optional<double> rbar1;  // empty when the habitat has no mass
    std::optional<double> rbar2;
};

/// Time series of population sizes and mean fitnesses (parallel arrays).
struct Trajectory {
    std::vector<double> t;
    std::vector<double> N1;
    std::vector<double> N2;
    std::vector<std::optional<double>> rbar1;
    std::vector<std::optional<double>> rbar2;
    bool extinct = false;
    double extinction_time = std::numeric_limits<double>::quiet_NaN();

    void push(double time, const Diagnostics& d) {
        t.push_back(time);
        N1.push_back(d.N1);
        N2.push_back(d.N2);
        rbar1.push_back(d.rbar1);
        rbar2.push_back(d.rbar2);
    }
    std::size_t size() const { return t.size(); }
    double total(std::size_t k) const { return N1[k] + N2[k]; }
};

/// Precomputed nodal fitness and coupling for one (params, grid) pair.
class PdeSystem {
public:
    PdeSystem(const ModelParams& p, const Grid& g) : params_(p), grid_(g), rates_(p.rates()) {
        r1_ = sample(g, [&](std::span<const double> x) { return fitness(p, Habitat::First, x); });
        if (p.is_symmetric()) {
            // keeps r2 = r1 o iota bitwise
            r2_ = reflect_field(g, r1_);
        } else {
            r2_ = sample(g, [&](std::span<const double> x) { return fitness(p, Habitat::Second, x); });
        }
    }

    const ModelParams& params() const { return params_; }
    const Grid& grid() const { return grid_; }
    std::span<const double> fitness_field(int i) const { return i == 0 ? r1_ : r2_; }

    /// dydt = (mu^2/2) Lap u_i + f_i + coupling, state laid out as Field2 data.
    void rhs_into(std::span<const double> y, std::span<double> dydt) {
        const std::size_t N = grid_.size();
        if (y.size() != 2 * N || dydt.size() != 2 * N)
            throw ValidationError("rhs: state size does not match grid");
        const double diff = 0.5 * params_.mu() * params_.mu();
        const bool logistic = params_.growth() == Growth::Logistic;
        const auto u1 = y.subspan(0, N);
        const auto u2 = y.subspan(N, N);
        const double N1 = logistic ? integrate(grid_, u1) : 0.0;
        const double N2 = logistic ? integrate(grid_, u2) : 0.0;
        auto d1 = dydt.subspan(0, N);
        auto d2 = dydt.subspan(N, N);
        laplacian_into(grid_, u1, d1, diff);
        laplacian_into(grid_, u2, d2, diff);
        const auto& d = rates_;
        for (std::size_t k = 0; k < N; ++k) {
            d1[k] += (r1_[k] - N1) * u1[k] + (d.d12 * u2[k] - d.d11 * u1[k]);
            d2[k] += (r2_[k] - N2) * u2[k] + (d.d21 * u1[k] - d.d22 * u2[k]);
        }
    }

    Diagnostics diagnostics(const Field2& s) const { return diagnostics(s.data()); }

    Diagnostics diagnostics(std::span<const double> y) const {
        const std::size_t N = grid_.size();
        Diagnostics out;
        const auto u1 = y.subspan(0, N);
        const auto u2 = y.subspan(N, N);
        out.N1 = integrate(grid_, u1);
        out.N2 = integrate(grid_, u2);
        std::vector<double> ru(N);
        if (out.N1 > 0.0) {
            for (std::size_t k = 0; k < N; ++k) ru[k] = r1_[k] * u1[k];
            out.rbar1 = integrate(grid_, ru) / out.N1;
        }
        if (out.N2 > 0.0) {
            for (std::size_t k = 0; k < N; ++k) ru[k] = r2_[k] * u2[k];
            out.rbar2 = integrate(grid_, ru) / out.N2;
        }
        return out;
    }

private:
    ModelParams params_;
    Grid grid_;
    GeneralMigration rates_;
    Field r1_;
    Field r2_;
};

inline Field2 rhs(const ModelParams& p, const Grid& g, const Field2& state) {
    require(state.nodes() == g.size(), "rhs: state size does not match grid");
    PdeSystem sys(p, g);
    Field2 out(g.size());
    sys.rhs_into(state.data(), out.data());
    return out;
}

inline Diagnostics diagnostics(const ModelParams& p, const Grid& g, const Field2& state) {
    require(state.nodes() == g.size(), "diagnostics: state size does not match grid");
    return PdeSystem(p, g).diagnostics(state);
}

/// Nodal exp(-|x - c|^2 / (2 v)) rescaled to the requested discrete mass.
inline Field gaussian_initial(const Grid& g, std::span<const double> center, double variance,
                              double mass) {
    require(center.size() == static_cast<std::size_t>(g.n()),
            "gaussian_initial: center dimension mismatch");
    require(variance > 0.0 && std::isfinite(variance), "gaussian_initial: variance must be > 0");
    require(mass > 0.0 && std::isfinite(mass), "gaussian_initial: mass must be > 0");
    for (double c : center)
        if (std::abs(c) > g.L())
            std::cerr << "warning: gaussian_initial center lies outside the box\n";
    Field f = sample(g, [&](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - center[k]) * (x[k] - center[k]);
        return std::exp(-s / (2.0 * variance));
    });
    const double total = integrate(g, f);
    if (!(total > 0.0))
        throw ValidationError("gaussian_initial: Gaussian has no mass on the grid");
    for (double& v : f) v *= mass / total;
    return f;
}

struct PdeResult {
    Trajectory trajectory;
    Field2 final_state;
};

/// Relative total mass below which a run is flagged extinct.
inline constexpr double kExtinctionFraction = 1e-12;

/// Method-of-lines integration with Dormand-Prince 5(4).
///
/// Records diagnostics at t = 0, every record_every, and at t_end. Values in
/// (-abs_tol, 0) are clipped to zero after each accepted step; anything lower
/// aborts. The run stops early once the total mass drops below
/// kExtinctionFraction of its initial value.
inline PdeResult integrate_to(const ModelParams& p, const Grid& g, const Field2& state0,
                              const SolverConfig& cfg) {
    cfg.validate();
    require(state0.nodes() == g.size(), "integrate_to: state size does not match grid");
    for (double v : state0.data())
        require(std::isfinite(v) && v >= 0.0, "integrate_to: initial state must be finite and >= 0");

    PdeSystem sys(p, g);
    const Diagnostics d0 = sys.diagnostics(state0);
    require(d0.N1 > 0.0 && d0.N2 > 0.0, "integrate_to: initial mass must be positive in each habitat");
    const double total0 = d0.N1 + d0.N2;

    PdeResult res;
    res.trajectory.push(0.0, d0);
    std::vector<double> y = state0.data();

    auto f = [&sys](double, std::span<const double> yy, std::span<double> dy) { sys.rhs_into(yy, dy); };
    DormandPrince<decltype(f)> stepper(y.size(), f,
                                       StepControl{cfg.rel_tol, cfg.abs_tol, cfg.dt_init, 1e30});

    const std::size_t N = g.size();
    bool extinct = false;
    double t_extinct = 0.0;
    auto post = [&](double t, std::vector<double>& yy) {
        bool clipped = false;
        for (double& v : yy) {
            if (v < 0.0) {
                if (v < -cfg.abs_tol)
                    throw NumericalError("negative density " + format_number(v) +
                                         " beyond abs_tol at t = " + std::to_string(t));
                v = 0.0;
                clipped = true;
            }
        }
        const std::span<const double> ys(yy);
        const double total = integrate(g, ys.subspan(0, N)) + integrate(g, ys.subspan(N, N));
        if (total < kExtinctionFraction * total0) {
            extinct = true;
            t_extinct = t;
        }
        return PostAction{clipped, extinct};
    };

    double t = 0.0;
    std::size_t k = 1;
    while (t < cfg.t_end && !extinct) {
        const double target = std::min(cfg.t_end, static_cast<double>(k) * cfg.record_every);
        stepper.advance(t, y, target, post);
        res.trajectory.push(t, sys.diagnostics(y));
        ++k;
    }
    res.trajectory.extinct = extinct;
    if (extinct) res.trajectory.extinction_time = t_extinct;
    res.final_state = Field2(std::span<const double>(y).subspan(0, N),
                             std::span<const double>(y).subspan(N, N));
    return res;
}

}  // namespace twopatch
