#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twopatch/config.hpp"
#include "twopatch/eigen.hpp"
#include "twopatch/ibm.hpp"
#include "twopatch/io.hpp"
#include "twopatch/parallel.hpp"
#include "twopatch/pde.hpp"
#include "twopatch/thresholds.hpp"

namespace twopatch {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline std::filesystem::path output_dir(const ExperimentConfig& c) { return ensure_directory(c.output); }

/// Gaussian initial state, identical in both habitats.
inline Field2 initial_state(const ExperimentConfig& c, const Grid& g) {
    std::vector<double> center = c.init_center;
    if (center.empty()) center.assign(static_cast<std::size_t>(c.n), 0.0);
    const Field u = gaussian_initial(g, center, c.effective_init_variance(), c.init_mass);
    return Field2(u, u);
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr) {
    CsvWriter w(path, {"t", "N1", "N2", "rbar1", "rbar2"});
    for (std::size_t k = 0; k < tr.size(); ++k)
        w.row({format_number(tr.t[k]), format_number(tr.N1[k]), format_number(tr.N2[k]),
               format_number(tr.rbar1[k]), format_number(tr.rbar2[k])});
    w.close();
}

/// Row text: metadata comments, then one node per row.
inline void write_state(const std::filesystem::path& path, const Grid& g, const Field2& s, double t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << "# n=" << g.n() << " L=" << format_number(g.L()) << " m=" << g.m() << " h=" << format_number(g.h())
        << " t=" << format_number(t) << "\n";
    out << (g.n() == 1 ? "x1,u1,u2\n" : "x1,x2,u1,u2\n");
    std::vector<double> x(static_cast<std::size_t>(g.n()));
    for (std::size_t k = 0; k < g.size(); ++k) {
        g.node(k, x);
        for (double xi : x) out << format_number(xi) << ',';
        out << format_number(s.u1()[k]) << ',' << format_number(s.u2()[k]) << '\n';
    }
    if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

inline PdeResult cmd_solve(const ExperimentConfig& c) {
    validate(c);
    const ModelParams p = model_params(c);
    const Grid g = pde_grid(c, p);
    const PdeResult res = integrate_to(p, g, initial_state(c, g), solver_config(c));
    const auto dir = output_dir(c);
    write_trajectory_csv(dir / "trajectory.csv", res.trajectory);
    write_state(dir / "final_state.csv", g, res.final_state, res.trajectory.t.back());
    return res;
}

inline std::vector<GridSpec> eigen_schedule(const ExperimentConfig& c, const ModelParams& p) {
    if (c.m == 0) return default_schedule(p);
    return {GridSpec{c.L, c.m}};
}

inline EigenResult cmd_eigen(const ExperimentConfig& c) {
    validate(c);
    const ModelParams p = model_params(c);
    const auto schedule = eigen_schedule(c, p);
    const EigenResult res = lambda_limit(p, schedule, limit_settings(c));
    CsvWriter w(output_dir(c) / "eigen.csv", {"L", "m", "lambda_L", "residual"});
    for (const auto& s : res.lambdas)
        w.row({format_number(s.L), format_number(s.m), format_number(s.lambda_L), format_number(s.residual)});
    w.comment("lambda=" + format_number(res.lambda));
    w.close();
    return res;
}

inline ReplicateSummary cmd_ibm(const ExperimentConfig& c) {
    validate(c);
    const IbmParams p = ibm_params(c);
    const auto seeds = replicate_seeds(c.seed, static_cast<std::size_t>(c.replicates));
    const ReplicateSummary res = run_replicates(p, seeds, c.threads);
    const auto dir = output_dir(c);
    CsvWriter w(dir / "ibm.csv", {"replicate", "t", "N1", "N2"});
    for (std::size_t r = 0; r < res.replicates.size(); ++r) {
        const auto& tr = res.replicates[r];
        for (std::size_t k = 0; k < tr.size(); ++k)
            w.row({std::to_string(r), format_number(tr.t[k]), format_number(tr.N1[k]), format_number(tr.N2[k])});
    }
    w.close();
    CsvWriter m(dir / "ibm_mean.csv", {"t", "N_total_mean"});
    for (std::size_t k = 0; k < res.t.size(); ++k) m.row({format_number(res.t[k]), format_number(res.N_total_mean[k])});
    m.close();
    return res;
}

inline void write_threshold_csv(const std::filesystem::path& path, const ThresholdResult& r) {
    CsvWriter w(path, {"parameter", "lo", "hi", "value", "lambda_at_value", "iterations"});
    w.row({to_string(r.parameter), format_number(r.lo), format_number(r.hi), format_number(r.value),
           format_number(r.lambda_at_value), std::to_string(r.iterations)});
    w.close();
}

inline ThresholdResult cmd_threshold(const ExperimentConfig& c) {
    validate(c);
    ThresholdSettings set;
    set.tol = c.threshold_tol;
    set.eigen = limit_settings(c);
    const ThresholdResult r = find_threshold(model_params(c), parse_threshold_parameter(c.threshold_parameter),
                                             {c.threshold_lo, c.threshold_hi}, set);
    write_threshold_csv(output_dir(c) / "threshold.csv", r);
    return r;
}

/// One (delta, m_D) point of the phase diagram.
struct PhaseCell {
    double delta = 0.0;
    double m_D = 0.0;
    double lambda = kNaN;
    std::optional<Classification> classification;
    double N_total_initial = kNaN;  // PDE, both habitats
    double N_total_pde = kNaN;      // PDE at t_end
    std::optional<double> N_total_ibm_mean;
    std::string error;
};

inline PhaseCell compute_phase_cell(const ExperimentConfig& c, double delta, double m_D, std::uint64_t seed) {
    PhaseCell cell;
    cell.delta = delta;
    cell.m_D = m_D;
    try {
        ExperimentConfig cc = c;
        cc.delta = delta;
        cc.m_D = m_D;
        const ModelParams p = model_params(cc);
        cell.lambda = lambda_of(p, limit_settings(cc));
        cell.classification = classify_lambda(cell.lambda, cc.classify_tol);

        const Grid g = pde_grid(cc, p);
        SolverConfig sc = solver_config(cc);
        sc.record_every = std::max(sc.t_end, 1.0);
        const PdeResult r = integrate_to(p, g, initial_state(cc, g), sc);
        cell.N_total_initial = r.trajectory.total(0);
        cell.N_total_pde = r.trajectory.total(r.trajectory.size() - 1);

        if (cc.phase_ibm) {
            const auto seeds = replicate_seeds(seed, static_cast<std::size_t>(cc.replicates));
            const ReplicateSummary s = run_replicates(ibm_params(cc), seeds, 1);
            cell.N_total_ibm_mean = s.N_total_mean.back();
        }
    } catch (const std::exception& e) {
        cell.error = e.what();
    }
    return cell;
}

inline std::string phase_svg(const ExperimentConfig& c, const std::vector<PhaseCell>& cells) {
    const int nx = c.sweep_x.steps, ny = c.sweep_y.steps;
    const int cw = 60, ch = 40, left = 70, top = 20, bottom = 50;
    const int width = left + nx * cw + 20, height = top + ny * ch + bottom;
    double scale = 0.0;
    for (const auto& cell : cells)
        if (!std::isnan(cell.lambda)) scale = std::max(scale, std::abs(cell.lambda));
    if (scale == 0.0) scale = 1.0;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const PhaseCell& cell = cells[static_cast<std::size_t>(i) * ny + j];
            std::string fill = "#999999";
            if (!std::isnan(cell.lambda)) {
                // blue for persistence (lambda < 0), red for extinction
                const double a = std::min(1.0, std::abs(cell.lambda) / scale);
                const int fade = static_cast<int>(std::lround(255.0 * (1.0 - a)));
                char buf[8];
                if (cell.lambda < 0) std::snprintf(buf, sizeof buf, "#%02x%02xff", fade, fade);
                else std::snprintf(buf, sizeof buf, "#ff%02x%02x", fade, fade);
                fill = buf;
            }
            const int x = left + i * cw, y = top + (ny - 1 - j) * ch;
            s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch
              << "\" fill=\"" << fill << "\" stroke=\"white\"/>\n";
            if (cell.classification)
                s << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"middle\">"
                  << to_string(*cell.classification) << "</text>\n";
        }
    }
    for (int i = 0; i < nx; ++i)
        s << "<text x=\"" << left + i * cw + cw / 2 << "\" y=\"" << top + ny * ch + 14
          << "\" text-anchor=\"middle\">" << format_number(c.sweep_x.value(i)) << "</text>\n";
    for (int j = 0; j < ny; ++j)
        s << "<text x=\"" << left - 6 << "\" y=\"" << top + (ny - 1 - j) * ch + ch / 2 + 4
          << "\" text-anchor=\"end\">" << format_number(c.sweep_y.value(j)) << "</text>\n";
    s << "<text x=\"" << left + nx * cw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">delta</text>\n";
    s << "<text x=\"14\" y=\"" << top + ny * ch / 2 << "\" transform=\"rotate(-90 14 " << top + ny * ch / 2
      << ")\" text-anchor=\"middle\">m_D</text>\n";
    s << "</svg>\n";
    return s.str();
}

/// delta x m_D sweep. Cells run on the worker pool; results are stored by
/// index and written afterwards, so output order does not depend on scheduling.
inline std::vector<PhaseCell> cmd_phase(const ExperimentConfig& c) {
    validate(c);
    if (c.phase_ibm) ibm_params(c).validate();
    const auto dir = output_dir(c);
    const int nx = c.sweep_x.steps, ny = c.sweep_y.steps;
    const std::size_t count = static_cast<std::size_t>(nx) * ny;
    const auto seeds = replicate_seeds(c.seed, count);
    std::vector<PhaseCell> cells(count);
    parallel_for(count, c.threads, [&](std::size_t k) {
        const int i = static_cast<int>(k / ny), j = static_cast<int>(k % ny);
        cells[k] = compute_phase_cell(c, c.sweep_x.value(i), c.sweep_y.value(j), seeds[k]);
    });

    CsvWriter w(dir / "phase.csv",
                {"delta", "m_D", "lambda", "classification", "N_total_pde", "N_total_ibm_mean", "error"});
    for (const auto& cell : cells)
        w.row({format_number(cell.delta), format_number(cell.m_D), format_number(cell.lambda),
               cell.classification ? to_string(*cell.classification) : "NA", format_number(cell.N_total_pde),
               format_number(cell.N_total_ibm_mean), csv_text(cell.error)});
    w.close();
    if (c.phase_svg) {
        std::ofstream svg(dir / "phase.svg", std::ios::binary);
        svg << phase_svg(c, cells);
        if (!svg) throw ValidationError("write failed for phase.svg");
    }
    return cells;
}

}  // namespace twopatch
