#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "twopatch/commands.hpp"

namespace {

struct Common {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "configuration file (key = value)");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "master random seed");
    sub->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

twopatch::ExperimentConfig resolve(const Common& c) {
    twopatch::ExperimentConfig cfg = c.config.empty() ? twopatch::ExperimentConfig{} : twopatch::load_config(c.config);
    if (c.out) cfg.output = *c.out;
    if (c.seed) cfg.seed = *c.seed;
    if (c.threads) cfg.threads = *c.threads;
    twopatch::validate(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-habitat mutation-selection-migration laboratory"};
    app.require_subcommand(1);
    Common common;
    auto* solve = app.add_subcommand("solve", "integrate the PDE system; writes trajectory.csv and final_state.csv");
    auto* eigen = app.add_subcommand("eigen", "principal eigenvalue with domain refinement; writes eigen.csv");
    auto* ibm = app.add_subcommand("ibm", "individual-based replicates; writes ibm.csv and ibm_mean.csv");
    auto* phase = app.add_subcommand("phase", "delta x m_D phase diagram; writes phase.csv (and phase.svg)");
    auto* threshold = app.add_subcommand("threshold", "critical parameter value; writes threshold.csv");
    for (auto* s : {solve, eigen, ibm, phase, threshold}) add_common(s, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto cfg = resolve(common);
        if (solve->parsed()) {
            const auto r = twopatch::cmd_solve(cfg);
            const auto& tr = r.trajectory;
            std::cout << "t=" << twopatch::format_number(tr.t.back())
                      << " N1=" << twopatch::format_number(tr.N1.back())
                      << " N2=" << twopatch::format_number(tr.N2.back()) << (tr.extinct ? " (extinct)" : "")
                      << "\n";
        } else if (eigen->parsed()) {
            const auto r = twopatch::cmd_eigen(cfg);
            std::cout << "lambda=" << twopatch::format_number(r.lambda) << "\n";
        } else if (ibm->parsed()) {
            const auto r = twopatch::cmd_ibm(cfg);
            std::cout << "N_total_mean(T)=" << twopatch::format_number(r.N_total_mean.back()) << "\n";
        } else if (phase->parsed()) {
            const auto cells = twopatch::cmd_phase(cfg);
            int failed = 0;
            for (const auto& c : cells) failed += c.error.empty() ? 0 : 1;
            std::cout << cells.size() << " cells, " << failed << " failed\n";
        } else if (threshold->parsed()) {
            const auto r = twopatch::cmd_threshold(cfg);
            std::cout << twopatch::to_string(r.parameter) << "_crit=" << twopatch::format_number(r.value)
                      << " lambda=" << twopatch::format_number(r.lambda_at_value) << "\n";
        }
    } catch (const twopatch::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const twopatch::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
