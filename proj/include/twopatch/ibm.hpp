#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "twopatch/error.hpp"
#include "twopatch/model.hpp"
#include "twopatch/parallel.hpp"
#include "twopatch/pde.hpp"

namespace twopatch {

/// Wright-Fisher individual-based model parameters. One generation is one
/// unit of PDE time; the matching PDE mutational parameter is mu = sqrt(U * lambda_var).
struct IbmParams {
    int n = 2;
    double U = 1.0 / 6.0;            // mutation rate per individual per generation
    double lambda_var = 1.0 / 300.0; // mutational variance per trait
    double delta = 0.0;              // migration rate
    double rmax = 1.0 / 18.0;
    double beta = 0.0;
    long N0 = 10000;                 // initial count per habitat
    long T = 300;                    // generations
    std::size_t max_individuals = 10'000'000;

    double mu() const { return std::sqrt(U * lambda_var); }

    void validate() const {
        require(n >= 1, "IbmParams: n must be >= 1");
        require(U >= 0.0 && std::isfinite(U), "IbmParams: U must be >= 0");
        require(lambda_var > 0.0 && std::isfinite(lambda_var), "IbmParams: lambda_var must be > 0");
        require(delta >= 0.0 && std::isfinite(delta), "IbmParams: delta must be >= 0");
        require(std::isfinite(rmax), "IbmParams: rmax must be finite");
        require(beta >= 0.0 && std::isfinite(beta), "IbmParams: beta must be >= 0");
        require(N0 >= 0, "IbmParams: N0 must be >= 0");
        require(T >= 0, "IbmParams: T must be >= 0");
        require(max_individuals > 0, "IbmParams: max_individuals must be > 0");
    }
};

class IbmOverflow : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Phenotypes of one habitat stored row-wise (n coordinates per individual).
struct Population {
    int n = 1;
    std::vector<double> coords;

    std::size_t size() const { return coords.size() / static_cast<std::size_t>(n); }
    std::span<const double> individual(std::size_t k) const {
        return {coords.data() + k * n, static_cast<std::size_t>(n)};
    }
    std::span<double> individual(std::size_t k) { return {coords.data() + k * n, static_cast<std::size_t>(n)}; }
};

struct IbmState {
    Population pop1;
    Population pop2;
    long generation = 0;
    std::mt19937_64 rng;

    Population& habitat(int i) { return i == 0 ? pop1 : pop2; }
    const Population& habitat(int i) const { return i == 0 ? pop1 : pop2; }
    std::size_t total() const { return pop1.size() + pop2.size(); }
};

inline double ibm_fitness(const IbmParams& p, int habitat, std::span<const double> x) {
    const double o = habitat == 0 ? -p.beta : p.beta;
    double s = (x[0] - o) * (x[0] - o);
    for (std::size_t k = 1; k < x.size(); ++k) s += x[k] * x[k];
    return p.rmax - 0.5 * s;
}

/// Independent stream for (master seed, replicate index).
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

/// splitmix64 of (master, index): per-replicate seeds.
inline std::vector<std::uint64_t> replicate_seeds(std::uint64_t master, std::size_t count) {
    std::vector<std::uint64_t> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (i + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        out[i] = z ^ (z >> 31);
    }
    return out;
}

/// N0 copies of the midpoint (O1 + O2)/2 = 0 in each habitat.
inline IbmState init_clonal(const IbmParams& p, std::uint64_t seed = 0) {
    p.validate();
    IbmState s;
    s.pop1.n = s.pop2.n = p.n;
    s.pop1.coords.assign(static_cast<std::size_t>(p.N0) * p.n, 0.0);
    s.pop2.coords.assign(static_cast<std::size_t>(p.N0) * p.n, 0.0);
    s.rng = make_rng(seed);
    return s;
}

/// Each parent leaves Poisson(exp(r_i(x))) offspring with its own phenotype;
/// parents are then discarded.
inline void reproduction_selection(IbmState& s, const IbmParams& p) {
    std::size_t total = 0;
    for (int h = 0; h < 2; ++h) {
        Population& pop = s.habitat(h);
        std::vector<double> next;
        next.reserve(pop.coords.size());
        for (std::size_t k = 0; k < pop.size(); ++k) {
            const auto x = pop.individual(k);
            const double rate = std::exp(ibm_fitness(p, h, x));
            if (!(rate > 1e-300)) continue;
            std::poisson_distribution<long> offspring(rate);
            const long c = offspring(s.rng);
            total += static_cast<std::size_t>(c);
            if (total > p.max_individuals)
                throw IbmOverflow("IBM population exceeded " + std::to_string(p.max_individuals) +
                                  " individuals at generation " + std::to_string(s.generation + 1));
            for (long j = 0; j < c; ++j) next.insert(next.end(), x.begin(), x.end());
        }
        pop.coords.swap(next);
    }
}

/// Poisson(U) mutations per individual, each adding N(0, lambda_var I_n).
inline void mutation(IbmState& s, const IbmParams& p) {
    if (p.U <= 0.0) return;
    std::poisson_distribution<int> count(p.U);
    std::normal_distribution<double> effect(0.0, std::sqrt(p.lambda_var));
    for (int h = 0; h < 2; ++h) {
        Population& pop = s.habitat(h);
        for (std::size_t k = 0; k < pop.size(); ++k) {
            const int muts = count(s.rng);
            auto x = pop.individual(k);
            for (int j = 0; j < muts; ++j)
                for (double& xi : x) xi += effect(s.rng);
        }
    }
}

namespace detail {

/// Moves `count` uniformly chosen individuals to the tail of pop (partial Fisher-Yates).
inline void select_tail(Population& pop, std::size_t count, std::mt19937_64& rng) {
    const std::size_t N = pop.size();
    const int n = pop.n;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t last = N - 1 - k;
        std::uniform_int_distribution<std::size_t> pick(0, last);
        const std::size_t j = pick(rng);
        if (j != last)
            std::swap_ranges(pop.coords.begin() + j * n, pop.coords.begin() + (j + 1) * n,
                             pop.coords.begin() + last * n);
    }
}

}  // namespace detail

/// M1 ~ Poisson(delta N1), M2 ~ Poisson(delta N2), each capped at the habitat
/// size and drawn from pre-migration counts; both transfers happen at once.
inline void migration(IbmState& s, const IbmParams& p) {
    if (p.delta <= 0.0) return;
    const std::size_t N1 = s.pop1.size(), N2 = s.pop2.size();
    auto draw = [&](std::size_t N) -> std::size_t {
        if (N == 0) return 0;
        std::poisson_distribution<long> d(p.delta * static_cast<double>(N));
        return std::min<std::size_t>(static_cast<std::size_t>(d(s.rng)), N);
    };
    const std::size_t M1 = draw(N1);
    const std::size_t M2 = draw(N2);
    detail::select_tail(s.pop1, M1, s.rng);
    detail::select_tail(s.pop2, M2, s.rng);
    const std::size_t n = static_cast<std::size_t>(p.n);
    std::vector<double> out1(s.pop1.coords.end() - M1 * n, s.pop1.coords.end());
    std::vector<double> out2(s.pop2.coords.end() - M2 * n, s.pop2.coords.end());
    s.pop1.coords.resize((N1 - M1) * n);
    s.pop2.coords.resize((N2 - M2) * n);
    s.pop1.coords.insert(s.pop1.coords.end(), out2.begin(), out2.end());
    s.pop2.coords.insert(s.pop2.coords.end(), out1.begin(), out1.end());
}

inline Diagnostics ibm_diagnostics(const IbmState& s, const IbmParams& p) {
    Diagnostics d;
    d.N1 = static_cast<double>(s.pop1.size());
    d.N2 = static_cast<double>(s.pop2.size());
    for (int h = 0; h < 2; ++h) {
        const Population& pop = s.habitat(h);
        if (pop.size() == 0) continue;
        double acc = 0.0;
        for (std::size_t k = 0; k < pop.size(); ++k) acc += ibm_fitness(p, h, pop.individual(k));
        (h == 0 ? d.rbar1 : d.rbar2) = acc / static_cast<double>(pop.size());
    }
    return d;
}

/// One generation: reproduction-selection, mutation, migration.
inline void step(IbmState& s, const IbmParams& p) {
    reproduction_selection(s, p);
    mutation(s, p);
    migration(s, p);
    ++s.generation;
}

/// Counts (and mean fitness) per generation from a clonal start; stops early
/// on total extinction.
inline Trajectory run(const IbmParams& p, std::uint64_t seed) {
    IbmState s = init_clonal(p, seed);
    Trajectory tr;
    tr.push(0.0, ibm_diagnostics(s, p));
    while (s.generation < p.T && s.total() > 0) {
        step(s, p);
        tr.push(static_cast<double>(s.generation), ibm_diagnostics(s, p));
    }
    if (s.total() == 0) {
        tr.extinct = true;
        tr.extinction_time = static_cast<double>(s.generation);
    }
    return tr;
}

struct ReplicateSummary {
    std::vector<double> t;               // 0..T
    std::vector<double> N_total_mean;    // extinct replicates count as 0
    std::vector<Trajectory> replicates;
};

inline ReplicateSummary run_replicates(const IbmParams& p, std::span<const std::uint64_t> seeds,
                                       unsigned threads = 1) {
    require(!seeds.empty(), "run_replicates: seed list is empty");
    p.validate();
    ReplicateSummary out;
    out.replicates.resize(seeds.size());
    parallel_for(seeds.size(), threads, [&](std::size_t i) { out.replicates[i] = run(p, seeds[i]); });
    const std::size_t len = static_cast<std::size_t>(p.T) + 1;
    out.t.resize(len);
    out.N_total_mean.assign(len, 0.0);
    for (std::size_t g = 0; g < len; ++g) {
        out.t[g] = static_cast<double>(g);
        double acc = 0.0;
        for (const auto& tr : out.replicates)
            if (g < tr.size()) acc += tr.total(g);
        out.N_total_mean[g] = acc / static_cast<double>(seeds.size());
    }
    return out;
}

}  // namespace twopatch
