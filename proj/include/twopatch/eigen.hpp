#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twopatch/error.hpp"
#include "twopatch/grid.hpp"
#include "twopatch/model.hpp"
#include "twopatch/rk45.hpp"
#include "twopatch/sparse.hpp"

namespace twopatch {

/// Discretized operator A = K + offset * I on a grid.
///
/// K carries the Laplacian, the quadratic part of the potential and the
/// migration coupling; offset carries -max(rmax1, rmax2). Keeping the peak
/// fitness out of K means that shifting rmax shifts the spectrum exactly.
struct LinearOperator {
    CsrMatrix matrix;
    double offset = 0.0;
    double lower_bound = 0.0;  // valid lower bound on the spectrum of A
    bool symmetric = false;
    bool reduced = false;      // scalar reflection-coupled form
    std::vector<std::size_t> partner;
    Grid grid;

    std::size_t size() const { return matrix.rows(); }

    void apply(std::span<const double> x, std::span<double> y) const {
        require(x.size() == size() && y.size() == size(), "LinearOperator::apply: size mismatch");
        matrix.multiply(x, y, offset);
    }

    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> y(x.size());
        apply(x, y);
        return y;
    }
};

namespace detail {

inline void add_laplacian_row(CsrMatrix& k, const Grid& g, std::size_t node, std::size_t base,
                              double diff) {
    const double c = diff / (g.h() * g.h());
    const int m = g.m();
    const auto [i, j] = g.multi_index(node);
    k.add(base + node, 2.0 * g.n() * c);
    if (i > 0) k.add(base + node - (g.n() == 1 ? 1 : m), -c);
    if (i < m - 1) k.add(base + node + (g.n() == 1 ? 1 : m), -c);
    if (g.n() == 2) {
        if (j > 0) k.add(base + node - 1, -c);
        if (j < m - 1) k.add(base + node + 1, -c);
    }
}

inline Field half_squared_distance(const ModelParams& p, const Grid& g, Habitat h) {
    return sample(g, [&](std::span<const double> x) { return 0.5 * squared_distance_to_optimum(p, h, x); });
}

}  // namespace detail

/// Two-component operator
///   -(mu^2/2) Lap - [[r1 - d11, d12], [d21, r2 - d22]]
/// with zero Dirichlet ghosts outside the box.
inline LinearOperator assemble_full(const ModelParams& p, const Grid& g) {
    require(g.n() == p.n(), "assemble_full: grid dimension differs from model dimension");
    const std::size_t N = g.size();
    const auto d = p.rates();
    const double top = std::max(p.rmax1(), p.rmax2());
    const double diff = 0.5 * p.mu() * p.mu();
    const Field q1 = detail::half_squared_distance(p, g, Habitat::First);
    const Field q2 = p.is_symmetric() ? reflect_field(g, q1)
                                      : detail::half_squared_distance(p, g, Habitat::Second);

    LinearOperator op;
    op.grid = g;
    op.matrix = CsrMatrix(2 * N);
    for (int comp = 0; comp < 2; ++comp) {
        const std::size_t base = comp == 0 ? 0 : N;
        const Field& q = comp == 0 ? q1 : q2;
        const double self = comp == 0 ? d.d11 : d.d22;
        const double cross = comp == 0 ? d.d12 : d.d21;
        const double excess = top - (comp == 0 ? p.rmax1() : p.rmax2());
        for (std::size_t k = 0; k < N; ++k) {
            detail::add_laplacian_row(op.matrix, g, k, base, diff);
            op.matrix.add(base + k, q[k] + self + excess);
            op.matrix.add(comp == 0 ? N + k : k, -cross);
            op.matrix.finish_row();
        }
    }
    op.offset = -top;
    op.lower_bound = std::min(-p.rmax1() + d.d11 - d.d12, -p.rmax2() + d.d22 - d.d21);
    op.symmetric = d.d12 == d.d21;
    op.partner.resize(2 * N);
    for (std::size_t k = 0; k < N; ++k) {
        op.partner[k] = N + k;
        op.partner[N + k] = k;
    }
    return op;
}

/// Scalar operator phi -> -(mu^2/2) Lap phi - r1 phi + delta (phi - phi o iota).
///
/// Its principal eigenpair gives the full one through (phi, phi o iota).
inline LinearOperator assemble_symmetric_reduced(const ModelParams& p, const Grid& g) {
    require(p.is_symmetric(), "assemble_symmetric_reduced: requires symmetric migration and rmax1 == rmax2");
    require(g.n() == p.n(), "assemble_symmetric_reduced: grid dimension differs from model dimension");
    const std::size_t N = g.size();
    const double delta = p.delta();
    const double diff = 0.5 * p.mu() * p.mu();
    const Field q1 = detail::half_squared_distance(p, g, Habitat::First);

    LinearOperator op;
    op.grid = g;
    op.reduced = true;
    op.symmetric = true;
    op.matrix = CsrMatrix(N);
    op.partner.resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        const std::size_t r = g.reflect_index(k);
        detail::add_laplacian_row(op.matrix, g, k, 0, diff);
        if (r == k) {
            op.matrix.add(k, q1[k]);
        } else {
            op.matrix.add(k, q1[k] + delta);
            op.matrix.add(r, -delta);
        }
        op.matrix.finish_row();
        op.partner[k] = r;
    }
    op.offset = -p.rmax1();
    op.lower_bound = -p.rmax1();
    return op;
}

struct EigenSettings {
    double shift_gap = 0.01;        // sigma = lower_bound - shift_gap
    double eig_tol = 1e-10;         // change in lambda between iterations
    double residual_tol = 1e-8;     // sup-norm residual, relative to max(1, |lambda|)
    int max_iterations = 3000;
    double cg_tol = 1e-12;
    int cg_max_iterations = 20000;
    double march_tol = 1e-9;        // growth-rate change per unit time
    double march_t_max = 20000.0;
};

struct EigenPair {
    double lambda = 0.0;
    std::vector<double> vector;  // sup-normalized, positive
    double residual = 0.0;       // sup |A v - lambda v|
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline double sup_residual(const LinearOperator& op, std::span<const double> v, double lambda) {
    const auto av = op.apply(v);
    double r = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) r = std::max(r, std::abs(av[i] - lambda * v[i]));
    return r;
}

inline void normalize_sup(std::vector<double>& v) {
    double s = 0.0;
    double big = 0.0;
    for (double x : v)
        if (std::abs(x) > std::abs(big)) big = x;
    s = big;
    if (s == 0.0) throw NumericalError("eigenvector collapsed to zero");
    for (double& x : v) x /= s;
}

inline EigenPair inverse_iteration(const LinearOperator& op, double lower_bound,
                                   const EigenSettings& set, std::span<const double> start) {
    const std::size_t n = op.size();
    // B = K + c I = A - sigma I with sigma = lower_bound - gap.
    const double sigma = lower_bound - set.shift_gap;
    const double c = op.offset - sigma;
    const PairBlockPreconditioner pc(op.matrix, op.partner, c);

    std::vector<double> v(start.begin(), start.end());
    double vn = norm2(v);
    if (!(vn > 0.0)) throw ValidationError("principal_eigenpair: start vector is zero");
    for (double& x : v) x /= vn;

    std::vector<double> w(n), bv(n);
    EigenPair out;
    double mu_prev = std::numeric_limits<double>::infinity();
    double theta = 0.0;
    for (int it = 1; it <= set.max_iterations; ++it) {
        // warm start: w ~ v / (lambda - sigma)
        if (theta > 0.0)
            for (std::size_t i = 0; i < n; ++i) w[i] = v[i] * theta;
        else
            std::fill(w.begin(), w.end(), 0.0);
        conjugate_gradient(op.matrix, c, pc, v, w, set.cg_tol, set.cg_max_iterations);
        const double wn = norm2(w);
        if (!(wn > 0.0) || !std::isfinite(wn)) throw NumericalError("inverse iteration breakdown");
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wn;
        op.matrix.multiply(v, bv, c);
        const double rq = dot(v, bv);
        theta = 1.0 / rq;
        const double lambda = sigma + rq;
        out.iterations = it;
        out.lambda = lambda;
        const double change = std::abs(lambda - mu_prev);
        mu_prev = lambda;
        if (change < set.eig_tol) {
            std::vector<double> s = v;
            normalize_sup(s);
            const double res = sup_residual(op, s, lambda);
            if (res < set.residual_tol * std::max(1.0, std::abs(lambda))) {
                out.vector = std::move(s);
                out.residual = res;
                out.converged = true;
                return out;
            }
        }
    }
    out.vector = v;
    normalize_sup(out.vector);
    out.residual = sup_residual(op, out.vector, out.lambda);
    out.converged = false;
    return out;
}

inline EigenPair growth_rate_marching(const LinearOperator& op, const EigenSettings& set,
                                      std::span<const double> start) {
    const std::size_t n = op.size();
    std::vector<double> u(start.begin(), start.end());
    auto l1 = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += std::abs(v);
        return s;
    };
    double s0 = l1(u);
    if (!(s0 > 0.0)) throw ValidationError("principal_eigenpair: start vector is zero");
    for (double& x : u) x /= s0;

    // du/dt = -K u; the offset only shifts the growth rate.
    auto f = [&op](double, std::span<const double> y, std::span<double> dy) {
        op.matrix.multiply(y, dy);
        for (double& v : dy) v = -v;
    };
    DormandPrince<decltype(f)> stepper(n, f, StepControl{1e-10, 1e-14, 1e-3, 1e30});
    auto keep = [](double, std::vector<double>&) { return PostAction{}; };

    EigenPair out;
    double t = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    int calm = 0;
    int windows = 0;
    while (t < set.march_t_max) {
        stepper.advance(t, u, t + 1.0, keep);
        const double s = l1(u);
        if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("growth-rate marching breakdown");
        const double lambda_k = -std::log(s);
        for (double& x : u) x /= s;
        stepper.invalidate();
        ++windows;
        calm = std::abs(lambda_k - prev) < set.march_tol ? calm + 1 : 0;
        prev = lambda_k;
        if (calm >= 3) {
            out.converged = true;
            break;
        }
    }
    out.iterations = windows;
    // L1 quotient of the converged positive profile.
    const auto ku = [&] {
        std::vector<double> y(n);
        op.matrix.multiply(u, y);
        return y;
    }();
    const double lambda_k = std::accumulate(ku.begin(), ku.end(), 0.0) / std::accumulate(u.begin(), u.end(), 0.0);
    out.lambda = op.offset + lambda_k;
    out.vector = u;
    normalize_sup(out.vector);
    out.residual = sup_residual(op, out.vector, out.lambda);
    return out;
}

}  // namespace detail

/// Smallest eigenvalue of op with a positive eigenvector.
///
/// Symmetric operators: shift-invert iteration with shift below lower_bound,
/// solves by block-preconditioned CG. Nonsymmetric ones: growth rate of the
/// linear semigroup exp(-tA), renormalized every unit of time.
inline EigenPair principal_eigenpair(const LinearOperator& op, double lower_bound,
                                     const EigenSettings& set = {},
                                     std::span<const double> start = {}) {
    std::vector<double> init;
    if (start.empty()) {
        init.assign(op.size(), 1.0);
        start = init;
    }
    require(start.size() == op.size(), "principal_eigenpair: start vector size mismatch");
    if (op.symmetric) return detail::inverse_iteration(op, lower_bound, set, start);
    return detail::growth_rate_marching(op, set, start);
}

/// Discrete Rayleigh quotient <v, A v> / <v, v>.
inline double rayleigh_quotient(const LinearOperator& op, std::span<const double> v) {
    const auto av = op.apply(v);
    return dot(v, av) / dot(v, v);
}

// ---------------------------------------------------------------------------
// Domain and grid extrapolation

struct GridSpec {
    double L = 0.0;
    int m = 0;
};

struct EigenSample {
    double L = 0.0;
    int m = 0;
    double lambda_L = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

struct EigenResult {
    std::vector<EigenSample> lambdas;
    double lambda = 0.0;              // extrapolated
    double lambda_finest_grid = 0.0;  // h/2 value used by Richardson, if any
    Grid grid;                        // grid of eigenfield
    Field2 eigenfield;                // sup-normalized (phi1, phi2)
    double residual = 0.0;
    int iterations = 0;
    bool converged = true;
    bool domain_converged = false;
    bool monotone = true;
};

struct LimitSettings {
    double tol_domain = 1e-6;
    double monotone_tol = 1e-9;  // allowed increase of lambda_L, relative to max(1, |lambda|)
    bool richardson = true;
    EigenSettings eigen;
};

/// Default truncation half-width: max(4 beta, 6 sqrt(mu)) + 2.
inline double default_half_width(const ModelParams& p) {
    return std::max(4.0 * p.beta(), 6.0 * std::sqrt(p.mu())) + 2.0;
}

/// Default spacing: a quarter of the mutation-selection width sqrt(mu).
inline double default_spacing(const ModelParams& p) { return std::sqrt(p.mu()) / 4.0; }

/// Odd node count with spacing no larger than h on [-L, L] (L rounded up to a multiple of h).
inline GridSpec grid_for(double L, double h) {
    const long half = static_cast<long>(std::ceil(L / h - 1e-9));
    return {static_cast<double>(half) * h, static_cast<int>(2 * half + 1)};
}

/// L_default - 1, L_default, L_default + 1 at constant spacing, so grids are nested.
inline std::vector<GridSpec> default_schedule(const ModelParams& p) {
    const double h = default_spacing(p);
    const double L = default_half_width(p);
    std::vector<GridSpec> s;
    for (double dl : {-1.0, 0.0, 1.0}) s.push_back(grid_for(L + dl, h));
    return s;
}

namespace detail {

inline LinearOperator assemble_for(const ModelParams& p, const Grid& g) {
    return p.is_symmetric() ? assemble_symmetric_reduced(p, g) : assemble_full(p, g);
}

/// Copies a field from a smaller nested grid (same spacing) into a larger one,
/// or prolongs by linear interpolation onto a grid with half the spacing.
/// Works per component block of `components` fields.
inline std::vector<double> transfer(const Grid& from, std::span<const double> v, const Grid& to,
                                    int components) {
    const std::size_t nf = from.size(), nt = to.size();
    std::vector<double> out(nt * components, 0.0);
    auto value = [&](int comp, double x1, double x2) {
        // bilinear interpolation on `from`, zero outside
        auto locate = [&](double x, int& i0, double& w) {
            const double s = (x + from.L()) / from.h();
            i0 = static_cast<int>(std::floor(s + 1e-12));
            w = s - i0;
            if (std::abs(w) < 1e-9) w = 0.0;
        };
        int i0, j0 = 0;
        double wi, wj = 0.0;
        locate(x1, i0, wi);
        if (from.n() == 2) locate(x2, j0, wj);
        auto at = [&](int i, int j) {
            if (i < 0 || i >= from.m()) return 0.0;
            if (from.n() == 2 && (j < 0 || j >= from.m())) return 0.0;
            const std::size_t idx = from.n() == 1 ? static_cast<std::size_t>(i)
                                                  : static_cast<std::size_t>(i) * from.m() + j;
            return v[comp * nf + idx];
        };
        if (from.n() == 1) return (1 - wi) * at(i0, 0) + (wi > 0 ? wi * at(i0 + 1, 0) : 0.0);
        double s = (1 - wi) * (1 - wj) * at(i0, j0);
        if (wi > 0) s += wi * (1 - wj) * at(i0 + 1, j0);
        if (wj > 0) s += (1 - wi) * wj * at(i0, j0 + 1);
        if (wi > 0 && wj > 0) s += wi * wj * at(i0 + 1, j0 + 1);
        return s;
    };
    std::vector<double> x(static_cast<std::size_t>(to.n()));
    for (int c = 0; c < components; ++c) {
        for (std::size_t k = 0; k < nt; ++k) {
            to.node(k, x);
            out[c * nt + k] = value(c, x[0], to.n() == 2 ? x[1] : 0.0);
        }
    }
    // keep strictly positive start vectors
    for (double& y : out)
        if (!(y > 0.0)) y = 1e-300;
    return out;
}

inline Field2 to_field2(const ModelParams& p, const Grid& g, const LinearOperator& op,
                        std::span<const double> v) {
    if (op.reduced) {
        const Field phi(v.begin(), v.end());
        return Field2(phi, reflect_field(g, phi));
    }
    (void)p;
    return Field2(v.subspan(0, g.size()), v.subspan(g.size(), g.size()));
}

}  // namespace detail

/// lambda^L over a domain schedule, stopped once successive values agree to
/// tol_domain, followed by Richardson extrapolation in h at the final L.
inline EigenResult lambda_limit(const ModelParams& p, std::span<const GridSpec> schedule,
                                const LimitSettings& set = {}) {
    require(!schedule.empty(), "lambda_limit: schedule is empty");
    for (std::size_t k = 1; k < schedule.size(); ++k)
        require(schedule[k].L > schedule[k - 1].L, "lambda_limit: schedule L must be increasing");

    EigenResult res;
    std::optional<Grid> prev_grid;
    std::vector<double> prev_vec;
    int components = p.is_symmetric() ? 1 : 2;
    LinearOperator op;
    EigenPair pair;
    for (const auto& spec : schedule) {
        const Grid g(p.n(), spec.L, spec.m);
        op = detail::assemble_for(p, g);
        std::vector<double> start;
        if (prev_grid) start = detail::transfer(*prev_grid, prev_vec, g, components);
        pair = principal_eigenpair(op, op.lower_bound, set.eigen, start);
        res.lambdas.push_back({spec.L, spec.m, pair.lambda, pair.residual, pair.iterations});
        res.iterations += pair.iterations;
        res.converged = res.converged && pair.converged;
        res.grid = g;
        prev_grid = g;
        prev_vec = pair.vector;

        const std::size_t k = res.lambdas.size();
        if (k >= 2) {
            const double a = res.lambdas[k - 2].lambda_L;
            const double b = res.lambdas[k - 1].lambda_L;
            if (b > a + set.monotone_tol * std::max(1.0, std::abs(a))) {
                res.monotone = false;
                throw NumericalError("lambda_L increased with L (" + std::to_string(a) + " -> " +
                                     std::to_string(b) + "): grid under-resolved");
            }
            if (std::abs(b - a) < set.tol_domain) {
                res.domain_converged = true;
                break;
            }
        }
    }
    res.eigenfield = detail::to_field2(p, res.grid, op, pair.vector);
    res.residual = pair.residual;
    res.lambda = pair.lambda;

    if (set.richardson) {
        const Grid fine(p.n(), res.grid.L(), 2 * res.grid.m() - 1);
        const LinearOperator fop = detail::assemble_for(p, fine);
        const auto start = detail::transfer(res.grid, pair.vector, fine, components);
        const EigenPair fpair = principal_eigenpair(fop, fop.lower_bound, set.eigen, start);
        res.iterations += fpair.iterations;
        res.converged = res.converged && fpair.converged;
        res.lambda_finest_grid = fpair.lambda;
        res.lambda = (4.0 * fpair.lambda - pair.lambda) / 3.0;
    }
    return res;
}

inline EigenResult lambda_limit(const ModelParams& p, const LimitSettings& set = {}) {
    const auto s = default_schedule(p);
    return lambda_limit(p, s, set);
}

/// Extrapolated principal eigenvalue with default schedules.
inline double lambda_of(const ModelParams& p, const LimitSettings& set = {}) {
    return lambda_limit(p, set).lambda;
}

}  // namespace twopatch
