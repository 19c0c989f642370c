#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <utility>

#include "twopatch/eigen.hpp"
#include "twopatch/error.hpp"
#include "twopatch/model.hpp"

namespace twopatch {

enum class ThresholdParameter { Delta, MD, Mu, Rmax };

inline std::string to_string(ThresholdParameter w) {
    switch (w) {
        case ThresholdParameter::Delta: return "delta";
        case ThresholdParameter::MD: return "m_D";
        case ThresholdParameter::Mu: return "mu";
        case ThresholdParameter::Rmax: return "rmax";
    }
    return "?";
}

inline ThresholdParameter parse_threshold_parameter(const std::string& s) {
    if (s == "delta") return ThresholdParameter::Delta;
    if (s == "m_D") return ThresholdParameter::MD;
    if (s == "mu") return ThresholdParameter::Mu;
    if (s == "rmax") return ThresholdParameter::Rmax;
    throw ValidationError("unknown threshold parameter '" + s + "' (expected delta, m_D, mu or rmax)");
}

struct ThresholdResult {
    ThresholdParameter parameter = ThresholdParameter::Delta;
    double lo = 0.0;
    double hi = 0.0;
    double value = 0.0;
    double lambda_at_value = 0.0;
    int iterations = 0;
};

struct ThresholdSettings {
    double tol = 1e-4;       // on |lambda|
    int max_iterations = 40;
    int max_expansions = 30;
    LimitSettings eigen;
};

inline ModelParams with_parameter(const ModelParams& p, ThresholdParameter w, double v) {
    switch (w) {
        case ThresholdParameter::Delta: return p.with_delta(v);
        case ThresholdParameter::MD: return p.with_m_D(v);
        case ThresholdParameter::Mu: return p.with_mu(v);
        case ThresholdParameter::Rmax: return p.with_rmax(v);
    }
    return p;
}

namespace detail {

/// Necessary conditions for a sign change, checked before any eigenvalue is computed.
inline void check_existence(const ModelParams& p, ThresholdParameter w) {
    if (w == ThresholdParameter::Rmax) return;
    require(p.is_symmetric(), "thresholds: " + to_string(w) + " threshold needs symmetric migration");
    require(p.rmax1() == p.rmax2(), "thresholds: " + to_string(w) + " threshold needs equal rmax");
    const double load = p.mu() * p.n() / 2.0;
    const double r = p.rmax1();
    auto fail = [&](const std::string& ineq) {
        std::ostringstream os;
        os << "no " << to_string(w) << " threshold: requires " << ineq << " (rmax = " << r
           << ", mu n/2 = " << load;
        if (w == ThresholdParameter::Delta) os << ", m_D/4 = " << p.m_D() / 4.0;
        if (w == ThresholdParameter::MD) os << ", delta = " << p.delta();
        os << ")";
        throw ValidationError(os.str());
    };
    switch (w) {
        case ThresholdParameter::Delta:
            if (!(load < r && r < load + p.m_D() / 4.0)) fail("mu n/2 < rmax < mu n/2 + m_D/4");
            break;
        case ThresholdParameter::MD:
            if (!(load < r && r < load + p.delta())) fail("mu n/2 < rmax < mu n/2 + delta");
            break;
        case ThresholdParameter::Mu:
            if (!(r > 0.0)) fail("rmax > 0");
            break;
        default: break;
    }
}

}  // namespace detail

/// Bisection on the sign of lambda along one parameter, with the others held
/// fixed. lambda is increasing in delta, m_D and mu and decreasing in rmax, so
/// the root is unique. `eval` maps parameters to lambda (defaults to lambda_of).
inline ThresholdResult find_threshold(const ModelParams& p, ThresholdParameter which,
                                      std::pair<double, double> bracket_hint,
                                      const ThresholdSettings& set,
                                      const std::function<double(const ModelParams&)>& eval) {
    require(set.tol > 0.0, "find_threshold: tol must be > 0");
    require(bracket_hint.first < bracket_hint.second, "find_threshold: bracket must satisfy lo < hi");
    const bool positive_only = which != ThresholdParameter::Rmax;
    if (positive_only)
        require(bracket_hint.first >= 0.0, "find_threshold: bracket must be nonnegative for " + to_string(which));
    if (which == ThresholdParameter::Mu)
        require(bracket_hint.first > 0.0, "find_threshold: mu bracket must be positive");
    detail::check_existence(p, which);

    const double dir = which == ThresholdParameter::Rmax ? -1.0 : 1.0;
    auto lambda_at = [&](double v) { return eval(with_parameter(p, which, v)); };

    ThresholdResult res;
    res.parameter = which;
    double lo = bracket_hint.first, hi = bracket_hint.second;
    double flo = lambda_at(lo), fhi = lambda_at(hi);

    auto done = [&](double v, double f) {
        res.lo = lo;
        res.hi = hi;
        res.value = v;
        res.lambda_at_value = f;
        return res;
    };

    // grow the bracket until dir * lambda changes sign
    int expansions = 0;
    while (dir * fhi <= 0.0) {
        if (std::abs(fhi) <= set.tol) return done(hi, fhi);
        if (++expansions > set.max_expansions)
            throw ValidationError("find_threshold: lambda keeps the same sign up to " + to_string(which) +
                                  " = " + std::to_string(hi) + "; no threshold");
        const double width = hi - lo;
        lo = hi;
        flo = fhi;
        hi = positive_only ? 2.0 * hi : hi + 2.0 * width;
        fhi = lambda_at(hi);
    }
    expansions = 0;
    while (dir * flo >= 0.0) {
        if (std::abs(flo) <= set.tol) return done(lo, flo);
        if (++expansions > set.max_expansions)
            throw ValidationError("find_threshold: lambda keeps the same sign down to " + to_string(which) +
                                  " = " + std::to_string(lo) + "; no threshold");
        const double width = hi - lo;
        hi = lo;
        fhi = flo;
        if (which == ThresholdParameter::Mu) {
            lo = lo / 2.0;
        } else if (positive_only) {
            if (lo == 0.0)
                throw ValidationError("find_threshold: lambda has the same sign at " + to_string(which) +
                                      " = 0; no threshold");
            lo = 0.0;
        } else {
            lo = lo - 2.0 * width;
        }
        flo = lambda_at(lo);
    }

    for (int it = 1; it <= set.max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = lambda_at(mid);
        res.iterations = it;
        if (std::abs(f) <= set.tol) return done(mid, f);
        if (dir * f < 0.0) {
            lo = mid;
            flo = f;
        } else {
            hi = mid;
            fhi = f;
        }
    }
    throw NumericalError("find_threshold: no |lambda| <= " + std::to_string(set.tol) + " after " +
                         std::to_string(set.max_iterations) + " bisections (bracket [" + std::to_string(lo) +
                         ", " + std::to_string(hi) + "])");
}

inline ThresholdResult find_threshold(const ModelParams& p, ThresholdParameter which,
                                      std::pair<double, double> bracket_hint,
                                      const ThresholdSettings& set = {}) {
    const LimitSettings eig = set.eigen;
    return find_threshold(p, which, bracket_hint, set,
                          [eig](const ModelParams& q) { return lambda_of(q, eig); });
}

enum class Classification { Persist, Extinct, Critical };

inline std::string to_string(Classification c) {
    switch (c) {
        case Classification::Persist: return "persist";
        case Classification::Extinct: return "extinct";
        case Classification::Critical: return "critical";
    }
    return "?";
}

/// Sign rule with a dead band: |lambda| < tol is Critical.
inline Classification classify_lambda(double lambda, double tol = 1e-4) {
    if (lambda < -tol) return Classification::Persist;
    if (lambda > tol) return Classification::Extinct;
    return Classification::Critical;
}

inline Classification classify(const ModelParams& p, double tol = 1e-4, const LimitSettings& set = {}) {
    return classify_lambda(lambda_of(p, set), tol);
}

}  // namespace twopatch
