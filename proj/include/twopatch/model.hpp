#pragma once

#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "twopatch/error.hpp"

namespace twopatch {

using Phenotype = std::vector<double>;

enum class Growth { Malthusian, Logistic };

enum class Habitat : int { First = 1, Second = 2 };

/// Equal exchange rate in both directions.
struct SymmetricMigration {
    double delta = 0.0;
};

/// du1 += -d11 u1 + d12 u2,  du2 += d21 u1 - d22 u2.
struct GeneralMigration {
    double d11 = 0.0;
    double d12 = 0.0;
    double d21 = 0.0;
    double d22 = 0.0;
};

using Migration = std::variant<SymmetricMigration, GeneralMigration>;

/// m_D = 2 beta^2.
inline double habitat_difference(double beta) {
    require(std::isfinite(beta) && beta >= 0.0, "habitat_difference: beta must be >= 0");
    return 2.0 * beta * beta;
}

inline double beta_of(double m_D) {
    require(std::isfinite(m_D) && m_D >= 0.0, "beta_of: m_D must be >= 0");
    return std::sqrt(m_D / 2.0);
}

/// Half-distance between two arbitrary optima; the model frame puts them at
/// (-beta, 0, ...) and (beta, 0, ...).
inline double normalized_beta(std::span<const double> o1, std::span<const double> o2) {
    require(o1.size() == o2.size() && !o1.empty(), "normalized_beta: optima dimension mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < o1.size(); ++k) s += (o1[k] - o2[k]) * (o1[k] - o2[k]);
    return 0.5 * std::sqrt(s);
}

/// Validated, immutable parameter bundle for the two-patch model.
///
/// The optima are stored through beta only, so m_D = 2 beta^2 holds by
/// construction. Logistic growth is only defined for symmetric migration with
/// equal peak fitness.
class ModelParams {
public:
    ModelParams(int n, double mu, double rmax1, double rmax2, double beta, Migration migration,
                Growth growth = Growth::Malthusian)
        : n_(n), mu_(mu), rmax1_(rmax1), rmax2_(rmax2), beta_(beta), migration_(migration),
          growth_(growth) {
        validate();
    }

    static ModelParams symmetric(int n, double mu, double rmax, double m_D, double delta,
                                 Growth growth = Growth::Malthusian) {
        return ModelParams(n, mu, rmax, rmax, beta_of(m_D), SymmetricMigration{delta}, growth);
    }

    static ModelParams general(int n, double mu, double rmax1, double rmax2, double m_D,
                               GeneralMigration rates) {
        return ModelParams(n, mu, rmax1, rmax2, beta_of(m_D), rates, Growth::Malthusian);
    }

    int n() const { return n_; }
    double mu() const { return mu_; }
    double rmax1() const { return rmax1_; }
    double rmax2() const { return rmax2_; }
    double rmax(Habitat h) const { return h == Habitat::First ? rmax1_ : rmax2_; }
    double beta() const { return beta_; }
    double m_D() const { return 2.0 * beta_ * beta_; }
    Growth growth() const { return growth_; }
    const Migration& migration() const { return migration_; }

    bool is_symmetric() const {
        return std::holds_alternative<SymmetricMigration>(migration_) && rmax1_ == rmax2_;
    }

    /// Symmetric rate; throws for general migration.
    double delta() const {
        const auto* s = std::get_if<SymmetricMigration>(&migration_);
        require(s != nullptr, "ModelParams::delta: migration is not symmetric");
        return s->delta;
    }

    /// Coupling rates in the general layout (symmetric mode expands to all-delta).
    GeneralMigration rates() const {
        if (const auto* s = std::get_if<SymmetricMigration>(&migration_))
            return {s->delta, s->delta, s->delta, s->delta};
        return std::get<GeneralMigration>(migration_);
    }

    /// O_i, located on the x1 axis.
    Phenotype optimum(Habitat h) const {
        Phenotype o(static_cast<std::size_t>(n_), 0.0);
        o[0] = h == Habitat::First ? -beta_ : beta_;
        return o;
    }

    ModelParams with_delta(double delta) const {
        require(std::holds_alternative<SymmetricMigration>(migration_),
                "with_delta: migration is not symmetric");
        ModelParams p = *this;
        p.migration_ = SymmetricMigration{delta};
        p.validate();
        return p;
    }
    ModelParams with_m_D(double m_D) const {
        ModelParams p = *this;
        p.beta_ = beta_of(m_D);
        p.validate();
        return p;
    }
    ModelParams with_mu(double mu) const {
        ModelParams p = *this;
        p.mu_ = mu;
        p.validate();
        return p;
    }
    /// Sets both peaks (they stay equal if they were equal).
    ModelParams with_rmax(double rmax) const {
        ModelParams p = *this;
        const double shift = rmax - rmax1_;
        p.rmax1_ = rmax;
        p.rmax2_ = rmax2_ + shift;
        p.validate();
        return p;
    }
    ModelParams with_growth(Growth g) const {
        ModelParams p = *this;
        p.growth_ = g;
        p.validate();
        return p;
    }

    bool operator==(const ModelParams& o) const {
        if (n_ != o.n_ || mu_ != o.mu_ || rmax1_ != o.rmax1_ || rmax2_ != o.rmax2_ ||
            beta_ != o.beta_ || growth_ != o.growth_ || migration_.index() != o.migration_.index())
            return false;
        const auto a = rates();
        const auto b = o.rates();
        return a.d11 == b.d11 && a.d12 == b.d12 && a.d21 == b.d21 && a.d22 == b.d22;
    }

private:
    void validate() const {
        require(n_ >= 1, "ModelParams: n must be >= 1");
        require(std::isfinite(mu_) && mu_ > 0.0, "ModelParams: mu must be > 0");
        require(std::isfinite(rmax1_) && std::isfinite(rmax2_), "ModelParams: rmax must be finite");
        require(std::isfinite(beta_) && beta_ >= 0.0, "ModelParams: beta must be >= 0");
        if (const auto* s = std::get_if<SymmetricMigration>(&migration_)) {
            require(std::isfinite(s->delta) && s->delta >= 0.0,
                    "ModelParams: delta must be >= 0");
        } else {
            const auto& g = std::get<GeneralMigration>(migration_);
            for (double d : {g.d11, g.d12, g.d21, g.d22})
                require(std::isfinite(d) && d > 0.0, "ModelParams: general rates must be > 0");
        }
        if (growth_ == Growth::Logistic) {
            require(std::holds_alternative<SymmetricMigration>(migration_),
                    "ModelParams: logistic growth requires symmetric migration");
            require(rmax1_ == rmax2_, "ModelParams: logistic growth requires rmax1 == rmax2");
        }
    }

    int n_;
    double mu_;
    double rmax1_;
    double rmax2_;
    double beta_;
    Migration migration_;
    Growth growth_;
};

/// Squared distance to O_i without allocating the optimum.
inline double squared_distance_to_optimum(const ModelParams& p, Habitat h,
                                          std::span<const double> x) {
    const double o = h == Habitat::First ? -p.beta() : p.beta();
    double s = (x[0] - o) * (x[0] - o);
    for (std::size_t k = 1; k < x.size(); ++k) s += x[k] * x[k];
    return s;
}

/// r_i(x) = rmax_i - |x - O_i|^2 / 2.
inline double fitness(const ModelParams& p, Habitat h, std::span<const double> x) {
    require(x.size() == static_cast<std::size_t>(p.n()), "fitness: phenotype dimension mismatch");
    return p.rmax(h) - 0.5 * squared_distance_to_optimum(p, h, x);
}

/// iota(x) = (-x1, x2, ..., xn).
inline Phenotype reflect(std::span<const double> x) {
    Phenotype y(x.begin(), x.end());
    if (!y.empty()) y[0] = -y[0];
    return y;
}

}  // namespace twopatch
