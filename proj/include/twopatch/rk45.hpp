#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "twopatch/error.hpp"

namespace twopatch {

/// Returned by post-step hooks.
struct PostAction {
    bool modified = false;  // state was changed in place (FSAL slope invalid)
    bool stop = false;      // end integration at the current time
};

struct StepControl {
    double rel_tol = 1e-6;
    double abs_tol = 1e-9;
    double dt_init = 1e-2;
    double dt_max = 1e30;
};

/// Dormand-Prince 5(4) embedded pair with FSAL and a PI step-size controller.
///
/// Rhs: void(double t, std::span<const double> y, std::span<double> dydt).
template <class Rhs>
class DormandPrince {
public:
    DormandPrince(std::size_t dim, Rhs rhs, StepControl ctl)
        : rhs_(std::move(rhs)), ctl_(ctl), dt_(ctl.dt_init), k_(7, std::vector<double>(dim)),
          tmp_(dim), ynew_(dim) {}

    double dt() const { return dt_; }
    std::size_t accepted() const { return accepted_; }
    std::size_t rejected() const { return rejected_; }

    /// Call after y was modified outside the integrator (clipping, renormalization).
    void invalidate() { fsal_valid_ = false; }

    /// Advances (t, y) to exactly t_target, or until post(t, y) asks to stop.
    /// Returns false if stopped early.
    template <class Post>
    bool advance(double& t, std::vector<double>& y, double t_target, Post&& post) {
        while (t < t_target) {
            const double remaining = t_target - t;
            double dt = std::min({dt_, remaining, ctl_.dt_max});
            const bool last = dt >= remaining * (1.0 - 1e-12);
            if (last) dt = remaining;
            if (dt < 1e-13 * std::max(1.0, std::abs(t)))
                throw NumericalError("step size underflow at t = " + std::to_string(t));

            const double err = attempt(t, y, dt);
            if (!std::isfinite(err))
                throw NumericalError("non-finite state encountered at t = " + std::to_string(t));
            if (err <= 1.0) {
                t = last ? t_target : t + dt;
                y.swap(ynew_);
                std::swap(k_[0], k_[6]);
                fsal_valid_ = true;
                ++accepted_;
                double fac = 0.9 * std::pow(std::max(err, 1e-10), -kAlpha) *
                             std::pow(err_prev_, kBeta);
                fac = std::clamp(fac, 0.2, 10.0);
                if (rejected_last_) fac = std::min(fac, 1.0);
                // Do not let a short final step shrink the next interval.
                if (!last || fac * dt > dt_) dt_ = dt * fac;
                err_prev_ = std::max(err, 1e-4);
                rejected_last_ = false;
                const PostAction act = post(t, y);
                if (act.modified) fsal_valid_ = false;
                if (act.stop) return false;
            } else {
                ++rejected_;
                dt_ = dt * std::max(0.2, 0.9 * std::pow(err, -0.2));
                rejected_last_ = true;
            }
        }
        return true;
    }

private:
    static constexpr double kAlpha = 0.7 / 5.0;
    static constexpr double kBeta = 0.4 / 5.0;

    double attempt(double t, const std::vector<double>& y, double dt) {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                                a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                                a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                                b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                                e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

        const std::size_t n = y.size();
        auto& k1 = k_[0];
        auto& k2 = k_[1];
        auto& k3 = k_[2];
        auto& k4 = k_[3];
        auto& k5 = k_[4];
        auto& k6 = k_[5];
        auto& k7 = k_[6];
        if (!fsal_valid_) {
            rhs_(t, y, k1);
            fsal_valid_ = true;
        }
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + dt * a21 * k1[i];
        rhs_(t + c2 * dt, tmp_, k2);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + dt * (a31 * k1[i] + a32 * k2[i]);
        rhs_(t + c3 * dt, tmp_, k3);
        for (std::size_t i = 0; i < n; ++i)
            tmp_[i] = y[i] + dt * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs_(t + c4 * dt, tmp_, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp_[i] = y[i] + dt * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs_(t + c5 * dt, tmp_, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp_[i] = y[i] + dt * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                   a65 * k5[i]);
        rhs_(t + dt, tmp_, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew_[i] = y[i] + dt * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                                    b6 * k6[i]);
        rhs_(t + dt, ynew_, k7);

        // max norm: every component stays within its own tolerance
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = dt * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                   e6 * k6[i] + e7 * k7[i]);
            const double sc =
                ctl_.abs_tol + ctl_.rel_tol * std::max(std::abs(y[i]), std::abs(ynew_[i]));
            worst = std::max(worst, std::abs(e) / sc);
        }
        return worst;
    }

    Rhs rhs_;
    StepControl ctl_;
    double dt_;
    double err_prev_ = 1.0;
    bool rejected_last_ = false;
    bool fsal_valid_ = false;
    std::size_t accepted_ = 0;
    std::size_t rejected_ = 0;
    std::vector<std::vector<double>> k_;
    std::vector<double> tmp_;
    std::vector<double> ynew_;
};

}  // namespace twopatch
