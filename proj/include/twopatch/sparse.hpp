#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "twopatch/error.hpp"

namespace twopatch {

/// Compressed sparse row matrix, built row by row.
class CsrMatrix {
public:
    CsrMatrix() = default;
    explicit CsrMatrix(std::size_t rows) : rows_(rows) { row_ptr_.reserve(rows + 1); row_ptr_.push_back(0); }

    /// Appends an entry to the row currently being built; duplicates are summed.
    void add(std::size_t col, double value) {
        const std::size_t begin = row_ptr_.back();
        for (std::size_t k = begin; k < col_.size(); ++k) {
            if (col_[k] == col) {
                val_[k] += value;
                return;
            }
        }
        col_.push_back(static_cast<std::uint32_t>(col));
        val_.push_back(value);
    }
    void finish_row() { row_ptr_.push_back(col_.size()); }

    std::size_t rows() const { return rows_; }
    std::size_t nonzeros() const { return val_.size(); }

    double at(std::size_t r, std::size_t c) const {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            if (col_[k] == c) return val_[k];
        return 0.0;
    }

    /// y = M x + shift * x
    void multiply(std::span<const double> x, std::span<double> y, double shift = 0.0) const {
        for (std::size_t r = 0; r < rows_; ++r) {
            double s = shift * x[r];
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += val_[k] * x[col_[k]];
            y[r] = s;
        }
    }

    bool is_symmetric(double tol = 0.0) const {
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
                if (std::abs(val_[k] - at(col_[k], r)) > tol) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> col_;
    std::vector<double> val_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Exact inverse of the 2x2 blocks {i, partner[i]} of (M + shift I).
///
/// Pairs each unknown with the one it is directly coupled to by migration,
/// which removes the large coupling term from the conditioning of CG.
class PairBlockPreconditioner {
public:
    PairBlockPreconditioner(const CsrMatrix& m, std::span<const std::size_t> partner, double shift)
        : partner_(partner.begin(), partner.end()), inv_(4 * m.rows()) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const std::size_t p = partner_[i];
            if (p == i) {
                inv_[4 * i] = 1.0 / (m.at(i, i) + shift);
                continue;
            }
            if (p < i) continue;
            const double a = m.at(i, i) + shift, b = m.at(i, p);
            const double c = m.at(p, i), d = m.at(p, p) + shift;
            const double det = a * d - b * c;
            if (!(det > 0.0) || !(a > 0.0))
                throw NumericalError("preconditioner block is not positive definite");
            inv_[4 * i + 0] = d / det;
            inv_[4 * i + 1] = -b / det;
            inv_[4 * i + 2] = -c / det;
            inv_[4 * i + 3] = a / det;
        }
    }

    void apply(std::span<const double> r, std::span<double> z) const {
        for (std::size_t i = 0; i < partner_.size(); ++i) {
            const std::size_t p = partner_[i];
            if (p == i) {
                z[i] = inv_[4 * i] * r[i];
            } else if (p > i) {
                const double* b = &inv_[4 * i];
                z[i] = b[0] * r[i] + b[1] * r[p];
                z[p] = b[2] * r[i] + b[3] * r[p];
            }
        }
    }

private:
    std::vector<std::size_t> partner_;
    std::vector<double> inv_;
};

struct CgStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Preconditioned conjugate gradients for (M + shift I) x = b, x holds the initial guess.
/// Throws NumericalError when a non-positive curvature direction is met.
inline CgStats conjugate_gradient(const CsrMatrix& m, double shift, const PairBlockPreconditioner& pc,
                                  std::span<const double> b, std::span<double> x, double rel_tol,
                                  int max_iterations) {
    const std::size_t n = b.size();
    std::vector<double> r(n), z(n), p(n), q(n);
    m.multiply(x, q, shift);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    const double bnorm = norm2(b);
    CgStats st;
    if (bnorm == 0.0) {
        for (auto& v : x) v = 0.0;
        return st;
    }
    double rnorm = norm2(r);
    if (rnorm <= rel_tol * bnorm) {
        st.relative_residual = rnorm / bnorm;
        return st;
    }
    pc.apply(r, z);
    p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= max_iterations; ++it) {
        m.multiply(p, q, shift);
        const double pq = dot(p, q);
        if (!(pq > 0.0))
            throw NumericalError("shifted operator is not positive definite (invalid lower bound?)");
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rnorm = norm2(r);
        st.iterations = it;
        st.relative_residual = rnorm / bnorm;
        if (rnorm <= rel_tol * bnorm) return st;
        pc.apply(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return st;
}

}  // namespace twopatch
