#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "twopatch/error.hpp"

namespace twopatch {

/// Tensor grid on [-L, L]^n, n in {1, 2}, m nodes per axis (m odd).
///
/// Node (i, j) has coordinates (-L + i h, -L + j h) and flat index i * m + j,
/// so x1 is the slow axis. Because m is odd, x1 = 0 is a node row and the
/// reflection iota maps row i to row m - 1 - i.
class Grid {
public:
    Grid() : Grid(1, 1.0, 3) {}
    Grid(int n, double L, int m) : n_(n), m_(m), L_(L) {
        require(n == 1 || n == 2, "Grid: only n = 1 or n = 2 is supported");
        require(m >= 3 && m % 2 == 1, "Grid: m must be odd and >= 3");
        require(std::isfinite(L) && L > 0.0, "Grid: L must be > 0");
        h_ = 2.0 * L / static_cast<double>(m - 1);
        size_ = n == 1 ? static_cast<std::size_t>(m) : static_cast<std::size_t>(m) * m;
    }

    int n() const { return n_; }
    int m() const { return m_; }
    double L() const { return L_; }
    double h() const { return h_; }
    std::size_t size() const { return size_; }

    /// -L + k h, evaluated as (k - c) h with c the centre index so that
    /// coord(m - 1 - k) == -coord(k) bitwise.
    double coord(int k) const { return static_cast<double>(k - (m_ - 1) / 2) * h_; }

    /// Row index along x1 and, for n = 2, column index along x2.
    std::array<int, 2> multi_index(std::size_t idx) const {
        if (n_ == 1) return {static_cast<int>(idx), 0};
        return {static_cast<int>(idx / m_), static_cast<int>(idx % m_)};
    }

    void node(std::size_t idx, std::span<double> x) const {
        const auto [i, j] = multi_index(idx);
        x[0] = coord(i);
        if (n_ == 2) x[1] = coord(j);
    }

    std::vector<double> node(std::size_t idx) const {
        std::vector<double> x(static_cast<std::size_t>(n_));
        node(idx, x);
        return x;
    }

    std::size_t reflect_index(std::size_t idx) const {
        if (n_ == 1) return static_cast<std::size_t>(m_ - 1) - idx;
        const auto [i, j] = multi_index(idx);
        return static_cast<std::size_t>(m_ - 1 - i) * m_ + j;
    }

    /// Nearest node index for a coordinate along one axis, or -1 outside the box.
    int axis_index(double x) const {
        const double k = (x + L_) / h_;
        const long r = std::lround(k);
        if (r < 0 || r >= m_) return -1;
        return static_cast<int>(r);
    }

    bool is_boundary(std::size_t idx) const {
        const auto [i, j] = multi_index(idx);
        if (i == 0 || i == m_ - 1) return true;
        return n_ == 2 && (j == 0 || j == m_ - 1);
    }

    bool operator==(const Grid& o) const { return n_ == o.n_ && m_ == o.m_ && L_ == o.L_; }

private:
    int n_;
    int m_;
    double L_;
    double h_;
    std::size_t size_;
};

inline Grid build_grid(int n, double L, int m) { return Grid(n, L, m); }

using Field = std::vector<double>;

/// Two-component nodal field (u1, u2) stored contiguously: u1 then u2.
class Field2 {
public:
    Field2() = default;
    explicit Field2(std::size_t nodes, double value = 0.0) : nodes_(nodes), data_(2 * nodes, value) {}
    Field2(std::span<const double> u1, std::span<const double> u2) : nodes_(u1.size()) {
        require(u1.size() == u2.size(), "Field2: component size mismatch");
        data_.reserve(2 * nodes_);
        data_.insert(data_.end(), u1.begin(), u1.end());
        data_.insert(data_.end(), u2.begin(), u2.end());
    }

    std::size_t nodes() const { return nodes_; }
    std::span<double> u1() { return {data_.data(), nodes_}; }
    std::span<double> u2() { return {data_.data() + nodes_, nodes_}; }
    std::span<const double> u1() const { return {data_.data(), nodes_}; }
    std::span<const double> u2() const { return {data_.data() + nodes_, nodes_}; }
    std::span<double> component(int i) { return i == 0 ? u1() : u2(); }
    std::span<const double> component(int i) const { return i == 0 ? u1() : u2(); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t nodes_ = 0;
    std::vector<double> data_;
};

inline void check_size(const Grid& g, std::span<const double> f, const char* who) {
    if (f.size() != g.size()) throw ValidationError(std::string(who) + ": field size does not match grid");
}

/// out = scale * Laplacian(f), 2n+1-point stencil with zero ghosts outside the box.
inline void laplacian_into(const Grid& g, std::span<const double> f, std::span<double> out,
                           double scale = 1.0) {
    check_size(g, f, "laplacian");
    check_size(g, out, "laplacian");
    const int m = g.m();
    const double c = scale / (g.h() * g.h());
    if (g.n() == 1) {
        for (int i = 0; i < m; ++i) {
            const double left = i > 0 ? f[i - 1] : 0.0;
            const double right = i < m - 1 ? f[i + 1] : 0.0;
            out[i] = c * ((left + right) - 2.0 * f[i]);
        }
        return;
    }
    for (int i = 0; i < m; ++i) {
        const double* row = f.data() + static_cast<std::size_t>(i) * m;
        const double* up = i > 0 ? row - m : nullptr;
        const double* down = i < m - 1 ? row + m : nullptr;
        double* o = out.data() + static_cast<std::size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double a = up ? up[j] : 0.0;
            const double b = down ? down[j] : 0.0;
            const double l = j > 0 ? row[j - 1] : 0.0;
            const double r = j < m - 1 ? row[j + 1] : 0.0;
            o[j] = c * (((a + b) - 2.0 * row[j]) + ((l + r) - 2.0 * row[j]));
        }
    }
}

inline Field laplacian(const Grid& g, std::span<const double> f) {
    Field out(f.size());
    laplacian_into(g, f, out);
    return out;
}

/// Tensor trapezoidal rule over [-L, L]^n.
///
/// Rows i and m-1-i are added pairwise so that the result is bitwise invariant
/// under reflect_field.
inline double integrate(const Grid& g, std::span<const double> f) {
    check_size(g, f, "integrate");
    const int m = g.m();
    const double h = g.h();
    auto w = [m](int k) { return (k == 0 || k == m - 1) ? 0.5 : 1.0; };
    auto row_sum = [&](int i) {
        if (g.n() == 1) return f[static_cast<std::size_t>(i)];
        const double* row = f.data() + static_cast<std::size_t>(i) * m;
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += w(j) * row[j];
        return s * h;
    };
    const int c = (m - 1) / 2;
    double s = 0.0;
    for (int i = 0; i < c; ++i) s += w(i) * (row_sum(i) + row_sum(m - 1 - i));
    s += w(c) * row_sum(c);
    return s * h;
}

/// f'(x) = f(iota(x)) by index permutation.
inline Field reflect_field(const Grid& g, std::span<const double> f) {
    check_size(g, f, "reflect_field");
    Field out(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = f[g.reflect_index(k)];
    return out;
}

/// Samples fn(x) at every node.
template <class Fn>
Field sample(const Grid& g, Fn&& fn) {
    Field out(g.size());
    std::vector<double> x(static_cast<std::size_t>(g.n()));
    for (std::size_t k = 0; k < g.size(); ++k) {
        g.node(k, x);
        out[k] = fn(std::span<const double>(x));
    }
    return out;
}

inline double sup_norm(std::span<const double> f) {
    double s = 0.0;
    for (double v : f) s = std::max(s, std::abs(v));
    return s;
}

}  // namespace twopatch
