#pragma once

// Dense two-phase primal simplex for  min c'x  s.t.  A x = b,  x >= 0.
// Dantzig pricing, falling back to Bland's rule during degenerate stalls.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "humsearch/errors.hpp"

namespace humsearch::lp {

/// Row-major constraint matrix with right-hand side.
struct Problem {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;  // rows * cols
    std::vector<double> b;
    std::vector<double> c;

    Problem(std::size_t m, std::size_t n) : rows(m), cols(n), a(m * n, 0.0), b(m, 0.0), c(n, 0.0) {}

    double& at(std::size_t r, std::size_t col) { return a[r * cols + col]; }
    [[nodiscard]] double at(std::size_t r, std::size_t col) const { return a[r * cols + col]; }
};

struct Solution {
    std::vector<double> x;
    double objective = 0.0;
    std::size_t pivots = 0;
};

namespace detail {

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * (cols_ + 1) + c]; }
    double* row(std::size_t r) { return &data_[r * (cols_ + 1)]; }

    // Row `rows_` is the objective row; column `cols_` is the right-hand side.
    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }

    void pivot(std::size_t pr, std::size_t pc) {
        const std::size_t width = cols_ + 1;
        double* prow = row(pr);
        const double inv = 1.0 / prow[pc];
        for (std::size_t j = 0; j < width; ++j) prow[j] *= inv;
        prow[pc] = 1.0;
        nz_.clear();
        for (std::size_t j = 0; j < width; ++j)
            if (prow[j] != 0.0) nz_.push_back(j);
        for (std::size_t r = 0; r <= rows_; ++r) {
            if (r == pr) continue;
            double* rr = row(r);
            const double f = rr[pc];
            if (f == 0.0) continue;
            for (std::size_t j : nz_) rr[j] -= f * prow[j];
            rr[pc] = 0.0;
        }
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
    std::vector<std::size_t> nz_;
};

constexpr double kEps = 1e-11;

/// Runs simplex iterations on `t` over the columns flagged in `allowed`.
/// Returns false when the problem is unbounded.
inline bool iterate(Tableau& t, std::vector<std::size_t>& basis, const std::vector<char>& allowed,
                    std::size_t& pivots, std::size_t max_pivots) {
    const std::size_t m = t.rows();
    const std::size_t n = t.cols();
    std::size_t degenerate_run = 0;
    while (true) {
        const bool bland = degenerate_run > 50;
        std::size_t enter = n;
        double best = -kEps;
        for (std::size_t j = 0; j < n; ++j) {
            if (!allowed[j]) continue;
            const double rc = t(m, j);
            if (rc < best) {
                enter = j;
                if (bland) break;
                best = rc;
            }
        }
        if (enter == n) return true;

        std::size_t leave = m;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < m; ++r) {
            const double coef = t(r, enter);
            if (coef <= kEps) continue;
            const double ratio = t(r, n) / coef;
            if (ratio < best_ratio - 1e-14 ||
                (ratio <= best_ratio + 1e-14 && leave < m && basis[r] < basis[leave])) {
                best_ratio = std::min(ratio, best_ratio);
                leave = r;
            }
        }
        if (leave == m) return false;
        degenerate_run = best_ratio <= 1e-14 ? degenerate_run + 1 : 0;
        t.pivot(leave, enter);
        basis[leave] = enter;
        if (++pivots > max_pivots) throw LpFailure("simplex exceeded the pivot limit");
    }
}

}  // namespace detail

/// Solves the standard-form problem. Throws LpFailure when infeasible or unbounded.
inline Solution solve(const Problem& problem) {
    const std::size_t m = problem.rows;
    const std::size_t n = problem.cols;
    const std::size_t total = n + m;  // structural + artificial
    detail::Tableau t(m, total);

    for (std::size_t r = 0; r < m; ++r) {
        const double sign = problem.b[r] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) t(r, j) = sign * problem.at(r, j);
        t(r, n + r) = 1.0;
        t(r, total) = sign * problem.b[r];
    }
    std::vector<std::size_t> basis(m);
    for (std::size_t r = 0; r < m; ++r) basis[r] = n + r;

    // Phase 1: minimize the sum of artificials.
    for (std::size_t j = 0; j <= total; ++j) {
        if (j >= n && j < total) continue;
        double s = 0.0;
        for (std::size_t r = 0; r < m; ++r) s += t(r, j);
        t(m, j) = -s;
    }
    std::vector<char> allowed(total, 1);
    std::size_t pivots = 0;
    const std::size_t max_pivots = 50 * (m + n) + 1000;
    if (!detail::iterate(t, basis, allowed, pivots, max_pivots)) throw LpFailure("phase 1 unbounded");
    if (-t(m, total) > 1e-9) throw LpFailure("linear program is infeasible");

    // Drive remaining artificials out of the basis; rows that cannot pivot are redundant.
    for (std::size_t r = 0; r < m; ++r) {
        if (basis[r] < n) continue;
        std::size_t col = n;
        double best = 1e-9;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(t(r, j)) > best) {
                best = std::abs(t(r, j));
                col = j;
            }
        }
        if (col < n) {
            t.pivot(r, col);
            basis[r] = col;
            ++pivots;
        }
    }

    // Phase 2 objective row.
    for (std::size_t j = 0; j <= total; ++j) t(m, j) = j < n ? problem.c[j] : 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        if (basis[r] >= n) continue;
        const double cb = problem.c[basis[r]];
        if (cb == 0.0) continue;
        for (std::size_t j = 0; j <= total; ++j) t(m, j) -= cb * t(r, j);
    }
    for (std::size_t j = n; j < total; ++j) allowed[j] = 0;
    if (!detail::iterate(t, basis, allowed, pivots, max_pivots)) throw LpFailure("linear program is unbounded");

    Solution sol;
    sol.x.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        if (basis[r] < n) sol.x[basis[r]] = std::max(0.0, t(r, total));
    }
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) sol.objective += problem.c[j] * sol.x[j];
    sol.pivots = pivots;
    return sol;
}

}  // namespace humsearch::lp
