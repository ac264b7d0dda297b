#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "pks/errors.hpp"

namespace pks {

/// Outcome of the phase-1 feasibility solve for {Ax = b, x >= 0}.
struct FeasibilityResult {
    /// Minimum attainable sum of artificial variables: the least total
    /// absolute violation of the equalities over the nonnegative orthant.
    double objective = 0.0;
    std::vector<double> solution;    ///< basic solution for the structural variables
    std::vector<double> artificials; ///< residual artificial value per input row
};

namespace detail {

/// Dense phase-1 simplex with Bland's rule (anti-cycling). Rows arrive
/// sparse; the tableau is dense, so callers must keep instances at desk
/// scale (the cell guard below enforces this).
class Phase1Simplex {
public:
    Phase1Simplex(std::size_t variables,
                  const std::vector<std::vector<std::pair<std::size_t, double>>>& rows,
                  const std::vector<double>& rhs)
        : n_(variables), m_(rows.size()), width_(variables + rows.size() + 1) {
        if (m_ != rhs.size()) throw domain_error("row/rhs count mismatch");
        if (m_ * width_ > (std::size_t{1} << 24))
            throw capacity_error("feasibility tableau would need " +
                                 std::to_string(m_ * width_) + " cells; instance too large");
        tableau_.assign(m_ * width_, 0.0);
        basis_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            const double sign = rhs[i] < 0.0 ? -1.0 : 1.0;
            for (auto [j, c] : rows[i]) {
                if (j >= n_) throw domain_error("constraint references unknown variable");
                at(i, j) += sign * c;
            }
            at(i, n_ + i) = 1.0;
            at(i, width_ - 1) = sign * rhs[i];
            basis_[i] = n_ + i;
        }
        objective_.assign(width_, 0.0);
        for (std::size_t j = 0; j < width_; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m_; ++i) s += at(i, j);
            objective_[j] = (j >= n_ && j + 1 < width_ ? 1.0 : 0.0) - s;
        }
    }

    FeasibilityResult solve() {
        const std::size_t pivot_budget = 200000 + 200 * (n_ + m_);
        for (std::size_t pivots = 0;; ++pivots) {
            if (pivots > pivot_budget)
                throw capacity_error("feasibility pivot budget exhausted");
            std::size_t enter = width_;
            for (std::size_t j = 0; j + 1 < width_; ++j)
                if (objective_[j] < -kCostTol) {
                    enter = j;
                    break;
                }
            if (enter == width_) break;
            std::size_t leave = m_;
            double best_ratio = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = at(i, enter);
                if (a <= kPivotTol) continue;
                const double ratio = at(i, width_ - 1) / a;
                if (leave == m_ || ratio < best_ratio ||
                    (ratio == best_ratio && basis_[i] < basis_[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            if (leave == m_)
                throw domain_error("phase-1 objective unbounded below; malformed constraints");
            pivot(leave, enter);
        }
        FeasibilityResult out;
        out.objective = -objective_[width_ - 1];
        if (out.objective <= 0.0) out.objective = 0.0;
        out.solution.assign(n_, 0.0);
        out.artificials.assign(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const double value = at(i, width_ - 1);
            if (basis_[i] < n_)
                out.solution[basis_[i]] = value;
            else
                out.artificials[basis_[i] - n_] = value;
        }
        return out;
    }

private:
    static constexpr double kPivotTol = 1e-11;
    static constexpr double kCostTol = 1e-9;

    double& at(std::size_t i, std::size_t j) { return tableau_[i * width_ + j]; }
    double at(std::size_t i, std::size_t j) const { return tableau_[i * width_ + j]; }

    void pivot(std::size_t r, std::size_t c) {
        const double p = at(r, c);
        for (std::size_t j = 0; j < width_; ++j) at(r, j) /= p;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) continue;
            const double f = at(i, c);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < width_; ++j) at(i, j) -= f * at(r, j);
            at(i, c) = 0.0;
        }
        const double f = objective_[c];
        if (f != 0.0)
            for (std::size_t j = 0; j < width_; ++j) objective_[j] -= f * at(r, j);
        objective_[c] = 0.0;
        basis_[r] = c;
    }

    std::size_t n_, m_, width_;
    std::vector<double> tableau_;
    std::vector<double> objective_;
    std::vector<std::size_t> basis_;
};

} // namespace detail

/// Least-violation solve for {Ax = b, x >= 0}: objective 0 (within
/// tolerance) means feasible and `solution` is a feasible basic point.
inline FeasibilityResult
feasibility(std::size_t variables,
            const std::vector<std::vector<std::pair<std::size_t, double>>>& rows,
            const std::vector<double>& rhs) {
    return detail::Phase1Simplex(variables, rows, rhs).solve();
}

} // namespace pks
