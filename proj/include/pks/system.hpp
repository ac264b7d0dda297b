#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pks/distribution.hpp"
#include "pks/errors.hpp"
#include "pks/event_space.hpp"
#include "pks/structure.hpp"

namespace pks {

/// A component together with its probability table. Shape invariants
/// (member lists and sizes) are enforced on construction; numeric ones
/// (row sums, signs) are left to validate() so ill-formed tables can be
/// loaded and reported instead of rejected blindly.
struct ComponentTable {
    Component component;
    std::variant<MarginalTable, ConditionalTable> table;

    const MarginalTable& marginal() const { return std::get<MarginalTable>(table); }
    const ConditionalTable& conditional() const { return std::get<ConditionalTable>(table); }

    friend bool operator==(const ComponentTable&, const ComponentTable&) = default;
};

struct Violation {
    std::size_t entry = 0; ///< index into the system's entries
    std::string message;
};

class ProbabilitySystem {
public:
    ProbabilitySystem(EventSpace space, std::vector<ComponentTable> entries)
        : space_(std::move(space)), entries_(std::move(entries)) {
        std::vector<Component> components;
        components.reserve(entries_.size());
        for (const auto& e : entries_) components.push_back(e.component);
        structure_.emplace(space_, std::move(components));
        for (std::size_t i = 0; i < entries_.size(); ++i) check_shape(i);
    }

    const EventSpace& space() const noexcept { return space_; }
    const std::vector<ComponentTable>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const ComponentTable& operator[](std::size_t i) const { return entries_.at(i); }
    const Structure& structure() const noexcept { return *structure_; }

    /// Subsystem keeping the entries selected by `mask`, original order.
    ProbabilitySystem select(std::uint64_t mask) const {
        std::vector<ComponentTable> kept;
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if ((mask >> i) & 1u) kept.push_back(entries_[i]);
        return ProbabilitySystem(space_, std::move(kept));
    }

private:
    void check_shape(std::size_t i) const {
        const auto& e = entries_[i];
        const std::string where = "entry " + std::to_string(i) + " " +
                                  e.component.label(space_);
        if (e.component.is_absolute() != std::holds_alternative<MarginalTable>(e.table))
            throw domain_error(where + ": table kind does not match component kind");
        if (e.component.is_absolute()) {
            const auto& t = e.marginal();
            if (t.members != e.component.targets())
                throw domain_error(where + ": table members differ from component targets");
            if (t.arities != arities_of(t.members))
                throw domain_error(where + ": table arities differ from the event space");
            if (t.probabilities.size() != t.states())
                throw domain_error(where + ": table has " +
                                   std::to_string(t.probabilities.size()) + " entries, expected " +
                                   std::to_string(t.states()));
        } else {
            const auto& t = e.conditional();
            if (t.targets != e.component.targets() || t.givens != e.component.givens())
                throw domain_error(where + ": table members differ from component targets/givens");
            if (t.target_arities != arities_of(t.targets) || t.given_arities != arities_of(t.givens))
                throw domain_error(where + ": table arities differ from the event space");
            if (t.rows.size() != t.given_states())
                throw domain_error(where + ": table has " + std::to_string(t.rows.size()) +
                                   " rows, expected " + std::to_string(t.given_states()));
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                if (!t.rows[r])
                    throw domain_error(where + ": row " + std::to_string(r) + " is undefined");
                if (t.rows[r]->size() != t.target_states())
                    throw domain_error(where + ": row " + std::to_string(r) + " has " +
                                       std::to_string(t.rows[r]->size()) + " entries, expected " +
                                       std::to_string(t.target_states()));
            }
        }
    }

    std::vector<int> arities_of(const std::vector<std::size_t>& members) const {
        std::vector<int> a;
        a.reserve(members.size());
        for (std::size_t m : members) a.push_back(space_.arity(m));
        return a;
    }

    EventSpace space_;
    std::vector<ComponentTable> entries_;
    std::optional<Structure> structure_;
};

/// Numeric table checks: entries in [0,1], rows summing to 1 within tol.
inline std::vector<Violation> validate(const ProbabilitySystem& pc, double tol = 1e-9) {
    std::vector<Violation> out;
    auto check_row = [&](std::size_t entry, const std::string& where,
                         std::span<const double> row) {
        double sum = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (!(row[i] >= 0.0))
                out.push_back({entry, where + ": negative entry " + std::to_string(row[i]) +
                                          " at state " + std::to_string(i)});
            else if (row[i] > 1.0 + tol)
                out.push_back({entry, where + ": entry " + std::to_string(row[i]) +
                                          " exceeds 1 at state " + std::to_string(i)});
            sum += row[i];
        }
        if (std::abs(sum - 1.0) > tol)
            out.push_back({entry, where + ": sum " + std::to_string(sum) + " differs from 1"});
    };
    for (std::size_t i = 0; i < pc.size(); ++i) {
        const auto& e = pc[i];
        const std::string label = e.component.label(pc.space());
        if (e.component.is_absolute()) {
            check_row(i, label, e.marginal().probabilities);
        } else {
            const auto& t = e.conditional();
            for (std::size_t r = 0; r < t.rows.size(); ++r)
                check_row(i, label + " row " + std::to_string(r), *t.rows[r]);
        }
    }
    return out;
}

namespace detail {

/// Calls fn(joint_index) for every joint state whose restriction to
/// `members` equals the given member assignment (by member-lattice index).
template <typename Fn>
void for_each_matching(const EventSpace& space, const std::vector<std::size_t>& members,
                       std::size_t member_index, Fn&& fn) {
    std::vector<int> assignment(members.size());
    std::size_t rem = member_index;
    for (std::size_t k = members.size(); k-- > 0;) {
        const int arity = space.arity(members[k]);
        assignment[k] = static_cast<int>(rem % static_cast<std::size_t>(arity));
        rem /= static_cast<std::size_t>(arity);
    }
    const std::size_t total = space.joint_states();
    for (std::size_t x = 0; x < total; ++x) {
        bool match = true;
        for (std::size_t k = 0; k < members.size() && match; ++k)
            if (space.state_of(x, members[k]) != assignment[k]) match = false;
        if (match) fn(x);
    }
}

inline std::string member_state_label(const EventSpace& space,
                                      const std::vector<std::size_t>& members,
                                      std::size_t member_index) {
    std::vector<int> assignment(members.size());
    std::size_t rem = member_index;
    for (std::size_t k = members.size(); k-- > 0;) {
        const int arity = space.arity(members[k]);
        assignment[k] = static_cast<int>(rem % static_cast<std::size_t>(arity));
        rem /= static_cast<std::size_t>(arity);
    }
    std::string s;
    for (std::size_t k = 0; k < members.size(); ++k) {
        if (k) s += ",";
        s += space.name(members[k]) + "=" + std::to_string(assignment[k]);
    }
    return s;
}

} // namespace detail

struct CompatibilityReport {
    bool compatible = false;
    double max_residual = 0.0;
    std::string worst; ///< label of the constraint attaining max_residual
    /// Conditional rows whose denominator fell below tol; they are counted
    /// as satisfied (their homogeneous residual is below tol by normalization).
    std::vector<std::string> vacuous_rows;
};

/// Checks every table entry against p. Absolute entries compare the summed
/// marginal; conditional entries use the homogeneous residual
/// |P(z,w) - c * P(w)|, which stays defined when P(w) = 0.
inline CompatibilityReport compatible(const JointDistribution& p, const ProbabilitySystem& pc,
                                      double tol) {
    if (!(p.space() == pc.space()))
        throw domain_error("distribution and system use different event spaces");
    if (!(tol > 0.0)) throw domain_error("tolerance must be positive");
    const EventSpace& space = pc.space();
    CompatibilityReport rep;
    auto note = [&](double residual, const std::string& label) {
        if (residual > rep.max_residual) {
            rep.max_residual = residual;
            rep.worst = label;
        }
    };
    for (std::size_t i = 0; i < pc.size(); ++i) {
        const auto& e = pc[i];
        const std::string label = e.component.label(space);
        if (e.component.is_absolute()) {
            const auto& t = e.marginal();
            for (std::size_t y = 0; y < t.probabilities.size(); ++y) {
                double sum = 0.0;
                detail::for_each_matching(space, t.members, y, [&](std::size_t x) {
                    sum += p[x];
                });
                note(std::abs(sum - t.probabilities[y]),
                     label + "[" + detail::member_state_label(space, t.members, y) + "]");
            }
        } else {
            const auto& t = e.conditional();
            std::vector<std::size_t> all = t.targets;
            all.insert(all.end(), t.givens.begin(), t.givens.end());
            const std::size_t zs = t.target_states();
            for (std::size_t w = 0; w < t.rows.size(); ++w) {
                double den = 0.0;
                detail::for_each_matching(space, t.givens, w, [&](std::size_t x) {
                    den += p[x];
                });
                const std::string wlab = detail::member_state_label(space, t.givens, w);
                if (den < tol) {
                    rep.vacuous_rows.push_back(label + " given " + wlab);
                    continue;
                }
                for (std::size_t z = 0; z < zs; ++z) {
                    double num = 0.0;
                    detail::for_each_matching(space, all, z * t.rows.size() + w, [&](std::size_t x) {
                        num += p[x];
                    });
                    note(std::abs(num - (*t.rows[w])[z] * den),
                         label + "[" + detail::member_state_label(space, t.targets, z) +
                             " given " + wlab + "]");
                }
            }
        }
    }
    rep.compatible = rep.max_residual <= tol;
    return rep;
}

struct ConstraintRow {
    std::vector<std::pair<std::size_t, double>> coefficients; ///< sparse (variable, weight)
    double rhs = 0.0;
    std::string tag; ///< component and component-state that generated the row
    static constexpr std::size_t normalization_entry = static_cast<std::size_t>(-1);
    std::size_t entry = normalization_entry; ///< system entry index

    double evaluate(std::span<const double> p) const {
        double lhs = 0.0;
        for (auto [x, c] : coefficients) lhs += c * p[x];
        return lhs - rhs;
    }
};

/// Linear form of the system: equality rows over the M joint-state
/// variables, plus implicit nonnegativity and the normalization row.
/// The nonnegative solutions of all rows together form the set of joint
/// distributions the system admits.
struct ConstraintSet {
    std::size_t variables = 0;
    std::vector<ConstraintRow> equalities; ///< component rows; normalization kept separate

    ConstraintRow normalization() const {
        ConstraintRow row;
        row.rhs = 1.0;
        row.tag = "normalization";
        row.coefficients.reserve(variables);
        for (std::size_t x = 0; x < variables; ++x) row.coefficients.emplace_back(x, 1.0);
        return row;
    }

    std::vector<ConstraintRow> all_rows() const {
        std::vector<ConstraintRow> rows = equalities;
        rows.push_back(normalization());
        return rows;
    }
};

enum class ConsistencyStatus { consistent, inconsistent, indeterminate };

struct ConsistencyOptions {
    std::size_t max_states = 4096; ///< joint-state cap for the dense feasibility solve
    double feasible_tol = 1e-8;    ///< phase-1 objective at or below this is feasible
    double infeasible_tol = 1e-6;  ///< objective at or above this is certified infeasible
};

struct CertificateRow {
    std::string tag;   ///< provenance of an irreconcilable constraint
    double violation;  ///< its residual artificial value at the phase-1 optimum
};

struct ConsistencyReport {
    ConsistencyStatus status = ConsistencyStatus::indeterminate;
    bool consistent = false;
    std::optional<JointDistribution> witness;
    /// Witness compatibility residual when consistent; otherwise the phase-1
    /// objective, a proven lower bound on the total violation any
    /// distribution must incur.
    double max_residual = 0.0;
    double objective = 0.0; ///< phase-1 optimum (least total violation)
    std::vector<CertificateRow> certificate; ///< rows still violated at the optimum
    /// Conditional rows the witness satisfies only vacuously (its
    /// conditioning event has near-zero probability).
    std::vector<std::string> witness_vacuous_rows;
};

/// Compiles the system into equality constraints. Absolute entry t(y):
/// sum of p over matching states = t(y). Conditional entry c(z|w):
/// sum over (z,w)-states minus c times sum over w-states = 0 (homogeneous,
/// so rows stay linear and defined when the witness gives w probability 0).
/// Each table group's final state is linearly dependent on the others plus
/// normalization and is dropped unless keep_redundant is set.
inline ConstraintSet constraints(const ProbabilitySystem& pc, bool keep_redundant = false) {
    const EventSpace& space = pc.space();
    ConstraintSet set;
    set.variables = space.joint_states();
    for (std::size_t i = 0; i < pc.size(); ++i) {
        const auto& e = pc[i];
        const std::string label = e.component.label(space);
        if (e.component.is_absolute()) {
            const auto& t = e.marginal();
            const std::size_t keep = keep_redundant ? t.probabilities.size()
                                                    : t.probabilities.size() - 1;
            for (std::size_t y = 0; y < keep; ++y) {
                ConstraintRow row;
                row.entry = i;
                row.rhs = t.probabilities[y];
                row.tag = label + "[" + detail::member_state_label(space, t.members, y) + "]";
                detail::for_each_matching(space, t.members, y, [&](std::size_t x) {
                    row.coefficients.emplace_back(x, 1.0);
                });
                set.equalities.push_back(std::move(row));
            }
        } else {
            const auto& t = e.conditional();
            std::vector<std::size_t> all = t.targets;
            all.insert(all.end(), t.givens.begin(), t.givens.end());
            const std::size_t zs = t.target_states();
            const std::size_t keep = keep_redundant ? zs : zs - 1;
            for (std::size_t w = 0; w < t.rows.size(); ++w) {
                const std::string wlab = detail::member_state_label(space, t.givens, w);
                for (std::size_t z = 0; z < keep; ++z) {
                    const double c = (*t.rows[w])[z];
                    ConstraintRow row;
                    row.entry = i;
                    row.rhs = 0.0;
                    row.tag = label + "[" + detail::member_state_label(space, t.targets, z) +
                              " given " + wlab + "]";
                    std::vector<double> coeff(space.joint_states(), 0.0);
                    detail::for_each_matching(space, all, z * t.rows.size() + w,
                                              [&](std::size_t x) { coeff[x] += 1.0; });
                    detail::for_each_matching(space, t.givens, w,
                                              [&](std::size_t x) { coeff[x] -= c; });
                    for (std::size_t x = 0; x < coeff.size(); ++x)
                        if (coeff[x] != 0.0) row.coefficients.emplace_back(x, coeff[x]);
                    set.equalities.push_back(std::move(row));
                }
            }
        }
    }
    return set;
}

} // namespace pks
