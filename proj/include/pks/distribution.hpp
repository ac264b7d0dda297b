#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pks/errors.hpp"
#include "pks/event_space.hpp"

namespace pks {

/// -sum p ln p in nats, with 0 ln 0 = 0.
inline double entropy(std::span<const double> probabilities) {
    double h = 0.0;
    for (double v : probabilities)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

namespace detail {

inline void check_members(const EventSpace& space, std::span<const std::size_t> members,
                          const char* what) {
    if (members.empty())
        throw domain_error(std::string(what) + " descriptor list must be nonempty");
    DescriptorSet seen;
    for (std::size_t m : members) {
        if (m >= space.size())
            throw domain_error(std::string(what) + " references unknown descriptor index " +
                               std::to_string(m));
        if (seen.contains(m))
            throw domain_error(std::string(what) + " lists descriptor '" + space.name(m) +
                               "' twice");
        seen.insert(m);
    }
}

inline std::size_t lattice_size(const EventSpace& space, std::span<const std::size_t> members) {
    std::size_t n = 1;
    for (std::size_t m : members) n *= static_cast<std::size_t>(space.arity(m));
    return n;
}

/// Index of joint state `joint` restricted to `members` (listed order,
/// first member most significant).
inline std::size_t project(const EventSpace& space, std::span<const std::size_t> members,
                           std::size_t joint) {
    std::size_t idx = 0;
    for (std::size_t m : members)
        idx = idx * static_cast<std::size_t>(space.arity(m)) +
              static_cast<std::size_t>(space.state_of(joint, m));
    return idx;
}

} // namespace detail

/// Dense marginal over an ordered descriptor subset.
struct MarginalTable {
    std::vector<std::size_t> members; ///< descriptor positions, first most significant
    std::vector<int> arities;         ///< aligned with members
    std::vector<double> probabilities;

    std::size_t states() const noexcept {
        std::size_t n = 1;
        for (int a : arities) n *= static_cast<std::size_t>(a);
        return n;
    }

    std::size_t index_of(std::span<const int> substates) const {
        if (substates.size() != members.size())
            throw domain_error("marginal assignment length mismatch");
        std::size_t idx = 0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            if (substates[k] < 0 || substates[k] >= arities[k])
                throw domain_error("marginal state index out of range");
            idx = idx * static_cast<std::size_t>(arities[k]) +
                  static_cast<std::size_t>(substates[k]);
        }
        return idx;
    }
    double at(std::initializer_list<int> substates) const {
        return probabilities.at(index_of(std::span<const int>(substates.begin(), substates.size())));
    }

    friend bool operator==(const MarginalTable&, const MarginalTable&) = default;
};

/// Conditional distribution P(targets | givens): one row per given-state.
/// A row without numbers marks a conditioning event of probability zero.
struct ConditionalTable {
    std::vector<std::size_t> targets;
    std::vector<int> target_arities;
    std::vector<std::size_t> givens;
    std::vector<int> given_arities;
    std::vector<std::optional<std::vector<double>>> rows; ///< indexed by given-state

    std::size_t given_states() const noexcept {
        std::size_t n = 1;
        for (int a : given_arities) n *= static_cast<std::size_t>(a);
        return n;
    }
    std::size_t target_states() const noexcept {
        std::size_t n = 1;
        for (int a : target_arities) n *= static_cast<std::size_t>(a);
        return n;
    }

    friend bool operator==(const ConditionalTable&, const ConditionalTable&) = default;
};

/// Dense joint distribution over all states of an event space. Immutable;
/// entries are validated at construction.
class JointDistribution {
public:
    JointDistribution(EventSpace space, std::vector<double> probabilities,
                      double tolerance = 1e-9)
        : space_(std::move(space)), p_(std::move(probabilities)) {
        if (p_.size() != space_.joint_states())
            throw domain_error("probability table size " + std::to_string(p_.size()) +
                               " does not match joint-state count " +
                               std::to_string(space_.joint_states()));
        double sum = 0.0;
        for (double v : p_) {
            if (!(v >= 0.0))
                throw domain_error("joint distribution has a negative (or NaN) entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > tolerance)
            throw domain_error("joint distribution sums to " + std::to_string(sum) +
                               ", not 1 within tolerance");
    }

    static JointDistribution uniform(const EventSpace& space) {
        return JointDistribution(space,
                                 std::vector<double>(space.joint_states(),
                                                     1.0 / static_cast<double>(space.joint_states())));
    }

    const EventSpace& space() const noexcept { return space_; }
    const std::vector<double>& probabilities() const noexcept { return p_; }
    std::size_t size() const noexcept { return p_.size(); }
    double operator[](std::size_t joint) const { return p_.at(joint); }
    double at(std::span<const int> states) const { return p_[space_.index_of(states)]; }
    double at(std::initializer_list<int> states) const { return p_[space_.index_of(states)]; }

    double entropy() const { return pks::entropy(p_); }

    friend bool operator==(const JointDistribution&, const JointDistribution&) = default;

private:
    EventSpace space_;
    std::vector<double> p_;
};

/// Marginal of p over the listed descriptors (listed order kept).
inline MarginalTable marginalize(const JointDistribution& p,
                                 std::span<const std::size_t> members) {
    const EventSpace& space = p.space();
    detail::check_members(space, members, "marginal");
    MarginalTable out;
    out.members.assign(members.begin(), members.end());
    for (std::size_t m : members) out.arities.push_back(space.arity(m));
    out.probabilities.assign(detail::lattice_size(space, members), 0.0);
    for (std::size_t x = 0; x < p.size(); ++x)
        out.probabilities[detail::project(space, members, x)] += p[x];
    return out;
}
inline MarginalTable marginalize(const JointDistribution& p,
                                 std::initializer_list<std::size_t> members) {
    return marginalize(p, std::span<const std::size_t>(members.begin(), members.size()));
}

/// Conditional P(targets | givens) read off p. Rows whose conditioning event
/// has probability zero are left undefined.
inline ConditionalTable conditionalize(const JointDistribution& p,
                                       std::span<const std::size_t> targets,
                                       std::span<const std::size_t> givens) {
    const EventSpace& space = p.space();
    detail::check_members(space, targets, "conditional target");
    detail::check_members(space, givens, "conditional given");
    if (DescriptorSet::of(targets).intersects(DescriptorSet::of(givens)))
        throw domain_error("conditional target and given sets overlap");

    ConditionalTable out;
    out.targets.assign(targets.begin(), targets.end());
    out.givens.assign(givens.begin(), givens.end());
    for (std::size_t m : targets) out.target_arities.push_back(space.arity(m));
    for (std::size_t m : givens) out.given_arities.push_back(space.arity(m));

    const std::size_t n_given = detail::lattice_size(space, givens);
    const std::size_t n_target = detail::lattice_size(space, targets);
    std::vector<double> num(n_given * n_target, 0.0);
    std::vector<double> den(n_given, 0.0);
    for (std::size_t x = 0; x < p.size(); ++x) {
        const std::size_t w = detail::project(space, givens, x);
        const std::size_t z = detail::project(space, targets, x);
        num[w * n_target + z] += p[x];
        den[w] += p[x];
    }
    out.rows.resize(n_given);
    for (std::size_t w = 0; w < n_given; ++w) {
        if (den[w] == 0.0) continue; // undefined row
        std::vector<double> row(n_target);
        for (std::size_t z = 0; z < n_target; ++z) row[z] = num[w * n_target + z] / den[w];
        out.rows[w] = std::move(row);
    }
    return out;
}
inline ConditionalTable conditionalize(const JointDistribution& p,
                                       std::initializer_list<std::size_t> targets,
                                       std::initializer_list<std::size_t> givens) {
    return conditionalize(p, std::span<const std::size_t>(targets.begin(), targets.size()),
                          std::span<const std::size_t>(givens.begin(), givens.size()));
}

/// Pairwise conditional independence of descriptors i and j given all the
/// others jointly: P(xi,xj|r) = P(xi|r) P(xj|r) within tol for every
/// remaining-state r of positive probability.
inline bool conditionally_independent(const JointDistribution& p, std::size_t i, std::size_t j,
                                      double tol) {
    const EventSpace& space = p.space();
    if (i >= space.size() || j >= space.size())
        throw domain_error("descriptor index out of range");
    if (i == j) throw domain_error("conditional independence needs two distinct descriptors");

    std::vector<std::size_t> rest;
    for (std::size_t k = 0; k < space.size(); ++k)
        if (k != i && k != j) rest.push_back(k);

    const auto ai = static_cast<std::size_t>(space.arity(i));
    const auto aj = static_cast<std::size_t>(space.arity(j));
    const std::size_t n_rest = detail::lattice_size(space, rest);

    // block[r][(si,sj)] = P(xi=si, xj=sj, rest=r)
    std::vector<double> block(n_rest * ai * aj, 0.0);
    for (std::size_t x = 0; x < p.size(); ++x) {
        const std::size_t r = detail::project(space, rest, x);
        const auto si = static_cast<std::size_t>(space.state_of(x, i));
        const auto sj = static_cast<std::size_t>(space.state_of(x, j));
        block[(r * ai + si) * aj + sj] += p[x];
    }
    for (std::size_t r = 0; r < n_rest; ++r) {
        double total = 0.0;
        for (std::size_t k = 0; k < ai * aj; ++k) total += block[r * ai * aj + k];
        if (total == 0.0) continue; // zero-probability conditioning state
        for (std::size_t si = 0; si < ai; ++si) {
            for (std::size_t sj = 0; sj < aj; ++sj) {
                double joint = block[(r * ai + si) * aj + sj] / total;
                double pi = 0.0, pj = 0.0;
                for (std::size_t t = 0; t < aj; ++t) pi += block[(r * ai + si) * aj + t];
                for (std::size_t s = 0; s < ai; ++s) pj += block[(r * ai + s) * aj + sj];
                pi /= total;
                pj /= total;
                if (std::abs(joint - pi * pj) > tol) return false;
            }
        }
    }
    return true;
}

} // namespace pks
