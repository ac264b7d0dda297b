#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pks/distribution.hpp"
#include "pks/errors.hpp"
#include "pks/simplex.hpp"
#include "pks/structure.hpp"
#include "pks/system.hpp"

namespace pks {

struct SolverConfig {
    double residual_tol = 1e-8;
    double entropy_tol = 1e-9; ///< relative entropy change per sweep
    std::size_t max_iterations = 100000;
    double damping = 1.0; ///< in (0, 1]
};

enum class ExtensionMethod { product, maxent };

struct ExtensionResult {
    JointDistribution distribution;
    ExtensionMethod method = ExtensionMethod::product;
    std::size_t iterations = 0;
    double max_residual = 0.0;
    double entropy = 0.0; ///< nats
    /// Absolute components rewritten to conditional form to make the
    /// product well-defined (empty when the input was used as given).
    std::vector<std::string> conversions;
};

/// Raised when a solve is attempted on a system whose constraint polytope
/// is empty (or could not be certified nonempty).
class infeasible_error : public error {
public:
    infeasible_error(const std::string& message, ConsistencyReport report)
        : error(message), report_(std::move(report)) {}
    const ConsistencyReport& report() const noexcept { return report_; }

private:
    ConsistencyReport report_;
};

/// Raised when the iteration budget runs out before the convergence
/// contract is met; carries the last iterate and its residual.
class convergence_error : public error {
public:
    convergence_error(const std::string& message, std::vector<double> iterate,
                      std::size_t iterations, double residual)
        : error(message), iterate_(std::move(iterate)), iterations_(iterations),
          residual_(residual) {}
    const std::vector<double>& iterate() const noexcept { return iterate_; }
    std::size_t iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    std::vector<double> iterate_;
    std::size_t iterations_;
    double residual_;
};

namespace detail {

inline void check(const SolverConfig& cfg) {
    if (!(cfg.residual_tol > 0.0) || !(cfg.entropy_tol > 0.0))
        throw domain_error("solver tolerances must be positive");
    if (cfg.max_iterations < 1) throw domain_error("max iterations must be at least 1");
    if (!(cfg.damping > 0.0) || cfg.damping > 1.0)
        throw domain_error("damping must lie in (0, 1]");
}

/// Per joint state, the table cell its restriction selects. Cells follow
/// the member-lattice convention (first listed member most significant);
/// for conditionals the combined cell is z * given_states + w.
inline std::vector<std::size_t> cells_of(const EventSpace& space,
                                         const std::vector<std::size_t>& members) {
    const std::size_t total = space.joint_states();
    std::vector<std::size_t> cell(total, 0);
    for (std::size_t x = 0; x < total; ++x) {
        std::size_t idx = 0;
        for (std::size_t m : members)
            idx = idx * static_cast<std::size_t>(space.arity(m)) +
                  static_cast<std::size_t>(space.state_of(x, m));
        cell[x] = idx;
    }
    return cell;
}

struct EntryPlan {
    bool absolute = true;
    std::vector<std::size_t> cell;  ///< per joint state: y cell, or z * wstates + w
    std::vector<double> target;     ///< flattened table, same cell convention
    std::size_t zstates = 0, wstates = 0; ///< conditional only
};

inline std::vector<EntryPlan> build_plans(const ProbabilitySystem& pc) {
    std::vector<EntryPlan> plans;
    plans.reserve(pc.size());
    for (const auto& e : pc.entries()) {
        EntryPlan plan;
        plan.absolute = e.component.is_absolute();
        if (plan.absolute) {
            plan.cell = cells_of(pc.space(), e.marginal().members);
            plan.target = e.marginal().probabilities;
        } else {
            const auto& t = e.conditional();
            std::vector<std::size_t> all = t.targets;
            all.insert(all.end(), t.givens.begin(), t.givens.end());
            plan.cell = cells_of(pc.space(), all);
            plan.zstates = t.target_states();
            plan.wstates = t.given_states();
            plan.target.assign(plan.zstates * plan.wstates, 0.0);
            for (std::size_t w = 0; w < plan.wstates; ++w)
                for (std::size_t z = 0; z < plan.zstates; ++z)
                    plan.target[z * plan.wstates + w] = (*t.rows[w])[z];
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

inline void normalize_in_place(std::vector<double>& p) {
    double sum = 0.0;
    for (double v : p) sum += v;
    if (!(sum > 0.0)) throw domain_error("solver iterate lost all probability mass");
    for (double& v : p) v /= sum;
}

/// One scaling pass for a marginal target: classic proportional fitting.
/// Exact zeros in the target wipe the matching states; unreachable cells
/// (current mass zero, target positive) are left alone and show up in the
/// residual instead.
inline void scale_marginal(std::vector<double>& p, const EntryPlan& e, double damping) {
    std::vector<double> cur(e.target.size(), 0.0);
    for (std::size_t x = 0; x < p.size(); ++x) cur[e.cell[x]] += p[x];
    std::vector<double> f(e.target.size(), 1.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (e.target[i] == 0.0)
            f[i] = 0.0;
        else if (cur[i] > 0.0)
            f[i] = e.target[i] / cur[i];
        if (damping != 1.0) f[i] = std::pow(f[i], damping);
    }
    for (std::size_t x = 0; x < p.size(); ++x) p[x] *= f[e.cell[x]];
    normalize_in_place(p);
}

/// One scaling pass for a conditional target: the closest distribution (in
/// relative entropy) with the required conditionals keeps the conditional
/// of everything else given (z,w), sets p(z|w) = c(z|w), and tilts the w
/// marginal by exp(-KL(c(.|w) || q(.|w))). Rows whose required mass cannot
/// be reached from the current support get weight zero.
inline void scale_conditional(std::vector<double>& p, const EntryPlan& e, double damping) {
    const std::size_t zs = e.zstates, ws = e.wstates;
    std::vector<double> qzw(zs * ws, 0.0);
    for (std::size_t x = 0; x < p.size(); ++x) qzw[e.cell[x]] += p[x];
    std::vector<double> qw(ws, 0.0);
    for (std::size_t z = 0; z < zs; ++z)
        for (std::size_t w = 0; w < ws; ++w) qw[w] += qzw[z * ws + w];

    std::vector<double> weight(ws, 0.0);
    double total = 0.0;
    for (std::size_t w = 0; w < ws; ++w) {
        if (!(qw[w] > 0.0)) continue;
        double kl = 0.0;
        bool reachable = true;
        for (std::size_t z = 0; z < zs && reachable; ++z) {
            const double c = e.target[z * ws + w];
            if (c <= 0.0) continue;
            const double q = qzw[z * ws + w] / qw[w];
            if (q > 0.0)
                kl += c * std::log(c / q);
            else
                reachable = false;
        }
        if (reachable) weight[w] = qw[w] * std::exp(-kl);
        total += weight[w];
    }
    if (!(total > 0.0)) return; // nothing reachable; leave the iterate as is

    for (std::size_t x = 0; x < p.size(); ++x) {
        if (p[x] == 0.0) continue;
        const std::size_t zw = e.cell[x];
        const std::size_t w = zw % ws;
        double f = weight[w] / total * e.target[zw] / qzw[zw];
        if (damping != 1.0) f = std::pow(f, damping);
        p[x] *= f;
    }
    normalize_in_place(p);
}

struct IterateOutcome {
    std::vector<double> p;
    std::size_t sweeps = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Cyclic scaling from the uniform start, sweeping entries in declaration
/// order. Uniform start keeps support maximal, so zeros in the result are
/// forced by the tables alone.
inline IterateOutcome maxent_iterate(const ProbabilitySystem& pc, const SolverConfig& cfg) {
    check(cfg);
    const std::size_t total = pc.space().joint_states();
    const auto plans = build_plans(pc);
    const auto rows = constraints(pc, true).all_rows();

    IterateOutcome out;
    out.p.assign(total, 1.0 / static_cast<double>(total));
    double prev_entropy = entropy(out.p);
    for (std::size_t sweep = 1; sweep <= cfg.max_iterations; ++sweep) {
        for (const auto& plan : plans) {
            if (plan.absolute)
                scale_marginal(out.p, plan, cfg.damping);
            else
                scale_conditional(out.p, plan, cfg.damping);
        }
        double res = 0.0;
        for (const auto& row : rows) res = std::max(res, std::abs(row.evaluate(out.p)));
        const double h = entropy(out.p);
        out.sweeps = sweep;
        out.residual = res;
        if (res <= cfg.residual_tol &&
            std::abs(h - prev_entropy) <= cfg.entropy_tol * std::max(1.0, std::abs(h))) {
            out.converged = true;
            break;
        }
        prev_entropy = h;
    }
    return out;
}

/// Phase-1 feasibility of the constraint polytope, plus the basic solution
/// for witness fallback.
inline std::pair<ConsistencyReport, std::vector<double>>
feasibility_report(const ProbabilitySystem& pc, const ConsistencyOptions& opt) {
    const std::size_t total = pc.space().joint_states();
    if (total > opt.max_states)
        throw capacity_error("joint space has " + std::to_string(total) +
                             " states; the consistency check is capped at " +
                             std::to_string(opt.max_states));
    const auto all = constraints(pc).all_rows();
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;
    std::vector<double> rhs;
    rows.reserve(all.size());
    rhs.reserve(all.size());
    for (const auto& r : all) {
        rows.push_back(r.coefficients);
        rhs.push_back(r.rhs);
    }
    FeasibilityResult fr = feasibility(total, rows, rhs);

    ConsistencyReport rep;
    rep.objective = fr.objective;
    if (fr.objective <= opt.feasible_tol) {
        rep.status = ConsistencyStatus::consistent;
        rep.consistent = true;
    } else if (fr.objective >= opt.infeasible_tol) {
        rep.status = ConsistencyStatus::inconsistent;
        rep.max_residual = fr.objective;
        for (std::size_t i = 0; i < fr.artificials.size(); ++i)
            if (fr.artificials[i] > opt.feasible_tol)
                rep.certificate.push_back({all[i].tag, fr.artificials[i]});
    } else {
        rep.status = ConsistencyStatus::indeterminate;
        rep.max_residual = fr.objective;
    }
    return {std::move(rep), std::move(fr.solution)};
}

inline JointDistribution cleanup(const EventSpace& space, std::vector<double> p) {
    for (double& v : p)
        if (v < 0.0) v = 0.0;
    normalize_in_place(p);
    return JointDistribution(space, std::move(p), 1e-6);
}

} // namespace detail

/// Decides whether any joint distribution satisfies all system constraints.
/// Feasible systems get a witness: the maximum-entropy point when the
/// scaling solver converges, otherwise the phase-1 basic solution.
inline ConsistencyReport is_consistent(const ProbabilitySystem& pc,
                                       const ConsistencyOptions& opt = {},
                                       const SolverConfig& cfg = {}) {
    auto [rep, basic] = detail::feasibility_report(pc, opt);
    if (rep.status != ConsistencyStatus::consistent) return rep;
    auto it = detail::maxent_iterate(pc, cfg);
    JointDistribution witness = it.converged ? detail::cleanup(pc.space(), std::move(it.p))
                                             : detail::cleanup(pc.space(), std::move(basic));
    auto comp = compatible(witness, pc, std::max(opt.feasible_tol, 1e-12));
    rep.max_residual = comp.max_residual;
    rep.witness_vacuous_rows = std::move(comp.vacuous_rows);
    rep.witness = std::move(witness);
    return rep;
}

/// Entropy-maximizing distribution over the system's constraint polytope.
inline ExtensionResult maxent_extension(const ProbabilitySystem& pc, const SolverConfig& cfg = {},
                                        const ConsistencyOptions& gate = {}) {
    detail::check(cfg);
    auto [rep, basic] = detail::feasibility_report(pc, gate);
    if (rep.status == ConsistencyStatus::inconsistent)
        throw infeasible_error("system is inconsistent (least total violation " +
                                   std::to_string(rep.objective) + ")",
                               std::move(rep));
    if (rep.status == ConsistencyStatus::indeterminate)
        throw infeasible_error("system feasibility is indeterminate (least total violation " +
                                   std::to_string(rep.objective) + ")",
                               std::move(rep));
    auto it = detail::maxent_iterate(pc, cfg);
    if (!it.converged)
        throw convergence_error("scaling solver did not converge in " +
                                    std::to_string(cfg.max_iterations) +
                                    " sweeps (residual " + std::to_string(it.residual) + ")",
                                std::move(it.p), it.sweeps, it.residual);
    ExtensionResult out{JointDistribution(pc.space(), std::move(it.p)), ExtensionMethod::maxent,
                        it.sweeps, it.residual, 0.0, {}};
    out.entropy = out.distribution.entropy();
    return out;
}

/// Rewrites absolute components whose targets were already claimed by an
/// earlier component into conditional form, conditioning their tables on
/// the overlap. Returns the rewritten system and one note per rewrite.
inline std::pair<ProbabilitySystem, std::vector<std::string>>
normalize_absolute_overlaps(const ProbabilitySystem& pc) {
    const EventSpace& space = pc.space();
    DescriptorSet claimed;
    std::vector<ComponentTable> entries;
    std::vector<std::string> notes;
    for (const auto& e : pc.entries()) {
        if (!e.component.is_absolute()) {
            entries.push_back(e);
            claimed = claimed | e.component.target_set();
            continue;
        }
        const DescriptorSet overlap = e.component.target_set() & claimed;
        if (overlap.empty()) {
            entries.push_back(e);
            claimed = claimed | e.component.target_set();
            continue;
        }
        std::vector<std::size_t> fresh, shared;
        for (std::size_t m : e.component.targets())
            (overlap.contains(m) ? shared : fresh).push_back(m);
        if (fresh.empty())
            throw domain_error("component " + e.component.label(space) +
                               " is fully covered by earlier components; its product factor "
                               "cannot be made conditional");
        const auto& t = e.marginal();
        ConditionalTable cond;
        cond.targets = fresh;
        cond.givens = shared;
        for (std::size_t m : fresh) cond.target_arities.push_back(space.arity(m));
        for (std::size_t m : shared) cond.given_arities.push_back(space.arity(m));
        const std::size_t zs = cond.target_states(), wsz = cond.given_states();
        cond.rows.assign(wsz, std::nullopt);
        // marginal cell index for a (z,w) pair, honoring the original member order
        std::vector<std::size_t> pos_of(t.members.size());
        for (std::size_t k = 0; k < t.members.size(); ++k) {
            std::size_t rank = 0;
            for (std::size_t f = 0; f < fresh.size(); ++f)
                if (fresh[f] == t.members[k]) rank = f;
            for (std::size_t s = 0; s < shared.size(); ++s)
                if (shared[s] == t.members[k]) rank = fresh.size() + s;
            pos_of[k] = rank;
        }
        for (std::size_t w = 0; w < wsz; ++w) {
            std::vector<int> assign(fresh.size() + shared.size());
            std::size_t rem = w;
            for (std::size_t s = shared.size(); s-- > 0;) {
                assign[fresh.size() + s] = static_cast<int>(
                    rem % static_cast<std::size_t>(space.arity(shared[s])));
                rem /= static_cast<std::size_t>(space.arity(shared[s]));
            }
            std::vector<double> row(zs, 0.0);
            double den = 0.0;
            for (std::size_t z = 0; z < zs; ++z) {
                std::size_t zr = z;
                for (std::size_t f = fresh.size(); f-- > 0;) {
                    assign[f] = static_cast<int>(zr % static_cast<std::size_t>(space.arity(fresh[f])));
                    zr /= static_cast<std::size_t>(space.arity(fresh[f]));
                }
                std::size_t cell = 0;
                for (std::size_t k = 0; k < t.members.size(); ++k)
                    cell = cell * static_cast<std::size_t>(space.arity(t.members[k])) +
                           static_cast<std::size_t>(assign[pos_of[k]]);
                row[z] = t.probabilities[cell];
                den += t.probabilities[cell];
            }
            if (!(den > 0.0))
                throw domain_error("component " + e.component.label(space) +
                                   " puts no mass on one of its overlap states; it cannot be "
                                   "conditioned on the overlap");
            for (double& v : row) v /= den;
            cond.rows[w] = std::move(row);
        }
        Component rewritten = Component::conditional(fresh, shared);
        notes.push_back(e.component.label(space) + " rewritten as " + rewritten.label(space));
        entries.push_back({rewritten, std::move(cond)});
        claimed = claimed | DescriptorSet::of(fresh);
    }
    return {ProbabilitySystem(space, std::move(entries)), std::move(notes)};
}

/// The componentwise product: for every joint state, the product of the
/// table entries its restriction selects, with uniform factors for
/// descriptors no component covers.
inline ExtensionResult product_extension(const ProbabilitySystem& pc) {
    Classification cls = classify(pc.structure());
    if (!cls.is_web)
        throw domain_error("product extension requires a conditional web: "
                           "the structure is not a web");
    const ProbabilitySystem* sys = &pc;
    std::optional<ProbabilitySystem> rewritten;
    std::vector<std::string> notes;
    if (!cls.is_conditional_web) {
        auto [converted, conversion_notes] = normalize_absolute_overlaps(pc);
        Classification again = classify(converted.structure());
        if (!again.is_conditional_web)
            throw domain_error("product extension requires a conditional web: "
                               "absolute components overlap");
        rewritten.emplace(std::move(converted));
        sys = &*rewritten;
        notes = std::move(conversion_notes);
    }

    const EventSpace& space = pc.space();
    const std::size_t total = space.joint_states();
    const auto plans = detail::build_plans(*sys);
    std::vector<double> p(total, 1.0);
    for (const auto& plan : plans)
        for (std::size_t x = 0; x < total; ++x) p[x] *= plan.target[plan.cell[x]];
    const DescriptorSet cov = covered(sys->structure());
    for (std::size_t d = 0; d < space.size(); ++d) {
        if (cov.contains(d)) continue;
        const double u = 1.0 / static_cast<double>(space.arity(d));
        for (double& v : p) v *= u;
    }

    double sum = 0.0;
    for (double v : p) sum += v;
    if (std::abs(sum - 1.0) > 1e-10) {
        std::vector<std::size_t> claims(space.size(), 0);
        for (const auto& e : sys->entries())
            for (std::size_t m : e.component.targets()) ++claims[m];
        std::string dup;
        for (std::size_t d = 0; d < claims.size(); ++d)
            if (claims[d] > 1) dup += (dup.empty() ? "" : ", ") + space.name(d);
        throw domain_error("product sums to " + std::to_string(sum) + ", not 1; descriptor(s) " +
                           (dup.empty() ? std::string("unknown") : dup) +
                           " are claimed by more than one component");
    }

    ExtensionResult out{JointDistribution(space, std::move(p), 1e-10), ExtensionMethod::product,
                        0, 0.0, 0.0, std::move(notes)};
    out.entropy = out.distribution.entropy();
    out.max_residual = compatible(out.distribution, pc, 1e-9).max_residual;
    return out;
}

struct InfoReport {
    double value = 0.0; ///< max entropy over the constraint polytope, nats
    JointDistribution distribution;
};

inline InfoReport information(const ProbabilitySystem& pc, const SolverConfig& cfg = {},
                              const ConsistencyOptions& gate = {}) {
    ExtensionResult r = maxent_extension(pc, cfg, gate);
    return {r.entropy, std::move(r.distribution)};
}

struct SubforestValue {
    std::uint64_t mask = 0;
    double value = 0.0;
};

struct ForestSearchResult {
    Structure best;
    std::uint64_t best_mask = 0;
    double value = 0.0;                      ///< information value of the best subforest
    std::optional<double> full_value;        ///< info of the whole system, when consistent
    std::optional<double> information_loss;  ///< value - full_value
    std::vector<SubforestValue> evaluations; ///< every subforest, ascending mask order
};

/// Exhaustive search for the subforest with the lowest information value
/// (least residual uncertainty). Ties go to the subforest with the most
/// components, then the lowest mask.
inline ForestSearchResult most_informative_forest(const ProbabilitySystem& pc,
                                                  const SolverConfig& cfg = {},
                                                  const ConsistencyOptions& gate = {}) {
    const auto masks = subforest_masks(pc.structure());
    if (masks.empty())
        throw domain_error("structure has no subforest (it contains no absolute component)");
    constexpr double tie_tol = 1e-9;
    std::vector<SubforestValue> evaluations;
    std::uint64_t best_mask = 0;
    double best_value = 0.0;
    int best_count = -1;
    for (std::uint64_t mask : masks) {
        InfoReport info = information(pc.select(mask), cfg, gate);
        evaluations.push_back({mask, info.value});
        const int count = std::popcount(mask);
        if (best_count < 0 || info.value < best_value - tie_tol ||
            (std::abs(info.value - best_value) <= tie_tol && count > best_count)) {
            best_mask = mask;
            best_value = info.value;
            best_count = count;
        }
    }
    ForestSearchResult out{pc.structure().select(best_mask), best_mask, best_value,
                           std::nullopt,   std::nullopt,      std::move(evaluations)};
    if (detail::feasibility_report(pc, gate).first.status == ConsistencyStatus::consistent) {
        out.full_value = information(pc, cfg, gate).value;
        out.information_loss = out.value - *out.full_value;
    }
    return out;
}

} // namespace pks
