#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pks/distribution.hpp"
#include "pks/event_space.hpp"
#include "pks/extension.hpp"
#include "pks/structure.hpp"
#include "pks/system.hpp"

namespace pks {

/// The three-coin fixture: fair marginals on X1 and X2 plus a conditional
/// for X3 that forces agreement when X1 = X2 = 1 and disagreement when
/// X1 = X2 = 0. The simplest web that is not a forest; its product and
/// maxent extensions differ.
inline ProbabilitySystem counterexample_system() {
    EventSpace space({{"X1", 2}, {"X2", 2}, {"X3", 2}});
    MarginalTable m1{{0}, {2}, {0.5, 0.5}};
    MarginalTable m2{{1}, {2}, {0.5, 0.5}};
    ConditionalTable c;
    c.targets = {2};
    c.target_arities = {2};
    c.givens = {0, 1};
    c.given_arities = {2, 2};
    c.rows = {std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5},
              std::vector<double>{0.5, 0.5}, std::vector<double>{0.0, 1.0}};
    std::vector<ComponentTable> entries;
    entries.push_back({Component::absolute({0}), m1});
    entries.push_back({Component::absolute({1}), m2});
    entries.push_back({Component::conditional({2}, {0, 1}), c});
    return ProbabilitySystem(space, std::move(entries));
}

inline const std::vector<double>& counterexample_product_reference() {
    static const std::vector<double> ref{0.25, 0.0, 0.125, 0.125, 0.125, 0.125, 0.0, 0.25};
    return ref;
}

inline const std::vector<double>& counterexample_maxent_reference() {
    static const std::vector<double> ref{1.0 / 6, 0.0, 1.0 / 6, 1.0 / 6,
                                         1.0 / 6, 1.0 / 6, 0.0, 1.0 / 6};
    return ref;
}

struct CounterexampleCheck {
    std::string name;
    double got = 0.0;
    double want = 0.0;
    double tol = 0.0;
    bool pass = false;
};

struct CounterexampleReport {
    ProbabilitySystem system;
    Classification classification;
    bool classification_ok = false;
    ExtensionResult product;
    ExtensionResult maxent;
    double ci_x1 = 0.0;       ///< P(x1=1 | x3=1) under maxent
    double ci_x2 = 0.0;       ///< P(x2=1 | x3=1) under maxent
    double ci_joint = 0.0;    ///< P(x1=1, x2=1 | x3=1) under maxent
    double ci_required = 0.0; ///< ci_x1 * ci_x2, what independence would force
    std::vector<CounterexampleCheck> checks;
    bool all_pass = false;
};

/// Builds the fixture, runs both extensions, and scores every reproduced
/// number against its reference. `tol_override` replaces each check's own
/// tolerance (the references are rounded to four decimals, so very tight
/// overrides are expected to fail).
inline CounterexampleReport verify_counterexample(std::optional<double> tol_override = {}) {
    ProbabilitySystem pc = counterexample_system();
    Classification cls = classify(pc.structure());
    ExtensionResult product = product_extension(pc);
    ExtensionResult maxent = maxent_extension(pc);

    const auto& p = maxent.distribution;
    double p3 = 0.0, p13 = 0.0, p23 = 0.0, p123 = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x) {
        if (pc.space().state_of(x, 2) != 1) continue;
        p3 += p[x];
        if (pc.space().state_of(x, 0) == 1) p13 += p[x];
        if (pc.space().state_of(x, 1) == 1) p23 += p[x];
        if (pc.space().state_of(x, 0) == 1 && pc.space().state_of(x, 1) == 1) p123 += p[x];
    }

    CounterexampleReport rep{std::move(pc),
                             cls,
                             cls.is_web && !cls.is_forest && cls.is_conditional_web &&
                                 cls.is_bayes_net_shape,
                             std::move(product),
                             std::move(maxent),
                             p13 / p3,
                             p23 / p3,
                             p123 / p3,
                             (p13 / p3) * (p23 / p3),
                             {},
                             false};

    auto linf = [](const JointDistribution& d, const std::vector<double>& ref) {
        double m = 0.0;
        for (std::size_t x = 0; x < d.size(); ++x) m = std::max(m, std::abs(d[x] - ref[x]));
        return m;
    };
    auto add = [&](const std::string& name, double got, double want, double tol) {
        const double t = tol_override.value_or(tol);
        rep.checks.push_back({name, got, want, t, std::abs(got - want) <= t});
    };
    add("product table (max gap)", linf(rep.product.distribution, counterexample_product_reference()),
        0.0, 1e-12);
    add("product entropy", rep.product.entropy, 1.7329, 5e-5);
    add("maxent residual", rep.maxent.max_residual, 0.0, 1e-8);
    add("maxent table (max gap)", linf(rep.maxent.distribution, counterexample_maxent_reference()),
        0.0, 1e-3);
    add("maxent zeros", std::max(rep.maxent.distribution[1], rep.maxent.distribution[6]), 0.0,
        1e-6);
    add("maxent entropy", rep.maxent.entropy, 1.7918, 1e-3);
    add("p(x1=1 given x3=1)", rep.ci_x1, 2.0 / 3.0, 1e-3);
    add("p(x2=1 given x3=1)", rep.ci_x2, 2.0 / 3.0, 1e-3);
    add("p(x1=1,x2=1 given x3=1)", rep.ci_joint, 1.0 / 3.0, 1e-3);
    add("entropy gap", rep.maxent.entropy - rep.product.entropy, 0.0589, 2e-3);

    rep.all_pass = rep.classification_ok;
    for (const auto& c : rep.checks) rep.all_pass = rep.all_pass && c.pass;
    return rep;
}

} // namespace pks
