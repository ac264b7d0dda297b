#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pks/errors.hpp"
#include "pks/event_space.hpp"

namespace pks {

enum class ComponentKind { absolute, conditional };

/// One piece of knowledge about the joint distribution: either a descriptor
/// subset Y carrying a marginal, or an ordered pair (Z|W) carrying a
/// conditional. Descriptor order is kept; it fixes table layout.
class Component {
public:
    static Component absolute(std::vector<std::size_t> targets) {
        return Component(ComponentKind::absolute, std::move(targets), {});
    }
    static Component conditional(std::vector<std::size_t> targets,
                                 std::vector<std::size_t> givens) {
        return Component(ComponentKind::conditional, std::move(targets), std::move(givens));
    }

    ComponentKind kind() const noexcept { return kind_; }
    bool is_absolute() const noexcept { return kind_ == ComponentKind::absolute; }
    const std::vector<std::size_t>& targets() const noexcept { return targets_; }
    const std::vector<std::size_t>& givens() const noexcept { return givens_; }
    DescriptorSet target_set() const noexcept { return target_set_; }
    DescriptorSet given_set() const noexcept { return given_set_; }
    DescriptorSet coverage() const noexcept { return target_set_ | given_set_; }

    /// Same knowledge shape: kind plus unordered target/given sets.
    bool same_as(const Component& o) const noexcept {
        return kind_ == o.kind_ && target_set_ == o.target_set_ && given_set_ == o.given_set_;
    }

    std::string label(const EventSpace& space) const {
        std::string s = "(";
        for (std::size_t k = 0; k < targets_.size(); ++k)
            s += (k ? " " : "") + space.name(targets_[k]);
        if (!givens_.empty()) {
            s += "|";
            for (std::size_t k = 0; k < givens_.size(); ++k)
                s += (k ? " " : "") + space.name(givens_[k]);
        }
        return s + ")";
    }

    friend bool operator==(const Component&, const Component&) = default;

private:
    Component(ComponentKind kind, std::vector<std::size_t> targets,
              std::vector<std::size_t> givens)
        : kind_(kind), targets_(std::move(targets)), givens_(std::move(givens)) {
        if (targets_.empty()) throw domain_error("component targets must be nonempty");
        check_unique(targets_, "target");
        check_unique(givens_, "given");
        target_set_ = DescriptorSet::of(targets_);
        given_set_ = DescriptorSet::of(givens_);
        if (target_set_.intersects(given_set_))
            throw domain_error("component target and given sets overlap");
        if (kind_ == ComponentKind::conditional && givens_.empty())
            throw domain_error("conditional component needs a nonempty given set");
        if (kind_ == ComponentKind::absolute && !givens_.empty())
            throw domain_error("absolute component cannot carry givens");
    }

    static void check_unique(const std::vector<std::size_t>& v, const char* what) {
        DescriptorSet seen;
        for (std::size_t i : v) {
            if (i >= 64) throw domain_error("descriptor index out of range");
            if (seen.contains(i))
                throw domain_error(std::string("component lists a ") + what + " twice");
            seen.insert(i);
        }
    }

    ComponentKind kind_;
    std::vector<std::size_t> targets_;
    std::vector<std::size_t> givens_;
    DescriptorSet target_set_;
    DescriptorSet given_set_;
};

/// A list of components over one event space.
class Structure {
public:
    Structure(EventSpace space, std::vector<Component> components)
        : space_(std::move(space)), components_(std::move(components)) {
        for (const auto& c : components_) {
            for (std::size_t m : c.targets()) check_index(m);
            for (std::size_t m : c.givens()) check_index(m);
        }
        for (std::size_t a = 0; a < components_.size(); ++a)
            for (std::size_t b = a + 1; b < components_.size(); ++b)
                if (components_[a].same_as(components_[b]))
                    throw domain_error("duplicate component " + components_[a].label(space_));
    }

    const EventSpace& space() const noexcept { return space_; }
    const std::vector<Component>& components() const noexcept { return components_; }
    std::size_t size() const noexcept { return components_.size(); }
    const Component& operator[](std::size_t i) const { return components_.at(i); }

    /// Substructure keeping the components selected by `mask` (bit i for
    /// component i), in their original order.
    Structure select(std::uint64_t mask) const {
        std::vector<Component> kept;
        for (std::size_t i = 0; i < components_.size(); ++i)
            if ((mask >> i) & 1u) kept.push_back(components_[i]);
        return Structure(space_, std::move(kept));
    }

private:
    void check_index(std::size_t m) const {
        if (m >= space_.size())
            throw domain_error("component references descriptor index " + std::to_string(m) +
                               " outside the event space");
    }

    EventSpace space_;
    std::vector<Component> components_;
};

/// Union of all descriptors covered by some component.
inline DescriptorSet covered(const Structure& c) {
    DescriptorSet s;
    for (const auto& y : c.components()) s = s | y.coverage();
    return s;
}

/// A terminal component split: fresh descriptors Z (absent from the rest of
/// the structure) and connector W (covered by the rest).
struct TerminalSplit {
    std::size_t component = 0; ///< index into the structure
    DescriptorSet z;
    DescriptorSet w;
};

namespace detail {

inline DescriptorSet coverage_without(const Structure& c, std::uint64_t mask, std::size_t skip) {
    DescriptorSet s;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (i != skip && ((mask >> i) & 1u)) s = s | c[i].coverage();
    return s;
}

inline std::optional<TerminalSplit> terminal_split_in(const Structure& c, std::uint64_t mask,
                                                      std::size_t y) {
    const DescriptorSet rest = coverage_without(c, mask, y);
    const Component& comp = c[y];
    if (comp.is_absolute()) {
        const DescriptorSet z = comp.target_set() - rest;
        if (z.empty()) return std::nullopt;
        return TerminalSplit{y, z, comp.target_set() & rest};
    }
    if (comp.target_set().intersects(rest)) return std::nullopt;
    if (!comp.given_set().subset_of(rest)) return std::nullopt;
    return TerminalSplit{y, comp.target_set(), comp.given_set()};
}

/// Forest restriction: the connector must sit inside a single remaining
/// component (its targets plus givens). Vacuous connectors always qualify.
inline bool connector_contained(const Structure& c, std::uint64_t mask, std::size_t y,
                                DescriptorSet w) {
    if (w.empty()) return true;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (i != y && ((mask >> i) & 1u) && w.subset_of(c[i].coverage())) return true;
    return false;
}

/// Memoized backtracking over peel choices. Greedy first-terminal order is
/// tried first; the memo makes the exhaustive search cheap.
class Peeler {
public:
    explicit Peeler(const Structure& c) : c_(c) {}

    bool is_web(std::uint64_t mask) {
        auto it = web_.find(mask);
        if (it != web_.end()) return it->second;
        bool ok = false;
        if (single_component(mask, ok)) {
            web_[mask] = ok;
            return ok;
        }
        ok = false;
        for (std::size_t y = 0; y < c_.size() && !ok; ++y) {
            if (!((mask >> y) & 1u)) continue;
            if (terminal_split_in(c_, mask, y) && is_web(mask & ~(std::uint64_t{1} << y)))
                ok = true;
        }
        web_[mask] = ok;
        return ok;
    }

    bool is_forest(std::uint64_t mask) {
        auto it = forest_.find(mask);
        if (it != forest_.end()) return it->second;
        bool ok = false;
        if (single_component(mask, ok)) {
            forest_[mask] = ok;
            return ok;
        }
        ok = false;
        for (std::size_t y = 0; y < c_.size() && !ok; ++y) {
            if (!((mask >> y) & 1u)) continue;
            auto split = terminal_split_in(c_, mask, y);
            if (split && connector_contained(c_, mask, y, split->w) &&
                is_forest(mask & ~(std::uint64_t{1} << y)))
                ok = true;
        }
        forest_[mask] = ok;
        return ok;
    }

    /// Peel sequence witnessing webness (first peeled first), greedy on
    /// component position. Empty when the mask is not a web.
    std::vector<TerminalSplit> unpack(std::uint64_t mask) {
        std::vector<TerminalSplit> order;
        if (!is_web(mask)) return order;
        while (true) {
            bool single = false;
            if (single_component(mask, single)) {
                std::size_t y = 0;
                while (!((mask >> y) & 1u)) ++y;
                order.push_back(*terminal_split_in(c_, mask, y));
                return order;
            }
            for (std::size_t y = 0; y < c_.size(); ++y) {
                if (!((mask >> y) & 1u)) continue;
                auto split = terminal_split_in(c_, mask, y);
                if (split && is_web(mask & ~(std::uint64_t{1} << y))) {
                    order.push_back(*split);
                    mask &= ~(std::uint64_t{1} << y);
                    break;
                }
            }
        }
    }

private:
    bool single_component(std::uint64_t mask, bool& result) const {
        if (mask == 0 || (mask & (mask - 1)) != 0) return false;
        std::size_t y = 0;
        while (!((mask >> y) & 1u)) ++y;
        result = c_[y].is_absolute();
        return true;
    }

    const Structure& c_;
    std::unordered_map<std::uint64_t, bool> web_;
    std::unordered_map<std::uint64_t, bool> forest_;
};

inline std::uint64_t full_mask(const Structure& c) {
    if (c.size() > 64)
        throw capacity_error("structure operations are capped at 64 components, got " +
                             std::to_string(c.size()));
    return c.size() == 64 ? ~std::uint64_t{0}
                          : (std::uint64_t{1} << c.size()) - 1;
}

} // namespace detail

/// Split of component y against the rest of the structure, if y is terminal.
inline std::optional<TerminalSplit> terminal_split(const Structure& c, std::size_t y) {
    if (y >= c.size()) throw domain_error("component index out of range");
    return detail::terminal_split_in(c, detail::full_mask(c), y);
}

inline std::optional<TerminalSplit> terminal_split(const Structure& c, const Component& y) {
    for (std::size_t i = 0; i < c.size(); ++i)
        if (c[i].same_as(y)) return terminal_split(c, i);
    throw domain_error("component " + y.label(c.space()) + " is not in the structure");
}

struct Classification {
    bool is_web = false;
    bool is_forest = false;
    bool is_conditional_web = false;
    bool is_bayes_net_shape = false;
    /// Components in reverse peel order (first peeled last); present iff web.
    std::optional<std::vector<std::size_t>> unpack_order;
};

inline Classification classify(const Structure& c) {
    if (c.size() == 0) throw domain_error("cannot classify an empty structure");
    detail::Peeler peeler(c);
    const std::uint64_t mask = detail::full_mask(c);

    Classification out;
    out.is_web = peeler.is_web(mask);
    out.is_forest = out.is_web && peeler.is_forest(mask);
    if (out.is_web) {
        bool absolutes_disjoint = true;
        for (std::size_t a = 0; a < c.size() && absolutes_disjoint; ++a) {
            if (!c[a].is_absolute()) continue;
            for (std::size_t b = a + 1; b < c.size(); ++b)
                if (c[b].is_absolute() && c[a].target_set().intersects(c[b].target_set())) {
                    absolutes_disjoint = false;
                    break;
                }
        }
        out.is_conditional_web = absolutes_disjoint;
        bool singleton_targets = true;
        for (const auto& y : c.components())
            if (!y.is_absolute() && y.targets().size() != 1) singleton_targets = false;
        out.is_bayes_net_shape = absolutes_disjoint && singleton_targets;

        auto peel = peeler.unpack(mask);
        std::vector<std::size_t> order;
        for (auto it = peel.rbegin(); it != peel.rend(); ++it) order.push_back(it->component);
        out.unpack_order = std::move(order);
    }
    return out;
}

/// Peel sequence witnessing webness, first peeled first, each element
/// carrying its split at peel time. Throws if the structure is not a web.
inline std::vector<TerminalSplit> unpack(const Structure& c) {
    if (c.size() == 0) throw domain_error("cannot unpack an empty structure");
    detail::Peeler peeler(c);
    auto order = peeler.unpack(detail::full_mask(c));
    if (order.empty()) throw domain_error("structure is not a web; it cannot be unpacked");
    return order;
}

/// Masks of all nonempty component subsets that classify as forests,
/// ascending mask order. Exhaustive; capped at 20 components.
inline std::vector<std::uint64_t> subforest_masks(const Structure& c) {
    if (c.size() > 20)
        throw capacity_error("subforest enumeration capped at 20 components, got " +
                             std::to_string(c.size()));
    detail::Peeler peeler(c);
    std::vector<std::uint64_t> out;
    const std::uint64_t full = detail::full_mask(c);
    for (std::uint64_t mask = 1; mask <= full; ++mask)
        if (peeler.is_forest(mask)) out.push_back(mask);
    return out;
}

/// All substructures that are forests, ascending subset-mask order.
inline std::vector<Structure> enumerate_subforests(const Structure& c) {
    std::vector<Structure> out;
    for (std::uint64_t mask : subforest_masks(c)) out.push_back(c.select(mask));
    return out;
}

} // namespace pks
