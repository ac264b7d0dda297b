#include <catch2/catch_amalgamated.hpp>

#include "pks/structure.hpp"
#include "support/generators.hpp"
#include "support/reference.hpp"

using pks::Component;
using pks::DescriptorSet;
using pks::EventSpace;
using pks::Structure;

namespace {

EventSpace five_binary() {
    return EventSpace({{"X1", 2}, {"X2", 2}, {"X3", 2}, {"X4", 2}, {"X5", 2}});
}

// {(X1), (X2), (X3|X1 X2)}: the three-coin structure
Structure coin_structure() {
    return Structure(EventSpace({{"X1", 2}, {"X2", 2}, {"X3", 2}}),
                     {Component::absolute({0}), Component::absolute({1}),
                      Component::conditional({2}, {0, 1})});
}

} // namespace

TEST_CASE("component construction is validated", "[structure]") {
    CHECK_THROWS_AS(Component::absolute({}), pks::domain_error);
    CHECK_THROWS_AS(Component::absolute({0, 0}), pks::domain_error);
    CHECK_THROWS_AS(Component::conditional({0}, {}), pks::domain_error);
    CHECK_THROWS_AS(Component::conditional({0, 1}, {1}), pks::domain_error);

    const Component c = Component::conditional({2}, {0, 1});
    CHECK(c.target_set() == DescriptorSet::of({2}));
    CHECK(c.given_set() == DescriptorSet::of({0, 1}));
    CHECK(c.coverage() == DescriptorSet::of({0, 1, 2}));
    CHECK(c.same_as(Component::conditional({2}, {1, 0}))); // order-insensitive
    CHECK_FALSE(c.same_as(Component::absolute({2})));
    CHECK(c.label(EventSpace({{"X1", 2}, {"X2", 2}, {"X3", 2}})) == "(X3|X1 X2)");
}

TEST_CASE("structure construction is validated", "[structure]") {
    const EventSpace space({{"X1", 2}, {"X2", 2}});
    CHECK_THROWS_AS(Structure(space, {Component::absolute({5})}), pks::domain_error);
    CHECK_THROWS_AS(Structure(space, {Component::absolute({0}), Component::absolute({0})}),
                    pks::domain_error);
    // same sets, different order: still duplicates
    CHECK_THROWS_AS(Structure(space, {Component::absolute({0, 1}), Component::absolute({1, 0})}),
                    pks::domain_error);
}

TEST_CASE("covered unions all component descriptors", "[structure]") {
    CHECK(pks::covered(coin_structure()) == DescriptorSet::of({0, 1, 2}));
    CHECK(pks::covered(Structure(five_binary(), {})) == DescriptorSet());
    CHECK(pks::covered(Structure(five_binary(), {Component::absolute({0, 1})})) ==
          DescriptorSet::of({0, 1}));
}

TEST_CASE("terminal splits", "[structure]") {
    const Structure c = coin_structure();

    const auto cond = pks::terminal_split(c, 2);
    REQUIRE(cond.has_value());
    CHECK(cond->z == DescriptorSet::of({2}));
    CHECK(cond->w == DescriptorSet::of({0, 1}));

    // removing (X1) leaves the rest covering X1, so nothing fresh remains
    CHECK_FALSE(pks::terminal_split(c, 0).has_value());
    CHECK_FALSE(pks::terminal_split(c, 1).has_value());

    const Structure lone(five_binary(), {Component::absolute({0, 1})});
    const auto split = pks::terminal_split(lone, 0);
    REQUIRE(split.has_value());
    CHECK(split->z == DescriptorSet::of({0, 1}));
    CHECK(split->w.empty());

    // lookup by component value
    const auto again = pks::terminal_split(c, Component::conditional({2}, {0, 1}));
    REQUIRE(again.has_value());
    CHECK(again->component == 2);
    CHECK_THROWS_AS(pks::terminal_split(c, Component::absolute({0, 1})), pks::domain_error);
    CHECK_THROWS_AS(pks::terminal_split(c, 7), pks::domain_error);
}

TEST_CASE("classify the three-coin structure", "[structure]") {
    const auto cls = pks::classify(coin_structure());
    CHECK(cls.is_web);
    CHECK_FALSE(cls.is_forest);
    CHECK(cls.is_conditional_web);
    CHECK(cls.is_bayes_net_shape);
    REQUIRE(cls.unpack_order.has_value());
    // reverse peel order: conditional got peeled first, so it comes last
    CHECK(*cls.unpack_order == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("classification examples", "[structure]") {
    const EventSpace space({{"X1", 2}, {"X2", 2}, {"X3", 2}});

    const auto forest = pks::classify(
        Structure(space, {Component::absolute({0, 1}), Component::conditional({2}, {1})}));
    CHECK(forest.is_web);
    CHECK(forest.is_forest);
    CHECK(forest.is_conditional_web);
    CHECK(forest.is_bayes_net_shape);

    // a lone conditional has no absolute base case
    const auto lone = pks::classify(Structure(space, {Component::conditional({2}, {0, 1})}));
    CHECK_FALSE(lone.is_web);
    CHECK_FALSE(lone.unpack_order.has_value());

    // overlapping absolutes: still a web and a forest, but not a conditional web
    const auto overlap = pks::classify(
        Structure(space, {Component::absolute({0, 1}), Component::absolute({1, 2})}));
    CHECK(overlap.is_web);
    CHECK(overlap.is_forest);
    CHECK_FALSE(overlap.is_conditional_web);
    CHECK_FALSE(overlap.is_bayes_net_shape);

    // conditional with a two-descriptor target: conditional web, not BN shape
    const auto wide = pks::classify(
        Structure(space, {Component::absolute({0}), Component::conditional({1, 2}, {0})}));
    CHECK(wide.is_conditional_web);
    CHECK_FALSE(wide.is_bayes_net_shape);

    CHECK_THROWS_AS(pks::classify(Structure(space, {})), pks::domain_error);
}

TEST_CASE("backtracking finds orders a committing peeler misses", "[structure]") {
    const EventSpace space = five_binary();
    // both components are terminal; peeling (X1 X2) first strands the
    // conditional, peeling (X3|X1) first succeeds
    const Structure s(space,
                      {Component::absolute({0, 1}), Component::conditional({2}, {0})});
    CHECK(pks::classify(s).is_web);
    CHECK(ref::is_web(s));
    CHECK_FALSE(ref::greedy_commit_is_web(s));

    // two absolute terminals where only the second works: (X1 X2) must stay
    // for (X4|X1), but (X3 X4) blocks (X4|X1) from being terminal first
    const Structure t(space,
                      {Component::absolute({0, 1}), Component::absolute({2, 3}),
                       Component::conditional({3}, {0})});
    CHECK(pks::classify(t).is_web);
    CHECK(ref::is_web(t));
    CHECK_FALSE(ref::greedy_commit_is_web(t));
}

TEST_CASE("unpack yields a replayable peel sequence", "[structure]") {
    const Structure c = coin_structure();
    const auto order = pks::unpack(c);
    REQUIRE(order.size() == 3);
    CHECK(order[0].component == 2);
    CHECK(order[0].z == DescriptorSet::of({2}));
    CHECK(order[0].w == DescriptorSet::of({0, 1}));
    CHECK(order[1].component == 0);
    CHECK(order[2].component == 1);

    const Structure pair(five_binary(), {Component::absolute({0}), Component::absolute({1})});
    const auto two = pks::unpack(pair);
    CHECK(two[0].component == 0); // symmetric tie broken by input position
    CHECK(two[1].component == 1);

    const Structure lone(five_binary(), {Component::absolute({0, 1})});
    CHECK(pks::unpack(lone).size() == 1);

    CHECK_THROWS_AS(
        pks::unpack(Structure(five_binary(), {Component::conditional({2}, {0, 1})})),
        pks::domain_error);
}

TEST_CASE("subforest enumeration", "[structure]") {
    const auto masks = pks::subforest_masks(coin_structure());
    CHECK(masks == std::vector<std::uint64_t>{1, 2, 3});

    const auto forests = pks::enumerate_subforests(coin_structure());
    REQUIRE(forests.size() == 3);
    CHECK(forests[0].size() == 1);
    CHECK(forests[2].size() == 2);
    CHECK(forests[2][0].same_as(Component::absolute({0})));
    CHECK(forests[2][1].same_as(Component::absolute({1})));

    // a forest includes its own full mask
    const Structure f(five_binary(),
                      {Component::absolute({0, 1}), Component::conditional({2}, {1})});
    const auto fm = pks::subforest_masks(f);
    CHECK(std::find(fm.begin(), fm.end(), 3u) != fm.end());

    const Structure lone(five_binary(), {Component::absolute({0, 1})});
    CHECK(pks::subforest_masks(lone) == std::vector<std::uint64_t>{1});
}

TEST_CASE("classifier agrees with an independent recursive implementation",
          "[structure][property]") {
    gen::Rng rng(20240812);
    int webs = 0, forests = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const Structure s = gen::random_structure(rng);
        if (s.size() == 0) continue;
        const auto cls = pks::classify(s);
        CHECK(cls.is_web == ref::is_web(s));
        CHECK(cls.is_forest == ref::is_forest(s));
        webs += cls.is_web;
        forests += cls.is_forest;

        // committing greedy is sound but incomplete
        if (ref::greedy_commit_is_web(s)) CHECK(cls.is_web);

        // hierarchy
        if (cls.is_forest) CHECK(cls.is_web);
        if (cls.is_bayes_net_shape) CHECK(cls.is_conditional_web);
        if (cls.is_conditional_web) CHECK(cls.is_web);
    }
    // the population exercises both classes
    CHECK(webs > 30);
    CHECK(forests > 10);
}

TEST_CASE("replaying unpack keeps each step terminal", "[structure][property]") {
    gen::Rng rng(20240813);
    int replayed = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Structure s = gen::random_structure(rng);
        if (s.size() == 0 || !pks::classify(s).is_web) continue;
        auto order = pks::unpack(s);
        REQUIRE(order.size() == s.size());
        std::uint64_t mask = s.size() == 64 ? ~std::uint64_t{0}
                                            : (std::uint64_t{1} << s.size()) - 1;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            const auto split = pks::detail::terminal_split_in(s, mask, order[k].component);
            REQUIRE(split.has_value());
            CHECK(split->z == order[k].z);
            CHECK(split->w == order[k].w);
            mask &= ~(std::uint64_t{1} << order[k].component);
        }
        // base case: a single absolute remains
        CHECK(s[order.back().component].is_absolute());
        ++replayed;
    }
    CHECK(replayed > 20);
}

TEST_CASE("coverage shrinks monotonically under removal", "[structure][property]") {
    gen::Rng rng(20240814);
    for (int trial = 0; trial < 100; ++trial) {
        const Structure s = gen::random_structure(rng);
        if (s.size() == 0) continue;
        const DescriptorSet full = pks::covered(s);
        for (std::size_t y = 0; y < s.size(); ++y) {
            const std::uint64_t mask = ((std::uint64_t{1} << s.size()) - 1) &
                                       ~(std::uint64_t{1} << y);
            CHECK(pks::covered(s.select(mask)).subset_of(full));
        }
    }
}
