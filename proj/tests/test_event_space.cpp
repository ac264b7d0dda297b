#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "pks/event_space.hpp"
#include "support/generators.hpp"

using pks::Descriptor;
using pks::DescriptorSet;
using pks::EventSpace;

namespace {

EventSpace three_binary() {
    return EventSpace({{"X1", 2}, {"X2", 2}, {"X3", 2}});
}

} // namespace

TEST_CASE("descriptor set operations", "[event_space]") {
    DescriptorSet a = DescriptorSet::of({0, 2});
    DescriptorSet b = DescriptorSet::of({2, 3});

    CHECK(a.size() == 2);
    CHECK(a.contains(0));
    CHECK_FALSE(a.contains(1));
    CHECK((a | b) == DescriptorSet::of({0, 2, 3}));
    CHECK((a & b) == DescriptorSet::of({2}));
    CHECK((a - b) == DescriptorSet::of({0}));
    CHECK(a.intersects(b));
    CHECK(DescriptorSet::of({2}).subset_of(a));
    CHECK_FALSE(a.subset_of(b));
    CHECK(DescriptorSet().empty());
    CHECK(a.indices() == std::vector<std::size_t>{0, 2});
    CHECK_THROWS_AS(DescriptorSet::of({64}), pks::domain_error);
}

TEST_CASE("space construction is validated", "[event_space]") {
    CHECK_THROWS_AS(EventSpace({}), pks::domain_error);
    CHECK_THROWS_AS(EventSpace({{"X", 1}}), pks::domain_error);
    CHECK_THROWS_AS(EventSpace({{"", 2}}), pks::domain_error);
    CHECK_THROWS_AS(EventSpace({{"X", 2}, {"X", 3}}), pks::domain_error);

    // 21 ternary descriptors: 3^21 > 2^20
    std::vector<Descriptor> big(21, {"", 3});
    for (std::size_t i = 0; i < big.size(); ++i) big[i].name = "D" + std::to_string(i);
    CHECK_THROWS_AS(EventSpace(big), pks::capacity_error);
    CHECK_NOTHROW(EventSpace(big, std::size_t{1} << 34));

    std::vector<Descriptor> many(64, {"", 2});
    for (std::size_t i = 0; i < many.size(); ++i) many[i].name = "D" + std::to_string(i);
    CHECK_THROWS_AS(EventSpace(many, std::size_t{1} << 63), pks::capacity_error);
}

TEST_CASE("joint indexing follows mixed radix, first descriptor most significant",
          "[event_space]") {
    const EventSpace space = three_binary();
    CHECK(space.joint_states() == 8);
    CHECK(space.index_of({0, 0, 0}) == 0);
    CHECK(space.index_of({1, 1, 1}) == 7);
    CHECK(space.index_of({1, 0, 1}) == 5);
    CHECK(space.assignment_of(5) == std::vector<int>{1, 0, 1});
    CHECK(space.state_of(5, 0) == 1);
    CHECK(space.state_of(5, 1) == 0);
    CHECK(space.state_of(5, 2) == 1);

    const EventSpace mixed({{"A", 2}, {"B", 3}, {"C", 2}});
    CHECK(mixed.joint_states() == 12);
    CHECK(mixed.stride(0) == 6);
    CHECK(mixed.stride(1) == 2);
    CHECK(mixed.stride(2) == 1);
    CHECK(mixed.index_of({1, 2, 0}) == 10);

    CHECK_THROWS_AS(space.index_of({0, 0}), pks::domain_error);
    CHECK_THROWS_AS(space.index_of({0, 0, 2}), pks::domain_error);
    CHECK_THROWS_AS(space.assignment_of(8), pks::domain_error);
}

TEST_CASE("descriptor lookup by name", "[event_space]") {
    const EventSpace space = three_binary();
    CHECK(space.find("X2") == 1);
    CHECK(space.find("X9") == EventSpace::npos);
    CHECK(space.name(2) == "X3");
    CHECK(space.arity(1) == 2);
}

TEST_CASE("indexing round-trips on random spaces", "[event_space][property]") {
    gen::Rng rng(20240811);
    for (int trial = 0; trial < 50; ++trial) {
        const EventSpace space = gen::random_space(rng, 6, 4);
        for (int k = 0; k < 40; ++k) {
            const auto idx = gen::pick(rng, 0, space.joint_states() - 1);
            const auto states = space.assignment_of(idx);
            CHECK(space.index_of(states) == idx);
        }
        // full sweep on the smaller spaces
        if (space.joint_states() <= 64)
            for (std::size_t idx = 0; idx < space.joint_states(); ++idx)
                CHECK(space.index_of(space.assignment_of(idx)) == idx);
    }
}
