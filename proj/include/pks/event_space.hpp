#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pks/errors.hpp"

namespace pks {

/// A finite-valued variable. States are anonymous indices 0..arity-1.
struct Descriptor {
    std::string name;
    int arity = 0;

    friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

/// Subset of descriptor positions, stored as a bitmask. An event space can
/// hold at most 63 descriptors (each has arity >= 2, so anything larger
/// would overflow the joint-state count anyway).
class DescriptorSet {
public:
    DescriptorSet() = default;
    explicit DescriptorSet(std::uint64_t bits) : bits_(bits) {}

    static DescriptorSet of(std::span<const std::size_t> indices) {
        DescriptorSet s;
        for (std::size_t i : indices) s.insert(i);
        return s;
    }
    static DescriptorSet of(std::initializer_list<std::size_t> indices) {
        DescriptorSet s;
        for (std::size_t i : indices) s.insert(i);
        return s;
    }

    std::uint64_t bits() const noexcept { return bits_; }
    bool empty() const noexcept { return bits_ == 0; }
    std::size_t size() const noexcept {
        std::uint64_t b = bits_;
        std::size_t n = 0;
        while (b) { b &= b - 1; ++n; }
        return n;
    }
    bool contains(std::size_t i) const noexcept { return (bits_ >> i) & 1u; }
    void insert(std::size_t i) {
        if (i >= 64) throw domain_error("descriptor index out of range for set");
        bits_ |= std::uint64_t{1} << i;
    }

    DescriptorSet operator|(DescriptorSet o) const noexcept { return DescriptorSet(bits_ | o.bits_); }
    DescriptorSet operator&(DescriptorSet o) const noexcept { return DescriptorSet(bits_ & o.bits_); }
    DescriptorSet operator-(DescriptorSet o) const noexcept { return DescriptorSet(bits_ & ~o.bits_); }
    bool subset_of(DescriptorSet o) const noexcept { return (bits_ & ~o.bits_) == 0; }
    bool intersects(DescriptorSet o) const noexcept { return (bits_ & o.bits_) != 0; }

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < 64; ++i)
            if (contains(i)) out.push_back(i);
        return out;
    }

    friend bool operator==(DescriptorSet, DescriptorSet) = default;

private:
    std::uint64_t bits_ = 0;
};

/// Ordered set of descriptors. Joint states are tuples of one state per
/// descriptor; they are indexed in mixed radix with descriptor 0 most
/// significant. The joint-state count is capped (dense storage downstream).
class EventSpace {
public:
    static constexpr std::size_t kDefaultMaxStates = std::size_t{1} << 20;

    explicit EventSpace(std::vector<Descriptor> descriptors,
                        std::size_t max_states = kDefaultMaxStates)
        : descriptors_(std::move(descriptors)) {
        if (descriptors_.empty())
            throw domain_error("event space needs at least one descriptor");
        if (descriptors_.size() > 63)
            throw capacity_error("event space limited to 63 descriptors");
        std::unordered_set<std::string> seen;
        for (const auto& d : descriptors_) {
            if (d.name.empty())
                throw domain_error("descriptor name must be nonempty");
            if (d.arity < 2)
                throw domain_error("descriptor '" + d.name + "' must have arity >= 2");
            if (!seen.insert(d.name).second)
                throw domain_error("duplicate descriptor name '" + d.name + "'");
        }
        strides_.resize(descriptors_.size());
        std::size_t count = 1;
        for (std::size_t i = descriptors_.size(); i-- > 0;) {
            strides_[i] = count;
            const auto arity = static_cast<std::size_t>(descriptors_[i].arity);
            if (count > max_states / arity)
                throw capacity_error("joint-state count exceeds cap of " +
                                     std::to_string(max_states));
            count *= arity;
        }
        joint_count_ = count;
    }

    std::size_t size() const noexcept { return descriptors_.size(); }
    std::size_t joint_states() const noexcept { return joint_count_; }
    const Descriptor& descriptor(std::size_t i) const { return descriptors_.at(i); }
    const std::vector<Descriptor>& descriptors() const noexcept { return descriptors_; }
    int arity(std::size_t i) const { return descriptors_.at(i).arity; }
    const std::string& name(std::size_t i) const { return descriptors_.at(i).name; }
    std::size_t stride(std::size_t i) const { return strides_.at(i); }

    /// Position of the named descriptor, or npos.
    std::size_t find(const std::string& name) const noexcept {
        for (std::size_t i = 0; i < descriptors_.size(); ++i)
            if (descriptors_[i].name == name) return i;
        return npos;
    }
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    /// Mixed-radix encoding of a full assignment (one state per descriptor,
    /// space order, descriptor 0 most significant).
    std::size_t index_of(std::span<const int> states) const {
        if (states.size() != descriptors_.size())
            throw domain_error("assignment length does not match descriptor count");
        std::size_t idx = 0;
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (states[i] < 0 || states[i] >= descriptors_[i].arity)
                throw domain_error("state index " + std::to_string(states[i]) +
                                   " out of range for descriptor '" + descriptors_[i].name + "'");
            idx += static_cast<std::size_t>(states[i]) * strides_[i];
        }
        return idx;
    }
    std::size_t index_of(std::initializer_list<int> states) const {
        return index_of(std::span<const int>(states.begin(), states.size()));
    }

    /// Inverse of index_of.
    std::vector<int> assignment_of(std::size_t index) const {
        if (index >= joint_count_)
            throw domain_error("joint-state index out of range");
        std::vector<int> states(descriptors_.size());
        for (std::size_t i = 0; i < descriptors_.size(); ++i) {
            states[i] = static_cast<int>(index / strides_[i]);
            index %= strides_[i];
        }
        return states;
    }

    /// State of one descriptor within a joint-state index.
    int state_of(std::size_t index, std::size_t descriptor) const {
        return static_cast<int>(index / strides_.at(descriptor) %
                                static_cast<std::size_t>(descriptors_[descriptor].arity));
    }

    DescriptorSet all() const {
        DescriptorSet s;
        for (std::size_t i = 0; i < descriptors_.size(); ++i) s.insert(i);
        return s;
    }

    friend bool operator==(const EventSpace& a, const EventSpace& b) {
        return a.descriptors_ == b.descriptors_;
    }

private:
    std::vector<Descriptor> descriptors_;
    std::vector<std::size_t> strides_;
    std::size_t joint_count_ = 0;
};

} // namespace pks
