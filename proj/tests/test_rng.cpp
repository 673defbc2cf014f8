#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "conet/rng.hpp"

using conet::Philox4x32;
using conet::RngStream;
using conet::StreamTag;

TEST_CASE("philox4x32-10 known-answer vectors") {
    CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) ==
          Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and separated by every key component") {
    auto first = [](RngStream s) {
        std::vector<std::uint32_t> v;
        for (int i = 0; i < 8; ++i) v.push_back(s());
        return v;
    };
    const auto base = first(RngStream(7, StreamTag::Rollout, 3, 4));
    CHECK(base == first(RngStream(7, StreamTag::Rollout, 3, 4)));
    std::set<std::vector<std::uint32_t>> seen{base};
    seen.insert(first(RngStream(8, StreamTag::Rollout, 3, 4)));
    seen.insert(first(RngStream(7, StreamTag::PolicyInit, 3, 4)));
    seen.insert(first(RngStream(7, StreamTag::Rollout, 4, 4)));
    seen.insert(first(RngStream(7, StreamTag::Rollout, 3, 5)));
    seen.insert(first(RngStream(7ULL | (1ULL << 40), StreamTag::Rollout, 3, 4)));
    CHECK(seen.size() == 6);
}

TEST_CASE("uniform and below stay in range with plausible moments") {
    RngStream s(1, StreamTag::Synthetic, 0);
    double sum = 0.0;
    std::vector<int> counts(7, 0);
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        const auto b = s.below(7);
        REQUIRE(b < 7);
        ++counts[b];
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    for (int c : counts) CHECK(std::abs(c - n / 7.0) < 5 * std::sqrt(n / 7.0));
    CHECK(s.below(1) == 0);
    const auto wide = s.below((std::uint64_t{1} << 40) + 3);
    CHECK(wide < (std::uint64_t{1} << 40) + 3);
}
