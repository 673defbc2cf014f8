#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace conet {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A 64-bit key
// and a 128-bit counter map to four 32-bit outputs; there is no hidden state,
// so any (key, counter) block can be evaluated independently.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

// Purposes a stream can be drawn for. Distinct purposes never share counters.
enum class StreamTag : std::uint32_t {
    Rollout = 0,
    GraphGeneration = 1,
    TaskSelection = 2,
    PolicyInit = 3,
    Synthetic = 4,
};

// A deterministic random stream identified by (seed, tag, a, b). Counter word 0
// walks through blocks; words 1..3 carry (a, b, tag). Satisfies
// UniformRandomBitGenerator so it can drive <random> distributions, though the
// library itself only uses the portable helpers below.
class RngStream {
public:
    using result_type = std::uint32_t;

    RngStream(std::uint64_t seed, StreamTag tag, std::uint32_t a, std::uint32_t b = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0, a, b, static_cast<std::uint32_t>(tag)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (used_ == 4) {
            buffer_ = Philox4x32::block(ctr_, key_);
            ++ctr_[0];
            used_ = 0;
        }
        return buffer_[used_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = (*this)();
        const std::uint64_t lo = (*this)();
        return (hi << 32) | lo;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, bound) (Lemire's multiply-and-reject). bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        if (bound <= std::uint64_t{1} << 32) {
            const auto b32 = static_cast<std::uint32_t>(bound == (std::uint64_t{1} << 32) ? 0 : bound);
            if (b32 == 0) return (*this)();
            std::uint64_t prod = std::uint64_t{(*this)()} * b32;
            auto low = static_cast<std::uint32_t>(prod);
            if (low < b32) {
                const std::uint32_t threshold = static_cast<std::uint32_t>(-b32) % b32;
                while (low < threshold) {
                    prod = std::uint64_t{(*this)()} * b32;
                    low = static_cast<std::uint32_t>(prod);
                }
            }
            return prod >> 32;
        }
        // Wide bounds only occur in exhaustive fallbacks; plain rejection is fine.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % bound;
    }

private:
    Philox4x32::Key key_;
    Philox4x32::Counter ctr_;
    Philox4x32::Counter buffer_{};
    int used_ = 4;
};

}  // namespace conet
