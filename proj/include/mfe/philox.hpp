#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace mfe {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
/// every output block is a pure function of (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

    static constexpr Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

private:
    static constexpr Counter single_round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// 64-bit FNV-1a, used to turn string ids into stream keys.
constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// A reproducible random stream identified by (seed, stream id). Draw k of the
/// stream is Philox(counter = {k, stream}, key = seed), so any draw can be
/// recomputed without replaying the ones before it.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
    CounterRng(std::uint64_t seed, std::string_view stream) : CounterRng(seed, fnv1a64(stream)) {}

    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t position() const noexcept { return index_; }

    /// The 128-bit block for draw `index`, without advancing.
    Philox4x32::Counter block(std::uint64_t index) const {
        return Philox4x32::generate(
            {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
             static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
            {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    }

    std::uint64_t next_u64() {
        auto b = block(index_++);
        return (static_cast<std::uint64_t>(b[1]) << 32) | b[0];
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() { return to_open_unit(next_u64()); }

    /// Uniform integer in [lo, hi], unbiased (rejection on the top range).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    double exponential(double mean) { return -mean * std::log(uniform()); }

    static double to_open_unit(std::uint64_t bits) {
        return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t index_ = 0;
};

}  // namespace mfe
