#pragma once

// Counter-keyed random streams. Every consumer derives its own generator
// from (master seed, item index, stream id), so results never depend on the
// order in which work items are scheduled.

#include <cmath>
#include <cstdint>
#include <limits>

namespace tailshape {

enum class Stream : std::uint64_t {
    regime = 0,
    bootstrap = 1,
    synthetic = 2,
};

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256** seeded through splitmix64.
class StreamRng {
public:
    using result_type = std::uint64_t;

    StreamRng(std::uint64_t master_seed, std::uint64_t index, Stream stream) noexcept {
        std::uint64_t sm = master_seed;
        std::uint64_t mix = splitmix64(sm) ^ (index * 0xd1b54a32d192ed03ULL);
        mix ^= (static_cast<std::uint64_t>(stream) + 1) * 0x8cb92ba72f3d8dd7ULL;
        for (auto& word : s_) word = splitmix64(mix);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    /// Exponential with the given rate by inversion. std::exponential_distribution
    /// is avoided because its algorithm differs between standard libraries.
    double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4]{};
};

}  // namespace tailshape
