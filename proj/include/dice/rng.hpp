#pragma once

#include <cstdint>
#include <random>

namespace dice {

// Every stochastic routine takes a generator produced here, so results are a pure
// function of (seed, stream). Streams let one seed drive independent trials.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(seed),
        static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(stream),
        static_cast<std::uint32_t>(stream >> 32),
    };
    return std::mt19937_64(seq);
}

// Uniform double in [0, 1) built from the top 53 bits, identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) without std::uniform_int_distribution (whose mapping is
// implementation defined). Rejection keeps it exactly uniform.
inline int uniform_below(std::mt19937_64& rng, int n) {
    const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % static_cast<std::uint64_t>(n));
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= bound);
    return static_cast<int>(x % static_cast<std::uint64_t>(n));
}

} // namespace dice
