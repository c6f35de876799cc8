#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "aimm/errors.hpp"

namespace aimm {

// Deterministic randomness. mt19937_64 is bit-exact across platforms by the
// C++ standard; the std::*_distribution adaptors are not, so this wrapper
// derives doubles, indices and gaussians by hand. Every consumer of
// randomness in the library goes through Rng, seeded via derive_seed with a
// stream tag from the registry below, so two runs with the same seeds are
// bitwise identical.

namespace streams {
inline constexpr std::uint64_t kModelInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kProbe = 3;
inline constexpr std::uint64_t kRehearsal = 4;
inline constexpr std::uint64_t kMemoryStore = 5;
inline constexpr std::uint64_t kReplayMix = 6;
inline constexpr std::uint64_t kClassMeans = 7;
inline constexpr std::uint64_t kTrainLabels = 8;
inline constexpr std::uint64_t kTrainNoise = 9;
inline constexpr std::uint64_t kTestLabels = 10;
inline constexpr std::uint64_t kTestNoise = 11;
inline constexpr std::uint64_t kTransform = 12;
} // namespace streams

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Mixes (base, stream, substream) into an independent seed. Used to fan one
// run seed out into the per-purpose streams above.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t substream = 0) {
    std::uint64_t state = base;
    std::uint64_t mixed = splitmix64(state);
    state = mixed ^ (stream * 0xd6e8feb86659fd93ULL);
    mixed = splitmix64(state);
    state = mixed ^ (substream * 0xa5a5a5a5a5a5a5a5ULL);
    return splitmix64(state);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static Rng derived(std::uint64_t base, std::uint64_t stream,
                       std::uint64_t substream = 0) {
        return Rng(derive_seed(base, stream, substream));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // Box-Muller, spare discarded so the draw count stays predictable.
    double next_gaussian() {
        double u1 = 1.0 - next_unit(); // (0, 1], keeps log finite
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    // Uniform in [0, n). Modulo bias is < n / 2^64, irrelevant at this scale.
    std::size_t next_index(std::size_t n) {
        if (n == 0) throw ValidationError("next_index: n must be positive");
        return static_cast<std::size_t>(gen_() % n);
    }

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace aimm
