#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace skelmatch {

// splitmix64 finalizer; used to derive independent substream seeds
// (e.g. one per episode) from a user seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deterministic RNG wrapper. std::mt19937_64 has a fully specified output
// sequence, and all draws below avoid std::uniform_int_distribution /
// std::shuffle, whose sequences are implementation-defined. Identical seeds
// therefore produce identical draws on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n) via rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (polar form avoided for determinism:
    // the trig form consumes exactly two draws per pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(theta);
        have_spare_ = true;
        return radius * std::cos(theta);
    }

    // Fisher-Yates shuffle of the whole vector.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // First k elements of a Fisher-Yates pass: a uniform k-subset of `items`,
    // in draw order, without replacement.
    template <typename T>
    std::vector<T> sample(std::vector<T> items, std::size_t k) {
        std::vector<T> out;
        out.reserve(k);
        std::size_t n = items.size();
        for (std::size_t i = 0; i < k && i < items.size(); ++i) {
            const std::size_t j = i + static_cast<std::size_t>(below(n - i));
            std::swap(items[i], items[j]);
            out.push_back(items[i]);
        }
        return out;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace skelmatch
