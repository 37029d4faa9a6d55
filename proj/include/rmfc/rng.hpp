#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "rmfc/common.hpp"

namespace rmfc {

// Randomness channels. Every draw in the toolkit is addressed by an explicit
// key (seed, trial, agent, t, channel, draw) so results never depend on call
// order, scheduling, or thread count.
enum class RngChannel : std::uint64_t {
    init_state = 1,
    action = 2,
    idio_noise = 3,
    common_noise = 4,
    perturbation = 5,
    value_table = 6,
    restart = 7,
    initial_dist = 8,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Stateless counter-based generator: uniform(key...) is a pure function of the key.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t bits(std::initializer_list<std::uint64_t> key) const {
        std::uint64_t h = detail::splitmix64(seed_);
        for (std::uint64_t k : key) h = detail::splitmix64(h ^ k);
        return h;
    }

    /// Uniform double in [0, 1).
    double uniform(std::initializer_list<std::uint64_t> key) const {
        return static_cast<double>(bits(key) >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi, std::initializer_list<std::uint64_t> key) const {
        return lo + (hi - lo) * uniform(key);
    }

    /// Derive a child seed; used to give trials/runs their own key spaces.
    std::uint64_t derive(std::initializer_list<std::uint64_t> key) const { return bits(key); }

private:
    std::uint64_t seed_;
};

/// Inverse-CDF sample from a finite probability vector.
inline int sample_index(const std::vector<double>& weights, double u) {
    double c = 0.0;
    int last_positive = -1;
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
        if (weights[i] > 0.0) last_positive = i;
        c += weights[i];
        if (u < c) return i;
    }
    if (last_positive < 0) throw ValidationError("sample_index: zero mass vector");
    return last_positive;  // u landed in the fp gap above the final cumsum
}

}  // namespace rmfc
