#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace wss {

// Deterministic 64-bit generator (xoshiro256** seeded via splitmix64).
// Used everywhere instead of <random> engines so that streams are stable
// across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed);

    uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();

    // Uniform integer in [0, n), n >= 1.
    uint64_t uniform_int(uint64_t n);

    // Standard normal via Box-Muller (pairs cached).
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_[4];
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// Stable sub-seed derivation: mixes (seed, component name, index) so that
// per-case / per-component streams are independent of evaluation order.
uint64_t derive_seed(uint64_t seed, std::string_view component, uint64_t index);

} // namespace wss
