#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bmd {

/// Derives an independent sub-seed from a base seed and a stream tag
/// (splitmix64 finalizer). Used to give per-class / per-phase RNG streams
/// that stay reproducible under a single run seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag);

/// Deterministic random source. Wraps mt19937_64 (whose output sequence is
/// fixed by the standard) and implements its own draw methods, because the
/// std distribution objects are allowed to differ between implementations.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform index in [0, n). Rejection sampling keeps it unbiased.
    std::size_t next_index(std::size_t n);

    /// Standard normal draw via the Marsaglia polar method.
    double next_normal();

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = next_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace bmd
