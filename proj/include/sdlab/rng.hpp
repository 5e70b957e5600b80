#pragma once

#include <cstdint>
#include <limits>

namespace sdlab {

/// splitmix64 output finalizer (Steele, Lea, Flood 2014).
std::uint64_t fmix64(std::uint64_t z) noexcept;

/// Deterministic seed combiner: mix64(a, b) = fmix64(a ^ fmix64(b)).
/// Used for child seeds, e.g. child_seed = mix64(seed, grid_index).
std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept;

// Counter-based generator. Draw i of stream s under seed k is
//   fmix64(mix64(k, s) + (i + 1) * 0x9e3779b97f4a7c15)
// which is position i of a splitmix64 sequence keyed by (k, s).
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    /// Sequential draw; advances the counter.
    result_type operator()() noexcept { return bits(counter_++); }

    /// Random access draw; does not touch the counter.
    result_type bits(std::uint64_t index) const noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform(std::uint64_t index) const noexcept;

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

inline double bits_to_unit(std::uint64_t b) noexcept {
    return static_cast<double>(b >> 11) * 0x1.0p-53;
}

}  // namespace sdlab
