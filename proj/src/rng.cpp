#include "sdlab/rng.hpp"

namespace sdlab {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t fmix64(std::uint64_t z) noexcept {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
    return fmix64(a ^ fmix64(b));
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(mix64(seed, stream)) {}

std::uint64_t CounterRng::bits(std::uint64_t index) const noexcept {
    return fmix64(key_ + (index + 1) * kGolden);
}

double CounterRng::uniform(std::uint64_t index) const noexcept {
    return bits_to_unit(bits(index));
}

}  // namespace sdlab
