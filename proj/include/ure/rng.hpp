#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace ure {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds from
/// structured keys (run seed, sample index, block index, ...).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = mix64(base);
    for (std::uint64_t k : keys) {
        h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
    }
    return h;
}

std::uint64_t seed_from_double(double value) noexcept;

/// Fills `out` with iid N(0, sigma^2) draws from a generator seeded with `seed`.
void fill_gaussian(std::uint64_t seed, float sigma, std::span<float> out);

}  // namespace ure
