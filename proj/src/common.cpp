#include "ure/error.hpp"
#include "ure/rng.hpp"

#include <bit>

namespace ure {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kInvalidArgument:
            return "invalid argument";
        case ErrorCode::kShapeMismatch:
            return "shape mismatch";
        case ErrorCode::kNonFinite:
            return "non-finite value";
        case ErrorCode::kBadMagic:
            return "bad magic";
        case ErrorCode::kTruncated:
            return "truncated";
        case ErrorCode::kIo:
            return "i/o error";
        case ErrorCode::kConfig:
            return "configuration error";
        case ErrorCode::kMissingPrerequisite:
            return "missing prerequisite";
        case ErrorCode::kInternal:
            return "internal error";
    }
    return "unknown";
}

std::uint64_t seed_from_double(double value) noexcept { return std::bit_cast<std::uint64_t>(value); }

void fill_gaussian(std::uint64_t seed, float sigma, std::span<float> out) {
    Rng rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (float& v : out) {
        v = sigma * normal(rng);
    }
}

}  // namespace ure
