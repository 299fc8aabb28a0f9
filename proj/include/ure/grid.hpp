#pragma once

#include <cstddef>
#include <vector>

namespace ure {

/// Row-major 2-D float grid. For spectrogram-derived data rows index
/// frequency and columns index time.
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;

    Grid() = default;
    Grid(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), values(r * c, fill) {}

    [[nodiscard]] float& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    [[nodiscard]] float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] bool empty() const noexcept { return values.empty(); }

    bool operator==(const Grid&) const = default;
};

}  // namespace ure
