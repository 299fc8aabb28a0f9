#pragma once

#include "ure/grid.hpp"
#include "ure/signalgen.hpp"

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ure::spectral {

enum class Window { kHann, kRect };

std::string to_string(Window window);
Window window_from_string(const std::string& name);

/// Iterative in-place radix-2 Cooley-Tukey. The inverse is scaled by 1/n.
/// Throws ure::Error unless the length is a power of two.
void fft_radix2(std::span<std::complex<double>> buffer, bool inverse);
std::vector<std::complex<double>> fft_radix2(std::vector<std::complex<double>> buffer, bool inverse);

struct StftParams {
    std::size_t window_size = 256;
    std::size_t hop = 128;
    Window window = Window::kHann;

    bool operator==(const StftParams&) const = default;
};

/// |STFT| with rows = frequency bins 0..window_size/2, columns = frames.
struct Spectrogram {
    Grid magnitudes;
    double sample_rate = 0.0;
    StftParams params;

    [[nodiscard]] std::size_t freq_bins() const noexcept { return magnitudes.rows; }
    [[nodiscard]] std::size_t time_frames() const noexcept { return magnitudes.cols; }
};

Spectrogram stft(const signal::TimeSeries& ts, const StftParams& params);

/// Classifier input: single-channel [H x W] image with values in [0, 1].
struct ImageTensor {
    Grid pixels;
    StftParams provenance;

    [[nodiscard]] std::size_t height() const noexcept { return pixels.rows; }
    [[nodiscard]] std::size_t width() const noexcept { return pixels.cols; }
};

/// Align-corners bilinear resampling.
Grid resize_bilinear(const Grid& src, std::size_t target_h, std::size_t target_w);

/// log1p, bilinear resize, then per-image min-max to [0, 1]. A constant grid maps to zeros.
ImageTensor to_image(const Spectrogram& spec, std::size_t target_h, std::size_t target_w);

// IMG1: "IMG1", u32 H, u32 W, H*W f32 row-major (little-endian).
std::vector<std::byte> encode_grid(const Grid& grid);
Grid decode_grid(std::span<const std::byte> bytes);
void save_grid(const std::filesystem::path& path, const Grid& grid);
Grid load_grid(const std::filesystem::path& path);

}  // namespace ure::spectral
