#include "ure/spectral.hpp"

#include "ure/binary_io.hpp"
#include "ure/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace ure::spectral {

std::string to_string(Window window) { return window == Window::kHann ? "hann" : "rect"; }

Window window_from_string(const std::string& name) {
    if (name == "hann") {
        return Window::kHann;
    }
    if (name == "rect") {
        return Window::kRect;
    }
    fail(ErrorCode::kInvalidArgument, "unknown window '" + name + "' (expected hann|rect)");
}

void fft_radix2(std::span<std::complex<double>> buffer, bool inverse) {
    const std::size_t n = buffer.size();
    require(n >= 1 && std::has_single_bit(n), ErrorCode::kInvalidArgument,
            "FFT length " + std::to_string(n) + " is not a power of two");
    if (n == 1) {
        return;
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(buffer[i], buffer[j]);
        }
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::size_t half = len / 2;
        for (std::size_t k = 0; k < half; ++k) {
            // Twiddles from the angle directly rather than by repeated multiplication.
            const std::complex<double> w(std::cos(angle * static_cast<double>(k)),
                                         std::sin(angle * static_cast<double>(k)));
            for (std::size_t start = 0; start < n; start += len) {
                const std::complex<double> u = buffer[start + k];
                const std::complex<double> v = buffer[start + k + half] * w;
                buffer[start + k] = u + v;
                buffer[start + k + half] = u - v;
            }
        }
    }
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& v : buffer) {
            v *= scale;
        }
    }
}

std::vector<std::complex<double>> fft_radix2(std::vector<std::complex<double>> buffer, bool inverse) {
    fft_radix2(std::span(buffer), inverse);
    return buffer;
}

Spectrogram stft(const signal::TimeSeries& ts, const StftParams& params) {
    const std::size_t win = params.window_size;
    require(win >= 1 && std::has_single_bit(win), ErrorCode::kInvalidArgument,
            "STFT window_size " + std::to_string(win) + " is not a power of two");
    require(params.hop >= 1, ErrorCode::kInvalidArgument, "STFT hop must be >= 1");
    require(ts.samples.size() >= win, ErrorCode::kInvalidArgument,
            "input of " + std::to_string(ts.samples.size()) + " samples is shorter than one window of " +
                std::to_string(win));

    std::vector<double> taper(win, 1.0);
    if (params.window == Window::kHann) {
        for (std::size_t i = 0; i < win; ++i) {
            taper[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(win));
        }
    }

    const std::size_t frames = 1 + (ts.samples.size() - win) / params.hop;
    const std::size_t bins = win / 2 + 1;
    Spectrogram spec{Grid(bins, frames), ts.sample_rate, params};
    std::vector<std::complex<double>> buf(win);
    for (std::size_t t = 0; t < frames; ++t) {
        const float* frame = ts.samples.data() + t * params.hop;
        for (std::size_t i = 0; i < win; ++i) {
            buf[i] = {taper[i] * static_cast<double>(frame[i]), 0.0};
        }
        fft_radix2(std::span(buf), false);
        for (std::size_t b = 0; b < bins; ++b) {
            spec.magnitudes.at(b, t) = static_cast<float>(std::abs(buf[b]));
        }
    }
    return spec;
}

Grid resize_bilinear(const Grid& src, std::size_t target_h, std::size_t target_w) {
    require(target_h >= 1 && target_w >= 1, ErrorCode::kInvalidArgument, "resize target dims must be >= 1");
    require(!src.empty(), ErrorCode::kInvalidArgument, "cannot resize an empty grid");
    if (src.rows == target_h && src.cols == target_w) {
        return src;
    }
    auto coord = [](std::size_t dst, std::size_t dst_len, std::size_t src_len) {
        if (dst_len == 1 || src_len == 1) {
            return 0.0;
        }
        return static_cast<double>(dst) * static_cast<double>(src_len - 1) / static_cast<double>(dst_len - 1);
    };
    Grid out(target_h, target_w);
    for (std::size_t y = 0; y < target_h; ++y) {
        const double sy = coord(y, target_h, src.rows);
        const auto y0 = static_cast<std::size_t>(std::floor(sy));
        const std::size_t y1 = std::min(y0 + 1, src.rows - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < target_w; ++x) {
            const double sx = coord(x, target_w, src.cols);
            const auto x0 = static_cast<std::size_t>(std::floor(sx));
            const std::size_t x1 = std::min(x0 + 1, src.cols - 1);
            const double fx = sx - static_cast<double>(x0);
            const double top = (1.0 - fx) * src.at(y0, x0) + fx * src.at(y0, x1);
            const double bottom = (1.0 - fx) * src.at(y1, x0) + fx * src.at(y1, x1);
            out.at(y, x) = static_cast<float>((1.0 - fy) * top + fy * bottom);
        }
    }
    return out;
}

ImageTensor to_image(const Spectrogram& spec, std::size_t target_h, std::size_t target_w) {
    require(target_h >= 1 && target_w >= 1, ErrorCode::kInvalidArgument, "image target dims must be >= 1");
    require(!spec.magnitudes.empty(), ErrorCode::kInvalidArgument, "spectrogram is empty");
    Grid logged = spec.magnitudes;
    for (float& v : logged.values) {
        v = std::log1p(v);
    }
    Grid resized = resize_bilinear(logged, target_h, target_w);
    const auto [lo_it, hi_it] = std::minmax_element(resized.values.begin(), resized.values.end());
    const float lo = *lo_it;
    const float range = *hi_it - lo;
    for (float& v : resized.values) {
        v = range > 0.0f ? std::clamp((v - lo) / range, 0.0f, 1.0f) : 0.0f;
    }
    return ImageTensor{std::move(resized), spec.params};
}

std::vector<std::byte> encode_grid(const Grid& grid) {
    io::ByteWriter w;
    w.magic("IMG1");
    w.u32(static_cast<std::uint32_t>(grid.rows));
    w.u32(static_cast<std::uint32_t>(grid.cols));
    for (float v : grid.values) {
        w.f32(v);
    }
    return w.take();
}

Grid decode_grid(std::span<const std::byte> bytes) {
    io::ByteReader r(bytes);
    if (bytes.size() < 4 || !r.magic("IMG1")) {
        fail(ErrorCode::kBadMagic, "not an IMG1 grid (bad magic)");
    }
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    const std::uint64_t count = static_cast<std::uint64_t>(h) * w;
    if (r.remaining() / 4 < count) {
        fail(ErrorCode::kTruncated, "IMG1 payload truncated");
    }
    Grid grid(h, w);
    for (float& v : grid.values) {
        v = r.f32();
        require(std::isfinite(v), ErrorCode::kNonFinite, "IMG1 grid holds a non-finite value");
    }
    return grid;
}

void save_grid(const std::filesystem::path& path, const Grid& grid) { io::write_file(path, encode_grid(grid)); }

Grid load_grid(const std::filesystem::path& path) { return decode_grid(io::read_file(path)); }

}  // namespace ure::spectral
