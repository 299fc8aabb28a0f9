#include "ure/kernels.hpp"

#include <cmath>

namespace ure::simd {
namespace {

void axpy(std::size_t n, float a, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

float dot(std::size_t n, const float* x, const float* y) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

void add(std::size_t n, const float* x, const float* y, float* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i] + y[i];
    }
}

void relu(std::size_t n, const float* x, float* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i] > 0.0f ? x[i] : 0.0f;
    }
}

void relu_backward(std::size_t n, const float* x, const float* gout, float* gin) {
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] > 0.0f) {
            gin[i] += gout[i];
        }
    }
}

bool all_finite(std::size_t n, const float* x) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i])) {
            return false;
        }
    }
    return true;
}

// Direct definition, no padding buffer: the reference the SIMD variants are checked against.
void correlate(const CorrelateShape& s, const float* in, const float* weight, float* out) {
    const std::size_t oh = s.out_h();
    const std::size_t ow = s.out_w();
    for (std::size_t o = 0; o < s.out_channels; ++o) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                float acc = 0.0f;
                for (std::size_t i = 0; i < s.in_channels; ++i) {
                    for (std::size_t ky = 0; ky < s.kernel_h; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(s.pad_h);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.in_h)) {
                            continue;
                        }
                        for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(s.pad_w);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(s.in_w)) {
                                continue;
                            }
                            const float w = weight[((o * s.in_channels + i) * s.kernel_h + ky) * s.kernel_w + kx];
                            acc += w * in[(i * s.in_h + static_cast<std::size_t>(iy)) * s.in_w + static_cast<std::size_t>(ix)];
                        }
                    }
                }
                out[(o * oh + y) * ow + x] += acc;
            }
        }
    }
}

void correlate_weight_grad(const CorrelateShape& s, const float* in, const float* gout, float* gweight) {
    const std::size_t oh = s.out_h();
    const std::size_t ow = s.out_w();
    for (std::size_t o = 0; o < s.out_channels; ++o) {
        for (std::size_t i = 0; i < s.in_channels; ++i) {
            for (std::size_t ky = 0; ky < s.kernel_h; ++ky) {
                for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
                    float acc = 0.0f;
                    for (std::size_t y = 0; y < oh; ++y) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(s.pad_h);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.in_h)) {
                            continue;
                        }
                        for (std::size_t x = 0; x < ow; ++x) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(s.pad_w);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(s.in_w)) {
                                continue;
                            }
                            acc += gout[(o * oh + y) * ow + x] *
                                   in[(i * s.in_h + static_cast<std::size_t>(iy)) * s.in_w + static_cast<std::size_t>(ix)];
                        }
                    }
                    gweight[((o * s.in_channels + i) * s.kernel_h + ky) * s.kernel_w + kx] += acc;
                }
            }
        }
    }
}

constexpr KernelTable kScalarTable{
    Backend::kScalar, axpy, dot, add, relu, relu_backward, all_finite, correlate, correlate_weight_grad,
};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalarTable; }

namespace detail {

void pad_planes(const CorrelateShape& s, const float* in, std::vector<float>& padded) {
    const std::size_t ph = s.in_h + 2 * s.pad_h;
    const std::size_t pw = s.in_w + 2 * s.pad_w;
    padded.assign(s.in_channels * ph * pw, 0.0f);
    for (std::size_t i = 0; i < s.in_channels; ++i) {
        for (std::size_t y = 0; y < s.in_h; ++y) {
            const float* src = in + (i * s.in_h + y) * s.in_w;
            float* dst = padded.data() + (i * ph + y + s.pad_h) * pw + s.pad_w;
            for (std::size_t x = 0; x < s.in_w; ++x) {
                dst[x] = src[x];
            }
        }
    }
}

}  // namespace detail
}  // namespace ure::simd
