// AVX2 + FMA variants. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here may run unless the dispatcher confirmed support.

#include "ure/kernels.hpp"

#include <immintrin.h>

#include <array>
#include <cmath>
#include <vector>

namespace ure::simd {
namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

void axpy(std::size_t n, float a, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

float dot(std::size_t n, const float* x, const float* y) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    }
    float acc = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

void add(std::size_t n, const float* x, const float* y, float* out) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) {
        out[i] = x[i] + y[i];
    }
}

void relu(std::size_t n, const float* x, float* out) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    }
    for (; i < n; ++i) {
        out[i] = x[i] > 0.0f ? x[i] : 0.0f;
    }
}

void relu_backward(std::size_t n, const float* x, const float* gout, float* gin) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        const __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(gout + i));
        _mm256_storeu_ps(gin + i, _mm256_add_ps(_mm256_loadu_ps(gin + i), g));
    }
    for (; i < n; ++i) {
        if (x[i] > 0.0f) {
            gin[i] += gout[i];
        }
    }
}

bool all_finite(std::size_t n, const float* x) {
    // Exponent bits all set means Inf or NaN.
    const __m256i exp_mask = _mm256_set1_epi32(0x7f800000);
    __m256i bad = _mm256_setzero_si256();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256i bits = _mm256_and_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(x + i)), exp_mask);
        bad = _mm256_or_si256(bad, _mm256_cmpeq_epi32(bits, exp_mask));
    }
    if (!_mm256_testz_si256(bad, bad)) {
        return false;
    }
    for (; i < n; ++i) {
        if (!std::isfinite(x[i])) {
            return false;
        }
    }
    return true;
}

thread_local std::vector<float> t_padded;

// Four 8-wide accumulators per output row segment keep enough FMAs in flight
// to cover the FMA latency; narrower tails fall back to one vector, then scalar.
void correlate(const CorrelateShape& s, const float* in, const float* weight, float* out) {
    detail::pad_planes(s, in, t_padded);
    const float* padded = t_padded.data();
    const std::size_t ph = s.in_h + 2 * s.pad_h;
    const std::size_t pw = s.in_w + 2 * s.pad_w;
    const std::size_t oh = s.out_h();
    const std::size_t ow = s.out_w();
    const std::size_t kh = s.kernel_h;
    const std::size_t kw = s.kernel_w;
    const std::size_t plane = ph * pw;

    for (std::size_t o = 0; o < s.out_channels; ++o) {
        const float* wo = weight + o * s.in_channels * kh * kw;
        for (std::size_t y = 0; y < oh; ++y) {
            float* orow = out + (o * oh + y) * ow;
            std::size_t x = 0;
            for (; x + 32 <= ow; x += 32) {
                __m256 a0 = _mm256_loadu_ps(orow + x);
                __m256 a1 = _mm256_loadu_ps(orow + x + 8);
                __m256 a2 = _mm256_loadu_ps(orow + x + 16);
                __m256 a3 = _mm256_loadu_ps(orow + x + 24);
                for (std::size_t i = 0; i < s.in_channels; ++i) {
                    const float* wi = wo + i * kh * kw;
                    const float* base = padded + i * plane + y * pw + x;
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const float* row = base + ky * pw;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const __m256 w = _mm256_set1_ps(wi[ky * kw + kx]);
                            a0 = _mm256_fmadd_ps(w, _mm256_loadu_ps(row + kx), a0);
                            a1 = _mm256_fmadd_ps(w, _mm256_loadu_ps(row + kx + 8), a1);
                            a2 = _mm256_fmadd_ps(w, _mm256_loadu_ps(row + kx + 16), a2);
                            a3 = _mm256_fmadd_ps(w, _mm256_loadu_ps(row + kx + 24), a3);
                        }
                    }
                }
                _mm256_storeu_ps(orow + x, a0);
                _mm256_storeu_ps(orow + x + 8, a1);
                _mm256_storeu_ps(orow + x + 16, a2);
                _mm256_storeu_ps(orow + x + 24, a3);
            }
            for (; x + 8 <= ow; x += 8) {
                __m256 a0 = _mm256_loadu_ps(orow + x);
                for (std::size_t i = 0; i < s.in_channels; ++i) {
                    const float* wi = wo + i * kh * kw;
                    const float* base = padded + i * plane + y * pw + x;
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const float* row = base + ky * pw;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            a0 = _mm256_fmadd_ps(_mm256_set1_ps(wi[ky * kw + kx]), _mm256_loadu_ps(row + kx), a0);
                        }
                    }
                }
                _mm256_storeu_ps(orow + x, a0);
            }
            for (; x < ow; ++x) {
                float acc = 0.0f;
                for (std::size_t i = 0; i < s.in_channels; ++i) {
                    const float* wi = wo + i * kh * kw;
                    const float* base = padded + i * plane + y * pw + x;
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            acc += wi[ky * kw + kx] * base[ky * pw + kx];
                        }
                    }
                }
                orow[x] += acc;
            }
        }
    }
}

constexpr std::size_t kMaxVectorTaps = 25;

void correlate_weight_grad(const CorrelateShape& s, const float* in, const float* gout, float* gweight) {
    const std::size_t kh = s.kernel_h;
    const std::size_t kw = s.kernel_w;
    const std::size_t taps = kh * kw;
    if (taps > kMaxVectorTaps) {
        scalar_kernels().correlate_weight_grad(s, in, gout, gweight);
        return;
    }
    detail::pad_planes(s, in, t_padded);
    const float* padded = t_padded.data();
    const std::size_t ph = s.in_h + 2 * s.pad_h;
    const std::size_t pw = s.in_w + 2 * s.pad_w;
    const std::size_t oh = s.out_h();
    const std::size_t ow = s.out_w();
    const std::size_t plane = ph * pw;

    __m256 acc[kMaxVectorTaps];
    std::array<float, kMaxVectorTaps> tail{};
    for (std::size_t o = 0; o < s.out_channels; ++o) {
        const float* go = gout + o * oh * ow;
        for (std::size_t i = 0; i < s.in_channels; ++i) {
            for (std::size_t t = 0; t < taps; ++t) {
                acc[t] = _mm256_setzero_ps();
                tail[t] = 0.0f;
            }
            const float* pi = padded + i * plane;
            for (std::size_t y = 0; y < oh; ++y) {
                const float* grow = go + y * ow;
                std::size_t x = 0;
                for (; x + 8 <= ow; x += 8) {
                    const __m256 g = _mm256_loadu_ps(grow + x);
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const float* row = pi + (y + ky) * pw + x;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            acc[ky * kw + kx] = _mm256_fmadd_ps(g, _mm256_loadu_ps(row + kx), acc[ky * kw + kx]);
                        }
                    }
                }
                for (; x < ow; ++x) {
                    const float g = grow[x];
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const float* row = pi + (y + ky) * pw + x;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            tail[ky * kw + kx] += g * row[kx];
                        }
                    }
                }
            }
            float* gw = gweight + (o * s.in_channels + i) * taps;
            for (std::size_t t = 0; t < taps; ++t) {
                gw[t] += hsum(acc[t]) + tail[t];
            }
        }
    }
}

constexpr KernelTable kAvx2Table{
    Backend::kAvx2, axpy, dot, add, relu, relu_backward, all_finite, correlate, correlate_weight_grad,
};

}  // namespace

const KernelTable& avx2_kernels() noexcept { return kAvx2Table; }

}  // namespace ure::simd
