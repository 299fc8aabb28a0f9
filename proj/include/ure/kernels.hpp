#pragma once

// Data-parallel inner loops behind the tensor engine. Every kernel has a
// scalar reference implementation; SIMD variants are selected at runtime from
// CPU feature detection and are equivalence-tested against the reference.

#include <cstddef>
#include <string_view>
#include <vector>

namespace ure::simd {

enum class Backend { kScalar, kAvx2 };

std::string_view to_string(Backend backend) noexcept;

/// Geometry of a stride-1 multi-channel 2-D cross-correlation.
/// out[o, y, x] += sum_{i, ky, kx} w[o, i, ky, kx] * in[i, y + ky - pad_h, x + kx - pad_w]
/// with zeros outside the input.
struct CorrelateShape {
    std::size_t in_channels = 0;
    std::size_t in_h = 0;
    std::size_t in_w = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t pad_h = 0;
    std::size_t pad_w = 0;

    [[nodiscard]] std::size_t out_h() const noexcept { return in_h + 2 * pad_h - kernel_h + 1; }
    [[nodiscard]] std::size_t out_w() const noexcept { return in_w + 2 * pad_w - kernel_w + 1; }
};

struct KernelTable {
    Backend backend;

    // y[i] += a * x[i]
    void (*axpy)(std::size_t n, float a, const float* x, float* y);
    float (*dot)(std::size_t n, const float* x, const float* y);
    // out[i] = x[i] + y[i]
    void (*add)(std::size_t n, const float* x, const float* y, float* out);
    // out[i] = max(x[i], 0)
    void (*relu)(std::size_t n, const float* x, float* out);
    // gin[i] += x[i] > 0 ? gout[i] : 0
    void (*relu_backward)(std::size_t n, const float* x, const float* gout, float* gin);
    bool (*all_finite)(std::size_t n, const float* x);

    // out += correlate(in, weight); out is [out_channels, out_h, out_w].
    void (*correlate)(const CorrelateShape& shape, const float* in, const float* weight, float* out);
    // gweight[o, i, ky, kx] += sum_{y, x} gout[o, y, x] * in_padded[i, y + ky, x + kx]
    void (*correlate_weight_grad)(const CorrelateShape& shape, const float* in, const float* gout,
                                  float* gweight);
};

const KernelTable& scalar_kernels() noexcept;
#if defined(URE_HAVE_AVX2)
const KernelTable& avx2_kernels() noexcept;
#endif

[[nodiscard]] bool backend_available(Backend backend) noexcept;
[[nodiscard]] std::vector<Backend> available_backends();

/// Kernels in use by the engine. Defaults to the widest supported backend.
const KernelTable& active() noexcept;

/// Overrides the runtime choice; throws ure::Error if the CPU or build lacks it.
void select_backend(Backend backend);

/// Restores the previously active backend on scope exit.
class ScopedBackend {
   public:
    explicit ScopedBackend(Backend backend);
    ~ScopedBackend();
    ScopedBackend(const ScopedBackend&) = delete;
    ScopedBackend& operator=(const ScopedBackend&) = delete;

   private:
    Backend previous_;
};

namespace detail {
// Zero-padded copy of a [channels, h, w] stack into [channels, h + 2ph, w + 2pw].
void pad_planes(const CorrelateShape& shape, const float* in, std::vector<float>& padded);
}  // namespace detail

}  // namespace ure::simd
