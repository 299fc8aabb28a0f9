#include "ure/error.hpp"
#include "ure/kernels.hpp"

#include <atomic>
#include <string>

namespace ure::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(URE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& table_for(Backend backend) noexcept {
#if defined(URE_HAVE_AVX2)
    if (backend == Backend::kAvx2) {
        return avx2_kernels();
    }
#endif
    (void)backend;
    return scalar_kernels();
}

Backend widest() noexcept { return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar; }

std::atomic<const KernelTable*>& active_slot() noexcept {
    static std::atomic<const KernelTable*> slot{&table_for(widest())};
    return slot;
}

}  // namespace

std::string_view to_string(Backend backend) noexcept {
    switch (backend) {
        case Backend::kScalar:
            return "scalar";
        case Backend::kAvx2:
            return "avx2";
    }
    return "unknown";
}

bool backend_available(Backend backend) noexcept {
    switch (backend) {
        case Backend::kScalar:
            return true;
        case Backend::kAvx2:
            return cpu_has_avx2();
    }
    return false;
}

std::vector<Backend> available_backends() {
    std::vector<Backend> out{Backend::kScalar};
    if (backend_available(Backend::kAvx2)) {
        out.push_back(Backend::kAvx2);
    }
    return out;
}

const KernelTable& active() noexcept { return *active_slot().load(std::memory_order_acquire); }

void select_backend(Backend backend) {
    require(backend_available(backend), ErrorCode::kInvalidArgument,
            "kernel backend '" + std::string(to_string(backend)) + "' is not available on this CPU/build");
    active_slot().store(&table_for(backend), std::memory_order_release);
}

ScopedBackend::ScopedBackend(Backend backend) : previous_(active().backend) { select_backend(backend); }

ScopedBackend::~ScopedBackend() { active_slot().store(&table_for(previous_), std::memory_order_release); }

}  // namespace ure::simd
