#include <cstdlib>
#include <string>

#include "termclust/error.hpp"
#include "termclust/simd.hpp"

namespace termclust::simd {

namespace {

constexpr Kernels scalar_kernels{Isa::scalar, &detail::dot_scalar, &detail::dot_block_scalar, &detail::axpy_scalar};

#if defined(TERMCLUST_HAVE_AVX2)
constexpr Kernels avx2_kernels{Isa::avx2, &detail::dot_avx2, &detail::dot_block_avx2, &detail::axpy_avx2};
#endif

const Kernels& select() {
    if (const char* env = std::getenv("TERMCLUST_SIMD")) {
        if (std::string(env) == "scalar") return scalar_kernels;
    }
#if defined(TERMCLUST_HAVE_AVX2)
    if (isa_available(Isa::avx2)) return avx2_kernels;
#endif
    return scalar_kernels;
}

}  // namespace

bool isa_available(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(TERMCLUST_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
    }
    return "unknown";
}

const Kernels& kernels() {
    static const Kernels& selected = select();
    return selected;
}

const Kernels& kernels_for(Isa isa) {
    if (!isa_available(isa)) fail_validation("SIMD variant not available on this CPU: " + std::string(isa_name(isa)));
#if defined(TERMCLUST_HAVE_AVX2)
    if (isa == Isa::avx2) return avx2_kernels;
#endif
    return scalar_kernels;
}

}  // namespace termclust::simd
