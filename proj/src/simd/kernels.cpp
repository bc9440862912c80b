#include "quilt/simd/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace quilt::simd {

namespace {

constexpr Kernels kScalar{scalar::dot, scalar::axpy, scalar::max_abs_diff,
                          scalar::sum, "scalar"};

#ifdef QUILT_HAVE_AVX2
constexpr Kernels kAvx2{avx2::dot, avx2::axpy, avx2::max_abs_diff, avx2::sum,
                        "avx2"};
#endif

const Kernels& select() {
    const char* env = std::getenv("QUILT_SIMD");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return kScalar;
#ifdef QUILT_HAVE_AVX2
    if (env != nullptr && std::strcmp(env, "avx2") == 0) return kAvx2;
    if (env == nullptr && __builtin_cpu_supports("avx2")) return kAvx2;
#endif
    return kScalar;
}

}  // namespace

const Kernels& active() {
    static const Kernels& k = select();
    return k;
}

std::string active_backend() { return active().name; }

}  // namespace quilt::simd
