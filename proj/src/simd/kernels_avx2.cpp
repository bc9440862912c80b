// AVX2 backend. Accumulator layout and reduction order mirror the scalar
// reference exactly (4 lanes, (l0+l1)+(l2+l3), no FMA contraction), so the
// two backends produce bitwise-identical results; the equivalence tests
// assert that. Compiled with -mavx2 -ffp-contract=off, used only when the
// CPU reports AVX2.

#include <cmath>
#include <cstddef>
#include <immintrin.h>

#include "quilt/simd/kernels.hpp"

#ifdef QUILT_HAVE_AVX2

namespace quilt::simd::avx2 {

namespace {

inline double reduce_lanes(__m256d v) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, v);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

inline double reduce_max(__m256d v) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, v);
    double m = lane[0];
    if (lane[1] > m) m = lane[1];
    if (lane[2] > m) m = lane[2];
    if (lane[3] > m) m = lane[3];
    return m;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d vb = _mm256_loadu_pd(b + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
    }
    double r = reduce_lanes(acc);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d vmax = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d vb = _mm256_loadu_pd(b + i);
        const __m256d d = _mm256_andnot_pd(sign_mask, _mm256_sub_pd(va, vb));
        vmax = _mm256_max_pd(vmax, d);
    }
    double m = reduce_max(vmax);
    for (; i < n; ++i) {
        const double d = std::fabs(a[i] - b[i]);
        if (d > m) m = d;
    }
    return m;
}

double sum(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double r = reduce_lanes(acc);
    for (; i < n; ++i) r += a[i];
    return r;
}

}  // namespace quilt::simd::avx2

#endif  // QUILT_HAVE_AVX2
