#pragma once

#include <cstddef>
#include <string>

// Dispatching vector kernels for the arithmetic inner loops (lasso coordinate
// updates, rank-vector correlations, convergence norms). Each kernel has a
// scalar reference implementation and, on x86-64 with AVX2+FMA, a vectorized
// variant selected once at startup. The QUILT_SIMD env var (scalar|avx2)
// overrides detection; equivalence of the backends is covered in tests.

namespace quilt::simd {

struct Kernels {
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    const char* name;
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double max_abs_diff(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
}  // namespace scalar

#ifdef QUILT_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double max_abs_diff(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
}  // namespace avx2
#endif

/// Backend selected at startup (CPU detection + QUILT_SIMD override).
const Kernels& active();

/// Name of the active backend ("scalar" or "avx2").
std::string active_backend();

inline double dot(const double* a, const double* b, std::size_t n) {
    return active().dot(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    active().axpy(alpha, x, y, n);
}
inline double max_abs_diff(const double* a, const double* b, std::size_t n) {
    return active().max_abs_diff(a, b, n);
}
inline double sum(const double* a, std::size_t n) { return active().sum(a, n); }

}  // namespace quilt::simd
