#include <doctest.h>

#include <vector>

#include "quilt/simd/kernels.hpp"
#include "quilt/sim/rng.hpp"

using namespace quilt;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

}  // namespace

TEST_SUITE("kernels") {

// The AVX2 backend mirrors the scalar accumulator layout, so the two must
// agree bitwise on every input, at every length (tails included).
TEST_CASE("backends agree bitwise") {
    Rng rng(42);
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 15u, 64u, 257u, 1000u}) {
        const std::vector<double> a = random_vec(rng, n);
        const std::vector<double> b = random_vec(rng, n);
#ifdef QUILT_HAVE_AVX2
        CHECK(simd::scalar::dot(a.data(), b.data(), n) ==
              simd::avx2::dot(a.data(), b.data(), n));
        CHECK(simd::scalar::sum(a.data(), n) == simd::avx2::sum(a.data(), n));
        CHECK(simd::scalar::max_abs_diff(a.data(), b.data(), n) ==
              simd::avx2::max_abs_diff(a.data(), b.data(), n));
        std::vector<double> y1 = b, y2 = b;
        simd::scalar::axpy(1.7, a.data(), y1.data(), n);
        simd::avx2::axpy(1.7, a.data(), y2.data(), n);
        CHECK(y1 == y2);
#endif
        // Dispatched entry points match the scalar reference bitwise too.
        CHECK(simd::dot(a.data(), b.data(), n) ==
              simd::scalar::dot(a.data(), b.data(), n));
        CHECK(simd::max_abs_diff(a.data(), b.data(), n) ==
              simd::scalar::max_abs_diff(a.data(), b.data(), n));
    }
}

TEST_CASE("kernel values against plain formulas") {
    Rng rng(7);
    const std::size_t n = 333;
    const std::vector<double> a = random_vec(rng, n);
    const std::vector<double> b = random_vec(rng, n);
    long double expected = 0.0;
    for (std::size_t i = 0; i < n; ++i) expected += (long double)a[i] * b[i];
    CHECK(simd::dot(a.data(), b.data(), n) ==
          doctest::Approx((double)expected).epsilon(1e-12));

    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    CHECK(simd::max_abs_diff(a.data(), b.data(), n) == m);
}

TEST_CASE("active backend reports a known name") {
    const std::string name = simd::active_backend();
    CHECK((name == "scalar" || name == "avx2"));
}

}  // TEST_SUITE
