#include "glean/kernels.hpp"

#if defined(GLEAN_HAVE_AVX2)

#include <immintrin.h>

namespace glean::kernels::detail {
namespace {

inline double hsum256(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n4; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    double sum = hsum256(acc);
    for (std::size_t i = n4; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

double l2sq_avx2(const double* a, const double* b, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n4; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double sum = hsum256(acc);
    for (std::size_t i = n4; i < n; ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t(3);
    const __m256d va = _mm256_set1_pd(alpha);
    for (std::size_t i = 0; i < n4; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (std::size_t i = n4; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double alpha, double* x, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t(3);
    const __m256d va = _mm256_set1_pd(alpha);
    for (std::size_t i = 0; i < n4; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    }
    for (std::size_t i = n4; i < n; ++i) x[i] *= alpha;
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops ops{dot_avx2, l2sq_avx2, axpy_avx2, scale_avx2};
    return ops;
}

}  // namespace glean::kernels::detail

#endif  // GLEAN_HAVE_AVX2
