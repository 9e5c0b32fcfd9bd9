#pragma once

#include <cstddef>
#include <string>

// Dense double-precision primitives behind the clustering and training loops.
// A scalar reference implementation always exists; an AVX2/FMA variant is
// selected at load time when the CPU supports it. Both compute the same
// quantities; reduction order differs, so cross-backend comparisons are
// tolerance-based (see tests/test_kernels.cpp).

namespace glean::kernels {

enum class Backend { scalar, avx2 };

// Backend chosen at startup (best supported). Can be overridden, e.g. to
// force the scalar reference in equivalence tests.
Backend active_backend();
void set_backend(Backend b);
bool backend_available(Backend b);
std::string backend_name(Backend b);

// sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i (a[i]-b[i])^2
double l2sq(const double* a, const double* b, std::size_t n);

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

// x[i] *= alpha
void scale(double alpha, double* x, std::size_t n);

namespace detail {
struct Ops {
    double (*dot)(const double*, const double*, std::size_t);
    double (*l2sq)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
};
const Ops& scalar_ops();
#if defined(GLEAN_HAVE_AVX2)
const Ops& avx2_ops();
#endif
}  // namespace detail

}  // namespace glean::kernels
