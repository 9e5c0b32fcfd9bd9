#include "glean/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace glean::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(GLEAN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend detect_best() {
    return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<const detail::Ops*> g_ops{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const detail::Ops* ops_for(Backend b) {
    switch (b) {
        case Backend::scalar:
            return &detail::scalar_ops();
        case Backend::avx2:
#if defined(GLEAN_HAVE_AVX2)
            return &detail::avx2_ops();
#else
            return nullptr;
#endif
    }
    return nullptr;
}

const detail::Ops& ops() {
    const detail::Ops* p = g_ops.load(std::memory_order_acquire);
    if (!p) {
        Backend b = detect_best();
        p = ops_for(b);
        g_backend.store(b, std::memory_order_relaxed);
        g_ops.store(p, std::memory_order_release);
    }
    return *p;
}

}  // namespace

Backend active_backend() {
    ops();
    return g_backend.load(std::memory_order_relaxed);
}

bool backend_available(Backend b) {
    if (b == Backend::avx2) return cpu_has_avx2() && ops_for(b) != nullptr;
    return ops_for(b) != nullptr;
}

void set_backend(Backend b) {
    if (!backend_available(b)) {
        throw std::runtime_error("kernel backend not available: " + backend_name(b));
    }
    g_backend.store(b, std::memory_order_relaxed);
    g_ops.store(ops_for(b), std::memory_order_release);
}

std::string backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

double dot(const double* a, const double* b, std::size_t n) { return ops().dot(a, b, n); }
double l2sq(const double* a, const double* b, std::size_t n) { return ops().l2sq(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { ops().axpy(alpha, x, y, n); }
void scale(double alpha, double* x, std::size_t n) { ops().scale(alpha, x, n); }

}  // namespace glean::kernels
