#include "mtt/kernels.hpp"

#include <algorithm>
#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mtt::kernels {

namespace {

std::atomic<int> g_max_threads{0};  // 0 = runtime default

// Below this many multiply-adds the fork/join overhead dominates.
constexpr int64_t kMinParallelWork = 1 << 18;

inline void matmul_row(const double* a_row, const double* b, double* c_row, int k, int n) {
    for (int j = 0; j < n; ++j) c_row[j] = 0.0;
    for (int p = 0; p < k; ++p) {
        const double av = a_row[p];
        const double* b_row = b + static_cast<int64_t>(p) * n;
        for (int j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
}

}  // namespace

int max_threads() noexcept {
    const int cap = g_max_threads.load(std::memory_order_relaxed);
#ifdef _OPENMP
    const int hw = omp_get_max_threads();
#else
    const int hw = 1;
#endif
    return cap > 0 ? std::min(cap, hw) : hw;
}

void set_max_threads(int n) noexcept {
    g_max_threads.store(n > 0 ? n : 0, std::memory_order_relaxed);
}

void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n) noexcept {
    for (int i = 0; i < m; ++i) {
        matmul_row(a + static_cast<int64_t>(i) * k, b, c + static_cast<int64_t>(i) * n, k, n);
    }
}

void matmul_parallel(const double* a, const double* b, double* c, int m, int k, int n) noexcept {
#ifdef _OPENMP
    const int threads = std::min(max_threads(), std::max(m, 1));
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < m; ++i) {
        matmul_row(a + static_cast<int64_t>(i) * k, b, c + static_cast<int64_t>(i) * n, k, n);
    }
#else
    matmul_serial(a, b, c, m, k, n);
#endif
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n) noexcept {
    const int64_t work = static_cast<int64_t>(m) * k * n;
    if (work >= kMinParallelWork && max_threads() > 1) {
        matmul_parallel(a, b, c, m, k, n);
    } else {
        matmul_serial(a, b, c, m, k, n);
    }
}

void axpy_serial(const double* x, double scale, double* acc, int64_t n) noexcept {
    for (int64_t i = 0; i < n; ++i) acc[i] += x[i] * scale;
}

void axpy_parallel(const double* x, double scale, double* acc, int64_t n) noexcept {
#ifdef _OPENMP
    const int threads = max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int64_t i = 0; i < n; ++i) acc[i] += x[i] * scale;
#else
    axpy_serial(x, scale, acc, n);
#endif
}

void axpy(const double* x, double scale, double* acc, int64_t n) noexcept {
    if (n >= kMinParallelWork && max_threads() > 1) {
        axpy_parallel(x, scale, acc, n);
    } else {
        axpy_serial(x, scale, acc, n);
    }
}

}  // namespace mtt::kernels
