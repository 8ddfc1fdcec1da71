#pragma once

#include <cstdint>

namespace mtt::kernels {

// Dense row-major matmul: c[m x n] = a[m x k] * b[k x n].
//
// The serial form is the reference; the parallel form splits output rows
// across OpenMP threads. Each output element is accumulated in the same
// order in both, so results are bitwise identical for any thread count.
void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n) noexcept;
void matmul_parallel(const double* a, const double* b, double* c, int m, int k, int n) noexcept;

// Dispatching entry point: parallel when the flop count is worth the fork.
void matmul(const double* a, const double* b, double* c, int m, int k, int n) noexcept;

// acc[i] += x[i] * scale, the gradient-accumulation inner loop.
void axpy_serial(const double* x, double scale, double* acc, int64_t n) noexcept;
void axpy_parallel(const double* x, double scale, double* acc, int64_t n) noexcept;
void axpy(const double* x, double scale, double* acc, int64_t n) noexcept;

// Worker cap shared by all parallel regions (kernels and the trainer's
// per-example fan-out). Defaults to the OpenMP runtime's limit.
int max_threads() noexcept;
void set_max_threads(int n) noexcept;

}  // namespace mtt::kernels
