#pragma once

#include <cstddef>

namespace hsd::kernels {

// Worker threads used by the OpenMP kernels. Every kernel computes each
// output element with a fixed inner accumulation order, so results are
// bit-identical to the serial reference for any thread count.
void set_threads(int n);
int threads();

// y[m x n] = x[m x k] * w[k x n]
void matmul(const double* x, const double* w, double* y, int m, int k, int n);
// y[m x n] = x[m x k] * w[k x n] + b[n] (b broadcast over rows)
void matmul_bias(const double* x, const double* w, const double* b, double* y, int m, int k, int n);
// y[k x n] = a^T[k x m] * b[m x n]  (a is m x k)
void matmul_at_b(const double* a, const double* b, double* y, int m, int k, int n);
// y[m x k] = a[m x n] * b^T[n x k]  (b is k x n)
void matmul_a_bt(const double* a, const double* b, double* y, int m, int n, int k);

// 1-D valid convolution over the time axis, batched.
//   x    : n x t x c        kern : f x k x c       bias : f (may be null)
//   y    : n x (t-k+1) x f
void conv1d_valid(const double* x, const double* kern, const double* bias, double* y,
                  int n, int t, int c, int f, int k);
// Gradients for the same convolution. dx / dkern / dbias are assigned.
void conv1d_valid_dx(const double* dy, const double* kern, double* dx,
                     int n, int t, int c, int f, int k);
void conv1d_valid_dw(const double* x, const double* dy, double* dkern, double* dbias,
                     int n, int t, int c, int f, int k);

// Plain serial implementations kept as the reference for correctness tests
// and the kernel benchmark.
namespace reference {
void matmul(const double* x, const double* w, double* y, int m, int k, int n);
void matmul_bias(const double* x, const double* w, const double* b, double* y, int m, int k, int n);
void matmul_at_b(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_a_bt(const double* a, const double* b, double* y, int m, int n, int k);
void conv1d_valid(const double* x, const double* kern, const double* bias, double* y,
                  int n, int t, int c, int f, int k);
void conv1d_valid_dx(const double* dy, const double* kern, double* dx,
                     int n, int t, int c, int f, int k);
void conv1d_valid_dw(const double* x, const double* dy, double* dkern, double* dbias,
                     int n, int t, int c, int f, int k);
}  // namespace reference

}  // namespace hsd::kernels
