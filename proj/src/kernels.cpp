#include "hsd/kernels.hpp"

#include <algorithm>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hsd::kernels {

namespace {
int g_threads = 1;
}

void set_threads(int n) { g_threads = std::max(1, n); }
int threads() { return g_threads; }

// ---------------------------------------------------------------------------
// Serial reference kernels. Naive loops; the accumulation order per output
// element (ascending reduction index) is the contract the parallel kernels
// reproduce exactly.
// ---------------------------------------------------------------------------

namespace reference {

void matmul(const double* x, const double* w, double* y, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += x[i * k + p] * w[p * n + j];
      y[i * n + j] = acc;
    }
  }
}

void matmul_bias(const double* x, const double* w, const double* b, double* y, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = b[j];
      for (int p = 0; p < k; ++p) acc += x[i * k + p] * w[p * n + j];
      y[i * n + j] = acc;
    }
  }
}

void matmul_at_b(const double* a, const double* b, double* y, int m, int k, int n) {
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < m; ++p) acc += a[p * k + i] * b[p * n + j];
      y[i * n + j] = acc;
    }
  }
}

void matmul_a_bt(const double* a, const double* b, double* y, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) {
      double acc = 0.0;
      for (int p = 0; p < n; ++p) acc += a[i * n + p] * b[j * n + p];
      y[i * k + j] = acc;
    }
  }
}

void conv1d_valid(const double* x, const double* kern, const double* bias, double* y,
                  int n, int t, int c, int f, int k) {
  const int to = t - k + 1;
  for (int s = 0; s < n; ++s) {
    const double* xs = x + static_cast<size_t>(s) * t * c;
    double* ys = y + static_cast<size_t>(s) * to * f;
    for (int o = 0; o < to; ++o) {
      for (int q = 0; q < f; ++q) {
        double acc = bias ? bias[q] : 0.0;
        const double* kq = kern + static_cast<size_t>(q) * k * c;
        for (int dt = 0; dt < k; ++dt) {
          const double* xr = xs + static_cast<size_t>(o + dt) * c;
          const double* kr = kq + static_cast<size_t>(dt) * c;
          for (int ch = 0; ch < c; ++ch) acc += xr[ch] * kr[ch];
        }
        ys[o * f + q] = acc;
      }
    }
  }
}

void conv1d_valid_dx(const double* dy, const double* kern, double* dx,
                     int n, int t, int c, int f, int k) {
  const int to = t - k + 1;
  for (int s = 0; s < n; ++s) {
    const double* dys = dy + static_cast<size_t>(s) * to * f;
    double* dxs = dx + static_cast<size_t>(s) * t * c;
    for (int pos = 0; pos < t; ++pos) {
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        // output windows o with o <= pos <= o+k-1
        const int o_lo = std::max(0, pos - k + 1);
        const int o_hi = std::min(to - 1, pos);
        for (int o = o_lo; o <= o_hi; ++o) {
          const int dt = pos - o;
          for (int q = 0; q < f; ++q) {
            acc += dys[o * f + q] * kern[(static_cast<size_t>(q) * k + dt) * c + ch];
          }
        }
        dxs[pos * c + ch] = acc;
      }
    }
  }
}

void conv1d_valid_dw(const double* x, const double* dy, double* dkern, double* dbias,
                     int n, int t, int c, int f, int k) {
  const int to = t - k + 1;
  for (int q = 0; q < f; ++q) {
    for (int dt = 0; dt < k; ++dt) {
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int s = 0; s < n; ++s) {
          const double* xs = x + static_cast<size_t>(s) * t * c;
          const double* dys = dy + static_cast<size_t>(s) * to * f;
          for (int o = 0; o < to; ++o) acc += xs[(o + dt) * c + ch] * dys[o * f + q];
        }
        dkern[(static_cast<size_t>(q) * k + dt) * c + ch] = acc;
      }
    }
    if (dbias) {
      double acc = 0.0;
      for (int s = 0; s < n; ++s) {
        const double* dys = dy + static_cast<size_t>(s) * to * f;
        for (int o = 0; o < to; ++o) acc += dys[o * f + q];
      }
      dbias[q] = acc;
    }
  }
}

}  // namespace reference

// ---------------------------------------------------------------------------
// OpenMP kernels. Parallel over independent output elements; the reduction
// order inside each element matches the reference exactly.
// ---------------------------------------------------------------------------

void matmul(const double* x, const double* w, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && m > 1)
  for (int i = 0; i < m; ++i) {
    double* yr = y + static_cast<size_t>(i) * n;
    const double* xr = x + static_cast<size_t>(i) * k;
    std::memset(yr, 0, sizeof(double) * n);
    for (int p = 0; p < k; ++p) {
      const double xv = xr[p];
      const double* wr = w + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) yr[j] += xv * wr[j];
    }
  }
}

void matmul_bias(const double* x, const double* w, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && m > 1)
  for (int i = 0; i < m; ++i) {
    double* yr = y + static_cast<size_t>(i) * n;
    const double* xr = x + static_cast<size_t>(i) * k;
    std::memcpy(yr, b, sizeof(double) * n);
    for (int p = 0; p < k; ++p) {
      const double xv = xr[p];
      const double* wr = w + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) yr[j] += xv * wr[j];
    }
  }
}

void matmul_at_b(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && k > 1)
  for (int i = 0; i < k; ++i) {
    double* yr = y + static_cast<size_t>(i) * n;
    std::memset(yr, 0, sizeof(double) * n);
    for (int p = 0; p < m; ++p) {
      const double av = a[static_cast<size_t>(p) * k + i];
      const double* br = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) yr[j] += av * br[j];
    }
  }
}

void matmul_a_bt(const double* a, const double* b, double* y, int m, int n, int k) {
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && m > 1)
  for (int i = 0; i < m; ++i) {
    const double* ar = a + static_cast<size_t>(i) * n;
    double* yr = y + static_cast<size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const double* br = b + static_cast<size_t>(j) * n;
      double acc = 0.0;
      for (int p = 0; p < n; ++p) acc += ar[p] * br[p];
      yr[j] = acc;
    }
  }
}

void conv1d_valid(const double* x, const double* kern, const double* bias, double* y,
                  int n, int t, int c, int f, int k) {
  const int to = t - k + 1;
  const long total = static_cast<long>(n) * to;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && total > 1)
  for (long idx = 0; idx < total; ++idx) {
    const int s = static_cast<int>(idx / to);
    const int o = static_cast<int>(idx % to);
    const double* xs = x + static_cast<size_t>(s) * t * c;
    double* yo = y + (static_cast<size_t>(s) * to + o) * f;
    for (int q = 0; q < f; ++q) {
      double acc = bias ? bias[q] : 0.0;
      const double* kq = kern + static_cast<size_t>(q) * k * c;
      for (int dt = 0; dt < k; ++dt) {
        const double* xr = xs + static_cast<size_t>(o + dt) * c;
        const double* kr = kq + static_cast<size_t>(dt) * c;
        for (int ch = 0; ch < c; ++ch) acc += xr[ch] * kr[ch];
      }
      yo[q] = acc;
    }
  }
}

void conv1d_valid_dx(const double* dy, const double* kern, double* dx,
                     int n, int t, int c, int f, int k) {
  const int to = t - k + 1;
  const long total = static_cast<long>(n) * t;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && total > 1)
  for (long idx = 0; idx < total; ++idx) {
    const int s = static_cast<int>(idx / t);
    const int pos = static_cast<int>(idx % t);
    const double* dys = dy + static_cast<size_t>(s) * to * f;
    double* dxr = dx + (static_cast<size_t>(s) * t + pos) * c;
    const int o_lo = std::max(0, pos - k + 1);
    const int o_hi = std::min(to - 1, pos);
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int o = o_lo; o <= o_hi; ++o) {
        const int dt = pos - o;
        for (int q = 0; q < f; ++q) {
          acc += dys[o * f + q] * kern[(static_cast<size_t>(q) * k + dt) * c + ch];
        }
      }
      dxr[ch] = acc;
    }
  }
}

void conv1d_valid_dw(const double* x, const double* dy, double* dkern, double* dbias,
                     int n, int t, int c, int f, int k) {
  const int to = t - k + 1;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && f > 1)
  for (int q = 0; q < f; ++q) {
    for (int dt = 0; dt < k; ++dt) {
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int s = 0; s < n; ++s) {
          const double* xs = x + static_cast<size_t>(s) * t * c;
          const double* dys = dy + static_cast<size_t>(s) * to * f;
          for (int o = 0; o < to; ++o) acc += xs[(o + dt) * c + ch] * dys[o * f + q];
        }
        dkern[(static_cast<size_t>(q) * k + dt) * c + ch] = acc;
      }
    }
    if (dbias) {
      double acc = 0.0;
      for (int s = 0; s < n; ++s) {
        const double* dys = dy + static_cast<size_t>(s) * to * f;
        for (int o = 0; o < to; ++o) acc += dys[o * f + q];
      }
      dbias[q] = acc;
    }
  }
}

}  // namespace hsd::kernels
