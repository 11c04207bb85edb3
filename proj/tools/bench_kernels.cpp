// Timing comparison of the serial reference kernels against the OpenMP
// kernels, plus an exactness check on each case.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "hsd/kernels.hpp"
#include "hsd/rng.hpp"

using hsd::kernels::set_threads;
namespace ref = hsd::kernels::reference;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<double> random_vec(size_t n, hsd::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool exact_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void report(const char* name, double serial_ms, double omp_ms, bool exact) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n", name, serial_ms,
              omp_ms, serial_ms / omp_ms, exact ? "bit-exact" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 4;
  int reps = 5;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--threads" && i + 1 < argc) threads = std::atoi(argv[++i]);
    if (arg == "--reps" && i + 1 < argc) reps = std::atoi(argv[++i]);
  }
  std::printf("kernel benchmark: %d omp threads, %d reps\n\n", threads, reps);
  hsd::Rng rng(7);

  {
    const int m = 256, k = 256, n = 256;
    auto x = random_vec(size_t(m) * k, rng);
    auto w = random_vec(size_t(k) * n, rng);
    std::vector<double> ys(size_t(m) * n), yp(size_t(m) * n);
    const double ts = time_ms([&] { ref::matmul(x.data(), w.data(), ys.data(), m, k, n); }, reps);
    set_threads(threads);
    const double tp =
        time_ms([&] { hsd::kernels::matmul(x.data(), w.data(), yp.data(), m, k, n); }, reps);
    set_threads(1);
    report("matmul 256x256x256", ts, tp, exact_equal(ys, yp));
  }
  {
    const int m = 512, k = 384, n = 128;
    auto a = random_vec(size_t(m) * k, rng);
    auto b = random_vec(size_t(m) * n, rng);
    std::vector<double> ys(size_t(k) * n), yp(size_t(k) * n);
    const double ts = time_ms([&] { ref::matmul_at_b(a.data(), b.data(), ys.data(), m, k, n); }, reps);
    set_threads(threads);
    const double tp =
        time_ms([&] { hsd::kernels::matmul_at_b(a.data(), b.data(), yp.data(), m, k, n); }, reps);
    set_threads(1);
    report("matmul_at_b 512x384x128", ts, tp, exact_equal(ys, yp));
  }
  {
    const int n = 32, t = 64, c = 128, f = 64, k = 5;
    auto x = random_vec(size_t(n) * t * c, rng);
    auto kern = random_vec(size_t(f) * k * c, rng);
    auto bias = random_vec(f, rng);
    const size_t out = size_t(n) * (t - k + 1) * f;
    std::vector<double> ys(out), yp(out);
    const double ts = time_ms(
        [&] { ref::conv1d_valid(x.data(), kern.data(), bias.data(), ys.data(), n, t, c, f, k); },
        reps);
    set_threads(threads);
    const double tp = time_ms(
        [&] {
          hsd::kernels::conv1d_valid(x.data(), kern.data(), bias.data(), yp.data(), n, t, c, f, k);
        },
        reps);
    set_threads(1);
    report("conv1d 32x64x128 f64 k5", ts, tp, exact_equal(ys, yp));
  }
  {
    const int n = 32, t = 64, c = 128, f = 64, k = 5;
    auto x = random_vec(size_t(n) * t * c, rng);
    auto dy = random_vec(size_t(n) * (t - k + 1) * f, rng);
    std::vector<double> dks(size_t(f) * k * c), dkp(size_t(f) * k * c), dbs(f), dbp(f);
    const double ts = time_ms(
        [&] { ref::conv1d_valid_dw(x.data(), dy.data(), dks.data(), dbs.data(), n, t, c, f, k); },
        reps);
    set_threads(threads);
    const double tp = time_ms(
        [&] {
          hsd::kernels::conv1d_valid_dw(x.data(), dy.data(), dkp.data(), dbp.data(), n, t, c, f, k);
        },
        reps);
    set_threads(1);
    report("conv1d_dw 32x64x128 f64 k5", ts, tp, exact_equal(dks, dkp) && exact_equal(dbs, dbp));
  }
  return 0;
}
