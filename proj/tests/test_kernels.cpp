#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "hsd/kernels.hpp"
#include "hsd/rng.hpp"

using namespace hsd;
namespace ref = hsd::kernels::reference;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct ThreadGuard {
  explicit ThreadGuard(int n) { kernels::set_threads(n); }
  ~ThreadGuard() { kernels::set_threads(1); }
};

}  // namespace

TEST_CASE("matmul matches a hand-computed product") {
  // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
  const std::vector<double> x{1, 2, 3, 4}, w{5, 6, 7, 8};
  std::vector<double> y(4);
  ref::matmul(x.data(), w.data(), y.data(), 2, 2, 2);
  CHECK(y == std::vector<double>{19, 22, 43, 50});
  kernels::matmul(x.data(), w.data(), y.data(), 2, 2, 2);
  CHECK(y == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("matmul transposed variants agree with explicit transposition") {
  Rng rng(11);
  const int m = 7, k = 5, n = 6;
  auto a = random_vec(size_t(m) * k, rng);
  auto b = random_vec(size_t(m) * n, rng);
  // y = a^T b via explicit transpose + plain matmul
  std::vector<double> at(size_t(k) * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) at[size_t(j) * m + i] = a[size_t(i) * k + j];
  }
  std::vector<double> expect(size_t(k) * n), got(size_t(k) * n);
  ref::matmul(at.data(), b.data(), expect.data(), k, m, n);
  ref::matmul_at_b(a.data(), b.data(), got.data(), m, k, n);
  for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));

  auto w = random_vec(size_t(k) * n, rng);
  std::vector<double> wt(size_t(n) * k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) wt[size_t(j) * k + i] = w[size_t(i) * n + j];
  }
  auto dy = random_vec(size_t(m) * n, rng);
  std::vector<double> expect2(size_t(m) * k), got2(size_t(m) * k);
  ref::matmul(dy.data(), wt.data(), expect2.data(), m, n, k);
  ref::matmul_a_bt(dy.data(), w.data(), got2.data(), m, n, k);
  for (size_t i = 0; i < got2.size(); ++i) {
    CHECK(got2[i] == doctest::Approx(expect2[i]).epsilon(1e-12));
  }
}

TEST_CASE("openmp kernels are bit-identical to the serial reference") {
  Rng rng(3);
  const int m = 33, k = 47, n = 29;
  auto x = random_vec(size_t(m) * k, rng);
  auto w = random_vec(size_t(k) * n, rng);
  auto bias = random_vec(n, rng);

  std::vector<double> ys(size_t(m) * n), yp(size_t(m) * n);
  ref::matmul_bias(x.data(), w.data(), bias.data(), ys.data(), m, k, n);
  {
    ThreadGuard tg(4);
    kernels::matmul_bias(x.data(), w.data(), bias.data(), yp.data(), m, k, n);
  }
  CHECK(bit_equal(ys, yp));

  std::vector<double> as(size_t(k) * n), ap(size_t(k) * n);
  auto b2 = random_vec(size_t(m) * n, rng);
  ref::matmul_at_b(x.data(), b2.data(), as.data(), m, k, n);
  {
    ThreadGuard tg(3);
    kernels::matmul_at_b(x.data(), b2.data(), ap.data(), m, k, n);
  }
  CHECK(bit_equal(as, ap));
}

TEST_CASE("conv1d kernels match reference bit-exactly and against brute force") {
  Rng rng(5);
  const int n = 3, t = 11, c = 4, f = 6, k = 3;
  auto x = random_vec(size_t(n) * t * c, rng);
  auto kern = random_vec(size_t(f) * k * c, rng);
  auto bias = random_vec(f, rng);
  const int to = t - k + 1;

  std::vector<double> ys(size_t(n) * to * f), yp(ys.size());
  ref::conv1d_valid(x.data(), kern.data(), bias.data(), ys.data(), n, t, c, f, k);
  {
    ThreadGuard tg(4);
    kernels::conv1d_valid(x.data(), kern.data(), bias.data(), yp.data(), n, t, c, f, k);
  }
  CHECK(bit_equal(ys, yp));

  // brute-force oracle for one output element
  for (int probe = 0; probe < 5; ++probe) {
    const int s = int(rng.uniform_int(n)), o = int(rng.uniform_int(to)), q = int(rng.uniform_int(f));
    double acc = bias[q];
    for (int dt = 0; dt < k; ++dt) {
      for (int ch = 0; ch < c; ++ch) {
        acc += x[(size_t(s) * t + o + dt) * c + ch] * kern[(size_t(q) * k + dt) * c + ch];
      }
    }
    CHECK(ys[(size_t(s) * to + o) * f + q] == doctest::Approx(acc).epsilon(1e-12));
  }

  // gradients: dx and dw agree between reference and omp
  auto dy = random_vec(size_t(n) * to * f, rng);
  std::vector<double> dxs(size_t(n) * t * c), dxp(dxs.size());
  ref::conv1d_valid_dx(dy.data(), kern.data(), dxs.data(), n, t, c, f, k);
  {
    ThreadGuard tg(2);
    kernels::conv1d_valid_dx(dy.data(), kern.data(), dxp.data(), n, t, c, f, k);
  }
  CHECK(bit_equal(dxs, dxp));

  std::vector<double> dks(size_t(f) * k * c), dkp(dks.size()), dbs(f), dbp(f);
  ref::conv1d_valid_dw(x.data(), dy.data(), dks.data(), dbs.data(), n, t, c, f, k);
  {
    ThreadGuard tg(4);
    kernels::conv1d_valid_dw(x.data(), dy.data(), dkp.data(), dbp.data(), n, t, c, f, k);
  }
  CHECK(bit_equal(dks, dkp));
  CHECK(bit_equal(dbs, dbp));
}

TEST_CASE("thread count does not change results") {
  Rng rng(9);
  const int m = 17, k = 23, n = 19;
  auto x = random_vec(size_t(m) * k, rng);
  auto w = random_vec(size_t(k) * n, rng);
  std::vector<double> y1(size_t(m) * n), y2(y1.size()), y3(y1.size());
  {
    ThreadGuard tg(1);
    kernels::matmul(x.data(), w.data(), y1.data(), m, k, n);
  }
  {
    ThreadGuard tg(2);
    kernels::matmul(x.data(), w.data(), y2.data(), m, k, n);
  }
  {
    ThreadGuard tg(8);
    kernels::matmul(x.data(), w.data(), y3.data(), m, k, n);
  }
  CHECK(bit_equal(y1, y2));
  CHECK(bit_equal(y1, y3));
}
