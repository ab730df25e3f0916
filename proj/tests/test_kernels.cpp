#include <doctest.h>

#include <cstring>

#include "provstream/kernels.hpp"
#include "provstream/seqmodel.hpp"

using namespace provstream;

namespace {

std::vector<double> rand_vec(uint64_t& rng, size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = seqmodel::uniform_pm(rng, 1.0);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
  uint64_t rng = 99;
  for (auto [rows, cols] : {std::pair{3, 5}, {64, 64}, {64, 128}, {257, 131}, {1024, 64}}) {
    auto a = rand_vec(rng, static_cast<size_t>(rows) * cols);
    auto x = rand_vec(rng, static_cast<size_t>(cols));
    auto xr = rand_vec(rng, static_cast<size_t>(rows));
    std::vector<double> y1(static_cast<size_t>(rows)), y2(static_cast<size_t>(rows));
    kernels::matvec_serial(a.data(), x.data(), y1.data(), rows, cols);
    kernels::matvec_omp(a.data(), x.data(), y2.data(), rows, cols);
    CHECK(same_bits(y1, y2));

    std::vector<double> t1 = rand_vec(rng, static_cast<size_t>(cols));
    std::vector<double> t2 = t1;
    kernels::matvec_t_acc_serial(a.data(), xr.data(), t1.data(), rows, cols);
    kernels::matvec_t_acc_omp(a.data(), xr.data(), t2.data(), rows, cols);
    CHECK(same_bits(t1, t2));

    std::vector<double> g1 = a, g2 = a;
    kernels::ger_acc_serial(g1.data(), xr.data(), x.data(), rows, cols);
    kernels::ger_acc_omp(g2.data(), xr.data(), x.data(), rows, cols);
    CHECK(same_bits(g1, g2));
  }
}

TEST_CASE("nn scan: serial, parallel and dispatched results are identical") {
  uint64_t rng = 7;
  const int dim = 32;
  const size_t n = 5000;
  auto vecs = rand_vec(rng, n * dim);
  for (int q = 0; q < 20; ++q) {
    auto query = rand_vec(rng, dim);
    double a = kernels::nn_min_distance_serial(vecs.data(), n, dim, query.data());
    double b = kernels::nn_min_distance_omp(vecs.data(), n, dim, query.data());
    double c = kernels::nn_min_distance(vecs.data(), n, dim, query.data());
    CHECK(a == b);
    CHECK(a == c);
  }
}

TEST_CASE("dispatch honors forced modes") {
  auto old = kernels::mode();
  kernels::set_mode(kernels::Mode::ForceParallel);
  CHECK(kernels::mode() == kernels::Mode::ForceParallel);
  uint64_t rng = 3;
  auto a = rand_vec(rng, 16);
  auto x = rand_vec(rng, 4);
  std::vector<double> y1(4), y2(4);
  kernels::matvec(a.data(), x.data(), y1.data(), 4, 4);
  kernels::set_mode(kernels::Mode::ForceSerial);
  kernels::matvec(a.data(), x.data(), y2.data(), 4, 4);
  CHECK(same_bits(y1, y2));
  kernels::set_mode(old);
}
