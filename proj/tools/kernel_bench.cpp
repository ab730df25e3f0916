// Compares the serial reference kernels against their OpenMP variants and
// checks that both produce identical bits while timing them.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "provstream/kernels.hpp"
#include "provstream/seqmodel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace provstream;
using clock_t_ = std::chrono::steady_clock;

namespace {

template <typename F>
double time_it(F&& fn, int reps) {
  auto t0 = clock_t_::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double>(clock_t_::now() - t0).count() / reps;
}

void fill(std::vector<double>& v, uint64_t& rng) {
  for (double& x : v) x = seqmodel::uniform_pm(rng, 1.0);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("# OpenMP max threads: %d\n", omp_get_max_threads());
#else
  std::printf("# built without OpenMP\n");
#endif
  std::printf("kernel,size,serial_s,parallel_s,speedup,bitwise_equal\n");
  uint64_t rng = 0xbe9c5;

  for (int dim : {64, 128, 256, 512, 1024, 2048}) {
    std::vector<double> a(static_cast<size_t>(dim) * dim), x(static_cast<size_t>(dim));
    std::vector<double> y1(static_cast<size_t>(dim)), y2(static_cast<size_t>(dim));
    fill(a, rng);
    fill(x, rng);
    const int reps = dim <= 256 ? 4000 : (dim <= 1024 ? 400 : 50);
    double ts = time_it([&] { kernels::matvec_serial(a.data(), x.data(), y1.data(), dim, dim); }, reps);
    double tp = time_it([&] { kernels::matvec_omp(a.data(), x.data(), y2.data(), dim, dim); }, reps);
    bool eq = std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(double)) == 0;
    std::printf("matvec,%dx%d,%.3g,%.3g,%.2f,%d\n", dim, dim, ts, tp, ts / tp, eq ? 1 : 0);
  }

  for (int dim : {256, 1024}) {
    std::vector<double> a(static_cast<size_t>(dim) * dim), x(static_cast<size_t>(dim));
    std::vector<double> y1(static_cast<size_t>(dim), 0.0), y2(static_cast<size_t>(dim), 0.0);
    fill(a, rng);
    fill(x, rng);
    const int reps = dim <= 256 ? 4000 : 400;
    double ts = time_it([&] { kernels::matvec_t_acc_serial(a.data(), x.data(), y1.data(), dim, dim); }, reps);
    double tp = time_it([&] { kernels::matvec_t_acc_omp(a.data(), x.data(), y2.data(), dim, dim); }, reps);
    bool eq = std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(double)) == 0;
    std::printf("matvec_t_acc,%dx%d,%.3g,%.3g,%.2f,%d\n", dim, dim, ts, tp, ts / tp, eq ? 1 : 0);
  }

  for (int dim : {256, 1024}) {
    std::vector<double> a1(static_cast<size_t>(dim) * dim, 0.0), a2(a1);
    std::vector<double> u(static_cast<size_t>(dim)), v(static_cast<size_t>(dim));
    fill(u, rng);
    fill(v, rng);
    const int reps = dim <= 256 ? 4000 : 400;
    double ts = time_it([&] { kernels::ger_acc_serial(a1.data(), u.data(), v.data(), dim, dim); }, reps);
    double tp = time_it([&] { kernels::ger_acc_omp(a2.data(), u.data(), v.data(), dim, dim); }, reps);
    bool eq = std::memcmp(a1.data(), a2.data(), a1.size() * sizeof(double)) == 0;
    std::printf("ger_acc,%dx%d,%.3g,%.3g,%.2f,%d\n", dim, dim, ts, tp, ts / tp, eq ? 1 : 0);
  }

  for (size_t n : {10000ul, 100000ul, 1000000ul}) {
    const int dim = 64;
    std::vector<double> vecs(n * dim), q(static_cast<size_t>(dim));
    fill(vecs, rng);
    fill(q, rng);
    const int reps = n <= 10000 ? 1000 : (n <= 100000 ? 100 : 10);
    double r1 = 0, r2 = 0;
    double ts = time_it([&] { r1 = kernels::nn_min_distance_serial(vecs.data(), n, dim, q.data()); }, reps);
    double tp = time_it([&] { r2 = kernels::nn_min_distance_omp(vecs.data(), n, dim, q.data()); }, reps);
    std::printf("nn_scan,%zux%d,%.3g,%.3g,%.2f,%d\n", n, dim, ts, tp, ts / tp, r1 == r2 ? 1 : 0);
  }
  return 0;
}
