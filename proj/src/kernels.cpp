#include "provstream/kernels.hpp"

#include <atomic>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace provstream::kernels {

namespace {
std::atomic<Mode> g_mode{Mode::Auto};
std::atomic<std::size_t> g_threshold{1u << 15};

bool go_parallel(std::size_t work) {
  Mode m = g_mode.load(std::memory_order_relaxed);
  if (m == Mode::ForceSerial) return false;
  if (m == Mode::ForceParallel) return true;
#ifdef _OPENMP
  return work >= g_threshold.load(std::memory_order_relaxed) && omp_get_max_threads() > 1;
#else
  (void)work;
  return false;
#endif
}
}  // namespace

void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }
Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_parallel_threshold(std::size_t flops) { g_threshold.store(flops, std::memory_order_relaxed); }
std::size_t parallel_threshold() { return g_threshold.load(std::memory_order_relaxed); }

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec_serial(const double* a, const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) y[r] = dot(a + static_cast<std::size_t>(r) * cols, x, cols);
}

void matvec_omp(const double* a, const double* x, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) y[r] = dot(a + static_cast<std::size_t>(r) * cols, x, cols);
}

void matvec(const double* a, const double* x, double* y, int rows, int cols) {
  if (go_parallel(static_cast<std::size_t>(rows) * cols))
    matvec_omp(a, x, y, rows, cols);
  else
    matvec_serial(a, x, y, rows, cols);
}

void matvec_t_acc_serial(const double* a, const double* x, double* y, int rows, int cols) {
  // column c of A^T x = sum_r a[r][c] * x[r]; accumulate per output slot so the
  // parallel variant (over c) adds in the same order.
  for (int c = 0; c < cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < rows; ++r) s += a[static_cast<std::size_t>(r) * cols + c] * x[r];
    y[c] += s;
  }
}

void matvec_t_acc_omp(const double* a, const double* x, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < rows; ++r) s += a[static_cast<std::size_t>(r) * cols + c] * x[r];
    y[c] += s;
  }
}

void matvec_t_acc(const double* a, const double* x, double* y, int rows, int cols) {
  if (go_parallel(static_cast<std::size_t>(rows) * cols))
    matvec_t_acc_omp(a, x, y, rows, cols);
  else
    matvec_t_acc_serial(a, x, y, rows, cols);
}

void ger_acc_serial(double* a, const double* u, const double* v, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = a + static_cast<std::size_t>(r) * cols;
    const double ur = u[r];
    for (int c = 0; c < cols; ++c) row[c] += ur * v[c];
  }
}

void ger_acc_omp(double* a, const double* u, const double* v, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    double* row = a + static_cast<std::size_t>(r) * cols;
    const double ur = u[r];
    for (int c = 0; c < cols; ++c) row[c] += ur * v[c];
  }
}

void ger_acc(double* a, const double* u, const double* v, int rows, int cols) {
  if (go_parallel(static_cast<std::size_t>(rows) * cols))
    ger_acc_omp(a, u, v, rows, cols);
  else
    ger_acc_serial(a, u, v, rows, cols);
}

double nn_min_distance_serial(const double* vecs, std::size_t n, int dim, const double* q) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0 - dot(vecs + i * dim, q, dim);
    if (d < best) best = d;
  }
  return best;
}

double nn_min_distance_omp(const double* vecs, std::size_t n, int dim, const double* q) {
  double best = std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(min : best)
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0 - dot(vecs + i * dim, q, dim);
    if (d < best) best = d;
  }
  return best;
}

double nn_min_distance(const double* vecs, std::size_t n, int dim, const double* q) {
  if (go_parallel(n * static_cast<std::size_t>(dim)))
    return nn_min_distance_omp(vecs, n, dim, q);
  return nn_min_distance_serial(vecs, n, dim, q);
}

}  // namespace provstream::kernels
