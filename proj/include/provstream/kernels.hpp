#pragma once

// Dense inner-loop kernels. Every kernel has a serial reference and an OpenMP
// variant; the parallel variants split work only across independent output
// slots (rows of a matvec, stored vectors of a scan), so their results are
// bitwise identical to the serial reference at any thread count. Tests assert
// that equality and kernel_bench compares their throughput.

#include <cstddef>
#include <span>

namespace provstream::kernels {

enum class Mode { Auto, ForceSerial, ForceParallel };

// Process-wide dispatch policy. Auto goes parallel once rows*cols (or n*dim)
// crosses the work threshold and more than one OpenMP thread is available.
void set_mode(Mode m);
Mode mode();
void set_parallel_threshold(std::size_t flops);
std::size_t parallel_threshold();

double dot(const double* a, const double* b, int n);

// y = A x, A row-major (rows x cols).
void matvec_serial(const double* a, const double* x, double* y, int rows, int cols);
void matvec_omp(const double* a, const double* x, double* y, int rows, int cols);
void matvec(const double* a, const double* x, double* y, int rows, int cols);

// y += A^T x, A row-major (rows x cols), x has rows elements, y has cols.
void matvec_t_acc_serial(const double* a, const double* x, double* y, int rows, int cols);
void matvec_t_acc_omp(const double* a, const double* x, double* y, int rows, int cols);
void matvec_t_acc(const double* a, const double* x, double* y, int rows, int cols);

// A += u v^T (rank-1 accumulate), A row-major (rows x cols).
void ger_acc_serial(double* a, const double* u, const double* v, int rows, int cols);
void ger_acc_omp(double* a, const double* u, const double* v, int rows, int cols);
void ger_acc(double* a, const double* u, const double* v, int rows, int cols);

// min over stored unit vectors of (1 - dot(q, v_i)); vecs is n x dim row-major.
double nn_min_distance_serial(const double* vecs, std::size_t n, int dim, const double* q);
double nn_min_distance_omp(const double* vecs, std::size_t n, int dim, const double* q);
double nn_min_distance(const double* vecs, std::size_t n, int dim, const double* q);

}  // namespace provstream::kernels
