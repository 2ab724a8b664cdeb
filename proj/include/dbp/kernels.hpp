#pragma once

// Dense inner loops shared by the tensor ops and the point-set code.
//
// Every kernel exists twice: the default OpenMP-parallel version, and a
// plain serial version under `serial::` that the tests and benchmarks use
// as a reference. Parallel versions assign each output element to exactly
// one thread and accumulate in a fixed order, so results do not depend on
// the thread count.

#include <cstddef>
#include <span>

namespace dbp::kernels {

/// c[m×n] += a[m×k] · b[k×n]
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n);

/// c[k×n] += aᵀ · b with a[m×k], b[m×n]
void gemm_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

/// c[m×n] += a · bᵀ with a[m×k], b[n×k]
void gemm_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

/// For each 3-vector row of `queries`, the index of the nearest row of `refs`
/// and its squared distance. Ties go to the lowest index.
void nearest(std::span<const double> queries, std::span<const double> refs,
             std::span<std::size_t> index, std::span<double> sqdist);

/// min_dist[i] = min(min_dist[i], |points[i] - center|²) for 3-vector rows.
void min_sqdist_update(std::span<const double> points, const double* center,
                       std::span<double> min_dist);

/// out[i×m + j] = |a_i - b_j|² for 3-vector rows.
void pairwise_sqdist(std::span<const double> a, std::span<const double> b, std::span<double> out);

namespace serial {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n);
void gemm_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void gemm_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void nearest(std::span<const double> queries, std::span<const double> refs,
             std::span<std::size_t> index, std::span<double> sqdist);
void min_sqdist_update(std::span<const double> points, const double* center,
                       std::span<double> min_dist);
void pairwise_sqdist(std::span<const double> a, std::span<const double> b, std::span<double> out);

}  // namespace serial

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int thread_count();

}  // namespace dbp::kernels
