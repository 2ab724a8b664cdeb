#include "dbp/kernels.hpp"

#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dbp::kernels {

namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

inline double sqdist3(const double* p, const double* q) {
    const double dx = p[0] - q[0];
    const double dy = p[1] - q[1];
    const double dz = p[2] - q[2];
    return dx * dx + dy * dy + dz * dz;
}

}  // namespace

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n) {
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        double* crow = cp + i * n;
        const double* arow = ap + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = bp + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
    for (std::ptrdiff_t p = 0; p < rows; ++p) {
        double* crow = cp + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i * k + p];
            if (av == 0.0) continue;
            const double* brow = bp + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const double* arow = ap + i * k;
        double* crow = cp + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = bp + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

void nearest(std::span<const double> queries, std::span<const double> refs,
             std::span<std::size_t> index, std::span<double> sqdist) {
    const std::size_t nq = queries.size() / 3;
    const std::size_t nr = refs.size() / 3;
    const double* qp = queries.data();
    const double* rp = refs.data();
    const auto rows = static_cast<std::ptrdiff_t>(nq);
#pragma omp parallel for schedule(static) if (nq * nr > kParallelWork)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        const double* q = qp + 3 * i;
        for (std::size_t j = 0; j < nr; ++j) {
            const double d = sqdist3(q, rp + 3 * j);
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        index[i] = best_j;
        sqdist[i] = best;
    }
}

void min_sqdist_update(std::span<const double> points, const double* center,
                       std::span<double> min_dist) {
    const std::size_t n = points.size() / 3;
    const double* pp = points.data();
    const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n > kParallelWork / 8)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const double d = sqdist3(pp + 3 * i, center);
        if (d < min_dist[i]) min_dist[i] = d;
    }
}

void pairwise_sqdist(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    const std::size_t na = a.size() / 3;
    const std::size_t nb = b.size() / 3;
    const auto rows = static_cast<std::ptrdiff_t>(na);
#pragma omp parallel for schedule(static) if (na * nb > kParallelWork)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < nb; ++j) out[i * nb + j] = sqdist3(a.data() + 3 * i, b.data() + 3 * j);
    }
}

namespace serial {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] += acc;
        }
}

void gemm_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * b[i * n + j];
            c[p * n + j] += acc;
        }
}

void gemm_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] += acc;
        }
}

void nearest(std::span<const double> queries, std::span<const double> refs,
             std::span<std::size_t> index, std::span<double> sqdist) {
    const std::size_t nq = queries.size() / 3;
    const std::size_t nr = refs.size() / 3;
    for (std::size_t i = 0; i < nq; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < nr; ++j) {
            const double d = sqdist3(queries.data() + 3 * i, refs.data() + 3 * j);
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        index[i] = best_j;
        sqdist[i] = best;
    }
}

void min_sqdist_update(std::span<const double> points, const double* center,
                       std::span<double> min_dist) {
    for (std::size_t i = 0; i < points.size() / 3; ++i) {
        const double d = sqdist3(points.data() + 3 * i, center);
        if (d < min_dist[i]) min_dist[i] = d;
    }
}

void pairwise_sqdist(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    const std::size_t nb = b.size() / 3;
    for (std::size_t i = 0; i < a.size() / 3; ++i)
        for (std::size_t j = 0; j < nb; ++j) out[i * nb + j] = sqdist3(a.data() + 3 * i, b.data() + 3 * j);
}

}  // namespace serial

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace dbp::kernels
