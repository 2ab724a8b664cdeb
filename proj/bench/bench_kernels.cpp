// Serial reference vs OpenMP kernels, plus the point-set searches and one
// inference forward pass built on them.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dbp/geometry.hpp"
#include "dbp/kernels.hpp"
#include "dbp/network.hpp"

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

dbp::PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
    const auto v = random_values(3 * n, seed);
    std::vector<dbp::Vec3> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
    return dbp::PointCloud(std::move(pts));
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0)), k = static_cast<std::size_t>(state.range(1)), n = k;
    const auto a = random_values(m * k, 1), b = random_values(k * n, 2);
    std::vector<double> c(m * n);
    for (auto _ : state) {
        if constexpr (Parallel)
            dbp::kernels::gemm(a, b, c, m, k, n);
        else
            dbp::kernels::serial::gemm(a, b, c, m, k, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * k * n));
}
BENCHMARK(BM_gemm<false>)->Name("gemm/serial")->Args({256, 64})->Args({4096, 64});
BENCHMARK(BM_gemm<true>)->Name("gemm/omp")->Args({256, 64})->Args({4096, 64});

template <bool Parallel>
void BM_gemm_a_bt(benchmark::State& state) {
    // The attention logits shape: αN × C times (αN × C)ᵀ.
    const auto m = static_cast<std::size_t>(state.range(0));
    const std::size_t k = 32;
    const auto a = random_values(m * k, 3), b = random_values(m * k, 4);
    std::vector<double> c(m * m);
    for (auto _ : state) {
        if constexpr (Parallel)
            dbp::kernels::gemm_a_bt(a, b, c, m, k, m);
        else
            dbp::kernels::serial::gemm_a_bt(a, b, c, m, k, m);
        benchmark::DoNotOptimize(c.data());
    }
}
BENCHMARK(BM_gemm_a_bt<false>)->Name("gemm_a_bt/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_gemm_a_bt<true>)->Name("gemm_a_bt/omp")->Arg(256)->Arg(1024);

template <bool Parallel>
void BM_nearest(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto q = random_values(3 * n, 5), r = random_values(3 * n, 6);
    std::vector<std::size_t> idx(n);
    std::vector<double> d(n);
    for (auto _ : state) {
        if constexpr (Parallel)
            dbp::kernels::nearest(q, r, idx, d);
        else
            dbp::kernels::serial::nearest(q, r, idx, d);
        benchmark::DoNotOptimize(d.data());
    }
}
BENCHMARK(BM_nearest<false>)->Name("nearest/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_nearest<true>)->Name("nearest/omp")->Arg(256)->Arg(4096);

void BM_fps(benchmark::State& state) {
    const auto cloud = random_cloud(static_cast<std::size_t>(state.range(0)), 7);
    for (auto _ : state) benchmark::DoNotOptimize(dbp::farthest_point_sample(cloud, cloud.size() / 4));
}
BENCHMARK(BM_fps)->Arg(1024)->Arg(8192);

void BM_knn(benchmark::State& state) {
    const auto cloud = random_cloud(static_cast<std::size_t>(state.range(0)), 8);
    for (auto _ : state) benchmark::DoNotOptimize(dbp::knn(cloud, cloud, 8));
}
BENCHMARK(BM_knn)->Arg(256)->Arg(2048);

void BM_forward(benchmark::State& state) {
    dbp::ModelConfig cfg;
    cfg.points = 64;
    cfg.factor = 4;
    cfg.channels = 32;
    const auto params = dbp::ModelParams::init(cfg, 1);
    const auto patch = dbp::normalize_patch(random_cloud(64, 9)).points;
    for (auto _ : state) benchmark::DoNotOptimize(dbp::dbpnet_infer(params, patch));
}
BENCHMARK(BM_forward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
