#pragma once

// Hand-rolled random generators for property tests. Every generator is a
// pure function of its seed so a failing case can be replayed by index.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "dbp/geometry.hpp"
#include "dbp/tensor.hpp"

namespace gen {

struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}

    double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
    std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
        return std::uniform_int_distribution<std::size_t>(lo, hi)(engine);
    }
    bool coin() { return (engine() & 1U) != 0; }

    dbp::Tensor tensor(dbp::Shape shape, double lo = -1.0, double hi = 1.0) {
        dbp::Tensor t = dbp::Tensor::zeros(std::move(shape));
        for (auto& v : t.data) v = uniform(lo, hi);
        return t;
    }

    dbp::Vec3 point(double extent = 1.0) { return {uniform(-extent, extent), uniform(-extent, extent), uniform(-extent, extent)}; }

    /// Generic cloud. With `lattice` set, coordinates are drawn from a coarse
    /// grid so exact distance ties and duplicate points actually occur.
    dbp::PointCloud cloud(std::size_t n, bool lattice = false) {
        std::vector<dbp::Vec3> pts(n);
        for (auto& p : pts) {
            if (lattice)
                p = {double(index(0, 4)), double(index(0, 4)), double(index(0, 2))};
            else
                p = point();
        }
        return dbp::PointCloud(std::move(pts));
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        std::shuffle(p.begin(), p.end(), engine);
        return p;
    }
};

}  // namespace gen
