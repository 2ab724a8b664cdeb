#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dbp/errors.hpp"
#include "dbp/losses.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace dbp;

namespace {

PointCloud line_points(std::initializer_list<double> xs) {
    std::vector<Vec3> pts;
    for (double x : xs) pts.push_back({x, 0, 0});
    return PointCloud(pts);
}

PointCloud scaled(const PointCloud& c, double s) {
    std::vector<Vec3> pts;
    for (const auto& p : c.points()) pts.push_back(p * s);
    return PointCloud(pts);
}

PointCloud fibonacci_sphere(std::size_t n) {
    std::vector<Vec3> pts;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double y = 1.0 - 2.0 * (double(i) + 0.5) / double(n);
        const double r = std::sqrt(1.0 - y * y);
        pts.push_back({r * std::cos(golden * double(i)), y, r * std::sin(golden * double(i))});
    }
    return PointCloud(pts);
}

/// Half the points uniform on the sphere, half crammed into the +++ octant.
PointCloud clustered_sphere(std::size_t n, gen::Rng& rng) {
    std::vector<Vec3> pts;
    while (pts.size() < n) {
        Vec3 p = rng.point();
        const double len = norm(p);
        if (len < 1e-3 || len > 1.0) continue;
        p = p * (1.0 / len);
        if (pts.size() >= n / 2)
            for (auto& c : p) c = std::abs(c);
        pts.push_back(p);
    }
    return PointCloud(pts);
}

/// Straight transcription of the disk-count metric.
UniformityTerms uniformity_oracle(const PointCloud& q, double p) {
    const auto seeds = oracle::fps(q, std::min<std::size_t>(q.size() / 8, 64), 0);
    const double r = std::sqrt(4.0 * p), expected = double(q.size()) * p;
    UniformityTerms t;
    for (auto s : seeds) {
        std::vector<Vec3> disk;
        for (const auto& x : q.points())
            if (oracle::sqdist(x, q[s]) <= r * r) disk.push_back(x);
        const double n = double(disk.size());
        t.count += (n - expected) * (n - expected) / expected;
        if (disk.size() < 2) continue;
        std::vector<double> nn;
        for (std::size_t a = 0; a < disk.size(); ++a) {
            double best = INFINITY;
            for (std::size_t b = 0; b < disk.size(); ++b)
                if (a != b) best = std::min(best, std::sqrt(oracle::sqdist(disk[a], disk[b])));
            nn.push_back(best);
        }
        double mu = 0.0, var = 0.0;
        for (double d : nn) mu += d / n;
        if (mu <= 0.0) continue;
        for (double d : nn) var += (d - mu) * (d - mu) / n;
        t.spacing += var / (mu * mu);
    }
    t.count /= double(seeds.size());
    t.spacing /= double(seeds.size());
    return t;
}

}  // namespace

TEST_CASE("chamfer") {
    CHECK(chamfer(line_points({0}), line_points({3})) == 18.0);
    gen::Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = rng.cloud(rng.index(1, 40), trial % 3 == 0), b = rng.cloud(rng.index(1, 40), trial % 3 == 0);
        CHECK(chamfer(a, a) == 0.0);
        CHECK(std::abs(chamfer(a, b) - oracle::chamfer(a, b)) <= 1e-12);
        CHECK(chamfer(a, b) == chamfer(b, a));
        for (double s : {2.0, 0.5}) CHECK(chamfer(scaled(a, s), scaled(b, s)) == chamfer(a, b) * s * s);

        Graph g;
        const auto v = chamfer(g.constant(a.to_tensor()), g.constant(b.to_tensor())).value().data[0];
        CHECK(std::abs(v - oracle::chamfer(a, b)) <= 1e-12);
    }
    SUBCASE("zero only on identical position multisets") {
        CHECK(chamfer(line_points({0, 1, 1}), line_points({1, 0})) == 0.0);
        CHECK(chamfer(line_points({0, 1}), line_points({0, 1, 2})) > 0.0);
        CHECK(chamfer(line_points({0, 1, 2}), line_points({0, 1})) > 0.0);
    }
    SUBCASE("gradient reaches only the first tied nearest neighbor") {
        Graph g;
        Var a = g.leaf(Tensor({1, 3}, {0, 0, 0}));
        Var b = g.leaf(Tensor({2, 3}, {1, 0, 0, -1, 0, 0}));
        g.backward(chamfer(a, b));
        // b→a: both points pull on a; a→b: only b[0] is picked.
        CHECK(b.grad()[0] == doctest::Approx(2.0 * 1.0 * 0.5 + 2.0));
        CHECK(b.grad()[3] == doctest::Approx(-2.0 * 0.5));
    }
}

TEST_CASE("hausdorff") {
    CHECK(hausdorff(line_points({0}), line_points({3})) == 3.0);
    CHECK(hausdorff(line_points({0, 1}), line_points({0, 1, 5})) == 4.0);
    gen::Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = rng.cloud(rng.index(1, 40)), b = rng.cloud(rng.index(1, 40));
        CHECK(hausdorff(a, a) == 0.0);
        CHECK(std::abs(hausdorff(a, b) - oracle::hausdorff(a, b)) <= 1e-12);
        CHECK(hausdorff(a, b) == hausdorff(b, a));
        CHECK(hausdorff(scaled(a, 2.0), scaled(b, 2.0)) == 2.0 * hausdorff(a, b));
    }
}

TEST_CASE("p2f_mean") {
    const SurfaceDescriptor unit{Sphere{}};
    CHECK(p2f_mean(fibonacci_sphere(200), unit) <= 1e-12);
    CHECK(p2f_mean(PointCloud({{0, 0, 1.25}}), unit) == 0.25);

    gen::Rng rng(3);
    const Torus torus{{0.1, -0.2, 0.3}, {{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}}, 1.0, 0.3};
    const SurfaceDescriptor s{torus};
    const auto q = rng.cloud(100);
    // Loop over points: distance to the tube circle in the torus frame.
    double total = 0.0;
    for (const auto& p : q.points()) {
        const Vec3 d = p - torus.center;
        const double lx = dot(d, torus.axes[0]), ly = dot(d, torus.axes[1]), lz = dot(d, torus.axes[2]);
        total += std::abs(std::hypot(std::hypot(lx, ly) - torus.major, lz) - torus.minor);
    }
    CHECK(std::abs(p2f_mean(q, s) - total / 100.0) <= 1e-12);

    const SurfaceDescriptor big{Sphere{{0, 0, 0}, 2.0}};
    const auto pts = rng.cloud(50);
    CHECK(p2f_mean(scaled(pts, 2.0), big) == 2.0 * p2f_mean(pts, unit));
}

TEST_CASE("uniformity metric") {
    SUBCASE("regular beats clustered on every instance") {
        const auto regular = uniformity(fibonacci_sphere(1024));
        gen::Rng rng(4);
        for (int trial = 0; trial < 20; ++trial) CHECK(regular < uniformity(clustered_sphere(1024, rng)));
    }
    SUBCASE("matches the transcription") {
        gen::Rng rng(5);
        for (int trial = 0; trial < 5; ++trial) {
            const auto q = trial % 2 ? clustered_sphere(256, rng) : fibonacci_sphere(256 + 32 * trial);
            const auto got = uniformity_terms(q, 0.02), want = uniformity_oracle(q, 0.02);
            CHECK(std::abs(got.count - want.count) <= 1e-12 * (1.0 + want.count));
            CHECK(std::abs(got.spacing - want.spacing) <= 1e-12 * (1.0 + want.spacing));
        }
    }
    SUBCASE("duplicating every point") {
        const auto q = fibonacci_sphere(512);
        std::vector<Vec3> twice = q.points();
        twice.insert(twice.end(), q.points().begin(), q.points().end());
        const PointCloud d(twice);
        const auto got = uniformity_terms(d), want = uniformity_oracle(d, kUniformityAreaFraction);
        CHECK(std::abs(got.count - want.count) <= 1e-12 * (1.0 + want.count));
        CHECK(got.spacing == 0.0);  // every in-disk spacing is zero
        CHECK(got.count != uniformity_terms(q).count);
    }
    SUBCASE("determinism and errors") {
        gen::Rng rng(6);
        const auto q = clustered_sphere(300, rng);
        CHECK(uniformity(q) == uniformity(q));
        CHECK_THROWS_AS(uniformity(fibonacci_sphere(31)), ContractError);
        CHECK_THROWS_AS(uniformity(q, 0.0), ContractError);
        CHECK_THROWS_AS(uniformity(q, 1.0), ContractError);
    }
}

TEST_CASE("uniform_loss") {
    SUBCASE("well spaced points cost nothing") {
        Graph g;
        Var q = g.constant(line_points({0, 1, 2, 3}).to_tensor());
        CHECK(uniform_loss(q, 2, 0.5).value().data[0] == 0.0);
    }
    SUBCASE("coincident pair costs h squared per point") {
        Graph g;
        Var q = g.constant(PointCloud({{0, 0, 0}, {0, 0, 0}}).to_tensor());
        CHECK(uniform_loss(q, 1, 0.3).value().data[0] == doctest::Approx(0.09).epsilon(1e-15));
    }
    SUBCASE("default radius") {
        Graph g;
        // Spacing 0.5 on a line against h = sqrt(4/4) = 1: end points see
        // one neighbor at 0.5, inner points see two.
        Var q = g.constant(line_points({0, 0.5, 1.0, 1.5}).to_tensor());
        CHECK(std::abs(uniform_loss(q, 1).value().data[0] - 0.25) <= 1e-15);
    }
    SUBCASE("gradient") {
        gen::Rng rng(7);
        const auto r = grad_check([](Graph&, const std::vector<Var>& x) { return uniform_loss(x[0], 4, 0.7); },
                                  {rng.tensor({24, 3})});
        CHECK(r.max_rel_error <= 1e-4);
    }
    Graph g;
    CHECK_THROWS_AS(uniform_loss(g.constant(Tensor::zeros({3, 3})), 3), ContractError);
}

TEST_CASE("total_loss") {
    gen::Rng rng(8);
    Graph g;
    Var p = g.constant(rng.tensor({30, 3})), t = g.constant(rng.tensor({40, 3}));
    LossWeights off;
    off.uniform = 0.0;
    CHECK(total_loss(p, t, off).value().data[0] == chamfer(p, t).value().data[0]);
    LossWeights w;
    const double sum = chamfer(p, t).value().data[0] + w.uniform * uniform_loss(p, w.uniform_k).value().data[0];
    CHECK(std::abs(total_loss(p, t, w).value().data[0] - sum) <= 1e-15);

    const auto grid = fibonacci_sphere(64).to_tensor();
    CHECK(total_loss(g.constant(grid), g.constant(grid), w).value().data[0] < 1e-2);
}

TEST_CASE("metrics csv row") {
    MetricsReport r{0.000123456789, 0.5, 0.0, 1.0};
    CHECK(r.csv_row("ours") == "ours,0.123457,500,0,1000");
    CHECK(MetricsReport::csv_header() == "name,cd,hd,p2f,uniformity");
}

TEST_CASE("empty inputs") {
    Graph g;
    CHECK_THROWS_AS(chamfer(g.constant(Tensor::zeros({0, 3})), g.constant(Tensor::zeros({2, 3}))), Error);
    CHECK_THROWS_AS(PointCloud(std::vector<Vec3>{}), ContractError);
}
