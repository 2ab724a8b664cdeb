#include "dbp/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dbp/errors.hpp"
#include "dbp/kernels.hpp"

namespace dbp {

namespace {

struct NearestPairs {
    std::vector<std::size_t> a_to_b, b_to_a;
    std::vector<double> d_ab, d_ba;
    double value = 0.0;
};

NearestPairs nearest_pairs(std::span<const double> a, std::span<const double> b) {
    const std::size_t na = a.size() / 3, nb = b.size() / 3;
    if (na == 0 || nb == 0) throw ContractError("chamfer: both point sets must be non-empty");
    NearestPairs np;
    np.a_to_b.resize(na);
    np.d_ab.resize(na);
    np.b_to_a.resize(nb);
    np.d_ba.resize(nb);
    kernels::nearest(a, b, np.a_to_b, np.d_ab);
    kernels::nearest(b, a, np.b_to_a, np.d_ba);
    double sa = 0.0, sb = 0.0;
    for (double d : np.d_ab) sa += d;
    for (double d : np.d_ba) sb += d;
    np.value = sa / static_cast<double>(na) + sb / static_cast<double>(nb);
    return np;
}

void require_points(const Var& v, const char* op) {
    if (v.shape().size() != 2 || v.cols() != 3)
        throw DimensionError(std::string(op) + ": expected an n×3 point matrix, got " + to_string(v.shape()));
}

}  // namespace

Var chamfer(Var a, Var b) {
    require_points(a, "chamfer");
    require_points(b, "chamfer");
    NearestPairs np = nearest_pairs(a.value().data, b.value().data);
    const double value = np.value;
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph()->record(Tensor({1}, {value}), {ia, ib}, [=, np = std::move(np)](Graph& g, std::size_t self) {
        const double dy = g.grad(self)[0];
        const auto& av = g.value(ia).data;
        const auto& bv = g.value(ib).data;
        const std::size_t na = av.size() / 3, nb = bv.size() / 3;
        const bool ga = g.requires_grad(ia), gb = g.requires_grad(ib);
        std::span<double> da = ga ? g.grad_slot(ia) : std::span<double>{};
        std::span<double> db = gb ? g.grad_slot(ib) : std::span<double>{};
        const double wa = 2.0 * dy / static_cast<double>(na), wb = 2.0 * dy / static_cast<double>(nb);
        for (std::size_t i = 0; i < na; ++i) {
            const std::size_t j = np.a_to_b[i];
            for (int c = 0; c < 3; ++c) {
                const double diff = wa * (av[3 * i + c] - bv[3 * j + c]);
                if (ga) da[3 * i + c] += diff;
                if (gb) db[3 * j + c] -= diff;
            }
        }
        for (std::size_t j = 0; j < nb; ++j) {
            const std::size_t i = np.b_to_a[j];
            for (int c = 0; c < 3; ++c) {
                const double diff = wb * (bv[3 * j + c] - av[3 * i + c]);
                if (gb) db[3 * j + c] += diff;
                if (ga) da[3 * i + c] -= diff;
            }
        }
    });
}

double chamfer(const PointCloud& a, const PointCloud& b) { return nearest_pairs(a.flat(), b.flat()).value; }

double hausdorff(const PointCloud& a, const PointCloud& b) {
    const NearestPairs np = nearest_pairs(a.flat(), b.flat());
    const double ab = *std::max_element(np.d_ab.begin(), np.d_ab.end());
    const double ba = *std::max_element(np.d_ba.begin(), np.d_ba.end());
    return std::sqrt(std::max(ab, ba));
}

double p2f_mean(const PointCloud& q, const SurfaceDescriptor& surface) {
    surface.validate();
    double total = 0.0;
    for (const auto& p : q.points()) total += point_to_surface(p, surface);
    return total / static_cast<double>(q.size());
}

Var uniform_loss(Var q, std::size_t k, double radius) {
    require_points(q, "uniform_loss");
    const std::size_t n = q.rows();
    if (n <= k || k == 0)
        throw ContractError("uniform_loss: need more than k=" + std::to_string(k) + " points, got " + std::to_string(n));
    const double h = radius > 0.0 ? radius : std::sqrt(4.0 / static_cast<double>(n));
    const PointCloud cloud = PointCloud::from_tensor(q.value());
    const auto with_self = knn(cloud, cloud, k + 1);
    std::vector<std::size_t> neighbors;
    neighbors.reserve(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        const auto* row = with_self.data() + i * (k + 1);
        const auto* self_pos = std::find(row, row + k + 1, i);
        for (std::size_t t = 0, kept = 0; t <= k && kept < k; ++t) {
            if (row + t == self_pos) continue;
            neighbors.push_back(row[t]);
            ++kept;
        }
    }
    const double inv = 1.0 / static_cast<double>(n * k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < k; ++t) {
            const double gap = h - norm(cloud[i] - cloud[neighbors[i * k + t]]);
            if (gap > 0.0) total += gap * gap;
        }
    const std::size_t iq = q.id();
    return q.graph()->record(Tensor({1}, {total * inv}), {iq},
                             [=, neighbors = std::move(neighbors)](Graph& g, std::size_t self) {
                                 const double dy = g.grad(self)[0];
                                 const auto& v = g.value(iq).data;
                                 auto d = g.grad_slot(iq);
                                 for (std::size_t i = 0; i < n; ++i)
                                     for (std::size_t t = 0; t < k; ++t) {
                                         const std::size_t j = neighbors[i * k + t];
                                         double diff[3];
                                         double sq = 0.0;
                                         for (int c = 0; c < 3; ++c) {
                                             diff[c] = v[3 * i + c] - v[3 * j + c];
                                             sq += diff[c] * diff[c];
                                         }
                                         const double dist = std::sqrt(sq);
                                         const double gap = h - dist;
                                         if (gap <= 0.0 || dist == 0.0) continue;
                                         // d/dq_i (h - |q_i - q_j|)² = -2 gap (q_i - q_j)/|q_i - q_j|
                                         const double w = -2.0 * gap / dist * inv * dy;
                                         for (int c = 0; c < 3; ++c) {
                                             d[3 * i + c] += w * diff[c];
                                             d[3 * j + c] -= w * diff[c];
                                         }
                                     }
                             });
}

Var total_loss(Var prediction, Var target, const LossWeights& weights) {
    Var cd = chamfer(prediction, target);
    if (weights.uniform == 0.0) return cd;
    return add(cd, scale(uniform_loss(prediction, weights.uniform_k, weights.uniform_radius), weights.uniform));
}

UniformityTerms uniformity_terms(const PointCloud& q, double area_fraction) {
    if (q.size() < 32) throw ContractError("uniformity: need at least 32 points, got " + std::to_string(q.size()));
    if (!(area_fraction > 0.0 && area_fraction < 1.0))
        throw ContractError("uniformity: area fraction must lie in (0, 1)");
    const std::size_t seeds_wanted = std::min<std::size_t>(q.size() / 8, 64);
    const auto seeds = farthest_point_sample(q, seeds_wanted, 0);
    const double radius = std::sqrt(4.0 * area_fraction);
    const double r2 = radius * radius;
    const double expected = static_cast<double>(q.size()) * area_fraction;

    UniformityTerms terms;
    std::vector<std::size_t> disk;
    for (auto s : seeds) {
        disk.clear();
        for (std::size_t i = 0; i < q.size(); ++i)
            if (squared_norm(q[i] - q[s]) <= r2) disk.push_back(i);
        const double count = static_cast<double>(disk.size());
        terms.count += (count - expected) * (count - expected) / expected;
        if (disk.size() < 2) continue;
        std::vector<double> spacing(disk.size(), std::numeric_limits<double>::infinity());
        for (std::size_t a = 0; a < disk.size(); ++a)
            for (std::size_t b = 0; b < disk.size(); ++b)
                if (a != b) spacing[a] = std::min(spacing[a], squared_norm(q[disk[a]] - q[disk[b]]));
        double mu = 0.0;
        for (auto& d : spacing) {
            d = std::sqrt(d);
            mu += d;
        }
        mu /= count;
        if (!(mu > 0.0)) continue;
        double var = 0.0;
        for (double d : spacing) var += (d - mu) * (d - mu);
        var /= count;
        terms.spacing += var / (mu * mu);
    }
    const auto m = static_cast<double>(seeds.size());
    terms.count /= m;
    terms.spacing /= m;
    return terms;
}

double uniformity(const PointCloud& q, double area_fraction) { return uniformity_terms(q, area_fraction).total(); }

std::string MetricsReport::csv_row(const std::string& name) const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g,%.6g", name.c_str(), cd * 1e3, hd * 1e3, p2f * 1e3,
                  uniformity * 1e3);
    return buf;
}

}  // namespace dbp
