#include "dbp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <utility>

#include "dbp/errors.hpp"
#include "dbp/kernels.hpp"

namespace dbp {

double norm(const Vec3& a) { return std::sqrt(squared_norm(a)); }

// ---- PointCloud -------------------------------------------------------------

PointCloud::PointCloud(std::vector<Vec3> points, std::string source)
    : points_(std::move(points)), source_(std::move(source)) {
    if (points_.empty()) throw ContractError("point cloud must hold at least one point");
    for (std::size_t i = 0; i < points_.size(); ++i)
        for (double c : points_[i])
            if (!std::isfinite(c)) throw ContractError("point " + std::to_string(i) + " has a non-finite coordinate");
}

Tensor PointCloud::to_tensor() const {
    auto flat_view = flat();
    return Tensor({size(), 3}, std::vector<double>(flat_view.begin(), flat_view.end()));
}

PointCloud PointCloud::from_tensor(const Tensor& t, std::string source) {
    if (t.shape.size() != 2 || t.shape[1] != 3)
        throw DimensionError("point cloud tensor must be n×3, got " + to_string(t.shape));
    std::vector<Vec3> pts(t.rows());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {t.data[3 * i], t.data[3 * i + 1], t.data[3 * i + 2]};
    return PointCloud(std::move(pts), std::move(source));
}

std::span<const double> PointCloud::flat() const {
    static_assert(sizeof(Vec3) == 3 * sizeof(double));
    return {points_.empty() ? nullptr : points_.front().data(), 3 * points_.size()};
}

PointCloud select(const PointCloud& cloud, std::span<const std::size_t> indices) {
    std::vector<Vec3> pts;
    pts.reserve(indices.size());
    for (auto i : indices) {
        if (i >= cloud.size()) throw ContractError("select: index " + std::to_string(i) + " out of range");
        pts.push_back(cloud[i]);
    }
    return PointCloud(std::move(pts), cloud.source());
}

// ---- surfaces ---------------------------------------------------------------

namespace {

struct Validator {
    void operator()(const Sphere& s) const {
        if (!(s.radius > 0)) throw ContractError("sphere radius must be positive");
    }
    void operator()(const Torus& t) const {
        if (!(t.major > 0) || !(t.minor > 0)) throw ContractError("torus radii must be positive");
    }
    void operator()(const Plane& p) const {
        if (!(norm(p.normal) > 0)) throw ContractError("plane normal must be non-zero");
    }
    void operator()(const Mesh& m) const {
        if (m.triangles.empty()) throw ContractError("mesh has no triangles");
        for (const auto& tri : m.triangles)
            for (auto v : tri)
                if (v >= m.vertices.size()) throw ContractError("mesh triangle references vertex " + std::to_string(v));
    }
};

}  // namespace

void SurfaceDescriptor::validate() const { std::visit(Validator{}, shape); }

SurfaceDescriptor SurfaceDescriptor::transformed(const Vec3& centroid, double scale) const {
    const Frame frame{centroid, scale};
    return std::visit(
        [&](const auto& s) -> SurfaceDescriptor {
            using T = std::decay_t<decltype(s)>;
            T out = s;
            if constexpr (std::is_same_v<T, Sphere>) {
                out.center = frame.apply(s.center);
                out.radius = s.radius / scale;
            } else if constexpr (std::is_same_v<T, Torus>) {
                out.center = frame.apply(s.center);
                out.major = s.major / scale;
                out.minor = s.minor / scale;
            } else if constexpr (std::is_same_v<T, Plane>) {
                out.point = frame.apply(s.point);
            } else {
                for (auto& v : out.vertices) v = frame.apply(v);
            }
            return SurfaceDescriptor{out};
        },
        shape);
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Voronoi-region walk over vertices, edges, then the face.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0 && d2 <= 0) return a;
    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

double point_to_surface(const Vec3& p, const SurfaceDescriptor& surface) {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Sphere>) {
                return std::abs(norm(p - s.center) - s.radius);
            } else if constexpr (std::is_same_v<T, Torus>) {
                const Vec3 d = p - s.center;
                const double x = dot(d, s.axes[0]), y = dot(d, s.axes[1]), z = dot(d, s.axes[2]);
                const double ring = std::hypot(x, y) - s.major;
                return std::abs(std::hypot(ring, z) - s.minor);
            } else if constexpr (std::is_same_v<T, Plane>) {
                return std::abs(dot(p - s.point, s.normal)) / norm(s.normal);
            } else {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& tri : s.triangles) {
                    const Vec3 q = closest_point_on_triangle(p, s.vertices[tri[0]], s.vertices[tri[1]], s.vertices[tri[2]]);
                    best = std::min(best, squared_norm(p - q));
                }
                return std::sqrt(best);
            }
        },
        surface.shape);
}

Mesh make_icosphere(unsigned subdivisions, double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh mesh;
    mesh.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                     {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    auto project = [radius](Vec3 v) { return v * (radius / norm(v)); };
    for (auto& v : mesh.vertices) v = project(v);
    for (unsigned level = 0; level < subdivisions; ++level) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            auto it = midpoints.find(key);
            if (it != midpoints.end()) return it->second;
            const auto idx = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back(project((mesh.vertices[a] + mesh.vertices[b]) * 0.5));
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> refined;
        refined.reserve(mesh.triangles.size() * 4);
        for (const auto& tri : mesh.triangles) {
            const auto ab = midpoint(tri[0], tri[1]);
            const auto bc = midpoint(tri[1], tri[2]);
            const auto ca = midpoint(tri[2], tri[0]);
            refined.push_back({tri[0], ab, ca});
            refined.push_back({tri[1], bc, ab});
            refined.push_back({tri[2], ca, bc});
            refined.push_back({ab, bc, ca});
        }
        mesh.triangles = std::move(refined);
    }
    return mesh;
}

// ---- sampling and search ----------------------------------------------------

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m, std::size_t start) {
    const std::size_t n = cloud.size();
    if (m < 1 || m > n)
        throw ContractError("farthest_point_sample: requested " + std::to_string(m) + " of " + std::to_string(n) +
                            " points");
    if (start >= n) throw ContractError("farthest_point_sample: start index out of range");
    std::vector<std::size_t> picked;
    picked.reserve(m);
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    auto flat = cloud.flat();
    std::size_t current = start;
    for (std::size_t step = 0; step < m; ++step) {
        picked.push_back(current);
        kernels::min_sqdist_update(flat, flat.data() + 3 * current, min_dist);
        if (step + 1 == m) break;
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (min_dist[i] > best_d) {
                best_d = min_dist[i];
                best = i;
            }
        current = best;
    }
    return picked;
}

std::vector<std::size_t> knn(const PointCloud& queries, const PointCloud& refs, std::size_t k) {
    const std::size_t nq = queries.size(), nr = refs.size();
    if (k < 1 || k > refs.size())
        throw ContractError("knn: k=" + std::to_string(k) + " exceeds " + std::to_string(nr) + " reference points");
    std::vector<std::size_t> out(nq * k);
    const auto rows = static_cast<std::ptrdiff_t>(nq);
#pragma omp parallel if (nq * nr > (1 << 14))
    {
        std::vector<double> d(nr);
        std::vector<std::size_t> order(nr);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            const Vec3& q = queries[i];
            for (std::size_t j = 0; j < nr; ++j) d[j] = squared_norm(refs[j] - q);
            std::iota(order.begin(), order.end(), std::size_t{0});
            auto closer = [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); };
            if (k < nr) std::nth_element(order.begin(), order.begin() + k, order.end(), closer);
            std::sort(order.begin(), order.begin() + k, closer);
            std::copy_n(order.begin(), k, out.begin() + i * k);
        }
    }
    return out;
}

std::vector<std::size_t> random_subsample_indices(std::size_t n, std::size_t m, std::uint64_t seed) {
    if (m > n)
        throw ContractError("random_subsample: requested " + std::to_string(m) + " of " + std::to_string(n) + " points");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first m slots end up a uniform random m-subset.
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(m);
    return idx;
}

PointCloud random_subsample(const PointCloud& cloud, std::size_t m, std::uint64_t seed) {
    if (m == 0) throw ContractError("random_subsample: requested zero points");
    const auto idx = random_subsample_indices(cloud.size(), m, seed);
    return select(cloud, idx);
}

// ---- frames -----------------------------------------------------------------

PointCloud Frame::apply(const PointCloud& cloud) const {
    std::vector<Vec3> pts(cloud.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = apply(cloud[i]);
    return PointCloud(std::move(pts), cloud.source());
}

PointCloud Frame::invert(const PointCloud& cloud) const {
    std::vector<Vec3> pts(cloud.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = invert(cloud[i]);
    return PointCloud(std::move(pts), cloud.source());
}

NormalizedPatch normalize_patch(const PointCloud& patch) {
    if (patch.size() < 2) throw ContractError("normalize_patch: need at least two points");
    Vec3 centroid{0, 0, 0};
    for (const auto& p : patch.points()) centroid = centroid + p;
    centroid = centroid * (1.0 / static_cast<double>(patch.size()));
    double scale = 0.0;
    for (const auto& p : patch.points()) scale = std::max(scale, norm(p - centroid));
    if (!(scale > 0.0)) throw ContractError("normalize_patch: all points coincide");
    Frame frame{centroid, scale};
    return {frame.apply(patch), frame};
}

// ---- resampling -------------------------------------------------------------

std::vector<std::size_t> Resampling::subset_indices(std::size_t rank) const {
    std::vector<std::size_t> out(inputs);
    for (std::size_t i = 0; i < inputs; ++i) out[i] = member(i, rank);
    return out;
}

Resampling resample_into_subsets(const PointCloud& dense, const PointCloud& sparse, std::size_t factor) {
    const std::size_t n = sparse.size(), total = dense.size();
    if (factor == 0 || total != factor * n)
        throw ContractError("resample_into_subsets: " + std::to_string(total) + " generated points do not equal " +
                            std::to_string(factor) + " × " + std::to_string(n));
    std::vector<double> d(n * total);
    kernels::pairwise_sqdist(sparse.flat(), dense.flat(), d);
    // Flat index = input·total + generated, so (distance, flat) order is
    // exactly the (input, generated) tie rule.
    std::vector<std::pair<double, std::uint32_t>> order(n * total);
    for (std::size_t f = 0; f < order.size(); ++f) order[f] = {d[f], static_cast<std::uint32_t>(f)};
    std::sort(order.begin(), order.end());

    Resampling r;
    r.inputs = n;
    r.factor = factor;
    r.owner.assign(total, n);
    std::vector<std::size_t> filled(n, 0);
    std::vector<std::vector<std::size_t>> groups(n);
    std::size_t assigned = 0;
    for (const auto& [dist, flat] : order) {
        const std::size_t i = flat / total, g = flat % total;
        if (r.owner[g] != n || filled[i] == factor) continue;
        r.owner[g] = i;
        ++filled[i];
        groups[i].push_back(g);  // arrives in ascending distance, ties by index
        if (++assigned == total) break;
    }
    r.members.reserve(total);
    for (const auto& grp : groups) r.members.insert(r.members.end(), grp.begin(), grp.end());
    return r;
}

std::vector<PointCloud> resampled_subsets(const PointCloud& dense, const Resampling& r) {
    std::vector<PointCloud> out;
    out.reserve(r.factor);
    for (std::size_t j = 0; j < r.factor; ++j) out.push_back(select(dense, r.subset_indices(j)));
    return out;
}

}  // namespace dbp
