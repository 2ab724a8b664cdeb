#pragma once

// Point-set kernels: sampling, neighbor search, patch frames, the
// resampling of a dense estimate back onto its sparse input, and exact
// point-to-surface distances.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dbp/tensor.hpp"

namespace dbp {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double squared_norm(const Vec3& a) { return dot(a, a); }
double norm(const Vec3& a);
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Non-empty ordered list of finite 3-D points.
class PointCloud {
public:
    PointCloud() = default;
    /// Throws ContractError when `points` is empty or holds a non-finite coordinate.
    explicit PointCloud(std::vector<Vec3> points, std::string source = {});

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const Vec3& operator[](std::size_t i) const { return points_[i]; }
    const std::vector<Vec3>& points() const { return points_; }
    const std::string& source() const { return source_; }

    /// n×3 row-major copy.
    Tensor to_tensor() const;
    /// Rebuilds a cloud from an n×3 tensor.
    static PointCloud from_tensor(const Tensor& t, std::string source = {});
    std::span<const double> flat() const;

    bool operator==(const PointCloud& other) const { return points_ == other.points_; }

private:
    std::vector<Vec3> points_;
    std::string source_;
};

// ---- surfaces ---------------------------------------------------------------

struct Sphere {
    Vec3 center{0, 0, 0};
    double radius = 1.0;
};

/// Torus around the local z axis. `axes` rows are the local x, y, z axes in
/// world coordinates (orthonormal).
struct Torus {
    Vec3 center{0, 0, 0};
    std::array<Vec3, 3> axes{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    double major = 1.0;
    double minor = 0.3;
};

struct Plane {
    Vec3 point{0, 0, 0};
    Vec3 normal{0, 0, 1};
};

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

struct SurfaceDescriptor {
    std::variant<Sphere, Torus, Plane, Mesh> shape;

    /// Throws ContractError on non-positive radii or invalid triangle indices.
    void validate() const;
    /// The same surface after p ↦ (p - centroid) / scale.
    SurfaceDescriptor transformed(const Vec3& centroid, double scale) const;
};

/// Icosahedron refined `subdivisions` times, vertices projected onto the sphere.
Mesh make_icosphere(unsigned subdivisions, double radius = 1.0);

/// Exact unsigned distance from `p` to the surface.
double point_to_surface(const Vec3& p, const SurfaceDescriptor& surface);

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// ---- sampling and search ----------------------------------------------------

/// Greedy max-min selection of `m` indices starting at `start`. Ties go to
/// the lowest index.
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m, std::size_t start = 0);

/// Row-major |queries|×k neighbor indices, nearest first; distance ties go
/// to the lowest reference index.
std::vector<std::size_t> knn(const PointCloud& queries, const PointCloud& refs, std::size_t k);

/// `m` distinct points picked by a seeded shuffle.
PointCloud random_subsample(const PointCloud& cloud, std::size_t m, std::uint64_t seed);
std::vector<std::size_t> random_subsample_indices(std::size_t n, std::size_t m, std::uint64_t seed);

PointCloud select(const PointCloud& cloud, std::span<const std::size_t> indices);

// ---- patch frames -----------------------------------------------------------

/// Maps a patch into the unit ball: p' = (p - centroid) / scale.
struct Frame {
    Vec3 centroid{0, 0, 0};
    double scale = 1.0;

    Vec3 apply(const Vec3& p) const { return (p - centroid) * (1.0 / scale); }
    Vec3 invert(const Vec3& p) const { return p * scale + centroid; }
    PointCloud apply(const PointCloud& cloud) const;
    PointCloud invert(const PointCloud& cloud) const;
};

struct NormalizedPatch {
    PointCloud points;
    Frame frame;
};

/// Centroid = mean, scale = max distance from the centroid. Throws
/// ContractError for fewer than two points or a degenerate patch.
NormalizedPatch normalize_patch(const PointCloud& patch);

// ---- resampling into subsets ------------------------------------------------

/// Partition of a dense estimate among the sparse input points.
struct Resampling {
    std::size_t inputs = 0;
    std::size_t factor = 0;
    /// Row-major inputs×factor generated-point indices; row i lists the
    /// points assigned to input i, nearest first.
    std::vector<std::size_t> members;
    /// For every generated point, the input it was assigned to.
    std::vector<std::size_t> owner;

    std::size_t member(std::size_t input, std::size_t rank) const { return members[input * factor + rank]; }
    /// Generated indices of subset `rank`: each input's rank-th nearest member.
    std::vector<std::size_t> subset_indices(std::size_t rank) const;
};

/// Greedy capacity-constrained assignment: all (input, generated) pairs in
/// ascending distance order (ties by input index, then generated index);
/// a pair is taken when the generated point is free and the input has
/// fewer than `factor` members. Throws ContractError unless
/// |dense| == factor·|sparse|.
Resampling resample_into_subsets(const PointCloud& dense, const PointCloud& sparse, std::size_t factor);

/// The `factor` subsets as clouds, each aligned with `sparse`.
std::vector<PointCloud> resampled_subsets(const PointCloud& dense, const Resampling& r);

}  // namespace dbp
