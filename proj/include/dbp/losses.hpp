#pragma once

// Training losses (differentiable) and evaluation metrics.

#include <string>

#include "dbp/geometry.hpp"
#include "dbp/tensor.hpp"

namespace dbp {

/// mean_a min_b |a-b|² + mean_b min_a |a-b|². Nearest-neighbor ties pick
/// the first index and only that pair receives gradient.
Var chamfer(Var a, Var b);
double chamfer(const PointCloud& a, const PointCloud& b);

/// Larger of the two directed max-min Euclidean distances.
double hausdorff(const PointCloud& a, const PointCloud& b);

double p2f_mean(const PointCloud& q, const SurfaceDescriptor& surface);

/// Hinge repulsion: mean over points and their k nearest neighbors of
/// max(0, h - d)². A non-positive `radius` selects sqrt(4 / |Q|).
Var uniform_loss(Var q, std::size_t k, double radius = 0.0);

struct LossWeights {
    double uniform = 0.2;       // λ
    std::size_t uniform_k = 4;
    double uniform_radius = 0.0;
};

Var total_loss(Var prediction, Var target, const LossWeights& weights);

struct UniformityTerms {
    double count = 0.0;    // mean (n_j - n̂)² / n̂
    double spacing = 0.0;  // mean normalized variance of in-disk spacings
    double total() const { return count + spacing; }
};

/// Default disk-area fraction of the uniformity metric.
inline constexpr double kUniformityAreaFraction = 0.01;

/// Disk-count uniformity on the cloud as given (callers normalize first).
/// Seeds: FPS of min(|Q|/8, 64) points; disk radius sqrt(4p); expected count
/// |Q|·p. Requires |Q| ≥ 32 and 0 < p < 1. Lower is better.
UniformityTerms uniformity_terms(const PointCloud& q, double area_fraction = kUniformityAreaFraction);
double uniformity(const PointCloud& q, double area_fraction = kUniformityAreaFraction);

/// Raw values in the normalized frame (not ×10³).
struct MetricsReport {
    double cd = 0.0;
    double hd = 0.0;
    double p2f = 0.0;
    double uniformity = 0.0;

    /// `name,cd,hd,p2f,uniformity` with values ×10³ to 6 significant digits.
    std::string csv_row(const std::string& name) const;
    static std::string csv_header() { return "name,cd,hd,p2f,uniformity"; }
};

}  // namespace dbp
