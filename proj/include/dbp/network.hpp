#pragma once

// The dual back-projection upsampling network.
//
// Layout conventions: a dense feature map or point set with α rows per
// input point is stored copy-major, i.e. row k·N + i belongs to copy k of
// input point i.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dbp/geometry.hpp"
#include "dbp/tensor.hpp"

namespace dbp {

struct ModelConfig {
    std::size_t points = 256;    // N, input patch size
    std::size_t factor = 16;     // α, upsampling ratio
    std::size_t channels = 64;   // C, feature width
    std::size_t edge_k = 8;      // neighbors in the edge-aggregation layer
    std::size_t bp_iterations = 1;
    bool feature_bp = true;      // residual up-down-up in feature space
    bool coord_bp = true;        // second-stage refinement in coordinate space
    bool pos_embed = true;       // positional encoding inside attention

    /// Throws ConfigError when the sizes are inconsistent.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Every learnable tensor, keyed by a dotted name such as "attn.theta.w".
struct ModelParams {
    ModelConfig config;
    std::map<std::string, Tensor> tensors;

    /// Glorot-uniform weights, zero biases. The attention output transform
    /// and the last layer of both coordinate heads start at zero, so a fresh
    /// model replicates its input.
    static ModelParams init(const ModelConfig& config, std::uint64_t seed);

    std::size_t parameter_count() const;
    const Tensor& at(const std::string& name) const;
};

struct LinearVars {
    Var weight;
    Var bias;
};

struct UpsampleVars {
    Var codes;  // α×C, one learned code per copy
    std::vector<LinearVars> mlp;
};

struct AttentionVars {
    std::vector<LinearVars> position;  // empty when positional encoding is off
    LinearVars theta, value, omega;
    // Keys carry no bias: it would add q·b to every logit of a row, which
    // softmax cancels, leaving a parameter with identically zero gradient.
    Var phi;
};

/// ModelParams registered as leaves of one graph.
class BoundParams {
public:
    BoundParams(Graph& graph, const ModelParams& params, bool requires_grad = true);
    /// Wraps leaves that already live on `graph`.
    BoundParams(Graph& graph, const ModelConfig& config, std::map<std::string, Var> vars)
        : graph_(&graph), config_(config), vars_(std::move(vars)) {}

    const ModelConfig& config() const { return config_; }
    Var operator[](const std::string& name) const;
    bool contains(const std::string& name) const { return vars_.count(name) != 0; }
    LinearVars linear(const std::string& prefix) const;
    /// Layers prefix.0, prefix.1, … until the next index is missing.
    std::vector<LinearVars> mlp(const std::string& prefix) const;
    UpsampleVars upsampler(const std::string& prefix) const;
    AttentionVars attention() const;
    const std::map<std::string, Var>& vars() const { return vars_; }
    Graph& graph() const { return *graph_; }

private:
    Graph* graph_;
    ModelConfig config_;
    std::map<std::string, Var> vars_;
};

/// Shared per-row MLP with ReLU between layers and a linear last layer.
Var mlp_forward(std::span<const LinearVars> layers, Var x);

/// Per-point MLP followed by one edge-aggregation layer that max-pools an
/// MLP of (f_i, f_j - f_i) over the `edge_k` nearest neighbors of each point.
Var extract_features(Var patch, const BoundParams& params);

Var positional_encoding(Var coords, std::span<const LinearVars> layers);

/// Optional taps for tests.
struct AttentionTrace {
    Tensor weights;  // softmax matrix
};

/// y = ω(softmax(θ(z) φ(z)ᵀ / sqrt(C)) g(z)) + x with z = x + E_pos(coords)
/// (z = x when `layers.position` is empty).
Var position_aware_attention(Var x, Var coords, const AttentionVars& layers, AttentionTrace* trace = nullptr);

/// Duplicate F α times, append copy k's code to copy k, apply the shared MLP.
Var feature_upsample(Var features, std::size_t factor, const UpsampleVars& unit);

/// Average of the α copies of every point; parameter-free.
Var feature_downsample(Var dense, std::size_t factor);

/// H₀ = up(F); per iteration, H += up_res(F − down(H)); then attention on
/// H over the copy-major replicated coordinates.
Var feature_back_projection(Var features, Var coords, const BoundParams& params);

/// Per-row offsets C → 3.
Var coordinate_regress(Var dense_features, std::span<const LinearVars> layers);

/// Second stage: resample the stage-one points onto the input, feed the
/// input point with its α residuals through an MLP, expand, and add the
/// routed per-point offsets back onto the stage-one points.
Var coordinate_back_projection(Var patch, Var stage_one, Var stage_one_features, const BoundParams& params);

struct ForwardResult {
    Var stage_one;  // αN×3
    Var output;     // αN×3
};

ForwardResult dbpnet_forward(Var patch, const BoundParams& params);

/// Inference on one normalized patch without gradient tracking.
PointCloud dbpnet_infer(const ModelParams& params, const PointCloud& patch);

}  // namespace dbp
