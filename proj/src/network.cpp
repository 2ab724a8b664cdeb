#include "dbp/network.hpp"

#include <cmath>
#include <random>

#include "dbp/errors.hpp"

namespace dbp {

void ModelConfig::validate() const {
    if (channels == 0 || factor == 0 || edge_k == 0 || points == 0)
        throw ConfigError("model sizes must be positive");
    if (points < edge_k)
        throw ConfigError("patch size N=" + std::to_string(points) + " is smaller than edge_k=" + std::to_string(edge_k));
    if (feature_bp && bp_iterations == 0) throw ConfigError("bp_iterations must be at least 1");
}

// ---- parameters -------------------------------------------------------------

namespace {

void add_mlp(ModelParams& p, std::mt19937_64& rng, const std::string& prefix, std::vector<std::size_t> dims,
             bool zero_last) {
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::string name = prefix + "." + std::to_string(l);
        const bool last = l + 2 == dims.size();
        p.tensors[name + ".w"] = (zero_last && last) ? Tensor::zeros({dims[l], dims[l + 1]})
                                                     : Tensor::glorot(dims[l], dims[l + 1], rng);
        p.tensors[name + ".b"] = Tensor::zeros({1, dims[l + 1]});
    }
}

void add_linear(ModelParams& p, std::mt19937_64& rng, const std::string& name, std::size_t in, std::size_t out,
                bool zero) {
    p.tensors[name + ".w"] = zero ? Tensor::zeros({in, out}) : Tensor::glorot(in, out, rng);
    p.tensors[name + ".b"] = Tensor::zeros({1, out});
}

void add_upsampler(ModelParams& p, std::mt19937_64& rng, const std::string& prefix, std::size_t factor,
                   std::size_t c) {
    p.tensors[prefix + ".codes"] = Tensor::glorot(factor, c, rng);
    add_mlp(p, rng, prefix + ".mlp", {2 * c, c, c}, false);
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams p;
    p.config = config;
    std::mt19937_64 rng(seed);
    const std::size_t c = config.channels, a = config.factor;
    add_mlp(p, rng, "extract.point", {3, c, c}, false);
    add_mlp(p, rng, "extract.edge", {2 * c, c, c}, false);
    add_upsampler(p, rng, "fbp.up", a, c);
    if (config.feature_bp)
        for (std::size_t t = 0; t < config.bp_iterations; ++t) add_upsampler(p, rng, "fbp.res" + std::to_string(t), a, c);
    if (config.pos_embed) add_mlp(p, rng, "attn.pos", {3, c, c}, false);
    add_linear(p, rng, "attn.theta", c, c, false);
    p.tensors["attn.phi.w"] = Tensor::glorot(c, c, rng);
    add_linear(p, rng, "attn.g", c, c, false);
    add_linear(p, rng, "attn.omega", c, c, true);
    add_mlp(p, rng, "coord.mlp", {c, c, 3}, true);
    if (config.coord_bp) {
        add_mlp(p, rng, "cbp.residual", {3 * a + 3, c, c}, false);
        add_upsampler(p, rng, "cbp.up", a, c);
        add_mlp(p, rng, "cbp.head", {c, c, 3}, true);
    }
    return p;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors) n += t.size();
    return n;
}

const Tensor& ModelParams::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ContractError("model has no parameter named " + name);
    return it->second;
}

BoundParams::BoundParams(Graph& graph, const ModelParams& params, bool requires_grad)
    : graph_(&graph), config_(params.config) {
    for (const auto& [name, t] : params.tensors) vars_.emplace(name, graph.leaf(t, requires_grad));
}

Var BoundParams::operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ContractError("model has no parameter named " + name);
    return it->second;
}

LinearVars BoundParams::linear(const std::string& prefix) const {
    return {(*this)[prefix + ".w"], (*this)[prefix + ".b"]};
}

std::vector<LinearVars> BoundParams::mlp(const std::string& prefix) const {
    std::vector<LinearVars> layers;
    for (std::size_t l = 0; contains(prefix + "." + std::to_string(l) + ".w"); ++l)
        layers.push_back(linear(prefix + "." + std::to_string(l)));
    if (layers.empty()) throw ContractError("model has no MLP named " + prefix);
    return layers;
}

UpsampleVars BoundParams::upsampler(const std::string& prefix) const {
    return {(*this)[prefix + ".codes"], mlp(prefix + ".mlp")};
}

AttentionVars BoundParams::attention() const {
    AttentionVars a;
    if (config_.pos_embed) a.position = mlp("attn.pos");
    a.theta = linear("attn.theta");
    a.phi = (*this)["attn.phi.w"];
    a.value = linear("attn.g");
    a.omega = linear("attn.omega");
    return a;
}

// ---- blocks -----------------------------------------------------------------

Var mlp_forward(std::span<const LinearVars> layers, Var x) {
    if (layers.empty()) throw DimensionError("mlp_forward: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        x = linear(x, layers[l].weight, layers[l].bias);
        if (l + 1 < layers.size()) x = relu(x);
    }
    return x;
}

Var extract_features(Var patch, const BoundParams& params) {
    const std::size_t n = patch.rows(), k = params.config().edge_k;
    if (n < k)
        throw ContractError("extract_features: patch of " + std::to_string(n) + " points is smaller than edge_k=" +
                            std::to_string(k));
    const PointCloud cloud = PointCloud::from_tensor(patch.value());
    const auto neighbors = knn(cloud, cloud, k);
    std::vector<std::size_t> centers(n * k);
    for (std::size_t i = 0; i < n * k; ++i) centers[i] = i / k;

    Var point_features = mlp_forward(params.mlp("extract.point"), patch);
    Var fi = gather_rows(point_features, centers);
    Var fj = gather_rows(point_features, neighbors);
    Var edges = concat_cols(fi, sub(fj, fi));
    return group_max_rows(mlp_forward(params.mlp("extract.edge"), edges), k);
}

Var positional_encoding(Var coords, std::span<const LinearVars> layers) { return mlp_forward(layers, coords); }

Var position_aware_attention(Var x, Var coords, const AttentionVars& layers, AttentionTrace* trace) {
    if (coords.rows() != x.rows() || coords.cols() != 3)
        throw ContractError("position_aware_attention: coordinates " + to_string(coords.shape()) +
                            " do not align with features " + to_string(x.shape()));
    Var z = layers.position.empty() ? x : add(x, positional_encoding(coords, layers.position));
    Var q = linear(z, layers.theta.weight, layers.theta.bias);
    Var k = matmul(z, layers.phi);
    Var v = linear(z, layers.value.weight, layers.value.bias);
    const double logit_scale = 1.0 / std::sqrt(static_cast<double>(x.cols()));
    Var attended = fused_attention(q, k, v, logit_scale, trace ? &trace->weights : nullptr);
    return add(linear(attended, layers.omega.weight, layers.omega.bias), x);
}

Var feature_upsample(Var features, std::size_t factor, const UpsampleVars& unit) {
    if (factor == 0) throw ContractError("feature_upsample: factor must be positive");
    if (unit.codes.rows() < factor)
        throw DimensionError("feature_upsample: " + std::to_string(unit.codes.rows()) + " codes for factor " +
                             std::to_string(factor));
    const std::size_t n = features.rows();
    std::vector<std::size_t> copy_of_row(n * factor);
    for (std::size_t r = 0; r < copy_of_row.size(); ++r) copy_of_row[r] = r / n;
    Var tiled = tile_rows(features, factor);
    Var codes = gather_rows(unit.codes, copy_of_row);
    return mlp_forward(unit.mlp, concat_cols(tiled, codes));
}

Var feature_downsample(Var dense, std::size_t factor) {
    if (factor == 0 || dense.rows() % factor != 0)
        throw ContractError("feature_downsample: " + std::to_string(dense.rows()) + " rows not divisible by " +
                            std::to_string(factor));
    return group_mean_rows(dense, factor);
}

Var feature_back_projection(Var features, Var coords, const BoundParams& params) {
    const auto& cfg = params.config();
    Var dense = feature_upsample(features, cfg.factor, params.upsampler("fbp.up"));
    if (cfg.feature_bp) {
        for (std::size_t t = 0; t < cfg.bp_iterations; ++t) {
            Var residual = sub(features, feature_downsample(dense, cfg.factor));
            dense = add(dense, feature_upsample(residual, cfg.factor, params.upsampler("fbp.res" + std::to_string(t))));
        }
    }
    return position_aware_attention(dense, tile_rows(coords, cfg.factor), params.attention());
}

Var coordinate_regress(Var dense_features, std::span<const LinearVars> layers) {
    return mlp_forward(layers, dense_features);
}

Var coordinate_back_projection(Var patch, Var stage_one, Var stage_one_features, const BoundParams& params) {
    const std::size_t n = patch.rows(), a = params.config().factor;
    if (stage_one.rows() != a * n || stage_one_features.rows() != a * n)
        throw ContractError("coordinate_back_projection: expected " + std::to_string(a * n) + " generated rows, got " +
                            std::to_string(stage_one.rows()) + " points and " +
                            std::to_string(stage_one_features.rows()) + " features");
    const Resampling r = resample_into_subsets(PointCloud::from_tensor(stage_one.value()),
                                               PointCloud::from_tensor(patch.value()), a);

    // Dimension switch: each input point's α residuals become its feature row.
    std::vector<std::size_t> owners(n * a);
    for (std::size_t t = 0; t < owners.size(); ++t) owners[t] = t / a;
    Var residuals = sub(gather_rows(stage_one, r.members), gather_rows(patch, owners));
    Var stack = concat_cols(patch, reshape(residuals, {n, 3 * a}));
    Var correction = mlp_forward(params.mlp("cbp.residual"), stack);
    Var expanded = feature_upsample(correction, a, params.upsampler("cbp.up"));

    // Copy j of input i is input i's j-th nearest assigned point.
    std::vector<std::size_t> route(n * a), inverse(n * a);
    for (std::size_t j = 0; j < a; ++j)
        for (std::size_t i = 0; i < n; ++i) route[j * n + i] = r.member(i, j);
    for (std::size_t t = 0; t < route.size(); ++t) inverse[route[t]] = t;

    Var head_in = add(expanded, gather_rows(stage_one_features, route));
    Var offsets = gather_rows(mlp_forward(params.mlp("cbp.head"), head_in), inverse);
    return add(stage_one, offsets);
}

ForwardResult dbpnet_forward(Var patch, const BoundParams& params) {
    if (patch.shape().size() != 2 || patch.cols() != 3)
        throw ContractError("dbpnet_forward: patch must be N×3, got " + to_string(patch.shape()));
    const auto& cfg = params.config();
    Var features = extract_features(patch, params);
    Var dense = feature_back_projection(features, patch, params);
    Var stage_one = add(tile_rows(patch, cfg.factor), coordinate_regress(dense, params.mlp("coord.mlp")));
    Var output = cfg.coord_bp ? coordinate_back_projection(patch, stage_one, dense, params) : stage_one;
    return {stage_one, output};
}

PointCloud dbpnet_infer(const ModelParams& params, const PointCloud& patch) {
    Graph graph(false);
    BoundParams bound(graph, params, false);
    Var input = graph.constant(patch.to_tensor());
    return PointCloud::from_tensor(dbpnet_forward(input, bound).output.value());
}

}  // namespace dbp
