#include "dbp/gradcheck_suite.hpp"

#include <functional>
#include <map>
#include <random>

#include "dbp/losses.hpp"
#include "dbp/network.hpp"
#include "dbp/tensor.hpp"

namespace dbp {

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = dist(rng);
    return t;
}

// Entries bounded away from zero so ReLU kinks stay out of the stencil.
Tensor off_zero_tensor(Shape shape, std::mt19937_64& rng) {
    Tensor t = random_tensor(std::move(shape), rng, 0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : t.data)
        if (sign(rng)) v = -v;
    return t;
}

// A random linear functional of y keeps every output coordinate in play.
Var project(Graph& g, Var y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sum(mul(y, g.constant(random_tensor(y.shape(), rng))));
}

/// Model parameters with no exactly-zero tensor, so every branch carries gradient.
ModelParams randomized_params(const ModelConfig& cfg, std::mt19937_64& rng) {
    ModelParams p = ModelParams::init(cfg, rng());
    std::uniform_real_distribution<double> dist(-0.3, 0.3);
    for (auto& [name, t] : p.tensors) {
        bool all_zero = true;
        for (double v : t.data) all_zero = all_zero && v == 0.0;
        if (all_zero)
            for (auto& v : t.data) v = dist(rng);
    }
    return p;
}

}  // namespace

std::vector<GradCheckEntry> run_grad_check_suite(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<GradCheckEntry> out;
    auto check = [&](const std::string& name, const ScalarFunction& f, const std::vector<Tensor>& inputs) {
        const auto r = grad_check(f, inputs);
        out.push_back({name, r.max_rel_error, r.worst_input, r.worst_index});
    };

    check("matmul", [](Graph& g, const std::vector<Var>& x) { return project(g, matmul(x[0], x[1]), 1); },
          {random_tensor({4, 3}, rng), random_tensor({3, 5}, rng)});
    check("matmul_nt", [](Graph& g, const std::vector<Var>& x) { return project(g, matmul_nt(x[0], x[1]), 2); },
          {random_tensor({4, 3}, rng), random_tensor({5, 3}, rng)});
    check("transpose", [](Graph& g, const std::vector<Var>& x) { return project(g, transpose(x[0]), 3); },
          {random_tensor({3, 4}, rng)});
    check("add_sub_mul",
          [](Graph& g, const std::vector<Var>& x) {
              return project(g, mul(add(x[0], x[1]), sub(x[0], x[2])), 4);
          },
          {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
    check("scale_mean", [](Graph&, const std::vector<Var>& x) { return mean(scale(mul(x[0], x[0]), 3.0)); },
          {random_tensor({2, 5}, rng)});
    check("add_row_bias", [](Graph& g, const std::vector<Var>& x) { return project(g, add_row_bias(x[0], x[1]), 5); },
          {random_tensor({4, 3}, rng), random_tensor({1, 3}, rng)});
    check("linear", [](Graph& g, const std::vector<Var>& x) { return project(g, linear(x[0], x[1], x[2]), 6); },
          {random_tensor({5, 4}, rng), random_tensor({4, 3}, rng), random_tensor({1, 3}, rng)});
    check("relu", [](Graph& g, const std::vector<Var>& x) { return project(g, relu(x[0]), 7); },
          {off_zero_tensor({4, 4}, rng)});
    check("softmax_rows", [](Graph& g, const std::vector<Var>& x) { return project(g, softmax_rows(x[0]), 8); },
          {random_tensor({5, 5}, rng, -2.0, 2.0)});
    check("matmul_softmax_sum",
          [](Graph&, const std::vector<Var>& x) { return sum(mul(softmax_rows(matmul(x[0], x[1])), x[0])); },
          {random_tensor({4, 4}, rng), random_tensor({4, 4}, rng)});
    check("reshape_concat",
          [](Graph& g, const std::vector<Var>& x) { return project(g, concat_cols(reshape(x[0], {3, 4}), x[1]), 9); },
          {random_tensor({6, 2}, rng), random_tensor({3, 2}, rng)});
    {
        const std::vector<std::size_t> idx{2, 0, 2, 1, 3};
        check("gather_rows", [idx](Graph& g, const std::vector<Var>& x) { return project(g, gather_rows(x[0], idx), 10); },
              {random_tensor({4, 3}, rng)});
    }
    check("tile_group_mean",
          [](Graph& g, const std::vector<Var>& x) {
              return project(g, add(group_mean_rows(mul(tile_rows(x[0], 3), x[1]), 3), x[0]), 11);
          },
          {random_tensor({4, 2}, rng), random_tensor({12, 2}, rng)});
    check("group_max_rows", [](Graph& g, const std::vector<Var>& x) { return project(g, group_max_rows(x[0], 4), 12); },
          {random_tensor({12, 3}, rng)});
    check("fused_attention",
          [](Graph& g, const std::vector<Var>& x) { return project(g, fused_attention(x[0], x[1], x[2], 0.5), 13); },
          {random_tensor({6, 4}, rng), random_tensor({5, 4}, rng), random_tensor({5, 3}, rng)});
    check("chamfer", [](Graph&, const std::vector<Var>& x) { return chamfer(x[0], x[1]); },
          {random_tensor({20, 3}, rng), random_tensor({30, 3}, rng)});
    check("uniform_loss", [](Graph&, const std::vector<Var>& x) { return uniform_loss(x[0], 3, 0.6); },
          {random_tensor({16, 3}, rng)});

    // Network blocks and the full model loss.
    ModelConfig cfg;
    cfg.points = 8;
    cfg.factor = 2;
    cfg.channels = 8;
    cfg.edge_k = 4;
    const ModelParams params = randomized_params(cfg, rng);
    std::vector<std::string> names;
    std::vector<Tensor> tensors;
    for (const auto& [name, t] : params.tensors) {
        names.push_back(name);
        tensors.push_back(t);
    }
    using Body = std::function<Var(const BoundParams&, const std::vector<Var>& extra)>;
    auto with_params = [&](const std::string& name, const Body& body, const std::vector<Tensor>& extra) {
        std::vector<Tensor> inputs = extra;
        inputs.insert(inputs.end(), tensors.begin(), tensors.end());
        const std::size_t n_extra = extra.size();
        check(name,
              [&, n_extra](Graph& g, const std::vector<Var>& x) {
                  std::map<std::string, Var> vars;
                  for (std::size_t i = 0; i < names.size(); ++i) vars.emplace(names[i], x[n_extra + i]);
                  const BoundParams bound(g, cfg, std::move(vars));
                  return body(bound, std::vector<Var>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n_extra)));
              },
              inputs);
    };

    const Tensor patch = random_tensor({8, 3}, rng, -0.7, 0.7);
    const Tensor target = random_tensor({16, 3}, rng, -0.7, 0.7);

    with_params("mlp_forward",
                [](const BoundParams& p, const std::vector<Var>& x) {
                    return project(p.graph(), mlp_forward(p.mlp("coord.mlp"), x[0]), 14);
                },
                {random_tensor({5, 8}, rng)});
    with_params("extract_features",
                [](const BoundParams& p, const std::vector<Var>& x) {
                    return project(p.graph(), extract_features(x[0], p), 15);
                },
                {patch});
    with_params("position_aware_attention",
                [](const BoundParams& p, const std::vector<Var>& x) {
                    return project(p.graph(), position_aware_attention(x[0], x[1], p.attention()), 16);
                },
                {random_tensor({6, 8}, rng), random_tensor({6, 3}, rng)});
    with_params("feature_back_projection",
                [](const BoundParams& p, const std::vector<Var>& x) {
                    return project(p.graph(), feature_back_projection(x[0], x[1], p), 17);
                },
                {random_tensor({8, 8}, rng), patch});
    with_params("coordinate_back_projection",
                [](const BoundParams& p, const std::vector<Var>& x) {
                    return project(p.graph(), coordinate_back_projection(x[0], x[1], x[2], p), 18);
                },
                {patch, random_tensor({16, 3}, rng, -0.7, 0.7), random_tensor({16, 8}, rng)});
    with_params("dbpnet_total_loss",
                [](const BoundParams& p, const std::vector<Var>& x) {
                    return total_loss(dbpnet_forward(x[0], p).output, x[1], LossWeights{});
                },
                {patch, target});
    return out;
}

}  // namespace dbp
