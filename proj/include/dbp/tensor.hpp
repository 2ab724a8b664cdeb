#pragma once

// Dense 64-bit tensors and a tape-based reverse-mode gradient graph.
//
// `Tensor` is a plain value: a shape plus a row-major buffer. A `Graph`
// records every operation applied to its `Var` handles in creation order,
// which is already a topological order, so `backward` is a single reverse
// sweep. Graphs are independent values; nothing here is shared between
// them.

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dbp {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape shape_, std::vector<double> data_);

    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    /// Glorot-uniform in ±sqrt(6 / (fan_in + fan_out)), fans taken from a 2-D shape.
    static Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

    std::size_t size() const { return data.size(); }
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool operator==(const Tensor&) const = default;
};

class Graph;

/// Handle to a node of a `Graph`. Cheap to copy; valid while the graph lives.
class Var {
public:
    Var() = default;
    Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape; }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    /// Gradient buffer, filled by `Graph::backward`; empty before that.
    const std::vector<double>& grad() const;
    std::size_t id() const { return id_; }
    Graph* graph() const { return graph_; }

private:
    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    /// When `track_gradients` is false no backward closures are stored and
    /// memory-heavy ops skip their saved intermediates.
    explicit Graph(bool track_gradients = true) : tracking_(track_gradients) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    /// Appends a node computed from `inputs`. The node requires a gradient
    /// if any input does; `backward_fn` is dropped otherwise.
    Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward_fn);

    /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Every node
    /// that requires a gradient ends up with a (possibly all-zero) buffer.
    void backward(Var loss);

    bool tracking() const { return tracking_; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const std::vector<double>& grad(std::size_t id) const { return nodes_[id].grad; }
    /// Gradient buffer of `id` for accumulation inside a backward closure.
    std::span<double> grad_slot(std::size_t id);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        std::vector<double> grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward_fn;
        bool requires_grad = false;
    };

    std::deque<Node> nodes_;
    bool tracking_;
};

// ---- operations -------------------------------------------------------------
// Every op throws DimensionError when shapes do not chain.

Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// x[n×d] + bias[1×d] on every row; the only broadcast supported.
Var add_row_bias(Var x, Var bias);
/// x · w + b, fused.
Var linear(Var x, Var w, Var b);
Var relu(Var a);
/// Row-wise softmax with per-row max subtraction. Throws NumericError on
/// non-finite input.
Var softmax_rows(Var m);
Var sum(Var a);
Var mean(Var a);
Var reshape(Var a, Shape shape);
Var concat_cols(Var a, Var b);
/// out row r = a row index[r]; backward scatter-adds.
Var gather_rows(Var a, std::span<const std::size_t> index);
/// Copy-major tiling: `copies` stacked copies of `a`.
Var tile_rows(Var a, std::size_t copies);
/// Inverse of `tile_rows` by averaging: rows k·n + i, k < copies, average into row i.
Var group_mean_rows(Var a, std::size_t copies);
/// Max over consecutive groups of `group` rows, per column. First maximum
/// receives the gradient.
Var group_max_rows(Var a, std::size_t group);
/// softmax_rows(q · kᵀ · scale) · v as one node. Saves the attention matrix
/// only when the graph tracks gradients. When `weights` is non-null it
/// receives the attention matrix.
Var fused_attention(Var q, Var k, Var v, double logit_scale, Tensor* weights = nullptr);

// ---- gradient check ---------------------------------------------------------

using ScalarFunction = std::function<Var(Graph&, const std::vector<Var>& inputs)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients against central differences on every
/// coordinate of every input. Error per coordinate is
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                           double eps = 1e-5);

}  // namespace dbp
