#include "dbp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "dbp/errors.hpp"
#include "dbp/kernels.hpp"

namespace dbp {

std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "×" : "") << shape[i];
    out << ']';
    return out.str();
}

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape_, std::vector<double> data_) : shape(std::move(shape_)), data(std::move(data_)) {
    for (auto extent : shape)
        if (extent == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
    if (element_count(shape) != data.size())
        throw DimensionError("shape " + to_string(shape) + " does not match " + std::to_string(data.size()) +
                             " elements");
}

Tensor Tensor::zeros(Shape shape) {
    const auto n = element_count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::filled(Shape shape, double value) {
    const auto n = element_count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor t = zeros({fan_in, fan_out});
    for (auto& v : t.data) v = dist(rng);
    return t;
}

std::size_t Tensor::rows() const { return shape.empty() ? 1 : shape.front(); }

std::size_t Tensor::cols() const {
    if (shape.size() < 2) return 1;
    return data.size() / shape.front();
}

const Tensor& Var::value() const { return graph_->value(id_); }
const std::vector<double>& Var::grad() const { return graph_->grad(id_); }

// ---- graph ------------------------------------------------------------------

Var Graph::leaf(Tensor value, bool requires_grad) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad && tracking_;
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward_fn) {
    Node node;
    node.value = std::move(value);
    if (tracking_) {
        node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                         [this](std::size_t id) { return nodes_[id].requires_grad; });
        if (node.requires_grad) {
            node.inputs = std::move(inputs);
            node.backward_fn = std::move(backward_fn);
        }
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

std::span<double> Graph::grad_slot(std::size_t id) { return nodes_[id].grad; }

void Graph::backward(Var loss) {
    if (loss.graph() != this) throw ContractError("backward: loss belongs to a different graph");
    if (loss.value().size() != 1)
        throw ContractError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
    for (auto& node : nodes_) {
        if (node.requires_grad) node.grad.assign(node.value.size(), 0.0);
        else node.grad.clear();
    }
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad[0] = 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        auto& node = nodes_[id];
        if (node.backward_fn) node.backward_fn(*this, id);
    }
}

// ---- helpers ----------------------------------------------------------------

namespace {

void require_matrix(const Var& v, const char* op) {
    if (v.shape().size() != 2)
        throw DimensionError(std::string(op) + ": expected a matrix, got " + to_string(v.shape()));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                             to_string(b.shape()) + " differ");
}

void require_same_graph(const Var& a, const Var& b, const char* op) {
    if (a.graph() != b.graph()) throw ContractError(std::string(op) + ": operands from different graphs");
}

// Accumulates `src` into the gradient of `id` if it requires one.
template <typename F>
void if_grad(Graph& g, std::size_t id, F&& f) {
    if (g.requires_grad(id)) f(g.grad_slot(id));
}

}  // namespace

// ---- ops --------------------------------------------------------------------

Var matmul(Var a, Var b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    require_same_graph(a, b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul: inner extents disagree for " + to_string(a.shape()) + " · " +
                             to_string(b.shape()));
    Tensor out = Tensor::zeros({m, n});
    kernels::gemm(a.value().data, b.value().data, out.data, m, k, n);
    const auto ia = a.id(), ib = b.id();
    return a.graph()->record(std::move(out), {ia, ib}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> da) { kernels::gemm_a_bt(dy, g.value(ib).data, da, m, n, k); });
        if_grad(g, ib, [&](std::span<double> db) { kernels::gemm_at_b(g.value(ia).data, dy, db, m, k, n); });
    });
}

Var matmul_nt(Var a, Var b) {
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    require_same_graph(a, b, "matmul_nt");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k)
        throw DimensionError("matmul_nt: inner extents disagree for " + to_string(a.shape()) + " · " +
                             to_string(b.shape()) + "ᵀ");
    Tensor out = Tensor::zeros({m, n});
    kernels::gemm_a_bt(a.value().data, b.value().data, out.data, m, k, n);
    const auto ia = a.id(), ib = b.id();
    return a.graph()->record(std::move(out), {ia, ib}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        // y = a bᵀ: da = dy b, db = dyᵀ a
        if_grad(g, ia, [&](std::span<double> da) { kernels::gemm(dy, g.value(ib).data, da, m, n, k); });
        if_grad(g, ib, [&](std::span<double> db) { kernels::gemm_at_b(dy, g.value(ia).data, db, m, n, k); });
    });
}

Var transpose(Var a) {
    require_matrix(a, "transpose");
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros({n, m});
    const auto& src = a.value().data;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = src[i * n + j];
    const auto ia = a.id();
    return a.graph()->record(std::move(out), {ia}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> da) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) da[i * n + j] += dy[j * m + i];
        });
    });
}

Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    require_same_graph(a, b, "add");
    Tensor out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.graph()->record(std::move(out), {ia, ib}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        for (auto id : {ia, ib})
            if_grad(g, id, [&](std::span<double> d) {
                for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
            });
    });
}

Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    require_same_graph(a, b, "sub");
    Tensor out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.graph()->record(std::move(out), {ia, ib}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
        });
        if_grad(g, ib, [&](std::span<double> d) {
            for (std::size_t i = 0; i < dy.size(); ++i) d[i] -= dy[i];
        });
    });
}

Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    require_same_graph(a, b, "mul");
    Tensor out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.graph()->record(std::move(out), {ia, ib}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        const auto& av = g.value(ia).data;
        const auto& bv2 = g.value(ib).data;
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * bv2[i];
        });
        if_grad(g, ib, [&](std::span<double> d) {
            for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * av[i];
        });
    });
}

Var scale(Var a, double factor) {
    Tensor out = a.value();
    for (auto& v : out.data) v *= factor;
    const auto ia = a.id();
    return a.graph()->record(std::move(out), {ia}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * factor;
        });
    });
}

Var add_row_bias(Var x, Var bias) {
    require_matrix(x, "add_row_bias");
    require_same_graph(x, bias, "add_row_bias");
    const std::size_t n = x.rows(), d = x.cols();
    if (bias.value().size() != d || bias.rows() != 1)
        throw DimensionError("add_row_bias: bias " + to_string(bias.shape()) + " does not fit rows of " +
                             to_string(x.shape()));
    Tensor out = x.value();
    const auto& bv = bias.value().data;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.data[i * d + j] += bv[j];
    const auto ix = x.id(), ib = bias.id();
    return x.graph()->record(std::move(out), {ix, ib}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ix, [&](std::span<double> dx) {
            for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        });
        if_grad(g, ib, [&](std::span<double> db) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) db[j] += dy[i * d + j];
        });
    });
}

Var linear(Var x, Var w, Var b) {
    require_matrix(x, "linear");
    require_matrix(w, "linear");
    require_same_graph(x, w, "linear");
    require_same_graph(x, b, "linear");
    const std::size_t n = x.rows(), din = x.cols(), dout = w.cols();
    if (w.rows() != din)
        throw DimensionError("linear: input " + to_string(x.shape()) + " does not chain into weight " +
                             to_string(w.shape()));
    if (b.value().size() != dout)
        throw DimensionError("linear: bias " + to_string(b.shape()) + " does not match weight " +
                             to_string(w.shape()));
    Tensor out = Tensor::zeros({n, dout});
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < n; ++i) std::copy(bv.begin(), bv.end(), out.data.begin() + i * dout);
    kernels::gemm(x.value().data, w.value().data, out.data, n, din, dout);
    const auto ix = x.id(), iw = w.id(), ib = b.id();
    return x.graph()->record(std::move(out), {ix, iw, ib}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ix, [&](std::span<double> dx) { kernels::gemm_a_bt(dy, g.value(iw).data, dx, n, dout, din); });
        if_grad(g, iw, [&](std::span<double> dw) { kernels::gemm_at_b(g.value(ix).data, dy, dw, n, din, dout); });
        if_grad(g, ib, [&](std::span<double> db) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < dout; ++j) db[j] += dy[i * dout + j];
        });
    });
}

Var relu(Var a) {
    Tensor out = a.value();
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    const auto ia = a.id();
    return a.graph()->record(std::move(out), {ia}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        const auto& x = g.value(ia).data;
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t i = 0; i < dy.size(); ++i)
                if (x[i] > 0.0) d[i] += dy[i];
        });
    });
}

namespace {

// Row-wise softmax of `logits` (rows × cols) into `out`; returns false on
// a non-finite entry.
bool softmax_row(const double* logits, double* out, std::size_t cols) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
        if (!std::isfinite(logits[j])) return false;
        hi = std::max(hi, logits[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        out[j] = std::exp(logits[j] - hi);
        total += out[j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < cols; ++j) out[j] *= inv;
    return true;
}

// d(logits) from d(softmax) for one row: s ⊙ (ds − <s, ds>).
void softmax_row_backward(const double* s, const double* ds, double* dlogits, std::size_t cols,
                          double scale_factor) {
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += s[j] * ds[j];
    for (std::size_t j = 0; j < cols; ++j) dlogits[j] += scale_factor * s[j] * (ds[j] - dot);
}

}  // namespace

Var softmax_rows(Var m) {
    require_matrix(m, "softmax_rows");
    const std::size_t n = m.rows(), c = m.cols();
    Tensor out = Tensor::zeros({n, c});
    const auto& src = m.value().data;
    for (std::size_t i = 0; i < n; ++i)
        if (!softmax_row(src.data() + i * c, out.data.data() + i * c, c))
            throw NumericError("softmax_rows: non-finite entry in row " + std::to_string(i));
    const auto im = m.id();
    return m.graph()->record(std::move(out), {im}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        const auto& s = g.value(self).data;
        if_grad(g, im, [&](std::span<double> d) {
            for (std::size_t i = 0; i < n; ++i)
                softmax_row_backward(s.data() + i * c, dy.data() + i * c, d.data() + i * c, c, 1.0);
        });
    });
}

Var sum(Var a) {
    double total = 0.0;
    for (double v : a.value().data) total += v;
    const auto ia = a.id();
    return a.graph()->record(Tensor({1}, {total}), {ia}, [=](Graph& g, std::size_t self) {
        const double dy = g.grad(self)[0];
        if_grad(g, ia, [&](std::span<double> d) {
            for (auto& v : d) v += dy;
        });
    });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var reshape(Var a, Shape shape) {
    if (element_count(shape) != a.value().size())
        throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
    Tensor out(std::move(shape), a.value().data);
    const auto ia = a.id();
    return a.graph()->record(std::move(out), {ia}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
        });
    });
}

Var concat_cols(Var a, Var b) {
    require_matrix(a, "concat_cols");
    require_matrix(b, "concat_cols");
    require_same_graph(a, b, "concat_cols");
    if (a.rows() != b.rows())
        throw DimensionError("concat_cols: row counts of " + to_string(a.shape()) + " and " +
                             to_string(b.shape()) + " differ");
    const std::size_t n = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
    Tensor out = Tensor::zeros({n, c});
    const auto& av = a.value().data;
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(av.begin() + i * ca, ca, out.data.begin() + i * c);
        std::copy_n(bv.begin() + i * cb, cb, out.data.begin() + i * c + ca);
    }
    const auto ia = a.id(), ib = b.id();
    return a.graph()->record(std::move(out), {ia, ib}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < ca; ++j) d[i * ca + j] += dy[i * c + j];
        });
        if_grad(g, ib, [&](std::span<double> d) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < cb; ++j) d[i * cb + j] += dy[i * c + ca + j];
        });
    });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
    require_matrix(a, "gather_rows");
    const std::size_t n = a.rows(), c = a.cols(), m = index.size();
    if (m == 0) throw DimensionError("gather_rows: empty index");
    Tensor out = Tensor::zeros({m, c});
    const auto& av = a.value().data;
    for (std::size_t r = 0; r < m; ++r) {
        if (index[r] >= n)
            throw DimensionError("gather_rows: index " + std::to_string(index[r]) + " out of range for " +
                                 to_string(a.shape()));
        std::copy_n(av.begin() + index[r] * c, c, out.data.begin() + r * c);
    }
    const auto ia = a.id();
    std::vector<std::size_t> idx(index.begin(), index.end());
    return a.graph()->record(std::move(out), {ia}, [=, idx = std::move(idx)](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t j = 0; j < c; ++j) d[idx[r] * c + j] += dy[r * c + j];
        });
    });
}

Var tile_rows(Var a, std::size_t copies) {
    require_matrix(a, "tile_rows");
    if (copies == 0) throw DimensionError("tile_rows: copies must be positive");
    const std::size_t n = a.rows(), c = a.cols();
    Tensor out = Tensor::zeros({n * copies, c});
    const auto& av = a.value().data;
    for (std::size_t k = 0; k < copies; ++k) std::copy(av.begin(), av.end(), out.data.begin() + k * n * c);
    const auto ia = a.id();
    return a.graph()->record(std::move(out), {ia}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t k = 0; k < copies; ++k)
                for (std::size_t i = 0; i < n * c; ++i) d[i] += dy[k * n * c + i];
        });
    });
}

Var group_mean_rows(Var a, std::size_t copies) {
    require_matrix(a, "group_mean_rows");
    if (copies == 0 || a.rows() % copies != 0)
        throw DimensionError("group_mean_rows: " + std::to_string(a.rows()) + " rows not divisible by " +
                             std::to_string(copies));
    const std::size_t n = a.rows() / copies, c = a.cols();
    const double inv = 1.0 / static_cast<double>(copies);
    Tensor out = Tensor::zeros({n, c});
    const auto& av = a.value().data;
    for (std::size_t k = 0; k < copies; ++k)
        for (std::size_t i = 0; i < n * c; ++i) out.data[i] += av[k * n * c + i];
    for (auto& v : out.data) v *= inv;
    const auto ia = a.id();
    return a.graph()->record(std::move(out), {ia}, [=](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t k = 0; k < copies; ++k)
                for (std::size_t i = 0; i < n * c; ++i) d[k * n * c + i] += dy[i] * inv;
        });
    });
}

Var group_max_rows(Var a, std::size_t group) {
    require_matrix(a, "group_max_rows");
    if (group == 0 || a.rows() % group != 0)
        throw DimensionError("group_max_rows: " + std::to_string(a.rows()) + " rows not divisible by " +
                             std::to_string(group));
    const std::size_t n = a.rows() / group, c = a.cols();
    Tensor out = Tensor::zeros({n, c});
    std::vector<std::size_t> arg(n * c);
    const auto& av = a.value().data;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            std::size_t best = i * group;
            for (std::size_t t = 1; t < group; ++t) {
                const std::size_t r = i * group + t;
                if (av[r * c + j] > av[best * c + j]) best = r;
            }
            out.data[i * c + j] = av[best * c + j];
            arg[i * c + j] = best;
        }
    const auto ia = a.id();
    return a.graph()->record(std::move(out), {ia}, [=, arg = std::move(arg)](Graph& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if_grad(g, ia, [&](std::span<double> d) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < c; ++j) d[arg[i * c + j] * c + j] += dy[i * c + j];
        });
    });
}

Var fused_attention(Var q, Var k, Var v, double logit_scale, Tensor* weights) {
    require_matrix(q, "fused_attention");
    require_matrix(k, "fused_attention");
    require_matrix(v, "fused_attention");
    require_same_graph(q, k, "fused_attention");
    require_same_graph(q, v, "fused_attention");
    const std::size_t n = q.rows(), m = k.rows(), dk = q.cols(), dv = v.cols();
    if (k.cols() != dk || v.rows() != m)
        throw DimensionError("fused_attention: incompatible " + to_string(q.shape()) + ", " +
                             to_string(k.shape()) + ", " + to_string(v.shape()));
    Graph& graph = *q.graph();
    const bool keep = graph.tracking() || weights != nullptr;
    std::vector<double> attn(keep ? n * m : 0);
    Tensor out = Tensor::zeros({n, dv});
    {
        const double* qp = q.value().data.data();
        const double* kp = k.value().data.data();
        const double* vp = v.value().data.data();
        double* op = out.data.data();
        double* ap = attn.data();
        bool finite = true;
        const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel reduction(&& : finite) if (n * m * (dk + dv) > (1 << 15))
        {
            std::vector<double> logits(m), row(m);
            std::vector<std::pair<double, std::size_t>> order(m);
#pragma omp for schedule(static)
            for (std::ptrdiff_t i = 0; i < rows; ++i) {
                bool row_finite = true;
                for (std::size_t j = 0; j < m; ++j) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < dk; ++p) acc += qp[i * dk + p] * kp[j * dk + p];
                    logits[j] = acc * logit_scale;
                    row_finite = row_finite && std::isfinite(logits[j]);
                    order[j] = {-logits[j], j};
                }
                if (!row_finite) {
                    finite = false;
                    continue;
                }
                // Accumulate keys in descending-logit order so each output row
                // is independent of how the keys are numbered.
                std::sort(order.begin(), order.end());
                double* wrow = keep ? ap + i * m : row.data();
                const double hi = logits[order.front().second];
                double total = 0.0;
                for (const auto& [neg, j] : order) {
                    wrow[j] = std::exp(logits[j] - hi);
                    total += wrow[j];
                }
                const double inv = 1.0 / total;
                double* orow = op + i * dv;
                for (const auto& [neg, j] : order) {
                    wrow[j] *= inv;
                    const double w = wrow[j];
                    const double* vrow = vp + j * dv;
                    for (std::size_t p = 0; p < dv; ++p) orow[p] += w * vrow[p];
                }
            }
        }
        if (!finite) throw NumericError("fused_attention: non-finite attention logits");
    }
    if (weights != nullptr) *weights = Tensor({n, m}, attn);
    if (!graph.tracking()) return graph.record(std::move(out), {}, nullptr);
    const auto iq = q.id(), ik = k.id(), iv = v.id();
    return graph.record(std::move(out), {iq, ik, iv},
                        [=, attn = std::move(attn)](Graph& g, std::size_t self) {
                            const auto& dy = g.grad(self);
                            if_grad(g, iv, [&](std::span<double> d) { kernels::gemm_at_b(attn, dy, d, n, m, dv); });
                            if (!g.requires_grad(iq) && !g.requires_grad(ik)) return;
                            std::vector<double> da(n * m, 0.0), ds(n * m, 0.0);
                            kernels::gemm_a_bt(dy, g.value(iv).data, da, n, dv, m);
                            for (std::size_t i = 0; i < n; ++i)
                                softmax_row_backward(attn.data() + i * m, da.data() + i * m, ds.data() + i * m, m,
                                                     logit_scale);
                            if_grad(g, iq, [&](std::span<double> d) { kernels::gemm(ds, g.value(ik).data, d, n, m, dk); });
                            if_grad(g, ik, [&](std::span<double> d) { kernels::gemm_at_b(ds, g.value(iq).data, d, n, m, dk); });
                        });
}

// ---- gradient check ---------------------------------------------------------

GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs, double eps) {
    GradCheckResult result;
    std::vector<std::vector<double>> analytic;
    {
        Graph g;
        std::vector<Var> vars;
        for (const auto& t : inputs) vars.push_back(g.leaf(t));
        Var loss = f(g, vars);
        g.backward(loss);
        for (const auto& v : vars) analytic.push_back(v.grad());
    }
    auto evaluate = [&](const std::vector<Tensor>& xs) {
        Graph g(false);
        std::vector<Var> vars;
        for (const auto& t : xs) vars.push_back(g.leaf(t));
        return f(g, vars).value().data[0];
    };
    std::vector<Tensor> work = inputs;
    for (std::size_t t = 0; t < work.size(); ++t) {
        for (std::size_t i = 0; i < work[t].data.size(); ++i) {
            const double original = work[t].data[i];
            work[t].data[i] = original + eps;
            const double up = evaluate(work);
            work[t].data[i] = original - eps;
            const double down = evaluate(work);
            work[t].data[i] = original;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[t].empty() ? 0.0 : analytic[t][i];
            const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            if (!(err <= result.max_rel_error)) {
                result.max_rel_error = err;
                result.worst_input = t;
                result.worst_index = i;
            }
        }
    }
    return result;
}

}  // namespace dbp
