#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "covr/error.hpp"
#include "covr/tensor.hpp"

namespace covr {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
   public:
    Var() = default;

    const Tensor& value() const;
    bool requires_grad() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }

   private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// What a backward closure sees: its own output and incoming gradient, the input
/// values, and gradient buffers for inputs that need one (nullptr otherwise).
struct BackwardContext {
    const Tensor& out;
    const Tensor& grad_out;
    std::span<const Tensor* const> in;
    std::span<Tensor* const> grad_in;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Reverse-mode tape over whole-tensor operations.
///
/// Nodes are appended in evaluation order, so a reverse sweep visits every node
/// after all of its consumers. Parameters may be borrowed rather than copied; a
/// borrowed tensor must outlive the tape.
class Tape {
   public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = false) {
        Node& n = nodes_.emplace_back();
        n.owned = std::move(value);
        n.value = &n.owned;
        n.requires_grad = requires_grad;
        return Var(this, nodes_.size() - 1);
    }

    Var constant(Tensor value) { return leaf(std::move(value), false); }

    Var borrow(const Tensor& value, bool requires_grad) {
        Node& n = nodes_.emplace_back();
        n.value = &value;
        n.requires_grad = requires_grad;
        return Var(this, nodes_.size() - 1);
    }

    /// Appends an op result. The closure is dropped when no input needs a gradient.
    Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
        bool needs = false;
        for (const Var& v : inputs) {
            if (v.tape_ != this) throw input_error("operand recorded on a different tape");
            needs = needs || nodes_[v.id_].requires_grad;
        }
        Node& n = nodes_.emplace_back();
        n.owned = std::move(value);
        n.value = &n.owned;
        n.requires_grad = needs;
        if (needs) {
            n.inputs.reserve(inputs.size());
            for (const Var& v : inputs) n.inputs.push_back(v.id_);
            n.backward = std::move(backward);
        }
        return Var(this, nodes_.size() - 1);
    }

    const Tensor& value(Var v) const { return *nodes_.at(v.id_).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Seeds d(output)/d(output) = 1 and sweeps the tape backwards. Leaf
    /// gradients accumulate additively across calls until zero_grad().
    void backward(Var output) {
        Node& root = nodes_.at(output.id_);
        if (root.value->size() != 1) {
            throw shape_error("backward needs a scalar output, got " + shape_string(root.value->dims()));
        }
        if (!root.requires_grad) return;
        for (Node& n : nodes_) {
            if (n.backward) {
                n.grad = Tensor();
                n.has_grad = false;
            }
        }
        ensure_grad(root);
        root.grad[0] += 1.0;

        std::vector<const Tensor*> in_values;
        std::vector<Tensor*> in_grads;
        for (std::size_t i = output.id_ + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.requires_grad || !n.has_grad || !n.backward) continue;
            in_values.clear();
            in_grads.clear();
            for (std::size_t id : n.inputs) {
                Node& src = nodes_[id];
                in_values.push_back(src.value);
                if (src.requires_grad) {
                    ensure_grad(src);
                    in_grads.push_back(&src.grad);
                } else {
                    in_grads.push_back(nullptr);
                }
            }
            n.backward(BackwardContext{*n.value, n.grad, in_values, in_grads});
        }
    }

    /// Accumulated gradient of `v`; zeros when nothing flowed into it.
    Tensor grad(Var v) const {
        const Node& n = nodes_.at(v.id_);
        return n.has_grad ? n.grad : Tensor::zeros_like(*n.value);
    }

    void zero_grad() {
        for (Node& n : nodes_) {
            n.grad = Tensor();
            n.has_grad = false;
        }
    }

   private:
    struct Node {
        Tensor owned;
        const Tensor* value = nullptr;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
    };

    static void ensure_grad(Node& n) {
        if (!n.has_grad) {
            n.grad = Tensor::zeros_like(*n.value);
            n.has_grad = true;
        }
    }

    // deque keeps node addresses stable, which borrowed/owned value pointers rely on
    std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }
inline bool Var::requires_grad() const { return tape_->requires_grad(*this); }

namespace detail {

inline void accumulate(Tensor* dst, const Tensor& src) {
    if (!dst) return;
    auto d = dst->values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

inline void require_same_tape(Var a, Var b) {
    if (&a.tape() != &b.tape()) throw input_error("operands live on different tapes");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Differentiable operations
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
    detail::require_same_tape(a, b);
    Tensor out = matmul(a.value(), b.value());
    return a.tape().record(std::move(out), {a, b}, [](const BackwardContext& c) {
        if (c.grad_in[0]) detail::accumulate(c.grad_in[0], matmul(c.grad_out, transpose(*c.in[1])));
        if (c.grad_in[1]) detail::accumulate(c.grad_in[1], matmul(transpose(*c.in[0]), c.grad_out));
    });
}

inline Var transpose(Var a) {
    return a.tape().record(transpose(a.value()), {a}, [](const BackwardContext& c) {
        detail::accumulate(c.grad_in[0], transpose(c.grad_out));
    });
}

inline Var add(Var a, Var b) {
    detail::require_same_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    auto o = out.values();
    auto bv = b.value().values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
    return a.tape().record(std::move(out), {a, b}, [](const BackwardContext& c) {
        detail::accumulate(c.grad_in[0], c.grad_out);
        detail::accumulate(c.grad_in[1], c.grad_out);
    });
}

inline Var sub(Var a, Var b) {
    detail::require_same_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    auto o = out.values();
    auto bv = b.value().values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
    return a.tape().record(std::move(out), {a, b}, [](const BackwardContext& c) {
        detail::accumulate(c.grad_in[0], c.grad_out);
        if (c.grad_in[1]) {
            auto g = c.grad_in[1]->values();
            auto go = c.grad_out.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go[i];
        }
    });
}

/// x (m x n) plus a length-n bias broadcast over rows. The only broadcast supported.
inline Var add_row_bias(Var x, Var bias) {
    detail::require_same_tape(x, bias);
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    require_matrix(xv, "add_row_bias");
    if (bv.size() != xv.cols()) {
        throw shape_error("add_row_bias: " + shape_string(xv.dims()) + " + " + shape_string(bv.dims()));
    }
    Tensor out = xv;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row_span(r);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += bv[j];
    }
    return x.tape().record(std::move(out), {x, bias}, [](const BackwardContext& c) {
        detail::accumulate(c.grad_in[0], c.grad_out);
        if (c.grad_in[1]) {
            auto g = c.grad_in[1]->values();
            for (std::size_t r = 0; r < c.grad_out.rows(); ++r) {
                auto row = c.grad_out.row_span(r);
                for (std::size_t j = 0; j < row.size(); ++j) g[j] += row[j];
            }
        }
    });
}

inline Var scale(Var x, double factor) {
    Tensor out = x.value();
    for (double& v : out.values()) v *= factor;
    return x.tape().record(std::move(out), {x}, [factor](const BackwardContext& c) {
        auto g = c.grad_in[0]->values();
        auto go = c.grad_out.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * go[i];
    });
}

/// s * x where s holds a single element; differentiable in both.
inline Var mul_scalar(Var x, Var s) {
    detail::require_same_tape(x, s);
    if (s.value().size() != 1) throw shape_error("mul_scalar: factor " + shape_string(s.value().dims()));
    const double k = s.value()[0];
    Tensor out = x.value();
    for (double& v : out.values()) v *= k;
    return x.tape().record(std::move(out), {x, s}, [](const BackwardContext& c) {
        const double k = (*c.in[1])[0];
        auto go = c.grad_out.values();
        if (c.grad_in[0]) {
            auto g = c.grad_in[0]->values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * go[i];
        }
        if (c.grad_in[1]) {
            auto xv = c.in[0]->values();
            double acc = 0.0;
            for (std::size_t i = 0; i < go.size(); ++i) acc += go[i] * xv[i];
            (*c.grad_in[1])[0] += acc;
        }
    });
}

inline Var sigmoid(Var x) {
    Tensor out = x.value();
    for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
    return x.tape().record(std::move(out), {x}, [](const BackwardContext& c) {
        auto g = c.grad_in[0]->values();
        auto y = c.out.values();
        auto go = c.grad_out.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * y[i] * (1.0 - y[i]);
    });
}

/// Exact (erf-based) GELU.
inline Var gelu(Var x) {
    Tensor out = x.value();
    for (double& v : out.values()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    return x.tape().record(std::move(out), {x}, [](const BackwardContext& c) {
        auto g = c.grad_in[0]->values();
        auto xv = c.in[0]->values();
        auto go = c.grad_out.values();
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = xv[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            g[i] += go[i] * (cdf + v * pdf);
        }
    });
}

inline Var softmax_rows(Var x) {
    return x.tape().record(softmax_rows(x.value()), {x}, [](const BackwardContext& c) {
        Tensor& g = *c.grad_in[0];
        for (std::size_t r = 0; r < c.out.rows(); ++r) {
            auto y = c.out.row_span(r);
            auto go = c.grad_out.row_span(r);
            auto gi = g.row_span(r);
            const double inner = dot(y, go);
            for (std::size_t j = 0; j < y.size(); ++j) gi[j] += y[j] * (go[j] - inner);
        }
    });
}

/// Per-row layer normalization with learned scale and shift (both length n).
inline Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5) {
    detail::require_same_tape(x, gamma);
    detail::require_same_tape(x, beta);
    const Tensor& xv = x.value();
    require_matrix(xv, "layer_norm_rows");
    const std::size_t n = xv.cols();
    if (gamma.value().size() != n || beta.value().size() != n) {
        throw shape_error("layer_norm_rows: scale/shift length must be " + std::to_string(n));
    }
    Tensor out = xv;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row_span(r);
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) row[j] = gamma.value()[j] * (row[j] - mean) * inv + beta.value()[j];
    }
    return x.tape().record(std::move(out), {x, gamma, beta}, [eps](const BackwardContext& c) {
        const Tensor& xv = *c.in[0];
        const Tensor& gv = *c.in[1];
        const std::size_t n = xv.cols();
        std::vector<double> xhat(n), dxhat(n);
        for (std::size_t r = 0; r < xv.rows(); ++r) {
            auto row = xv.row_span(r);
            auto go = c.grad_out.row_span(r);
            double mean = 0.0;
            for (double v : row) mean += v;
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (double v : row) var += (v - mean) * (v - mean);
            var /= static_cast<double>(n);
            const double inv = 1.0 / std::sqrt(var + eps);
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                xhat[j] = (row[j] - mean) * inv;
                dxhat[j] = go[j] * gv[j];
                m1 += dxhat[j];
                m2 += dxhat[j] * xhat[j];
            }
            m1 /= static_cast<double>(n);
            m2 /= static_cast<double>(n);
            if (c.grad_in[0]) {
                auto gi = c.grad_in[0]->row_span(r);
                for (std::size_t j = 0; j < n; ++j) gi[j] += inv * (dxhat[j] - m1 - xhat[j] * m2);
            }
            if (c.grad_in[1]) {
                for (std::size_t j = 0; j < n; ++j) (*c.grad_in[1])[j] += go[j] * xhat[j];
            }
            if (c.grad_in[2]) {
                for (std::size_t j = 0; j < n; ++j) (*c.grad_in[2])[j] += go[j];
            }
        }
    });
}

/// Scales each row to unit Euclidean norm. A zero row is a numeric error.
inline Var l2_normalize_rows(Var x) {
    const Tensor& xv = x.value();
    require_matrix(xv, "l2_normalize_rows");
    Tensor out = xv;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row_span(r);
        const double norm = l2_norm(row);
        if (!(norm > 0.0) || !std::isfinite(norm)) throw numeric_error("cannot normalize a zero or non-finite row");
        for (double& v : row) v /= norm;
    }
    return x.tape().record(std::move(out), {x}, [](const BackwardContext& c) {
        for (std::size_t r = 0; r < c.out.rows(); ++r) {
            auto y = c.out.row_span(r);
            auto go = c.grad_out.row_span(r);
            auto gi = c.grad_in[0]->row_span(r);
            const double norm = l2_norm(c.in[0]->row_span(r));
            const double proj = dot(y, go);
            for (std::size_t j = 0; j < y.size(); ++j) gi[j] += (go[j] - y[j] * proj) / norm;
        }
    });
}

/// Row lookup: out[r] = table[ids[r]].
inline Var gather_rows(Var table, std::vector<std::size_t> ids) {
    const Tensor& tv = table.value();
    require_matrix(tv, "gather_rows");
    if (ids.empty()) throw input_error("gather_rows: empty id list");
    const std::size_t n = tv.cols();
    Tensor out({ids.size(), n});
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= tv.rows()) {
            throw input_error("gather_rows: id " + std::to_string(ids[r]) + " out of range " +
                              std::to_string(tv.rows()));
        }
        auto src = tv.row_span(ids[r]);
        std::copy(src.begin(), src.end(), out.row_span(r).begin());
    }
    return table.tape().record(std::move(out), {table}, [ids = std::move(ids)](const BackwardContext& c) {
        Tensor& g = *c.grad_in[0];
        for (std::size_t r = 0; r < ids.size(); ++r) {
            auto go = c.grad_out.row_span(r);
            auto dst = g.row_span(ids[r]);
            for (std::size_t j = 0; j < go.size(); ++j) dst[j] += go[j];
        }
    });
}

inline Var slice_rows(Var x, std::size_t begin, std::size_t count) {
    const Tensor& xv = x.value();
    require_matrix(xv, "slice_rows");
    if (count == 0 || begin + count > xv.rows()) {
        throw shape_error("slice_rows [" + std::to_string(begin) + ", +" + std::to_string(count) + ") of " +
                          shape_string(xv.dims()));
    }
    const std::size_t n = xv.cols();
    auto src = xv.values().subspan(begin * n, count * n);
    Tensor out({count, n}, std::vector<double>(src.begin(), src.end()));
    return x.tape().record(std::move(out), {x}, [begin, count, n](const BackwardContext& c) {
        auto g = c.grad_in[0]->values().subspan(begin * n, count * n);
        auto go = c.grad_out.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    });
}

inline Var slice_cols(Var x, std::size_t begin, std::size_t count) {
    const Tensor& xv = x.value();
    require_matrix(xv, "slice_cols");
    if (count == 0 || begin + count > xv.cols()) {
        throw shape_error("slice_cols [" + std::to_string(begin) + ", +" + std::to_string(count) + ") of " +
                          shape_string(xv.dims()));
    }
    Tensor out({xv.rows(), count});
    for (std::size_t r = 0; r < xv.rows(); ++r)
        for (std::size_t j = 0; j < count; ++j) out.at(r, j) = xv.at(r, begin + j);
    return x.tape().record(std::move(out), {x}, [begin, count](const BackwardContext& c) {
        Tensor& g = *c.grad_in[0];
        for (std::size_t r = 0; r < c.grad_out.rows(); ++r)
            for (std::size_t j = 0; j < count; ++j) g.at(r, begin + j) += c.grad_out.at(r, j);
    });
}

/// Stacks matrices with equal column counts on top of each other.
inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw input_error("concat_rows: nothing to concatenate");
    const std::size_t n = parts.front().value().cols();
    std::size_t total = 0;
    for (const Var& p : parts) {
        detail::require_same_tape(parts.front(), p);
        require_matrix(p.value(), "concat_rows");
        if (p.value().cols() != n) throw shape_error("concat_rows: column count mismatch");
        total += p.value().rows();
    }
    std::vector<double> values;
    values.reserve(total * n);
    for (const Var& p : parts) values.insert(values.end(), p.value().values().begin(), p.value().values().end());
    return parts.front().tape().record(Tensor({total, n}, std::move(values)), parts, [](const BackwardContext& c) {
        std::size_t offset = 0;
        auto go = c.grad_out.values();
        for (std::size_t i = 0; i < c.in.size(); ++i) {
            const std::size_t len = c.in[i]->size();
            if (c.grad_in[i]) {
                auto g = c.grad_in[i]->values();
                for (std::size_t j = 0; j < len; ++j) g[j] += go[offset + j];
            }
            offset += len;
        }
    });
}

/// Places matrices with equal row counts side by side.
inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw input_error("concat_cols: nothing to concatenate");
    const std::size_t m = parts.front().value().rows();
    std::size_t total = 0;
    for (const Var& p : parts) {
        detail::require_same_tape(parts.front(), p);
        require_matrix(p.value(), "concat_cols");
        if (p.value().rows() != m) throw shape_error("concat_cols: row count mismatch");
        total += p.value().cols();
    }
    Tensor out({m, total});
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Tensor& pv = p.value();
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < pv.cols(); ++j) out.at(r, offset + j) = pv.at(r, j);
        offset += pv.cols();
    }
    return parts.front().tape().record(std::move(out), parts, [](const BackwardContext& c) {
        std::size_t offset = 0;
        for (std::size_t i = 0; i < c.in.size(); ++i) {
            const std::size_t w = c.in[i]->cols();
            if (c.grad_in[i]) {
                Tensor& g = *c.grad_in[i];
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t j = 0; j < w; ++j) g.at(r, j) += c.grad_out.at(r, offset + j);
            }
            offset += w;
        }
    });
}

/// Sum of all elements as a length-1 tensor.
inline Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    return x.tape().record(Tensor::scalar(s), {x}, [](const BackwardContext& c) {
        const double g = c.grad_out[0];
        for (double& v : c.grad_in[0]->values()) v += g;
    });
}

}  // namespace covr
