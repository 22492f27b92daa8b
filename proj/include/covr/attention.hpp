#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "covr/autodiff.hpp"

namespace covr {

/// softmax(Q K^T / sqrt(d_head)) V for Q [s x d_head], K and V [r x d_head].
inline Var scaled_dot_attention(Var q, Var k, Var v) {
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    require_matrix(qv, "attention");
    require_matrix(kv, "attention");
    require_matrix(vv, "attention");
    if (qv.cols() != kv.cols() || kv.cols() != vv.cols()) {
        throw shape_error("attention head dims: Q " + shape_string(qv.dims()) + ", K " + shape_string(kv.dims()) +
                          ", V " + shape_string(vv.dims()));
    }
    if (kv.rows() != vv.rows()) throw shape_error("attention: K and V row counts differ");
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(qv.cols()));
    Var scores = scale(matmul(q, transpose(k)), inv_sqrt);
    return matmul(softmax_rows(scores), v);
}

template <class T>
struct AttentionWeights {
    T Wq, Wk, Wv, Wo;
};

/// Multi-head attention: queries come from `queries` [s x d], keys and values
/// from `memory` [r x d]. Heads split the projected feature axis evenly.
inline Var multi_head_attention(Var queries, Var memory, const AttentionWeights<Var>& w, std::size_t heads) {
    const std::size_t d = queries.value().cols();
    if (heads == 0 || d % heads != 0) {
        throw config_error("model dim " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
    }
    Var q = matmul(queries, w.Wq);
    Var k = matmul(memory, w.Wk);
    Var v = matmul(memory, w.Wv);
    if (heads == 1) return matmul(scaled_dot_attention(q, k, v), w.Wo);
    const std::size_t dh = d / heads;
    std::vector<Var> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        outs.push_back(scaled_dot_attention(slice_cols(q, h * dh, dh), slice_cols(k, h * dh, dh),
                                            slice_cols(v, h * dh, dh)));
    }
    return matmul(concat_cols(outs), w.Wo);
}

}  // namespace covr
