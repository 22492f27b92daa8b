#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "covr/autodiff.hpp"
#include "covr/embedding.hpp"
#include "covr/error.hpp"
#include "covr/tensor.hpp"

namespace covr {

/// Temperature, positive-term weight and hard-negative sharpness of the
/// contrastive loss.
struct ContrastiveConfig {
    double tau = 0.07;
    double lambda = 1.0;
    double beta = 0.5;

    void validate() const {
        if (!(tau > 0.0)) throw config_error("temperature tau must be positive");
        if (!(lambda >= 0.0)) throw config_error("lambda must be non-negative");
        if (!std::isfinite(beta)) throw config_error("beta must be finite");
    }
};

/// Batch-by-batch cosine scores S[i][j] = <fused_i, target_j>.
struct SimilarityMatrix {
    Tensor S;
    ContrastiveConfig config;

    std::size_t batch() const { return S.rows(); }
};

enum class WeightDirection { row, column };

inline constexpr double kUnitNormTolerance = 1e-4;

inline void require_unit_rows(const Tensor& t, const char* what) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const double n = l2_norm(t.row_span(r));
        if (!(std::abs(n - 1.0) <= kUnitNormTolerance)) {
            throw input_error(std::string(what) + " row " + std::to_string(r) + " has norm " + std::to_string(n));
        }
    }
}

/// Differentiable S = fused * targets^T for [B x d] operands with unit rows.
inline Var similarity_matrix(Var fused, Var targets) {
    const Tensor& f = fused.value();
    const Tensor& t = targets.value();
    require_matrix(f, "similarity_matrix");
    require_matrix(t, "similarity_matrix");
    if (f.rows() != t.rows()) {
        throw input_error("similarity_matrix: " + std::to_string(f.rows()) + " fused vs " + std::to_string(t.rows()) +
                          " targets");
    }
    if (f.cols() != t.cols()) throw shape_error("similarity_matrix: embedding dimensions differ");
    require_unit_rows(f, "fused");
    require_unit_rows(t, "target");
    return matmul(fused, transpose(targets));
}

inline SimilarityMatrix similarity_matrix(std::span<const Embedding> fused, std::span<const Embedding> targets,
                                          const ContrastiveConfig& config = {}) {
    if (fused.empty() || fused.size() != targets.size()) {
        throw input_error("similarity_matrix needs equal, non-empty batches");
    }
    const std::size_t b = fused.size();
    const std::size_t d = fused.front().dim();
    Tensor f({b, d}), t({b, d});
    for (std::size_t i = 0; i < b; ++i) {
        if (fused[i].dim() != d || targets[i].dim() != d) throw shape_error("similarity_matrix: mixed dimensions");
        std::copy(fused[i].values.begin(), fused[i].values.end(), f.row_span(i).begin());
        std::copy(targets[i].values.begin(), targets[i].values.end(), t.row_span(i).begin());
    }
    Tape tape;
    Var s = similarity_matrix(tape.constant(std::move(f)), tape.constant(std::move(t)));
    return SimilarityMatrix{s.value(), config};
}

/// Hard-negative weights. Row direction:
///   w[i][j] = (B-1) exp(beta S[i][j] / tau) / sum_{k != i} exp(beta S[i][k] / tau),  j != i,
/// with w[i][i] = 1. Column direction normalizes down columns instead, so
/// off-diagonal weights average to one along the normalized axis.
inline Tensor hard_negative_weights(const Tensor& S, const ContrastiveConfig& config, WeightDirection direction) {
    config.validate();
    require_matrix(S, "hard_negative_weights");
    const std::size_t b = S.rows();
    if (S.cols() != b) throw shape_error("similarity matrix must be square");
    Tensor w({b, b});
    if (b == 1) {
        w[0] = 1.0;
        return w;
    }
    auto score = [&](std::size_t anchor, std::size_t other) {
        return direction == WeightDirection::row ? S.at(anchor, other) : S.at(other, anchor);
    };
    const double k = config.beta / config.tau;
    for (std::size_t a = 0; a < b; ++a) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < b; ++o)
            if (o != a) mx = std::max(mx, k * score(a, o));
        double total = 0.0;
        for (std::size_t o = 0; o < b; ++o)
            if (o != a) total += std::exp(k * score(a, o) - mx);
        for (std::size_t o = 0; o < b; ++o) {
            const double v = o == a ? 1.0 : static_cast<double>(b - 1) * std::exp(k * score(a, o) - mx) / total;
            if (direction == WeightDirection::row)
                w.at(a, o) = v;
            else
                w.at(o, a) = v;
        }
    }
    return w;
}

inline Tensor hard_negative_weights(const SimilarityMatrix& sim, WeightDirection direction) {
    return hard_negative_weights(sim.S, sim.config, direction);
}

namespace detail {

// One directional half of the loss, -sum_i log(e^{S_ii/tau} / (lambda e^{S_ii/tau} + sum_{j!=i} w_ij e^{S_ij/tau})),
// over rows of `S` with row-normalized weights `w`. Written as log-sum-exp over
// a_ii = log(lambda) + S_ii/tau and a_ij = log(w_ij) + S_ij/tau. When `grad` is
// given, adds dLoss/dS (weights held constant).
inline double directional_nce(const Tensor& S, const Tensor& w, const ContrastiveConfig& c, Tensor* grad) {
    const std::size_t b = S.rows();
    double loss = 0.0;
    std::vector<double> a(b);
    for (std::size_t i = 0; i < b; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) {
                a[j] = c.lambda > 0.0 ? std::log(c.lambda) + S.at(i, i) / c.tau
                                      : -std::numeric_limits<double>::infinity();
            } else {
                a[j] = std::log(w.at(i, j)) + S.at(i, j) / c.tau;
            }
            mx = std::max(mx, a[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < b; ++j) total += std::exp(a[j] - mx);
        const double lse = mx + std::log(total);
        loss += lse - S.at(i, i) / c.tau;
        if (grad) {
            for (std::size_t j = 0; j < b; ++j) grad->at(i, j) += std::exp(a[j] - lse) / c.tau;
            grad->at(i, i) -= 1.0 / c.tau;
        }
    }
    return loss;
}

}  // namespace detail

/// Hard-negative contrastive loss with caller-supplied weights: `w_row` for the
/// fused-to-target term and `w_col` for the target-to-fused term, both indexed
/// like S. The weights are constants; gradients flow through S only.
inline Var hn_nce_loss(Var S, const ContrastiveConfig& config, const Tensor& w_row, const Tensor& w_col) {
    config.validate();
    const Tensor& sv = S.value();
    require_matrix(sv, "hn_nce_loss");
    if (sv.rows() != sv.cols()) throw shape_error("hn_nce_loss needs a square matrix");
    require_same_shape(sv, w_row, "hn_nce_loss row weights");
    require_same_shape(sv, w_col, "hn_nce_loss column weights");
    // the column term of S is the row term of S^T
    const Tensor w_col_t = transpose(w_col);
    const double loss =
        detail::directional_nce(sv, w_row, config, nullptr) + detail::directional_nce(transpose(sv), w_col_t, config, nullptr);
    return S.tape().record(Tensor::scalar(loss), {S}, [config, w_row, w_col_t](const BackwardContext& c) {
        const Tensor& s = *c.in[0];
        Tensor g_row = Tensor::zeros_like(s);
        Tensor g_col = Tensor::zeros_like(s);
        detail::directional_nce(s, w_row, config, &g_row);
        detail::directional_nce(transpose(s), w_col_t, config, &g_col);
        const double up = c.grad_out[0];
        Tensor& g = *c.grad_in[0];
        for (std::size_t i = 0; i < s.rows(); ++i)
            for (std::size_t j = 0; j < s.cols(); ++j) g.at(i, j) += up * (g_row.at(i, j) + g_col.at(j, i));
    });
}

/// Hard-negative contrastive loss over a square similarity matrix: the
/// fused-to-target term plus the target-to-fused term, with weights computed
/// from S and held constant (stop-gradient).
inline Var hn_nce_loss(Var S, const ContrastiveConfig& config) {
    config.validate();
    const Tensor& sv = S.value();
    require_matrix(sv, "hn_nce_loss");
    if (sv.rows() != sv.cols()) throw shape_error("hn_nce_loss needs a square matrix");
    return hn_nce_loss(S, config, hard_negative_weights(sv, config, WeightDirection::row),
                       hard_negative_weights(sv, config, WeightDirection::column));
}

inline double hn_nce_loss(const SimilarityMatrix& sim) {
    Tape tape;
    return hn_nce_loss(tape.constant(sim.S), sim.config).value()[0];
}

}  // namespace covr
