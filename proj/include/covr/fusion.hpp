#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covr/attention.hpp"
#include "covr/autodiff.hpp"
#include "covr/container.hpp"
#include "covr/embedding.hpp"
#include "covr/error.hpp"
#include "covr/hash.hpp"
#include "covr/tensor.hpp"
#include "covr/tokenizer.hpp"

namespace covr {

struct FusionConfig {
    std::size_t dim = 256;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t vocab = kDefaultVocab;
    std::size_t max_len = kDefaultMaxLen;
    std::uint32_t seed = 42;

    void validate() const {
        if (dim < 2) throw config_error("dim must be at least 2");
        if (layers < 1) throw config_error("at least one grounding layer is required");
        if (heads < 1 || dim % heads != 0) {
            throw config_error("dim " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) +
                               " heads");
        }
        if (vocab < 2) throw config_error("vocab must be at least 2");
        if (max_len < 1) throw config_error("max_len must be at least 1");
    }

    bool operator==(const FusionConfig&) const = default;
};

template <class T>
struct NormWeights {
    T scale, shift;
};

template <class T>
struct FfnWeights {
    T W1, b1, W2, b2;
};

/// Self-attention, cross-attention and FFN, each pre-normed with a residual.
template <class T>
struct GroundingBlock {
    AttentionWeights<T> self_attn;
    AttentionWeights<T> cross_attn;
    FfnWeights<T> ffn;
    NormWeights<T> norm1, norm2, norm3;
};

template <class T>
struct FusionWeights {
    T proj_W;     // [d x d] description projection
    T proj_b;     // [d]
    T alpha_raw;  // [1], alpha = sigmoid(alpha_raw)
    T tok_embed;  // [vocab x d]
    T pos_embed;  // [max_len x d]
    std::vector<GroundingBlock<T>> layers;
    T out_head;  // [d x d]
};

/// Calls f(name, member) for every tensor in canonical order. The order defines
/// checkpoint layout, optimizer state alignment and flat gradient lists.
template <class W, class F>
void visit_weights(W& w, F&& f) {
    f(std::string("proj.W"), w.proj_W);
    f(std::string("proj.b"), w.proj_b);
    f(std::string("alpha_raw"), w.alpha_raw);
    f(std::string("tok_embed"), w.tok_embed);
    f(std::string("pos_embed"), w.pos_embed);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        auto& b = w.layers[i];
        f(p + "self_attn.Wq", b.self_attn.Wq);
        f(p + "self_attn.Wk", b.self_attn.Wk);
        f(p + "self_attn.Wv", b.self_attn.Wv);
        f(p + "self_attn.Wo", b.self_attn.Wo);
        f(p + "cross_attn.Wq", b.cross_attn.Wq);
        f(p + "cross_attn.Wk", b.cross_attn.Wk);
        f(p + "cross_attn.Wv", b.cross_attn.Wv);
        f(p + "cross_attn.Wo", b.cross_attn.Wo);
        f(p + "ffn.W1", b.ffn.W1);
        f(p + "ffn.b1", b.ffn.b1);
        f(p + "ffn.W2", b.ffn.W2);
        f(p + "ffn.b2", b.ffn.b2);
        f(p + "norm1.scale", b.norm1.scale);
        f(p + "norm1.shift", b.norm1.shift);
        f(p + "norm2.scale", b.norm2.scale);
        f(p + "norm2.shift", b.norm2.shift);
        f(p + "norm3.scale", b.norm3.scale);
        f(p + "norm3.shift", b.norm3.shift);
    }
    f(std::string("out_head"), w.out_head);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// All trainable state of the fusion network plus the architecture it implies.
struct FusionParams {
    FusionConfig config;
    FusionWeights<Tensor> weights;

    double alpha() const { return sigmoid(weights.alpha_raw[0]); }

    void set_alpha(double a) {
        if (!(a > 0.0 && a < 1.0)) throw config_error("alpha must lie in (0, 1)");
        weights.alpha_raw[0] = std::log(a / (1.0 - a));
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        visit_weights(weights, [&](const std::string& n, const Tensor&) { out.push_back(n); });
        return out;
    }

    std::vector<Tensor*> tensors() {
        std::vector<Tensor*> out;
        visit_weights(weights, [&](const std::string&, Tensor& t) { out.push_back(&t); });
        return out;
    }

    std::vector<const Tensor*> tensors() const {
        std::vector<const Tensor*> out;
        visit_weights(weights, [&](const std::string&, const Tensor& t) { out.push_back(&t); });
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const Tensor* t : tensors()) n += t->size();
        return n;
    }

    /// Zero-valued parameters with the shapes `config` implies. Also the shape of a gradient.
    static FusionParams zeros(const FusionConfig& config) {
        config.validate();
        const std::size_t d = config.dim;
        FusionParams p;
        p.config = config;
        auto& w = p.weights;
        w.proj_W = Tensor({d, d});
        w.proj_b = Tensor({d});
        w.alpha_raw = Tensor({1});
        w.tok_embed = Tensor({config.vocab, d});
        w.pos_embed = Tensor({config.max_len, d});
        w.layers.resize(config.layers);
        for (auto& b : w.layers) {
            for (auto* a : {&b.self_attn, &b.cross_attn}) {
                a->Wq = Tensor({d, d});
                a->Wk = Tensor({d, d});
                a->Wv = Tensor({d, d});
                a->Wo = Tensor({d, d});
            }
            b.ffn.W1 = Tensor({d, 4 * d});
            b.ffn.b1 = Tensor({4 * d});
            b.ffn.W2 = Tensor({4 * d, d});
            b.ffn.b2 = Tensor({d});
            for (auto* n : {&b.norm1, &b.norm2, &b.norm3}) {
                n->scale = Tensor({d});
                n->shift = Tensor({d});
            }
        }
        w.out_head = Tensor({d, d});
        return p;
    }

    friend bool operator==(const FusionParams& a, const FusionParams& b) {
        if (a.config != b.config) return false;
        auto ta = a.tensors();
        auto tb = b.tensors();
        for (std::size_t i = 0; i < ta.size(); ++i) {
            if (!(*ta[i] == *tb[i])) return false;
        }
        return true;
    }
};

/// Rounds every value to the nearest 32-bit float, the checkpoint precision.
inline void round_to_storage(Tensor& t) {
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

inline void round_to_storage(FusionParams& p) {
    for (Tensor* t : p.tensors()) round_to_storage(*t);
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Xavier-uniform bound used by init_params for a named tensor; 0 for tensors
/// that are not randomly initialized.
inline double init_bound(const std::string& name, const Tensor& t, const FusionConfig& config) {
    if (name == "tok_embed" || name == "pos_embed") {
        // lookup rows act as d -> d maps
        return std::sqrt(6.0 / (2.0 * static_cast<double>(config.dim)));
    }
    if (t.rank() != 2) return 0.0;
    return std::sqrt(6.0 / static_cast<double>(t.dims()[0] + t.dims()[1]));
}

/// Seeded Xavier-uniform weights, zero biases and shifts, unit norm scales, alpha = 0.5.
inline FusionParams init_params(const FusionConfig& config) {
    FusionParams p = FusionParams::zeros(config);
    std::mt19937_64 rng(config.seed);
    visit_weights(p.weights, [&](const std::string& name, Tensor& t) {
        if (ends_with(name, ".scale")) {
            for (double& v : t.values()) v = 1.0;
            return;
        }
        const double bound = init_bound(name, t, config);
        if (bound == 0.0) return;
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : t.values()) v = dist(rng);
    });
    round_to_storage(p);
    return p;
}

// ---------------------------------------------------------------------------
// Graph binding
// ---------------------------------------------------------------------------

/// Parameters bound as leaves on one tape.
struct FusionNet {
    FusionConfig config;
    FusionWeights<Var> w;
};

/// Rebuilds the weight structure from a flat list in visit_weights order.
inline FusionNet assemble(const FusionConfig& config, std::span<const Var> flat) {
    FusionNet net{config, {}};
    net.w.layers.resize(config.layers);
    std::size_t i = 0;
    visit_weights(net.w, [&](const std::string& name, Var& v) {
        if (i >= flat.size()) throw input_error("assemble: missing variable for " + name);
        v = flat[i++];
    });
    if (i != flat.size()) throw input_error("assemble: too many variables");
    return net;
}

/// Borrows every parameter tensor onto `tape`; `params` must outlive it.
inline FusionNet bind(Tape& tape, const FusionParams& params, bool requires_grad) {
    std::vector<Var> flat;
    for (const Tensor* t : params.tensors()) flat.push_back(tape.borrow(*t, requires_grad));
    return assemble(params.config, flat);
}

/// Per-tensor gradients after tape.backward(), shaped like the parameters.
inline FusionParams collect_grads(const Tape& tape, const FusionNet& net) {
    FusionParams g = FusionParams::zeros(net.config);
    std::vector<Var> flat;
    visit_weights(net.w, [&](const std::string&, const Var& v) { flat.push_back(v); });
    auto dst = g.tensors();
    for (std::size_t i = 0; i < flat.size(); ++i) *dst[i] = tape.grad(flat[i]);
    return g;
}

inline Var embedding_row(Tape& tape, const Embedding& e, std::size_t dim) {
    if (e.dim() != dim) {
        throw shape_error("embedding has dimension " + std::to_string(e.dim()) + ", model expects " +
                          std::to_string(dim));
    }
    return tape.constant(Tensor::row(e.values));
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

enum class CombineStrategy { weighted_mean, addition, cross_attention };
enum class FusionMode { unified, pairwise };

inline CombineStrategy parse_combine_strategy(std::string_view s) {
    if (s == "weighted-mean") return CombineStrategy::weighted_mean;
    if (s == "addition") return CombineStrategy::addition;
    if (s == "cross-attention") return CombineStrategy::cross_attention;
    throw config_error("unknown combine strategy '" + std::string(s) + "'");
}

inline const char* to_string(CombineStrategy s) {
    switch (s) {
        case CombineStrategy::weighted_mean: return "weighted-mean";
        case CombineStrategy::addition: return "addition";
        case CombineStrategy::cross_attention: return "cross-attention";
    }
    return "?";
}

inline FusionMode parse_fusion_mode(std::string_view s) {
    if (s == "unified") return FusionMode::unified;
    if (s == "pairwise") return FusionMode::pairwise;
    throw config_error("unknown fusion mode '" + std::string(s) + "'");
}

inline const char* to_string(FusionMode m) { return m == FusionMode::unified ? "unified" : "pairwise"; }

struct FuseOptions {
    CombineStrategy strategy = CombineStrategy::weighted_mean;
    /// Replaces sigmoid(alpha_raw) with a constant; used by ablations and boundary checks.
    std::optional<double> alpha_override;
};

inline Var project_description(const FusionNet& net, Var description) {
    if (description.value().cols() != net.config.dim || description.value().rows() != 1) {
        throw shape_error("description embedding " + shape_string(description.value().dims()) + ", expected [1x" +
                          std::to_string(net.config.dim) + "]");
    }
    return l2_normalize_rows(add_row_bias(matmul(description, net.w.proj_W), net.w.proj_b));
}

/// Merges the query video embedding with the projected description embedding.
/// weighted-mean is (1 - alpha) v_q + alpha v_d; every strategy ends normalized.
inline Var combine_query_description(const FusionNet& net, Var query, Var description, const FuseOptions& opts = {}) {
    require_same_shape(query.value(), description.value(), "combine_query_description");
    Tape& tape = query.tape();
    switch (opts.strategy) {
        case CombineStrategy::weighted_mean: {
            Var alpha = opts.alpha_override ? tape.constant(Tensor::scalar(*opts.alpha_override))
                                            : sigmoid(net.w.alpha_raw);
            Var keep = sub(tape.constant(Tensor::scalar(1.0)), alpha);
            return l2_normalize_rows(add(mul_scalar(query, keep), mul_scalar(description, alpha)));
        }
        case CombineStrategy::addition:
            return l2_normalize_rows(add(query, description));
        case CombineStrategy::cross_attention: {
            Var memory = concat_rows({query, description});
            return l2_normalize_rows(
                multi_head_attention(query, memory, net.w.layers.front().cross_attn, net.config.heads));
        }
    }
    throw config_error("unknown combine strategy");
}

/// Token embeddings plus the learned absolute position table.
inline Var token_states(const FusionNet& net, const TokenSequence& seq) {
    if (seq.tokens.empty()) throw input_error("modification token sequence is empty");
    if (seq.tokens.size() > net.config.max_len) {
        throw input_error("token sequence of length " + std::to_string(seq.tokens.size()) + " exceeds max_len " +
                          std::to_string(net.config.max_len));
    }
    std::vector<std::size_t> ids(seq.tokens.begin(), seq.tokens.end());
    for (auto id : ids) {
        if (id >= net.config.vocab) {
            throw input_error("token id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(net.config.vocab));
        }
    }
    return add(gather_rows(net.w.tok_embed, std::move(ids)), slice_rows(net.w.pos_embed, 0, seq.tokens.size()));
}

inline Var self_attention_sublayer(const GroundingBlock<Var>& b, Var x, std::size_t heads) {
    Var h = layer_norm_rows(x, b.norm1.scale, b.norm1.shift);
    return multi_head_attention(h, h, b.self_attn, heads);
}

/// Tokens attend to `memory` (here the single combined embedding).
inline Var cross_attention_sublayer(const GroundingBlock<Var>& b, Var x, Var memory, std::size_t heads) {
    Var h = layer_norm_rows(x, b.norm2.scale, b.norm2.shift);
    return multi_head_attention(h, memory, b.cross_attn, heads);
}

inline Var ffn_sublayer(const GroundingBlock<Var>& b, Var x) {
    Var h = layer_norm_rows(x, b.norm3.scale, b.norm3.shift);
    Var hidden = gelu(add_row_bias(matmul(h, b.ffn.W1), b.ffn.b1));
    return add_row_bias(matmul(hidden, b.ffn.W2), b.ffn.b2);
}

inline Var grounding_block(const GroundingBlock<Var>& b, Var x, Var memory, std::size_t heads) {
    x = add(x, self_attention_sublayer(b, x, heads));
    x = add(x, cross_attention_sublayer(b, x, memory, heads));
    return add(x, ffn_sublayer(b, x));
}

/// Grounds the modification text in `combined` [1 x d]: token states pass
/// through every block, the pooling position is read out through the head.
inline Var ground_modification(const FusionNet& net, Var combined, const TokenSequence& mod) {
    if (combined.value().rows() != 1 || combined.value().cols() != net.config.dim) {
        throw shape_error("combined embedding " + shape_string(combined.value().dims()));
    }
    Var x = token_states(net, mod);
    for (const auto& block : net.w.layers) x = grounding_block(block, x, combined, net.config.heads);
    return l2_normalize_rows(matmul(slice_rows(x, 0, 1), net.w.out_head));
}

/// Query, description and modification fused in one grounding encoder.
inline Var unified_fuse(const FusionNet& net, Var query, Var description_raw, const TokenSequence& mod,
                        const FuseOptions& opts = {}) {
    Var projected = project_description(net, description_raw);
    return ground_modification(net, combine_query_description(net, query, projected, opts), mod);
}

/// Baseline that grounds each pair separately and averages the three results.
inline Var pairwise_fuse(const FusionNet& net, Var query, Var description_raw, const TokenSequence& mod,
                         const FuseOptions& opts = {}) {
    Var projected = project_description(net, description_raw);
    Var with_query = ground_modification(net, query, mod);
    Var with_description = ground_modification(net, projected, mod);
    FuseOptions mean_opts = opts;
    mean_opts.strategy = CombineStrategy::weighted_mean;
    Var visual_text = combine_query_description(net, query, projected, mean_opts);
    Var total = add(add(with_query, with_description), visual_text);
    return l2_normalize_rows(scale(total, 1.0 / 3.0));
}

inline Var fuse(const FusionNet& net, FusionMode mode, Var query, Var description_raw, const TokenSequence& mod,
                const FuseOptions& opts = {}) {
    return mode == FusionMode::unified ? unified_fuse(net, query, description_raw, mod, opts)
                                       : pairwise_fuse(net, query, description_raw, mod, opts);
}

/// Inference convenience: fuses plain embeddings without recording gradients.
inline Embedding fuse(const FusionParams& params, FusionMode mode, const Embedding& query,
                      const Embedding& description_raw, const TokenSequence& mod, const FuseOptions& opts = {}) {
    Tape tape;
    FusionNet net = bind(tape, params, false);
    Var out = fuse(net, mode, embedding_row(tape, query, params.config.dim),
                   embedding_row(tape, description_raw, params.config.dim), mod, opts);
    auto v = out.value().values();
    return Embedding{std::vector<double>(v.begin(), v.end()), true};
}

inline Embedding unified_fuse(const FusionParams& params, const Embedding& query, const Embedding& description_raw,
                              const TokenSequence& mod, const FuseOptions& opts = {}) {
    return fuse(params, FusionMode::unified, query, description_raw, mod, opts);
}

inline Embedding pairwise_fuse(const FusionParams& params, const Embedding& query, const Embedding& description_raw,
                               const TokenSequence& mod, const FuseOptions& opts = {}) {
    return fuse(params, FusionMode::pairwise, query, description_raw, mod, opts);
}

// ---------------------------------------------------------------------------
// Checkpoints (CVRP). A "meta" entry carries d, L, H, vocab, seed, max_len.
// ---------------------------------------------------------------------------

inline std::string encode_checkpoint(const FusionParams& params) {
    const auto& c = params.config;
    std::vector<ContainerEntry> entries;
    entries.push_back(entry_from_words(
        "meta", {static_cast<std::uint32_t>(c.dim), static_cast<std::uint32_t>(c.layers),
                 static_cast<std::uint32_t>(c.heads), static_cast<std::uint32_t>(c.vocab), c.seed,
                 static_cast<std::uint32_t>(c.max_len)}));
    visit_weights(params.weights,
                  [&](const std::string& name, const Tensor& t) { entries.push_back(entry_from_tensor(name, t)); });
    return encode_container(entries);
}

inline FusionParams decode_checkpoint(std::string_view bytes) {
    auto entries = decode_container(bytes);
    std::map<std::string, const ContainerEntry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;
    // offset 12 is the first tensor record
    auto meta_it = by_name.find("meta");
    if (meta_it == by_name.end() || meta_it->second->words.size() != 6) {
        throw FormatError("checkpoint lacks a six-word meta tensor", 12);
    }
    const auto& m = meta_it->second->words;
    FusionConfig config{m[0], m[1], m[2], m[3], m[5], m[4]};
    try {
        config.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("invalid checkpoint meta: ") + e.what(), 12);
    }
    FusionParams params = FusionParams::zeros(config);
    std::size_t used = 1;
    visit_weights(params.weights, [&](const std::string& name, Tensor& t) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + name + "'", 12);
        if (it->second->dims != t.dims()) {
            throw FormatError("tensor '" + name + "' has shape " + shape_string(it->second->dims) + ", expected " +
                                  shape_string(t.dims()),
                              12);
        }
        t = tensor_from_entry(*it->second);
        ++used;
    });
    if (used != entries.size()) throw FormatError("checkpoint holds unexpected tensors", 12);
    return params;
}

inline void save_checkpoint(const FusionParams& params, const std::string& path) {
    binary::write_file(path, encode_checkpoint(params));
}

inline FusionParams load_checkpoint(const std::string& path) { return decode_checkpoint(binary::read_file(path)); }

/// FNV-1a over the serialized checkpoint, recorded in reports.
inline std::string checkpoint_digest(const FusionParams& params) { return hex64(fnv1a64(encode_checkpoint(params))); }

}  // namespace covr
