#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "covr/autodiff.hpp"
#include "covr/embedding.hpp"
#include "covr/error.hpp"
#include "covr/fusion.hpp"
#include "covr/objective.hpp"
#include "covr/optimizer.hpp"
#include "covr/retrieval.hpp"
#include "covr/samples.hpp"

namespace covr {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 8;
    double learning_rate = 3e-4;
    std::uint32_t seed = 42;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t vocab = kDefaultVocab;
    std::size_t max_len = kDefaultMaxLen;
    ContrastiveConfig loss;
    bool shuffle = true;
    std::optional<double> grad_clip;
    OptimizerKind optimizer = OptimizerKind::adam;
    FusionMode fusion = FusionMode::unified;
    FuseOptions fuse;

    /// Large-scale schedule: 5 epochs, batch 1024, learning rate 1e-5.
    static TrainConfig large_scale_preset() {
        TrainConfig c;
        c.epochs = 5;
        c.batch_size = 1024;
        c.learning_rate = 1e-5;
        return c;
    }

    FusionConfig fusion_config(std::size_t dim) const {
        return FusionConfig{dim, layers, heads, vocab, max_len, seed};
    }

    void validate() const {
        if (batch_size < 1) throw config_error("batch_size must be at least 1");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw config_error("learning rate must be >= 0");
        if (grad_clip && !(*grad_clip > 0.0)) throw config_error("grad_clip must be positive");
        loss.validate();
    }
};

struct TrainState {
    FusionParams params;
    Optimizer optimizer;
    std::size_t epochs_done = 0;
    std::vector<double> loss_trace;  // mean batch loss per epoch
};

inline TrainState initial_state(const TrainConfig& config, std::size_t dim) {
    FusionParams params = init_params(config.fusion_config(dim));
    Optimizer opt = make_optimizer(config.optimizer, config.learning_rate, params);
    return TrainState{std::move(params), std::move(opt), 0, {}};
}

/// Sample order for `epoch`; a pure function of (seed, epoch) so a resumed
/// run sees the same batches as an uninterrupted one.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint32_t seed, std::size_t epoch, bool shuffle) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle) {
        std::mt19937_64 rng(detail::splitmix64((static_cast<std::uint64_t>(seed) << 32) ^ epoch));
        std::shuffle(order.begin(), order.end(), rng);
    }
    return order;
}

inline double global_norm(const FusionParams& grads) {
    double s = 0.0;
    for (const Tensor* t : grads.tensors())
        for (double v : t->values()) s += v * v;
    return std::sqrt(s);
}

/// Forward and backward for one batch of samples; returns the loss and fills `grads`.
inline double batch_loss_and_grads(const FusionParams& params, const std::vector<Sample>& samples,
                                   std::span<const std::size_t> batch, const Index& targets,
                                   const TrainConfig& config, FusionParams* grads) {
    Tape tape;
    FusionNet net = bind(tape, params, grads != nullptr);
    std::vector<Var> fused;
    Tensor target_rows({batch.size(), params.config.dim});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Sample& s = samples[batch[i]];
        fused.push_back(fuse(net, config.fusion, embedding_row(tape, s.query, params.config.dim),
                             embedding_row(tape, s.description, params.config.dim), s.modification, config.fuse));
        auto row = targets.matrix().row_span(s.target_row);
        std::copy(row.begin(), row.end(), target_rows.row_span(i).begin());
    }
    Var sim = similarity_matrix(concat_rows(fused), tape.constant(std::move(target_rows)));
    Var loss = hn_nce_loss(sim, config.loss);
    if (grads) {
        tape.backward(loss);
        *grads = collect_grads(tape, net);
    }
    return loss.value()[0];
}

using EpochCallback = std::function<void(std::size_t epoch, double loss, const FusionParams& params)>;

/// Mini-batch training with in-batch negatives. Runs `config.epochs` more
/// epochs on top of `state`. Parameters and optimizer moments are narrowed to
/// 32-bit after each step so checkpoints capture the exact training state.
inline void train(TrainState& state, const std::vector<Sample>& samples, const Index& targets,
                  const TrainConfig& config, const EpochCallback& on_epoch = {}) {
    config.validate();
    if (samples.empty()) throw input_error("no training samples");
    state.optimizer.set_learning_rate(config.learning_rate);
    FusionParams grads = FusionParams::zeros(state.params.config);
    for (std::size_t e = 0; e < config.epochs; ++e) {
        const std::size_t epoch = state.epochs_done;
        const auto order = epoch_order(samples.size(), config.seed, epoch, config.shuffle);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            std::span<const std::size_t> batch(order.data() + begin, end - begin);
            const double loss = batch_loss_and_grads(state.params, samples, batch, targets, config, &grads);
            if (!std::isfinite(loss)) {
                throw numeric_error("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                    std::to_string(batches));
            }
            if (config.grad_clip) {
                const double norm = global_norm(grads);
                if (norm > *config.grad_clip) {
                    const double k = *config.grad_clip / norm;
                    for (Tensor* t : grads.tensors())
                        for (double& v : t->values()) v *= k;
                }
            }
            state.optimizer.step(state.params, grads);
            round_to_storage(state.params);
            state.optimizer.round_state_to_storage();
            total += loss;
            ++batches;
        }
        const double mean = total / static_cast<double>(batches);
        const double alpha = state.params.alpha();
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw numeric_error("alpha left (0, 1) at epoch " + std::to_string(epoch));
        }
        state.loss_trace.push_back(mean);
        ++state.epochs_done;
        if (on_epoch) on_epoch(epoch, mean, state.params);
    }
}

/// Resolves ids and trains from fresh parameters.
inline TrainState train(const std::vector<Triplet>& triplets, const EmbeddingStore& queries,
                        const DescriptionSource& descriptions, const EmbeddingStore& target_store,
                        const TrainConfig& config, const EpochCallback& on_epoch = {}) {
    config.validate();
    const Index targets = build_index(target_store);
    TrainState state = initial_state(config, queries.dim());
    auto samples = resolve_samples(triplets, queries, descriptions, targets, state.params.config);
    train(state, samples, targets, config, on_epoch);
    return state;
}

}  // namespace covr
