#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covr/container.hpp"
#include "covr/error.hpp"
#include "covr/fusion.hpp"
#include "covr/tensor.hpp"

namespace covr {

enum class OptimizerKind : std::uint32_t { sgd = 0, adam = 1 };

inline OptimizerKind parse_optimizer_kind(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw config_error("unknown optimizer '" + std::string(s) + "'");
}

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

/// Plain SGD or bias-corrected Adam (beta1 0.9, beta2 0.999, eps 1e-8) over an
/// ordered list of named tensors.
class Optimizer {
   public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    Optimizer(OptimizerKind kind, double lr, std::vector<std::string> names, std::span<const Tensor* const> shapes)
        : kind_(kind), lr_(lr), names_(std::move(names)) {
        // zero is allowed so a run can be checked for exact parameter stability
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw config_error("learning rate must be finite and >= 0");
        if (names_.size() != shapes.size()) throw input_error("optimizer: one name per tensor required");
        if (kind_ == OptimizerKind::adam) {
            for (const Tensor* t : shapes) {
                m_.push_back(Tensor::zeros_like(*t));
                v_.push_back(Tensor::zeros_like(*t));
            }
        }
    }

    OptimizerKind kind() const noexcept { return kind_; }
    double learning_rate() const noexcept { return lr_; }
    void set_learning_rate(double lr) {
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw config_error("learning rate must be finite and >= 0");
        lr_ = lr;
    }
    std::uint64_t steps() const noexcept { return steps_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
        if (params.size() != names_.size() || grads.size() != names_.size()) {
            throw input_error("optimizer: tensor count mismatch");
        }
        ++steps_;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
        for (std::size_t t = 0; t < params.size(); ++t) {
            require_same_shape(*params[t], *grads[t], "optimizer step");
            auto p = params[t]->values();
            auto g = grads[t]->values();
            if (kind_ == OptimizerKind::sgd) {
                for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr_ * g[i];
                continue;
            }
            auto m = m_[t].values();
            auto v = v_[t].values();
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
                v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
            }
        }
    }

    void step(FusionParams& params, const FusionParams& grads) {
        auto p = params.tensors();
        auto g = grads.tensors();
        step(std::span<Tensor* const>(p), std::span<const Tensor* const>(g));
    }

    /// Narrows moment estimates to checkpoint precision.
    void round_state_to_storage() {
        for (auto& t : m_) round_to_storage(t);
        for (auto& t : v_) round_to_storage(t);
    }

    /// CVRP entries: "optim" = {kind, steps lo, steps hi, lr lo, lr hi} words,
    /// then "m.<name>" and "v.<name>" for Adam.
    std::vector<ContainerEntry> to_entries() const {
        const auto lr_bits = std::bit_cast<std::uint64_t>(lr_);
        std::vector<ContainerEntry> out;
        out.push_back(entry_from_words(
            "optim", {static_cast<std::uint32_t>(kind_), static_cast<std::uint32_t>(steps_ & 0xffffffffu),
                      static_cast<std::uint32_t>(steps_ >> 32), static_cast<std::uint32_t>(lr_bits & 0xffffffffu),
                      static_cast<std::uint32_t>(lr_bits >> 32)}));
        for (std::size_t i = 0; i < m_.size(); ++i) {
            out.push_back(entry_from_tensor("m." + names_[i], m_[i]));
            out.push_back(entry_from_tensor("v." + names_[i], v_[i]));
        }
        return out;
    }

    /// Restores state for a parameter set shaped like `shapes`.
    static Optimizer from_entries(const std::vector<ContainerEntry>& entries, std::vector<std::string> names,
                                  std::span<const Tensor* const> shapes) {
        std::map<std::string, const ContainerEntry*> by_name;
        for (const auto& e : entries) by_name[e.name] = &e;
        auto it = by_name.find("optim");
        if (it == by_name.end() || it->second->words.size() != 5) {
            throw FormatError("optimizer state lacks a five-word 'optim' tensor", 12);
        }
        const auto& w = it->second->words;
        if (w[0] > 1) throw FormatError("unknown optimizer kind " + std::to_string(w[0]), 12);
        const double lr = std::bit_cast<double>((static_cast<std::uint64_t>(w[4]) << 32) | w[3]);
        Optimizer opt(static_cast<OptimizerKind>(w[0]), lr, names, shapes);
        opt.steps_ = (static_cast<std::uint64_t>(w[2]) << 32) | w[1];
        for (std::size_t i = 0; i < opt.m_.size(); ++i) {
            for (auto* pair : {&opt.m_, &opt.v_}) {
                const std::string key = (pair == &opt.m_ ? "m." : "v.") + opt.names_[i];
                auto found = by_name.find(key);
                if (found == by_name.end()) throw FormatError("optimizer state lacks '" + key + "'", 12);
                Tensor t = tensor_from_entry(*found->second);
                if (!t.same_shape((*pair)[i])) throw FormatError("optimizer tensor '" + key + "' has wrong shape", 12);
                (*pair)[i] = std::move(t);
            }
        }
        return opt;
    }

    bool operator==(const Optimizer&) const = default;

   private:
    OptimizerKind kind_;
    double lr_;
    std::uint64_t steps_ = 0;
    std::vector<std::string> names_;
    std::vector<Tensor> m_, v_;
};

inline Optimizer make_optimizer(OptimizerKind kind, double lr, const FusionParams& params) {
    auto shapes = params.tensors();
    return Optimizer(kind, lr, params.names(), std::span<const Tensor* const>(shapes));
}

inline void save_optimizer(const Optimizer& opt, const std::string& path) {
    binary::write_file(path, encode_container(opt.to_entries()));
}

inline Optimizer load_optimizer(const std::string& path, const FusionParams& params) {
    auto shapes = params.tensors();
    return Optimizer::from_entries(decode_container(binary::read_file(path)), params.names(),
                                   std::span<const Tensor* const>(shapes));
}

}  // namespace covr
