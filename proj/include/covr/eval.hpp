#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "covr/embedding.hpp"
#include "covr/error.hpp"
#include "covr/fusion.hpp"
#include "covr/retrieval.hpp"
#include "covr/samples.hpp"

namespace covr {

inline std::string format_fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline bool in_top(const RetrievalResult& r, const std::string& target, std::size_t k) {
    const std::size_t n = std::min(k, r.size());
    for (std::size_t i = 0; i < n; ++i)
        if (r.entries[i].id == target) return true;
    return false;
}

/// Fraction of samples whose target appears in the first k results.
inline double recall_at_k(const std::vector<RetrievalResult>& results, const std::vector<std::string>& targets,
                          std::size_t k) {
    if (results.empty() || results.size() != targets.size()) {
        throw input_error("recall_at_k needs equal, non-empty result and target lists");
    }
    if (k < 1) throw input_error("k must be at least 1");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < results.size(); ++i) hits += in_top(results[i], targets[i], k) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

/// The ranking restricted to `subset`, order preserved.
inline RetrievalResult restrict_to(const RetrievalResult& r, const std::vector<std::string>& subset) {
    const std::unordered_set<std::string> keep(subset.begin(), subset.end());
    RetrievalResult out;
    for (const auto& e : r.entries)
        if (keep.count(e.id)) out.entries.push_back(e);
    if (out.size() != keep.size()) throw input_error("ranking does not cover every subset id");
    return out;
}

/// Recall@k after re-ranking each result within its own candidate subset.
inline double subset_recall(const std::vector<RetrievalResult>& results, const std::vector<std::string>& targets,
                            const std::vector<std::vector<std::string>>& subsets, std::size_t k) {
    if (results.size() != subsets.size()) throw input_error("one subset per result required");
    std::vector<RetrievalResult> restricted;
    restricted.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (std::find(subsets[i].begin(), subsets[i].end(), targets.at(i)) == subsets[i].end()) {
            throw input_error("target '" + targets[i] + "' missing from its subset");
        }
        restricted.push_back(restrict_to(results[i], subsets[i]));
    }
    return recall_at_k(restricted, targets, k);
}

// ---------------------------------------------------------------------------
// Dataset evaluation
// ---------------------------------------------------------------------------

inline const std::vector<std::size_t>& default_ks() {
    static const std::vector<std::size_t> ks{1, 5, 10, 50};
    return ks;
}

struct EvalOptions {
    FusionMode fusion = FusionMode::unified;
    FuseOptions fuse;
    std::vector<std::size_t> ks = default_ks();
    bool exclude_self = false;
    unsigned threads = 1;
};

struct EvalReport {
    std::vector<std::size_t> ks;
    std::vector<double> recall;
    std::optional<std::vector<double>> subset_recall;
    std::size_t samples = 0;
    std::vector<std::pair<std::string, std::string>> config;

    /// key=value header, blank line, `k,recall` CSV, then optionally a blank
    /// line and `k,subset_recall` CSV.
    std::string serialize() const {
        std::ostringstream out;
        for (const auto& [k, v] : config) out << k << '=' << v << '\n';
        out << "samples=" << samples << "\n\n";
        out << "k,recall\n";
        for (std::size_t i = 0; i < ks.size(); ++i) out << ks[i] << ',' << format_fixed(recall[i]) << '\n';
        if (subset_recall) {
            out << "\nk,subset_recall\n";
            for (std::size_t i = 0; i < ks.size(); ++i) out << ks[i] << ',' << format_fixed((*subset_recall)[i]) << '\n';
        }
        return out.str();
    }

    bool operator==(const EvalReport&) const = default;
};

/// Runs `work(i)` for i in [0, n) on up to `threads` workers. Each index is
/// written by exactly one worker, so results do not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& work) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) work(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::vector<Embedding> fuse_samples(const std::vector<Sample>& samples, const FusionParams& params,
                                           FusionMode mode, const FuseOptions& opts, unsigned threads) {
    std::vector<Embedding> fused(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const auto& s = samples[i];
        fused[i] = fuse(params, mode, s.query, s.description, s.modification, opts);
    });
    return fused;
}

/// Full rankings of the target index for every sample.
inline std::vector<RetrievalResult> rank_samples(const std::vector<Sample>& samples, const FusionParams& params,
                                                 const Index& targets, const EvalOptions& opts) {
    auto fused = fuse_samples(samples, params, opts.fusion, opts.fuse, opts.threads);
    std::vector<RetrievalResult> results(samples.size());
    parallel_for(samples.size(), opts.threads, [&](std::size_t i) {
        results[i] = search_topk(targets, fused[i], targets.size());
        if (opts.exclude_self) {
            auto& e = results[i].entries;
            std::erase_if(e, [&](const ScoredId& s) { return s.id == samples[i].query_id; });
        }
    });
    return results;
}

inline EvalReport evaluate_samples(const std::vector<Sample>& samples, const FusionParams& params,
                                   const Index& targets, const EvalOptions& opts) {
    if (samples.empty()) throw input_error("evaluation needs at least one sample");
    if (opts.ks.empty()) throw config_error("no recall cutoffs given");
    for (auto k : opts.ks)
        if (k < 1) throw config_error("recall cutoffs must be positive");
    auto results = rank_samples(samples, params, targets, opts);
    std::vector<std::string> target_ids;
    for (const auto& s : samples) target_ids.push_back(s.target_id);

    EvalReport report;
    report.ks = opts.ks;
    report.samples = samples.size();
    for (auto k : opts.ks) report.recall.push_back(recall_at_k(results, target_ids, k));

    const bool all_subsets =
        std::all_of(samples.begin(), samples.end(), [](const Sample& s) { return s.subset_ids.has_value(); });
    if (all_subsets) {
        std::vector<std::vector<std::string>> subsets;
        for (const auto& s : samples) subsets.push_back(*s.subset_ids);
        std::vector<double> sr;
        for (auto k : opts.ks) sr.push_back(subset_recall(results, target_ids, subsets, k));
        report.subset_recall = std::move(sr);
    }

    const auto& c = params.config;
    report.config = {
        {"fusion", to_string(opts.fusion)},
        {"combine", to_string(opts.fuse.strategy)},
        {"d", std::to_string(c.dim)},
        {"L", std::to_string(c.layers)},
        {"H", std::to_string(c.heads)},
        {"vocab", std::to_string(c.vocab)},
        {"max_len", std::to_string(c.max_len)},
        {"alpha", format_fixed(opts.fuse.alpha_override.value_or(params.alpha()))},
        {"seed", std::to_string(c.seed)},
        {"checkpoint_hash", checkpoint_digest(params)},
        {"exclude_self", opts.exclude_self ? "true" : "false"},
        {"targets", std::to_string(targets.size())},
    };
    return report;
}

inline EvalReport evaluate_dataset(const std::vector<Triplet>& triplets, const EmbeddingStore& queries,
                                   const DescriptionSource& descriptions, const EmbeddingStore& target_store,
                                   const FusionParams& params, const EvalOptions& opts = {}) {
    const Index targets = build_index(target_store);
    return evaluate_samples(resolve_samples(triplets, queries, descriptions, targets, params.config), params, targets,
                            opts);
}

// ---------------------------------------------------------------------------
// Unified vs pairwise comparison: similarity of each fused query to its target
// ---------------------------------------------------------------------------

inline constexpr double kHistogramBinWidth = 0.05;
inline constexpr std::size_t kHistogramBins = 40;  // [-1, 1]

inline std::size_t histogram_bin(double s) {
    const double pos = std::floor((s + 1.0) / kHistogramBinWidth);
    if (!(pos > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(pos), kHistogramBins - 1);
}

struct MethodDistribution {
    std::string method;
    std::vector<double> similarities;
    std::vector<std::size_t> histogram = std::vector<std::size_t>(kHistogramBins, 0);
    double mean = 0.0;
    double median = 0.0;

    bool operator==(const MethodDistribution&) const = default;
};

inline MethodDistribution summarize(std::string method, std::vector<double> sims) {
    MethodDistribution m;
    m.method = std::move(method);
    if (sims.empty()) throw input_error("no similarities to summarize");
    double total = 0.0;
    for (double s : sims) {
        ++m.histogram[histogram_bin(s)];
        total += s;
    }
    m.mean = total / static_cast<double>(sims.size());
    std::vector<double> sorted = sims;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    m.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    m.similarities = std::move(sims);
    return m;
}

struct ComparisonReport {
    std::vector<MethodDistribution> methods;

    /// `method,bin_lo,bin_hi,count` rows, a blank line, then `method,mean,median`.
    std::string to_csv() const {
        std::ostringstream out;
        out << "method,bin_lo,bin_hi,count\n";
        for (const auto& m : methods) {
            for (std::size_t b = 0; b < kHistogramBins; ++b) {
                const double lo = -1.0 + kHistogramBinWidth * static_cast<double>(b);
                out << m.method << ',' << format_fixed(lo, 2) << ',' << format_fixed(lo + kHistogramBinWidth, 2) << ','
                    << m.histogram[b] << '\n';
            }
        }
        out << "\nmethod,mean,median\n";
        for (const auto& m : methods) out << m.method << ',' << format_fixed(m.mean) << ',' << format_fixed(m.median) << '\n';
        return out.str();
    }
};

struct FusionSlot {
    const FusionParams* params = nullptr;
    FusionMode mode = FusionMode::unified;
    std::string label;  // defaults to the mode name
};

inline ComparisonReport compare_fusion(const std::vector<Sample>& samples, const Index& targets, FusionSlot a,
                                       FusionSlot b, unsigned threads = 1) {
    if (!a.params || !b.params) throw input_error("compare_fusion needs two parameter sets");
    if (a.params->config.dim != b.params->config.dim) {
        throw shape_error("checkpoints disagree on dim (" + std::to_string(a.params->config.dim) + " vs " +
                          std::to_string(b.params->config.dim) + ")");
    }
    if (a.label.empty()) a.label = to_string(a.mode);
    if (b.label.empty()) b.label = to_string(b.mode);
    if (a.label == b.label) {
        a.label += "_a";
        b.label += "_b";
    }
    ComparisonReport report;
    for (const FusionSlot* slot : {&a, &b}) {
        auto fused = fuse_samples(samples, *slot->params, slot->mode, {}, threads);
        std::vector<double> sims;
        sims.reserve(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            sims.push_back(dot(fused[i].values, targets.matrix().row_span(samples[i].target_row)));
        }
        report.methods.push_back(summarize(slot->label, std::move(sims)));
    }
    return report;
}

}  // namespace covr
