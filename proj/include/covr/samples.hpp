#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "covr/embedding.hpp"
#include "covr/error.hpp"
#include "covr/fusion.hpp"
#include "covr/retrieval.hpp"
#include "covr/tokenizer.hpp"
#include "covr/triplets.hpp"

namespace covr {

/// Where description embeddings e(d) come from: a store keyed by query id, or
/// the toy embedder applied to the triplet's description text.
class DescriptionSource {
   public:
    static constexpr std::size_t kToyMaxLen = 512;

    static DescriptionSource from_store(const EmbeddingStore& store) {
        DescriptionSource s;
        s.store_ = &store;
        return s;
    }

    static DescriptionSource toy(std::size_t dim, std::uint64_t seed) {
        DescriptionSource s;
        s.dim_ = dim;
        s.seed_ = seed;
        return s;
    }

    std::size_t dim() const { return store_ ? store_->dim() : dim_; }

    Embedding describe(const Triplet& t) const { return describe(t.query_id, t.description, t.line); }

    Embedding describe(const std::string& key, const std::string& text, std::size_t line = 0) const {
        if (store_) {
            if (!store_->contains(key)) {
                throw data_error("unknown description id '" + key + "'" +
                                 (line ? " at line " + std::to_string(line) : std::string()));
            }
            return store_->get(key);
        }
        return toy_embed_text(tokenize(text, kToyMaxLen), dim_, seed_);
    }

   private:
    DescriptionSource() = default;

    const EmbeddingStore* store_ = nullptr;
    std::size_t dim_ = 0;
    std::uint64_t seed_ = 0;
};

/// A triplet with every id resolved to an embedding.
struct Sample {
    Embedding query;        // normalized g(q)
    Embedding description;  // raw e(d)
    TokenSequence modification;
    std::string query_id;
    std::string target_id;
    std::size_t target_row = 0;  // row in the target index
    std::optional<std::vector<std::string>> subset_ids;
};

inline std::vector<Sample> resolve_samples(const std::vector<Triplet>& triplets, const EmbeddingStore& queries,
                                           const DescriptionSource& descriptions, const Index& targets,
                                           const FusionConfig& config) {
    if (queries.dim() != config.dim || targets.dim() != config.dim || descriptions.dim() != config.dim) {
        throw shape_error("store dimensions (query " + std::to_string(queries.dim()) + ", description " +
                          std::to_string(descriptions.dim()) + ", target " + std::to_string(targets.dim()) +
                          ") do not match model dim " + std::to_string(config.dim));
    }
    std::vector<Sample> out;
    out.reserve(triplets.size());
    for (const auto& t : triplets) {
        const std::string at = t.line ? " at line " + std::to_string(t.line) : std::string();
        if (!queries.contains(t.query_id)) throw data_error("unknown query id '" + t.query_id + "'" + at);
        const std::size_t row = targets.find(t.target_id);
        if (row == targets.size()) throw data_error("unknown target id '" + t.target_id + "'" + at);
        Sample s;
        try {
            s.query = normalized(queries.get(t.query_id));
        } catch (const Error&) {
            throw data_error("query embedding '" + t.query_id + "' is zero" + at);
        }
        s.description = descriptions.describe(t);
        s.modification = tokenize(t.modification, config.max_len, config.vocab);
        s.query_id = t.query_id;
        s.target_id = t.target_id;
        s.target_row = row;
        s.subset_ids = t.subset_ids;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace covr
