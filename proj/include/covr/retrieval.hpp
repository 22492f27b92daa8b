#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "covr/embedding.hpp"
#include "covr/error.hpp"
#include "covr/tensor.hpp"

namespace covr {

struct ScoredId {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredId&) const = default;
};

/// Ranked hits: scores non-increasing, ties by ascending id.
struct RetrievalResult {
    std::vector<ScoredId> entries;

    std::size_t size() const noexcept { return entries.size(); }
};

/// Exact cosine index over L2-normalized rows, ids ascending.
class Index {
   public:
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const Tensor& matrix() const noexcept { return matrix_; }

    Embedding row(std::size_t i) const {
        auto r = matrix_.row_span(i);
        return Embedding{std::vector<double>(r.begin(), r.end()), true};
    }

    /// Position of `id`, or size() when absent.
    std::size_t find(const std::string& id) const {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
        return (it != ids_.end() && *it == id) ? static_cast<std::size_t>(it - ids_.begin()) : ids_.size();
    }

   private:
    friend Index build_index(const EmbeddingStore& store);

    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    Tensor matrix_;
};

/// Normalizes every stored vector into an N x d matrix.
inline Index build_index(const EmbeddingStore& store) {
    if (store.empty()) throw input_error("cannot index an empty store");
    Index index;
    index.dim_ = store.dim();
    index.matrix_ = Tensor({store.size(), store.dim()});
    std::size_t r = 0;
    for (const auto& [id, values] : store) {
        auto row = index.matrix_.row_span(r++);
        std::copy(values.begin(), values.end(), row.begin());
        const double n = l2_norm(row);
        if (!(n > 0.0) || !std::isfinite(n)) throw input_error("embedding '" + id + "' is zero or non-finite");
        for (double& v : row) v /= n;
        if (std::abs(l2_norm(row) - 1.0) > 1e-3) {
            throw input_error("embedding '" + id + "' cannot be normalized accurately");
        }
        index.ids_.push_back(id);
    }
    return index;
}

namespace detail {

inline void check_query(const Embedding& query, std::size_t dim) {
    if (query.dim() != dim) {
        throw shape_error("query has dimension " + std::to_string(query.dim()) + ", index holds " +
                          std::to_string(dim));
    }
    const double n = l2_norm(query.values);
    if (!(std::abs(n - 1.0) <= 1e-4)) throw input_error("query is not unit norm (norm " + std::to_string(n) + ")");
}

}  // namespace detail

/// The k best rows by dot product with `query`. Exact; k > N yields all N.
inline RetrievalResult search_topk(const Index& index, const Embedding& query, std::size_t k) {
    if (k < 1) throw input_error("k must be at least 1");
    detail::check_query(query, index.dim());
    const std::size_t n = index.size();
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = dot(index.matrix().row_span(i), query.values);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t take = std::min(k, n);
    // ids are ascending, so ascending position is the id tie-break
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
    RetrievalResult result;
    result.entries.reserve(take);
    for (std::size_t i = 0; i < take; ++i) result.entries.push_back({index.ids()[order[i]], scores[order[i]]});
    return result;
}

/// Reference ranking by a naive scan of the store; used as the search oracle.
inline RetrievalResult brute_force_rank(const EmbeddingStore& store, const Embedding& query) {
    if (store.empty()) throw input_error("cannot rank an empty store");
    detail::check_query(query, store.dim());
    RetrievalResult all;
    for (const auto& [id, values] : store) {
        double n2 = 0.0;
        for (float v : values) n2 += static_cast<double>(v) * static_cast<double>(v);
        const double norm = std::sqrt(n2);
        if (!(norm > 0.0)) throw input_error("embedding '" + id + "' is zero");
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += (static_cast<double>(values[i]) / norm) * query.values[i];
        all.entries.push_back({id, s});
    }
    std::sort(all.entries.begin(), all.entries.end(), [](const ScoredId& a, const ScoredId& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    return all;
}

}  // namespace covr
