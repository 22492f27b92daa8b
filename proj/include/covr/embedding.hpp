#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covr/binary_io.hpp"
#include "covr/error.hpp"
#include "covr/tensor.hpp"
#include "covr/tokenizer.hpp"

namespace covr {

struct Embedding {
    std::vector<double> values;
    bool normalized = false;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const Embedding&) const = default;
};

/// L2-normalized copy. Zero or non-finite vectors are an input error.
inline Embedding normalized(const Embedding& e) {
    const double n = l2_norm(e.values);
    if (!(n > 0.0) || !std::isfinite(n)) throw input_error("cannot normalize a zero or non-finite embedding");
    Embedding out{e.values, true};
    for (double& v : out.values) v /= n;
    return out;
}

inline double cosine(const Embedding& a, const Embedding& b) {
    return dot(a.values, b.values) / (l2_norm(a.values) * l2_norm(b.values));
}

/// Id-keyed embedding table as stored on disk (32-bit floats).
/// Iteration is in ascending lexicographic id order.
class EmbeddingStore {
   public:
    using Map = std::map<std::string, std::vector<float>>;

    explicit EmbeddingStore(std::size_t dim = 0) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    bool contains(const std::string& id) const { return entries_.count(id) != 0; }

    void insert(const std::string& id, std::vector<float> values) {
        if (dim_ == 0) throw config_error("embedding store dimension must be positive");
        if (values.size() != dim_) {
            throw shape_error("embedding '" + id + "' has dimension " + std::to_string(values.size()) +
                              ", store expects " + std::to_string(dim_));
        }
        if (!entries_.emplace(id, std::move(values)).second) throw input_error("duplicate id '" + id + "'");
    }

    void insert(const std::string& id, const Embedding& e) {
        insert(id, std::vector<float>(e.values.begin(), e.values.end()));
    }

    const std::vector<float>& raw(const std::string& id) const {
        auto it = entries_.find(id);
        if (it == entries_.end()) throw data_error("unknown id '" + id + "'");
        return it->second;
    }

    /// The stored vector widened to double; no renormalization.
    Embedding get(const std::string& id) const {
        const auto& r = raw(id);
        return Embedding{std::vector<double>(r.begin(), r.end()), false};
    }

    Map::const_iterator begin() const { return entries_.begin(); }
    Map::const_iterator end() const { return entries_.end(); }

    /// Same ids, same dimension, identical float bit patterns.
    friend bool bitwise_equal(const EmbeddingStore& a, const EmbeddingStore& b) {
        if (a.dim_ != b.dim_ || a.entries_.size() != b.entries_.size()) return false;
        auto it = b.entries_.begin();
        for (const auto& [id, v] : a.entries_) {
            if (id != it->first) return false;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (std::bit_cast<std::uint32_t>(v[i]) != std::bit_cast<std::uint32_t>(it->second[i])) return false;
            }
            ++it;
        }
        return true;
    }

   private:
    std::size_t dim_;
    Map entries_;
};

// ---------------------------------------------------------------------------
// Deterministic toy text embedder
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::vector<double> token_direction(std::uint32_t token, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(token)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (double& x : v) {
            x = normal(rng);
            n2 += x * x;
        }
    } while (n2 == 0.0);
    const double n = std::sqrt(n2);
    for (double& x : v) x /= n;
    return v;
}

}  // namespace detail

/// Sum of per-token pseudo-random unit directions, normalized. The pooling
/// token only contributes when the sequence holds nothing else.
inline Embedding toy_embed_text(const TokenSequence& seq, std::size_t dim, std::uint64_t seed) {
    if (dim < 2) throw config_error("toy embedder needs dim >= 2");
    std::vector<double> acc(dim, 0.0);
    std::size_t used = 0;
    for (std::uint32_t t : seq.tokens) {
        if (t == kPoolingToken) continue;
        auto dir = detail::token_direction(t, dim, seed);
        for (std::size_t i = 0; i < dim; ++i) acc[i] += dir[i];
        ++used;
    }
    if (used == 0) acc = detail::token_direction(kPoolingToken, dim, seed);
    // exact cancellation
    if (l2_norm(acc) == 0.0) acc = detail::token_direction(kPoolingToken, dim, seed);
    return normalized(Embedding{std::move(acc), false});
}

/// Per-video visual embedding convention: the frame at index floor(n / 2).
inline const Embedding& middle_frame_select(std::span<const Embedding> frames) {
    if (frames.empty()) throw input_error("middle_frame_select: no frames");
    const std::size_t d = frames.front().dim();
    for (const auto& f : frames) {
        if (f.dim() != d) throw shape_error("middle_frame_select: frames differ in dimension");
    }
    return frames[frames.size() / 2];
}

// ---------------------------------------------------------------------------
// CVRE container
//   "CVRE" | version u32 = 1 | dim u32 | count u64 |
//   count x { id_len u32 | id bytes | dim x f32 }, ids ascending
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kStoreVersion = 1;

inline std::string encode_embedding_store(const EmbeddingStore& store) {
    std::string out = "CVRE";
    binary::put_u32(out, kStoreVersion);
    binary::put_u32(out, static_cast<std::uint32_t>(store.dim()));
    binary::put_u64(out, store.size());
    for (const auto& [id, values] : store) {
        binary::put_u32(out, static_cast<std::uint32_t>(id.size()));
        out += id;
        for (float v : values) binary::put_f32(out, v);
    }
    return out;
}

inline EmbeddingStore decode_embedding_store(std::string_view bytes) {
    binary::Reader r(bytes);
    if (r.take(4, "magic") != "CVRE") throw FormatError("bad magic, expected CVRE", 0);
    const auto version_at = r.offset();
    if (const auto v = r.u32("version"); v != kStoreVersion) {
        throw FormatError("unsupported CVRE version " + std::to_string(v), version_at);
    }
    const auto dim_at = r.offset();
    const std::uint32_t dim = r.u32("dim");
    if (dim == 0) throw FormatError("dimension must be positive", dim_at);
    const std::uint64_t count = r.u64("count");
    EmbeddingStore store(dim);
    std::string prev;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto record_at = r.offset();
        const std::uint32_t len = r.u32("id length");
        std::string id(r.take(len, "id"));
        if (i > 0 && id == prev) throw FormatError("duplicate id '" + id + "'", record_at);
        if (i > 0 && id < prev) throw FormatError("ids not in ascending order at '" + id + "'", record_at);
        std::vector<float> values(dim);
        for (auto& v : values) v = r.f32("embedding values");
        store.insert(id, std::move(values));
        prev = std::move(id);
    }
    if (!r.at_end()) throw FormatError("trailing bytes after last record", r.offset());
    return store;
}

inline void write_embedding_store(const EmbeddingStore& store, const std::string& path) {
    binary::write_file(path, encode_embedding_store(store));
}

inline EmbeddingStore load_embedding_store(const std::string& path) {
    return decode_embedding_store(binary::read_file(path));
}

}  // namespace covr
