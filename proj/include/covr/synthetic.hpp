#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "covr/embedding.hpp"
#include "covr/samples.hpp"
#include "covr/tokenizer.hpp"
#include "covr/triplets.hpp"

namespace covr {

/// A self-contained dataset: triplets plus the three embedding stores
/// (query videos, descriptions keyed by query id, target videos).
struct SyntheticTask {
    std::vector<Triplet> triplets;
    EmbeddingStore queries;
    EmbeddingStore descriptions;
    EmbeddingStore targets;
};

inline std::vector<float> random_unit_floats(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double n2 = 0.0;
    for (double& x : v) {
        x = normal(rng);
        n2 += x * x;
    }
    const double n = std::sqrt(n2);
    std::vector<float> out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / n);
    return out;
}

inline std::vector<float> to_floats(const Embedding& e) { return std::vector<float>(e.values.begin(), e.values.end()); }

/// 32 triplets whose target is fixed only by all three inputs together:
/// 4 scenes x 2 description variants x 4 edits. The two variants of a scene
/// share one visual embedding, so the description is the only cue that splits
/// them; the 4 edit texts are shared by every query. Targets are random.
inline SyntheticTask make_joint_task(std::size_t dim, std::uint64_t seed) {
    static const std::array<const char*, 4> scenes{"beach", "forest", "kitchen", "street"};
    static const std::array<const char*, 2> variants{"sunny morning with a cyclist", "rainy evening with a dog"};
    static const std::array<const char*, 4> edits{"add a red kite in the sky", "remove the people walking",
                                                  "make the camera zoom out", "change it to winter snow"};
    std::mt19937_64 rng(seed);
    SyntheticTask task{{}, EmbeddingStore(dim), EmbeddingStore(dim), EmbeddingStore(dim)};
    for (std::size_t a = 0; a < scenes.size(); ++a) {
        const auto visual = random_unit_floats(dim, rng);
        for (std::size_t c = 0; c < variants.size(); ++c) {
            const std::string qid = "q" + std::to_string(a) + std::to_string(c);
            const std::string desc = std::string("a video of a ") + scenes[a] + " on a " + variants[c];
            task.queries.insert(qid, visual);
            task.descriptions.insert(
                qid, to_floats(toy_embed_text(tokenize(desc, DescriptionSource::kToyMaxLen), dim, seed + 1)));
            for (std::size_t b = 0; b < edits.size(); ++b) {
                const std::string vid = "v" + std::to_string(a) + std::to_string(c) + std::to_string(b);
                task.targets.insert(vid, random_unit_floats(dim, rng));
                task.triplets.push_back(Triplet{qid, desc, edits[b], vid, std::nullopt, 0});
            }
        }
    }
    return task;
}

/// Random queries, descriptions and edits with targets drawn uniformly from
/// `n_targets` random videos; nothing links inputs to targets.
inline SyntheticTask make_random_task(std::size_t n_targets, std::size_t n_queries, std::size_t dim,
                                      std::uint64_t seed) {
    static const std::array<const char*, 16> words{"red",  "blue",  "dog",   "car",   "run",   "jump",
                                                   "tree", "water", "night", "day",   "zoom",  "left",
                                                   "man",  "ball",  "snow",  "light"};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_word(0, words.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_target(0, n_targets - 1);
    auto sentence = [&](std::size_t n) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + std::string(words[pick_word(rng)]);
        return s;
    };
    auto id = [](char prefix, std::size_t i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%c%05zu", prefix, i);
        return std::string(buf);
    };
    SyntheticTask task{{}, EmbeddingStore(dim), EmbeddingStore(dim), EmbeddingStore(dim)};
    for (std::size_t i = 0; i < n_targets; ++i) task.targets.insert(id('t', i), random_unit_floats(dim, rng));
    for (std::size_t i = 0; i < n_queries; ++i) {
        const std::string qid = id('q', i);
        task.queries.insert(qid, random_unit_floats(dim, rng));
        task.descriptions.insert(qid, random_unit_floats(dim, rng));
        task.triplets.push_back(Triplet{qid, sentence(8), sentence(5), id('t', pick_target(rng)), std::nullopt, 0});
    }
    return task;
}

}  // namespace covr
