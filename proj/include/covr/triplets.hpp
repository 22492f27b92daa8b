#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "covr/error.hpp"

namespace covr {

/// One composed-retrieval sample: query video, its description, the requested
/// modification and the target video. `line` is the 1-based source line (0 if
/// built in code) and does not take part in equality.
struct Triplet {
    std::string query_id;
    std::string description;
    std::string modification;
    std::string target_id;
    std::optional<std::vector<std::string>> subset_ids;
    std::size_t line = 0;

    friend bool operator==(const Triplet& a, const Triplet& b) {
        return a.query_id == b.query_id && a.description == b.description && a.modification == b.modification &&
               a.target_id == b.target_id && a.subset_ids == b.subset_ids;
    }
};

inline std::string where(const Triplet& t) {
    return t.line ? " (line " + std::to_string(t.line) + ")" : std::string();
}

inline void validate(const Triplet& t) {
    if (t.query_id.empty() || t.target_id.empty()) throw data_error("empty query_id or target_id" + where(t));
    if (t.query_id == t.target_id) throw data_error("query_id equals target_id '" + t.query_id + "'" + where(t));
    if (t.description.empty()) throw data_error("empty description" + where(t));
    if (t.modification.empty()) throw data_error("empty modification" + where(t));
    if (t.subset_ids &&
        std::find(t.subset_ids->begin(), t.subset_ids->end(), t.target_id) == t.subset_ids->end()) {
        throw data_error("target '" + t.target_id + "' missing from subset_ids" + where(t));
    }
}

inline Triplet parse_triplet(const std::string& text, std::size_t line) {
    const std::string at = " at line " + std::to_string(line);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(std::string("malformed JSON") + at + ": " + e.what());
    }
    if (!j.is_object()) throw data_error("record is not a JSON object" + at);
    auto field = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end()) throw data_error(std::string("missing field '") + key + "'" + at);
        if (!it->is_string()) throw data_error(std::string("field '") + key + "' is not a string" + at);
        return it->get<std::string>();
    };
    Triplet t;
    t.query_id = field("query_id");
    t.description = field("description");
    t.modification = field("modification");
    t.target_id = field("target_id");
    t.line = line;
    if (auto it = j.find("subset_ids"); it != j.end()) {
        if (!it->is_array()) throw data_error("field 'subset_ids' is not an array" + at);
        std::vector<std::string> ids;
        for (const auto& v : *it) {
            if (!v.is_string()) throw data_error("subset_ids holds a non-string" + at);
            ids.push_back(v.get<std::string>());
        }
        t.subset_ids = std::move(ids);
    }
    validate(t);
    return t;
}

/// Canonical JSONL record, fields in fixed order.
inline std::string format_triplet(const Triplet& t) {
    nlohmann::ordered_json j;
    j["query_id"] = t.query_id;
    j["description"] = t.description;
    j["modification"] = t.modification;
    j["target_id"] = t.target_id;
    if (t.subset_ids) j["subset_ids"] = *t.subset_ids;
    return j.dump();
}

/// Reads one record per line. Blank lines are skipped; line numbers count them.
inline std::vector<Triplet> read_triplets(std::istream& in) {
    std::vector<Triplet> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        out.push_back(parse_triplet(text, line));
    }
    return out;
}

inline std::vector<Triplet> read_triplets(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    return read_triplets(in);
}

inline void write_triplets(const std::vector<Triplet>& triplets, const std::string& path) {
    for (const auto& t : triplets) validate(t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    for (const auto& t : triplets) out << format_triplet(t) << '\n';
    if (!out) throw io_error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Corpus statistics
// ---------------------------------------------------------------------------

inline std::size_t word_count(const std::string& text) {
    std::istringstream in(text);
    std::size_t n = 0;
    std::string w;
    while (in >> w) ++n;
    return n;
}

/// Exact rational mean, numerator / denominator.
struct Mean {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 1;

    double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }

    /// Two decimal places, rounded half to even on the exact rational.
    std::string format2() const {
        const std::uint64_t scaled = numerator * 100 / denominator;
        const std::uint64_t rem = numerator * 100 % denominator;
        std::uint64_t q = scaled;
        if (2 * rem > denominator || (2 * rem == denominator && (scaled % 2 == 1))) ++q;
        char buf[48];
        std::snprintf(buf, sizeof buf, "%llu.%02llu", static_cast<unsigned long long>(q / 100),
                      static_cast<unsigned long long>(q % 100));
        return buf;
    }
};

/// Word-count histogram with unit-width bins.
struct WordHistogram {
    std::map<std::size_t, std::size_t> counts;
    Mean mean;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [w, c] : counts) n += c;
        return n;
    }
};

struct CorpusStats {
    std::size_t count = 0;
    WordHistogram description;
    WordHistogram modification;
    Mean triplets_per_query;
};

inline CorpusStats dataset_stats(const std::vector<Triplet>& triplets) {
    if (triplets.empty()) throw input_error("dataset_stats: no triplets");
    CorpusStats s;
    s.count = triplets.size();
    std::set<std::string> queries;
    std::uint64_t desc_words = 0, mod_words = 0;
    for (const auto& t : triplets) {
        const auto dw = word_count(t.description);
        const auto mw = word_count(t.modification);
        ++s.description.counts[dw];
        ++s.modification.counts[mw];
        desc_words += dw;
        mod_words += mw;
        queries.insert(t.query_id);
    }
    s.description.mean = Mean{desc_words, s.count};
    s.modification.mean = Mean{mod_words, s.count};
    s.triplets_per_query = Mean{s.count, queries.size()};
    return s;
}

// ---------------------------------------------------------------------------
// Caption quality gate
// ---------------------------------------------------------------------------

inline constexpr double kHallucinationThreshold = 0.4;

enum class GateDecision { accept, reject };

/// Rejects a caption whose video-caption similarity is strictly below `threshold`.
inline GateDecision hallucination_gate(double similarity, double threshold = kHallucinationThreshold) {
    if (!(similarity >= -1.0 && similarity <= 1.0)) throw input_error("similarity outside [-1, 1]");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw input_error("threshold outside [0, 1]");
    return similarity < threshold ? GateDecision::reject : GateDecision::accept;
}

}  // namespace covr
