#pragma once

#include <bit>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "covr/binary_io.hpp"
#include "covr/error.hpp"
#include "covr/tensor.hpp"

namespace covr {

/// One named tensor in a CVRP container. Data is kept as raw 32-bit words so
/// integer metadata survives a round trip bit for bit.
struct ContainerEntry {
    std::string name;
    Shape dims;
    std::vector<std::uint32_t> words;

    bool operator==(const ContainerEntry&) const = default;
};

/// Narrows to 32-bit floats.
inline ContainerEntry entry_from_tensor(std::string name, const Tensor& t) {
    ContainerEntry e{std::move(name), t.dims(), {}};
    e.words.reserve(t.size());
    for (double v : t.values()) e.words.push_back(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return e;
}

inline Tensor tensor_from_entry(const ContainerEntry& e) {
    std::vector<double> values;
    values.reserve(e.words.size());
    for (auto w : e.words) values.push_back(static_cast<double>(std::bit_cast<float>(w)));
    return Tensor(e.dims, std::move(values));
}

inline ContainerEntry entry_from_words(std::string name, std::vector<std::uint32_t> words) {
    Shape dims{words.size()};
    return ContainerEntry{std::move(name), std::move(dims), std::move(words)};
}

// "CVRP" | version u32 = 1 | tensor_count u32 |
// per tensor { name_len u32 | name | rank u32 | rank x u32 dims | f32 data }

inline constexpr std::uint32_t kContainerVersion = 1;

inline std::string encode_container(const std::vector<ContainerEntry>& entries) {
    std::string out = "CVRP";
    binary::put_u32(out, kContainerVersion);
    binary::put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        binary::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        binary::put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
        for (auto d : e.dims) binary::put_u32(out, static_cast<std::uint32_t>(d));
        for (auto w : e.words) binary::put_u32(out, w);
    }
    return out;
}

inline std::vector<ContainerEntry> decode_container(std::string_view bytes) {
    binary::Reader r(bytes);
    if (r.take(4, "magic") != "CVRP") throw FormatError("bad magic, expected CVRP", 0);
    const auto version_at = r.offset();
    if (const auto v = r.u32("version"); v != kContainerVersion) {
        throw FormatError("unsupported CVRP version " + std::to_string(v), version_at);
    }
    const std::uint32_t count = r.u32("tensor count");
    std::vector<ContainerEntry> entries;
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto entry_at = r.offset();
        ContainerEntry e;
        e.name = std::string(r.take(r.u32("name length"), "tensor name"));
        if (!seen.insert(e.name).second) throw FormatError("duplicate tensor '" + e.name + "'", entry_at);
        const auto rank_at = r.offset();
        const std::uint32_t rank = r.u32("rank");
        if (rank < 1 || rank > 3) throw FormatError("tensor '" + e.name + "' has rank " + std::to_string(rank), rank_at);
        std::uint64_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            const auto dim_at = r.offset();
            const std::uint32_t d = r.u32("dims");
            if (d == 0) throw FormatError("tensor '" + e.name + "' has a zero extent", dim_at);
            n *= d;
            if (n > r.remaining()) throw FormatError("tensor '" + e.name + "' larger than the file", dim_at);
            e.dims.push_back(d);
        }
        if (n * 4 > r.remaining()) {
            throw FormatError("truncated data for tensor '" + e.name + "'", r.offset());
        }
        e.words.reserve(n);
        for (std::uint64_t k = 0; k < n; ++k) e.words.push_back(r.u32("tensor data"));
        entries.push_back(std::move(e));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after last tensor", r.offset());
    return entries;
}

}  // namespace covr
