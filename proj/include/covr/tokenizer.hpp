#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "covr/error.hpp"
#include "covr/hash.hpp"

namespace covr {

inline constexpr std::size_t kDefaultVocab = 65536;
inline constexpr std::size_t kDefaultMaxLen = 77;
inline constexpr std::uint32_t kPoolingToken = 0;

struct TokenSequence {
    std::vector<std::uint32_t> tokens;
    std::string original_text;

    std::size_t size() const noexcept { return tokens.size(); }
    bool operator==(const TokenSequence&) const = default;
};

namespace detail {

// Decodes one UTF-8 code point starting at s[i]; malformed bytes decode as themselves.
inline char32_t decode_utf8(std::string_view s, std::size_t i, std::size_t& len) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) {
        return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0u) == 0x80u;
    };
    auto bits = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3Fu); };
    if (b0 < 0x80) {
        len = 1;
        return b0;
    }
    if ((b0 & 0xE0u) == 0xC0u && cont(1)) {
        len = 2;
        return (static_cast<char32_t>(b0 & 0x1Fu) << 6) | bits(1);
    }
    if ((b0 & 0xF0u) == 0xE0u && cont(1) && cont(2)) {
        len = 3;
        return (static_cast<char32_t>(b0 & 0x0Fu) << 12) | (bits(1) << 6) | bits(2);
    }
    if ((b0 & 0xF8u) == 0xF0u && cont(1) && cont(2) && cont(3)) {
        len = 4;
        return (static_cast<char32_t>(b0 & 0x07u) << 18) | (bits(1) << 12) | (bits(2) << 6) | bits(3);
    }
    len = 1;
    return b0;
}

inline bool is_unicode_space(char32_t c) {
    return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
           c == 0x3000;
}

inline bool is_ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= 0x21 && u <= 0x2F) || (u >= 0x3A && u <= 0x40) || (u >= 0x5B && u <= 0x60) ||
           (u >= 0x7B && u <= 0x7E);
}

}  // namespace detail

/// Lowercased (ASCII letters) words, split on Unicode whitespace, with
/// leading/trailing ASCII punctuation stripped. Words that strip to nothing are dropped.
inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        std::size_t b = 0, e = current.size();
        while (b < e && detail::is_ascii_punct(current[b])) ++b;
        while (e > b && detail::is_ascii_punct(current[e - 1])) --e;
        if (e > b) words.push_back(current.substr(b, e - b));
        current.clear();
    };
    for (std::size_t i = 0; i < text.size();) {
        std::size_t len = 1;
        const char32_t cp = detail::decode_utf8(text, i, len);
        if (detail::is_unicode_space(cp)) {
            flush();
        } else if (len == 1 && text[i] >= 'A' && text[i] <= 'Z') {
            current.push_back(static_cast<char>(text[i] - 'A' + 'a'));
        } else {
            current.append(text.substr(i, len));
        }
        i += len;
    }
    flush();
    return words;
}

/// Token id in [1, vocab): FNV-1a of the word modulo (vocab - 1), plus one.
inline std::uint32_t token_id(std::string_view word, std::size_t vocab = kDefaultVocab) {
    if (vocab < 2) throw config_error("vocabulary must hold at least 2 ids");
    return static_cast<std::uint32_t>(fnv1a64(word) % (vocab - 1) + 1);
}

/// Pooling token followed by hashed word ids, truncated to `max_len` in total.
inline TokenSequence tokenize(std::string_view text, std::size_t max_len = kDefaultMaxLen,
                              std::size_t vocab = kDefaultVocab) {
    if (max_len < 1) throw config_error("max_len must be at least 1");
    TokenSequence seq;
    seq.original_text = std::string(text);
    seq.tokens.push_back(kPoolingToken);
    for (const auto& w : split_words(text)) {
        if (seq.tokens.size() >= max_len) break;
        seq.tokens.push_back(token_id(w, vocab));
    }
    return seq;
}

}  // namespace covr
