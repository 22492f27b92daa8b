#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "covr/error.hpp"

namespace covr::binary {

// Little-endian encoders shared by the CVRE and CVRP containers.

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

/// Bounds-checked cursor over an in-memory buffer. Every failure reports the
/// offset at which the read was attempted.
class Reader {
   public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint64_t offset() const noexcept { return pos_; }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }
    std::uint64_t remaining() const noexcept { return bytes_.size() - pos_; }

    std::string_view take(std::size_t n, const char* what) {
        if (n > remaining()) {
            throw FormatError(std::string("truncated ") + what + " (need " + std::to_string(n) + " bytes, " +
                                  std::to_string(remaining()) + " left)",
                              pos_);
        }
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::uint32_t u32(const char* what) {
        auto s = take(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
        return v;
    }

    std::uint64_t u64(const char* what) {
        auto s = take(8, what);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
        return v;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

   private:
    std::string_view bytes_;
    std::uint64_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("write failed for " + path);
}

}  // namespace covr::binary
