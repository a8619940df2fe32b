#pragma once

// Little-endian encode/decode shared by the checkpoint and bag file formats.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "amdmil/error.hpp"

namespace amdmil::detail {

class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    std::vector<unsigned char> take() { return std::move(buf_); }

private:
    std::vector<unsigned char> buf_;
};

class ByteReader {
public:
    ByteReader(const std::vector<unsigned char>& buf, std::string context)
        : buf_(buf), context_(std::move(context)) {}

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == buf_.size(); }

    std::string bytes(std::size_t n) {
        need(n, "bytes");
        std::string s(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    std::uint8_t u8() {
        need(1, "u8");
        return buf_[pos_++];
    }
    std::uint16_t u16() {
        need(2, "u16");
        std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(context_ + ": " + what + " at byte offset " + std::to_string(pos_));
    }

    void need(std::size_t n, const char* what) const {
        if (buf_.size() - pos_ < n) {
            fail(std::string("truncated input reading ") + what + " (need " + std::to_string(n) + " bytes, have " +
                 std::to_string(buf_.size() - pos_) + ")");
        }
    }

private:
    const std::vector<unsigned char>& buf_;
    std::string context_;
    std::size_t pos_ = 0;
};

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string() + " for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace amdmil::detail
