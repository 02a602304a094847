#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "lemwave/errors.hpp"

namespace lemwave::io {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written with a little-endian host layout");

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::span<const std::byte> data) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Hex rendering used in manifests ("0x" + 16 digits).
std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(std::string_view s);

/// Append-only little-endian byte sink.
class ByteWriter {
public:
    template <class T>
        requires std::is_arithmetic_v<T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::byte*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    template <class T>
        requires std::is_arithmetic_v<T>
    void put_all(std::span<const T> values) {
        const auto* p = reinterpret_cast<const std::byte*>(values.data());
        buf_.insert(buf_.end(), p, p + values.size_bytes());
    }

    void put_bytes(std::string_view s) {
        const auto* p = reinterpret_cast<const std::byte*>(s.data());
        buf_.insert(buf_.end(), p, p + s.size());
    }

    const std::vector<std::byte>& bytes() const noexcept { return buf_; }
    std::vector<std::byte> take() && { return std::move(buf_); }

private:
    std::vector<std::byte> buf_;
};

/// Bounds-checked little-endian reader. Every overrun throws CorruptionError
/// tagged with the context string given at construction.
class ByteReader {
public:
    ByteReader(std::span<const std::byte> data, std::string context)
        : data_(data), context_(std::move(context)) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get() {
        require(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    template <class T>
        requires std::is_arithmetic_v<T>
    void get_all(std::span<T> out) {
        require(out.size_bytes());
        std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
    }

    std::string get_string(std::size_t n) {
        require(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void expect_magic(std::string_view magic);

    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    void expect_end() const;

private:
    void require(std::size_t n) const;

    std::span<const std::byte> data_;
    std::size_t pos_ = 0;
    std::string context_;
};

std::vector<std::byte> read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never observe
/// a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> data);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace lemwave::io
