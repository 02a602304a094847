#include "lemwave/binary_io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>

namespace lemwave::io {

std::uint64_t fnv1a64(std::span<const std::byte> data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : data) {
        h ^= static_cast<std::uint64_t>(b);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
    return fnv1a64(std::as_bytes(std::span(text.data(), text.size())));
}

std::string hex64(std::uint64_t v) { return fmt::format("0x{:016x}", v); }

std::uint64_t parse_hex64(std::string_view s) {
    if (s.starts_with("0x") || s.starts_with("0X")) s.remove_prefix(2);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw CorruptionError(fmt::format("malformed 64-bit checksum '{}'", s));
    return v;
}

void ByteReader::require(std::size_t n) const {
    if (n > remaining())
        throw CorruptionError(fmt::format("{}: truncated data (need {} bytes at offset {}, have {})",
                                          context_, n, pos_, remaining()));
}

void ByteReader::expect_magic(std::string_view magic) {
    const auto got = get_string(magic.size());
    if (got != magic)
        throw CorruptionError(fmt::format("{}: bad magic (expected '{}')", context_, magic));
}

void ByteReader::expect_end() const {
    if (remaining() != 0)
        throw CorruptionError(fmt::format("{}: {} trailing bytes", context_, remaining()));
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<std::byte> data(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size)))
        throw IoError(fmt::format("read failure on '{}'", path.string()));
    return data;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> data) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(fmt::format("cannot open '{}' for writing", tmp.string()));
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) throw IoError(fmt::format("write failure on '{}' (disk full?)", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(fmt::format("cannot move '{}' into place: {}", path.string(), ec.message()));
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

}  // namespace lemwave::io
