#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lemwave {

/// Flat `key = value` file. '#' starts a comment; blank lines are ignored.
/// Every lookup marks its key as used so `reject_unknown` can name leftovers.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, std::string source = "<config>");
    /// Throws IoError when the file cannot be read.
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    /// Comma-separated list of numbers.
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

    /// ConfigError listing every key never looked up, with its line number.
    void reject_unknown() const;

    const std::string& source() const noexcept { return source_; }
    /// "source:line" of a key, for diagnostics.
    std::string where(const std::string& key) const;

private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };
    const Entry* find(const std::string& key) const;

    std::string source_;
    std::map<std::string, Entry> entries_;
};

}  // namespace lemwave
