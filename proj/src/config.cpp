#include "lemwave/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>

#include "lemwave/binary_io.hpp"
#include "lemwave/errors.hpp"

namespace lemwave {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    while (true) {
        const auto comma = s.find(',');
        const auto item = trim(s.substr(0, comma));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string source) {
    KeyValueConfig cfg;
    cfg.source_ = std::move(source);
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(fmt::format("{}:{}: expected 'key = value', got '{}'", cfg.source_, line_no, line));
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty() || value.empty())
            throw ConfigError(fmt::format("{}:{}: empty key or value", cfg.source_, line_no));
        if (const auto* prev = cfg.find(key))
            throw ConfigError(
                fmt::format("{}:{}: duplicate key '{}' (first set on line {})", cfg.source_, line_no, key, prev->line));
        cfg.entries_[key] = Entry{value, line_no};
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path.string());
}

const KeyValueConfig::Entry* KeyValueConfig::find(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
}

std::string KeyValueConfig::where(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? source_ : fmt::format("{}:{}", source_, it->second.line);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
    if (ec != std::errc{} || ptr != e->value.data() + e->value.size() || !std::isfinite(v))
        throw ConfigError(fmt::format("{}: '{}' is not a number: '{}'", where(key), key, e->value));
    return v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    std::uint64_t v = 0;
    std::string_view s = e->value;
    int base = 10;
    if (s.starts_with("0x") || s.starts_with("0X")) {
        s.remove_prefix(2);
        base = 16;
    }
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer: '{}'", where(key), key, e->value));
    return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean: '{}'", where(key), key, e->value));
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    const Entry* e = find(key);
    return e ? e->value : fallback;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(e->value)) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || ptr != item.data() + item.size())
            throw ConfigError(fmt::format("{}: '{}' has a non-numeric item '{}'", where(key), key, item));
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
    const Entry* e = find(key);
    return e ? split_list(e->value) : fallback;
}

void KeyValueConfig::reject_unknown() const {
    std::string unknown;
    for (const auto& [key, e] : entries_) {
        if (e.used) continue;
        unknown += fmt::format("\n  {}:{}: unknown key '{}'", source_, e.line, key);
    }
    if (!unknown.empty()) throw ConfigError("unrecognized configuration keys:" + unknown);
}

}  // namespace lemwave
