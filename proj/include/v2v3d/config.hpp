#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "v2v3d/errors.hpp"

namespace v2v3d {

// Flat-text configuration: one `key = value` per line, `#` starts a comment,
// sections are expressed with dotted keys (psf.nu, noise.sigma, ...).
// Parsing is total: it either throws ConfigError or yields the full map.
// Keys outside the documented registry and duplicate keys are rejected.
class Config {
public:
    Config() = default;

    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    // Registry of every accepted key. Unknown keys fail the parse.
    static const std::vector<std::string>& known_keys();

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    // CLI overrides; the key must be in the registry.
    void set(const std::string& key, const std::string& value);

    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_real(const std::string& key) const;
    double get_real(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::optional<double> get_optional_real(const std::string& key) const;

    // Enum-style getter: value must be one of `allowed`.
    std::string get_enum(const std::string& key, const std::vector<std::string>& allowed,
                         const std::string& fallback) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

} // namespace v2v3d
