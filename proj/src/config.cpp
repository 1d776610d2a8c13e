#include "v2v3d/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace v2v3d {

const std::vector<std::string>& Config::known_keys() {
    static const std::vector<std::string> keys = {
        // psf synthesis
        "psf.nu", "psf.k", "psf.nz", "psf.z_focal", "psf.ring_radius_tan",
        "psf.shift_scale", "psf.sigma0", "psf.sigma_slope",
        // phantom generation
        "phantom.kind", "phantom.nx", "phantom.ny", "phantom.nz", "phantom.count",
        "phantom.lo", "phantom.hi", "phantom.radius", "phantom.seed",
        // noise injection
        "noise.sigma", "noise.offset", "noise.seed",
        // Richardson-Lucy baseline
        "rld.iterations", "rld.epsilon", "rld.init",
        // view2view training
        "train.steps", "train.lr", "train.seed", "train.alpha", "train.beta",
        "train.fft_mode", "train.encoder_channels", "train.encoder_depth",
        "train.decoder_scales", "train.final_activation", "train.bg_override",
        "train.disable_split", "train.disable_align",
        // evaluation
        "eval.bg",
        // dataset manifests re-parse as configs; these carry the file names
        "paths.volume", "paths.clean_lf", "paths.noisy_lf", "paths.psf",
    };
    return keys;
}

static bool key_known(const std::string& key) {
    const auto& keys = Config::known_keys();
    return std::find(keys.begin(), keys.end(), key) != keys.end();
}

static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected `key = value`, got `" + line + "`");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (value.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty value for key `" + key + "`");
        if (!key_known(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key `" + key + "`");
        if (cfg.kv_.count(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key `" + key + "`");
        cfg.kv_[key] = value;
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!key_known(key)) throw ConfigError("unknown key `" + key + "`");
    kv_[key] = value;
}

std::string Config::get_str(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required key `" + key + "`");
    return it->second;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

std::int64_t Config::get_int(const std::string& key) const {
    const std::string v = get_str(key);
    errno = 0;
    char* end = nullptr;
    const long long r = std::strtoll(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0') {
        throw ConfigError("key `" + key + "`: not an integer: `" + v + "`");
    }
    return r;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string v = get_str(key);
    errno = 0;
    char* end = nullptr;
    const unsigned long long r = std::strtoull(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0' || v.find('-') != std::string::npos) {
        throw ConfigError("key `" + key + "`: not an unsigned integer: `" + v + "`");
    }
    return r;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
}

double Config::get_real(const std::string& key) const {
    const std::string v = get_str(key);
    errno = 0;
    char* end = nullptr;
    const double r = std::strtod(v.c_str(), &end);
    if (errno != 0 || end == v.c_str() || *end != '\0') {
        throw ConfigError("key `" + key + "`: not a number: `" + v + "`");
    }
    return r;
}

double Config::get_real(const std::string& key, double fallback) const {
    return has(key) ? get_real(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key `" + key + "`: not a boolean: `" + v + "`");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::optional<double> Config::get_optional_real(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_real(key);
}

std::string Config::get_enum(const std::string& key, const std::vector<std::string>& allowed,
                             const std::string& fallback) const {
    const std::string v = get_str(key, fallback);
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
        std::string opts;
        for (const auto& a : allowed) opts += (opts.empty() ? "" : "|") + a;
        throw ConfigError("key `" + key + "`: invalid value `" + v + "` (expected " + opts + ")");
    }
    return v;
}

} // namespace v2v3d
