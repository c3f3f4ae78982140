#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "invcorr/envs.hpp"
#include "invcorr/sem.hpp"
#include "invcorr/trainer.hpp"

namespace invcorr {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// INI-style file: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Keys may repeat; order is preserved.
class Config {
public:
    struct Entry {
        std::string section;
        std::string key;
        std::string value;
        int line = 0;
    };

    static Config parse(const std::string& text, const std::string& source = "<config>");
    static Config load(const std::string& path);

    const std::string& source() const { return source_; }
    const std::string& text() const { return text_; }
    const std::vector<Entry>& entries() const { return entries_; }

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;
    /// Section names in order of first appearance.
    const std::vector<std::string>& sections() const { return sections_; }

    /// Single value; throws ConfigError when missing or repeated.
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const;
    std::vector<std::string> get_all(const std::string& section, const std::string& key) const;

    double get_double(const std::string& section, const std::string& key, double fallback) const;
    std::size_t get_count(const std::string& section, const std::string& key, std::size_t fallback) const;
    std::uint64_t get_seed(const std::string& section, const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    /// "file:line: message" for the first entry matching section/key.
    std::string where(const std::string& section, const std::string& key) const;

private:
    const Entry* find(const std::string& section, const std::string& key) const;

    std::string source_;
    std::string text_;
    std::vector<Entry> entries_;
    std::vector<std::string> sections_;
};

/// Splits on `sep` outside parentheses and trims each piece.
std::vector<std::string> split_list(std::string_view text, char sep = ',');
std::string trim(std::string_view text);
double parse_real(std::string_view text);

/// none | gaussian(mean, variance) | uniform(mean, half_width) | poisson(mean, rate)
NoiseSpec parse_noise(std::string_view text);
std::string format_noise(const NoiseSpec& noise);
/// "alpha, beta, noise"
EnvironmentSpec parse_env(std::string_view text);
/// Comma list of integers or reals with inclusive integer ranges "a..b".
std::vector<double> parse_log2_grid(std::string_view text);

/// [optim] section; missing keys keep their defaults.
OptimConfig optim_from_config(const Config& cfg);

/// [sem] section. mode = default builds one SEM from gamma, label noise,
/// mixing_seed and `env = beta, eta_inv, eta_s` lines; mode = random draws
/// `count` members of the random family starting at `seed`.
std::vector<SemConfig> sems_from_config(const Config& cfg);

}  // namespace invcorr
