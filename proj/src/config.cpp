#include "invcorr/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "invcorr/csv.hpp"

namespace invcorr {

std::string trim(std::string_view text) {
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

Config Config::parse(const std::string& text, const std::string& source) {
    Config cfg;
    cfg.source_ = source;
    cfg.text_ = text;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(source + ":" + std::to_string(lineno) + ": unterminated section header");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError(source + ":" + std::to_string(lineno) + ": empty section name");
            if (std::find(cfg.sections_.begin(), cfg.sections_.end(), section) == cfg.sections_.end())
                cfg.sections_.push_back(section);
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw ConfigError(source + ":" + std::to_string(lineno) + ": key outside any section");
        std::string value = trim(std::string_view(t).substr(eq + 1));
        // Trailing comments need a space before the marker.
        for (const char* marker : {" #", " ;"})
            if (const auto c = value.find(marker); c != std::string::npos) value = trim(value.substr(0, c));
        Entry e{section, trim(std::string_view(t).substr(0, eq)), value, lineno};
        if (e.key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        cfg.entries_.push_back(std::move(e));
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

bool Config::has_section(const std::string& section) const {
    return std::find(sections_.begin(), sections_.end(), section) != sections_.end();
}

bool Config::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
    for (const auto& e : entries_)
        if (e.section == section && e.key == key) return &e;
    return nullptr;
}

std::string Config::where(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    return source_ + (e ? ":" + std::to_string(e->line) : "") + ": [" + section + "] " + key;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    const auto all = get_all(section, key);
    if (all.empty()) throw ConfigError(source_ + ": missing [" + section + "] " + key);
    if (all.size() > 1) throw ConfigError(where(section, key) + " is given more than once");
    return all.front();
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

std::vector<std::string> Config::get_all(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
        if (e.section == section && e.key == key) out.push_back(e.value);
    return out;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return parse_real(get(section, key));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where(section, key) + ": " + e.what());
    }
}

std::size_t Config::get_count(const std::string& section, const std::string& key, std::size_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec == std::errc() && p == v.data() + v.size()) return out;
    // Allow 1e6-style counts.
    double d = 0.0;
    try {
        d = parse_real(v);
    } catch (const std::invalid_argument&) {
        d = -1.0;
    }
    if (d >= 0.0 && d == std::floor(d) && d < 1e15) return static_cast<std::size_t>(d);
    throw ConfigError(where(section, key) + ": expected a non-negative integer, got '" + v + "'");
}

std::uint64_t Config::get_seed(const std::string& section, const std::string& key, std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(where(section, key) + ": expected an unsigned integer seed, got '" + v + "'");
    return out;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError(where(section, key) + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(std::string_view text, char sep) {
    std::vector<std::string> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(') ++depth;
        if (text[i] == ')') --depth;
        if (depth < 0) throw std::invalid_argument("unbalanced ')' in '" + std::string(text) + "'");
        if (text[i] == sep && depth == 0) {
            out.push_back(trim(text.substr(start, i - start)));
            start = i + 1;
        }
    }
    if (depth != 0) throw std::invalid_argument("unbalanced '(' in '" + std::string(text) + "'");
    const std::string last = trim(text.substr(start));
    if (!last.empty() || !out.empty()) out.push_back(last);
    return out;
}

double parse_real(std::string_view text) {
    const std::string t = trim(text);
    double v = 0.0;
    const char* begin = t.data();
    if (!t.empty() && t[0] == '+') ++begin;
    const auto [p, ec] = std::from_chars(begin, t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v))
        throw std::invalid_argument("expected a finite number, got '" + t + "'");
    return v;
}

NoiseSpec parse_noise(std::string_view text) {
    const std::string t = trim(text);
    const auto open = t.find('(');
    const std::string name = trim(std::string_view(t).substr(0, open));
    if (open == std::string::npos) {
        if (name == "none" || name == "0") return NoiseSpec::none();
        throw std::invalid_argument("unknown noise '" + t + "'; expected none, gaussian(m, v), uniform(m, h) or poisson(m, r)");
    }
    if (t.back() != ')') throw std::invalid_argument("noise '" + t + "' is missing ')'");
    const auto args = split_list(std::string_view(t).substr(open + 1, t.size() - open - 2));
    if (args.size() != 2) throw std::invalid_argument("noise '" + t + "' needs two arguments");
    const double p = parse_real(args[0]), q = parse_real(args[1]);
    if (name == "gaussian" && q < 0.0) throw std::invalid_argument("gaussian variance must be >= 0");
    NoiseSpec out;
    if (name == "gaussian")
        out = q == 0.0 && p == 0.0 ? NoiseSpec::none() : NoiseSpec::gaussian_var(p, q);
    else if (name == "uniform")
        out = NoiseSpec::uniform(p, q);
    else if (name == "poisson")
        out = NoiseSpec::poisson_centered(p, q);
    else
        throw std::invalid_argument("unknown noise family '" + name + "'");
    out.validate();
    return out;
}

std::string format_noise(const NoiseSpec& noise) {
    switch (noise.kind) {
        case NoiseKind::none: return "none";
        case NoiseKind::gaussian:
            return "gaussian(" + format_real(noise.mean) + ", " + format_real(noise.variance()) + ")";
        case NoiseKind::uniform:
            return "uniform(" + format_real(noise.mean) + ", " + format_real(noise.scale) + ")";
        case NoiseKind::poisson_centered:
            return "poisson(" + format_real(noise.mean) + ", " + format_real(noise.scale) + ")";
    }
    return "?";
}

EnvironmentSpec parse_env(std::string_view text) {
    const auto parts = split_list(text);
    if (parts.size() != 3)
        throw std::invalid_argument("environment '" + std::string(text) + "' must be 'alpha, beta, noise'");
    EnvironmentSpec env{parse_real(parts[0]), parse_real(parts[1]), parse_noise(parts[2])};
    env.validate();
    return env;
}

std::vector<double> parse_log2_grid(std::string_view text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        if (item.empty()) throw std::invalid_argument("empty entry in lambda grid");
        if (const auto dots = item.find(".."); dots != std::string::npos) {
            const double lo = parse_real(item.substr(0, dots)), hi = parse_real(item.substr(dots + 2));
            if (lo != std::floor(lo) || hi != std::floor(hi) || hi < lo)
                throw std::invalid_argument("range '" + item + "' must be ascending integers");
            for (double k = lo; k <= hi; ++k) out.push_back(k);
        } else {
            out.push_back(parse_real(item));
        }
    }
    validate_log2_grid(out);
    return out;
}

namespace {

template <class F>
auto wrap(const Config& cfg, const std::string& section, const std::string& key, F&& f) {
    try {
        return f(cfg.get(section, key));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(cfg.where(section, key) + ": " + e.what());
    }
}

}  // namespace

OptimConfig optim_from_config(const Config& cfg) {
    OptimConfig o;
    const std::string s = "optim";
    if (cfg.has(s, "method"))
        o.method = wrap(cfg, s, "method", [](const std::string& v) { return parse_optim_method(v); });
    o.learning_rate = cfg.get_double(s, "learning_rate", o.learning_rate);
    o.max_steps = cfg.get_count(s, "max_steps", o.max_steps);
    o.grad_tol = cfg.get_double(s, "grad_tol", o.grad_tol);
    o.switch_tol = cfg.get_double(s, "switch_tol", o.switch_tol);
    o.warm_start = cfg.get_bool(s, "warm_start", cfg.get_bool("sweep", "warm_start", o.warm_start));
    if (cfg.has(s, "init"))
        o.init = wrap(cfg, s, "init", [](const std::string& v) {
            const auto p = split_list(v);
            if (p.size() != 2) throw std::invalid_argument("init needs two numbers");
            return LinearParams{parse_real(p[0]), parse_real(p[1])};
        });
    try {
        o.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(cfg.source() + ": [optim] " + e.what());
    }
    return o;
}

std::vector<SemConfig> sems_from_config(const Config& cfg) {
    const std::string s = "sem";
    const std::string mode = cfg.get_or(s, "mode", "default");
    std::vector<SemConfig> out;
    try {
        if (mode == "random") {
            const std::size_t count = cfg.get_count(s, "count", 10);
            const std::uint64_t seed = cfg.get_seed(s, "seed", 1);
            const std::size_t envs = cfg.get_count(s, "envs", 2);
            if (count == 0) throw ConfigError(cfg.where(s, "count") + ": must be >= 1");
            for (std::size_t i = 0; i < count; ++i) out.push_back(random_sem(seed + i, envs));
            return out;
        }
        if (mode != "default") throw ConfigError(cfg.where(s, "mode") + ": expected default or random");
        SemConfig sem = default_sem(cfg.get_seed(s, "mixing_seed", 7));
        if (cfg.has(s, "gamma")) {
            const auto g = wrap(cfg, s, "gamma", [](const std::string& v) {
                std::vector<double> out;
                for (const auto& p : split_list(v)) out.push_back(parse_real(p));
                return out;
            });
            sem.gamma = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
            sem.d_inv = static_cast<int>(g.size());
        }
        sem.d_s = static_cast<int>(cfg.get_count(s, "d_s", static_cast<std::size_t>(sem.d_s)));
        if (sem.dim() != sem.mixing.rows()) sem.mixing = random_mixing(sem.dim(), cfg.get_seed(s, "mixing_seed", 7));
        sem.label_noise_var = cfg.get_double(s, "label_noise_var", sem.label_noise_var);
        if (cfg.has(s, "inv_law"))
            sem.inv_law = wrap(cfg, s, "inv_law", [](const std::string& v) { return parse_invariant_law(v); });
        const auto env_lines = cfg.get_all(s, "env");
        if (!env_lines.empty()) {
            sem.envs.clear();
            for (const auto& line : env_lines) {
                const auto p = split_list(line);
                if (p.size() != 3)
                    throw ConfigError(cfg.where(s, "env") + ": expected 'beta, eta_inv, eta_s'");
                sem.envs.push_back({parse_real(p[0]), parse_noise(p[1]), parse_noise(p[2])});
            }
        }
        sem.validate();
        out.push_back(std::move(sem));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(cfg.source() + ": [sem] " + e.what());
    }
    return out;
}

}  // namespace invcorr
