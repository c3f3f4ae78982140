#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "invcorr/config.hpp"

namespace invcorr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kMismatch = 2 };

struct RunOptions {
    std::string config_path;  // empty: the command's default under configs/
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool svg = false;
    std::size_t jobs = 1;
    // sweep only
    std::vector<std::string> penalties;
    std::optional<std::string> grid;
};

/// manifest.json, written after every other output of a run.
class RunManifest {
public:
    RunManifest(std::string command, const Config& cfg);

    void set_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
    /// Records `path` (relative to the out dir) as an output.
    void add_output(const std::string& path) { outputs_.push_back(path); }
    const std::vector<std::string>& outputs() const { return outputs_; }

    std::string to_json(int exit_code) const;
    void write(const std::string& out_dir, int exit_code) const;

private:
    std::string command_;
    std::string config_path_;
    std::string config_text_;
    std::map<std::string, std::uint64_t> seeds_;
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_;
};

std::string default_config_path(const std::string& command);
std::string tool_version();

/// Each returns an ExitCode. Progress and diffs go to `out`, errors to `err`.
int cmd_table1(const RunOptions& opt, std::ostream& out, std::ostream& err);
int cmd_tables_appendix(const RunOptions& opt, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunOptions& opt, std::ostream& out, std::ostream& err);
int cmd_empirical(const RunOptions& opt, std::ostream& out, std::ostream& err);
int cmd_verify(const RunOptions& opt, std::ostream& out, std::ostream& err);

// Exposed for tests.

/// True when `value` agrees with the printed cell `printed` at its decimal
/// precision (|value - printed| <= half a unit in the last printed place),
/// or within `tolerance` when one is given.
bool cell_matches(double value, const std::string& printed, std::optional<double> tolerance);

/// Named groups of environments from the [envs] section, in file order.
std::map<std::string, std::vector<EnvironmentSpec>> env_groups(const Config& cfg);

}  // namespace invcorr::cli
