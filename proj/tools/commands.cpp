#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "invcorr/causal_verify.hpp"
#include "invcorr/csv.hpp"
#include "invcorr/oracle.hpp"
#include "invcorr/parallel.hpp"
#include "invcorr/rng.hpp"
#include "invcorr/trainer.hpp"

#ifndef INVCORR_VERSION
#define INVCORR_VERSION "0.0.0"
#endif
#ifndef INVCORR_CONFIG_DIR
#define INVCORR_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;

namespace invcorr::cli {

std::string tool_version() { return INVCORR_VERSION; }

std::string default_config_path(const std::string& command) {
    static const std::map<std::string, std::string> files{
        {"table1", "table1.ini"},       {"tables-appendix", "tables_appendix.ini"},
        {"sweep", "sweep_noisy.ini"},   {"empirical", "empirical.ini"},
        {"verify", "verify.ini"},
    };
    return (fs::path(INVCORR_CONFIG_DIR) / files.at(command)).string();
}

RunManifest::RunManifest(std::string command, const Config& cfg)
    : command_(std::move(command)),
      config_path_(cfg.source()),
      config_text_(cfg.text()),
      start_(std::chrono::steady_clock::now()) {}

std::string RunManifest::to_json(int exit_code) const {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["version"] = tool_version();
    j["config_path"] = config_path_;
    j["config"] = config_text_;
    j["seeds"] = seeds_;
    j["outputs"] = outputs_;
    j["exit_code"] = exit_code;
    j["duration_seconds"] = secs;
    return j.dump(2) + "\n";
}

void RunManifest::write(const std::string& out_dir, int exit_code) const {
    for (const auto& o : outputs_)
        if (!fs::exists(fs::path(out_dir) / o))
            throw std::logic_error("manifest lists missing output " + o);
    write_file_atomic((fs::path(out_dir) / "manifest.json").string(), to_json(exit_code));
}

namespace {

std::string resolve_config(const RunOptions& opt, const std::string& command) {
    return opt.config_path.empty() ? default_config_path(command) : opt.config_path;
}

std::string out_path(const RunOptions& opt, const std::string& name) {
    return (fs::path(opt.out_dir) / name).string();
}

void prepare_out_dir(const RunOptions& opt) {
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + opt.out_dir + "': " + ec.message());
}

/// Maps exceptions to the exit-code contract.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kUsage;
}

int decimals_of(const std::string& printed) {
    const auto dot = printed.find('.');
    return dot == std::string::npos ? 0 : static_cast<int>(printed.size() - dot - 1);
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

// ---------------------------------------------------------------------------
// Tables

struct TableSpec {
    std::string name;
    std::vector<EnvironmentSpec> train;
    std::vector<EnvironmentSpec> eval;
    std::vector<std::string> methods;
    std::map<std::string, std::vector<std::string>> expect;
    std::map<std::string, double> tolerance;
};

std::pair<std::string, std::string> split_method_entry(const Config& cfg, const std::string& section,
                                                       const std::string& key, const std::string& line) {
    const auto colon = line.find(':');
    if (colon == std::string::npos)
        throw ConfigError(cfg.where(section, key) + ": expected 'method: values'");
    return {trim(line.substr(0, colon)), trim(line.substr(colon + 1))};
}

std::vector<TableSpec> table_specs(const Config& cfg) {
    const auto groups = env_groups(cfg);
    auto group = [&](const std::string& section, const std::string& key) {
        const std::string name = cfg.get(section, key);
        const auto it = groups.find(name);
        if (it == groups.end())
            throw ConfigError(cfg.where(section, key) + ": no [envs] group named '" + name + "'");
        return it->second;
    };
    std::vector<TableSpec> out;
    for (const auto& section : cfg.sections()) {
        if (section.rfind("table ", 0) != 0) continue;
        TableSpec t;
        t.name = trim(section.substr(6));
        t.train = group(section, "train");
        if (!cfg.has(section, "eval") || cfg.get(section, "eval").empty())
            throw ConfigError(cfg.where(section, "eval") + ": eval list is empty");
        t.eval = group(section, "eval");
        t.methods = split_list(cfg.get(section, "methods"));
        if (t.methods.empty()) throw ConfigError(cfg.where(section, "methods") + ": no methods");
        for (const auto& line : cfg.get_all(section, "expect")) {
            auto [method, values] = split_method_entry(cfg, section, "expect", line);
            if (std::find(t.methods.begin(), t.methods.end(), method) == t.methods.end())
                throw ConfigError(cfg.where(section, "expect") + ": '" + method + "' is not in methods");
            auto cells = split_list(values);
            if (cells.size() != t.eval.size())
                throw ConfigError(cfg.where(section, "expect") + ": '" + method + "' has " +
                                  std::to_string(cells.size()) + " values for " +
                                  std::to_string(t.eval.size()) + " eval rows");
            for (const auto& c : cells) parse_real(c);
            t.expect[method] = std::move(cells);
        }
        for (const auto& line : cfg.get_all(section, "tolerance")) {
            auto [method, value] = split_method_entry(cfg, section, "tolerance", line);
            t.tolerance[method] = parse_real(value);
        }
        out.push_back(std::move(t));
    }
    if (out.empty()) throw ConfigError(cfg.source() + ": no [table NAME] sections");
    return out;
}

/// Parses "penalty@log2_lambda" columns; nullopt for closed-form methods.
std::optional<std::pair<PenaltyKind, double>> trained_column(const std::string& method) {
    const auto at = method.find('@');
    if (at == std::string::npos) return std::nullopt;
    return std::make_pair(parse_penalty(trim(method.substr(0, at))), parse_real(method.substr(at + 1)));
}

SummaryOptions fishr_options(const Config& cfg, const RunOptions& opt, bool need_mc) {
    SummaryOptions s;
    s.fishr_mc = need_mc;
    s.fishr_samples = cfg.get_count("fishr", "samples", s.fishr_samples);
    s.seed = opt.seed.value_or(cfg.get_seed("fishr", "seed", s.seed));
    return s;
}

int run_tables(const std::string& command, const RunOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Config cfg = Config::load(resolve_config(opt, command));
        const auto specs = table_specs(cfg);
        const OptimConfig optim = optim_from_config(cfg);
        prepare_out_dir(opt);
        RunManifest manifest(command, cfg);

        bool any_trained = false;
        int mismatches = 0;
        for (const auto& t : specs) {
            bool need_mc = false;
            for (const auto& m : t.methods)
                if (const auto tc = trained_column(m)) {
                    any_trained = true;
                    need_mc |= tc->first == PenaltyKind::fishr;
                }
            const SummaryOptions sopt = fishr_options(cfg, opt, need_mc);
            std::vector<EnvSummary> summaries;
            std::vector<LabeledPredictor> predictors;
            for (const auto& m : t.methods) {
                if (const auto tc = trained_column(m)) {
                    if (summaries.empty()) summaries = summarize_all(t.train, sopt);
                    const Objective obj{tc->first, lambda_from_log2(tc->second)};
                    const TrainResult r = train_population(summaries, obj, optim);
                    if (!r.converged)
                        out << t.name << ": " << m << " did not converge (|grad| " << format_real(r.grad_norm)
                            << ")\n";
                    predictors.push_back({m, r.w});
                } else {
                    predictors.push_back({m, method_solution(parse_table_method(m), t.train)});
                }
            }
            const RiskTable table = evaluate_predictors(predictors, t.eval);
            const std::string file = t.name + ".csv";
            table.to_csv().write_atomic(out_path(opt, file));
            manifest.add_output(file);

            out << "== " << t.name << "\n";
            out << std::left << std::setw(14) << "method";
            for (const auto& e : t.eval) out << std::setw(10) << ("b=" + format_real(e.beta));
            out << "\n";
            for (const auto& p : predictors) {
                out << std::setw(14) << p.label;
                for (double v : table.column(p.label)) out << std::setw(10) << fixed(v, 4);
                out << "\n";
            }
            out << std::right;
            int checked = 0, bad = 0;
            for (const auto& [method, cells] : t.expect) {
                const auto col = table.column(method);
                const auto tol_it = t.tolerance.find(method);
                const std::optional<double> tol =
                    tol_it == t.tolerance.end() ? std::nullopt : std::optional<double>(tol_it->second);
                for (std::size_t i = 0; i < cells.size(); ++i) {
                    ++checked;
                    if (cell_matches(col[i], cells[i], tol)) continue;
                    ++bad;
                    out << "  MISMATCH " << method << " row " << i + 1 << " (" << describe(t.eval[i])
                        << "): got " << fixed(col[i], std::max(4, decimals_of(cells[i]) + 2)) << ", expected "
                        << cells[i];
                    if (tol) out << " +- " << format_real(*tol);
                    out << "\n";
                }
            }
            out << t.name << ": " << checked - bad << "/" << checked << " expected cells match\n";
            mismatches += bad;
        }
        if (any_trained) manifest.set_seed("fishr", fishr_options(cfg, opt, true).seed);
        const int code = mismatches == 0 ? kOk : kMismatch;
        manifest.write(opt.out_dir, code);
        return code;
    });
}

// ---------------------------------------------------------------------------
// Empirical

struct EmpiricalPlan {
    std::vector<EnvironmentSpec> train, test;
    EmpiricalConfig base;
    std::vector<std::string> methods;
    double log2_lambda = 0.0;
    std::size_t n_train = 0, n_test = 0, seeds = 0;
    std::uint64_t seed = 1;
    double margin = 0.05;
    bool check = true;
};

EmpiricalPlan empirical_plan(const Config& cfg, const RunOptions& opt) {
    const std::string s = "empirical";
    const auto groups = env_groups(cfg);
    EmpiricalPlan p;
    for (auto [name, dst] : {std::pair{"train", &p.train}, std::pair{"test", &p.test}}) {
        const auto it = groups.find(name);
        if (it == groups.end() || it->second.empty())
            throw ConfigError(cfg.source() + ": [envs] needs at least one '" + std::string(name) + "' line");
        *dst = it->second;
    }
    for (const char* key : {"n_train", "n_test"})
        if (!cfg.has(s, key)) throw ConfigError(cfg.source() + ": missing [empirical] " + key);
    p.n_train = cfg.get_count(s, "n_train", 0);
    p.n_test = cfg.get_count(s, "n_test", 0);
    if (p.n_train == 0 || p.n_test == 0) throw ConfigError(cfg.source() + ": dataset sizes must be >= 1");
    p.seeds = cfg.get_count(s, "seeds", 20);
    if (p.seeds == 0) throw ConfigError(cfg.where(s, "seeds") + ": must be >= 1");
    p.seed = opt.seed.value_or(cfg.get_seed(s, "seed", 1));
    p.methods = split_list(cfg.get_or(s, "methods", "icorr, irmv1, vrex"));
    for (const auto& m : p.methods)
        if (m != "erm") parse_penalty(m);
    p.log2_lambda = cfg.get_double(s, "log2_lambda", 12.0);
    p.margin = cfg.get_double(s, "margin", 0.05);
    p.check = cfg.get_bool(s, "check", true);

    const std::string model = cfg.get_or(s, "model", "mlp");
    if (model == "mlp") {
        p.base.model = ModelKind::mlp;
        if (cfg.has(s, "widths")) {
            p.base.mlp.widths.clear();
            for (const auto& w : split_list(cfg.get(s, "widths"))) p.base.mlp.widths.push_back(std::stoi(w));
        }
    } else if (model == "linear") {
        p.base.model = ModelKind::linear;
    } else {
        throw ConfigError(cfg.where(s, "model") + ": expected mlp or linear");
    }
    p.base.epochs = cfg.get_count(s, "epochs", p.base.epochs);
    p.base.batch_size = cfg.get_count(s, "batch_size", p.base.batch_size);
    p.base.learning_rate = cfg.get_double(s, "learning_rate", p.base.learning_rate);
    p.base.penalty_anneal_steps = cfg.get_count(s, "anneal_steps", 0);
    return p;
}

struct EmpiricalRun {
    std::string method;
    std::size_t replicate = 0;
    std::vector<Evaluation> test;  // one per test env
    std::string error;
};

double mean(const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Verify

std::vector<CheckReport> verify_all(const SemConfig& sem, std::size_t n, std::size_t reps, std::uint64_t seed) {
    std::vector<CheckReport> out;
    std::uint64_t stream = 0;
    auto next = [&] { return derive_seed(seed, stream++); };
    out.push_back(check_invariant_correlation(sem, n, reps, next()));
    for (std::size_t e = 0; e < sem.envs.size(); ++e) out.push_back(check_corollary_gradient(sem, e, n, next()));
    for (std::size_t e1 = 0; e1 < sem.envs.size(); ++e1)
        for (std::size_t e2 = e1 + 1; e2 < sem.envs.size(); ++e2) {
            out.push_back(check_corollary_risk_variance(sem, e1, e2, n, next()));
            for (PenaltyKind k : {PenaltyKind::iga, PenaltyKind::fishr, PenaltyKind::ib_erm})
                out.push_back(check_degenerate_penalty(k, sem, e1, e2, n, next()));
        }
    return out;
}

}  // namespace

bool cell_matches(double value, const std::string& printed, std::optional<double> tolerance) {
    const double target = parse_real(printed);
    if (!std::isfinite(value)) return false;
    const double allowed = tolerance ? *tolerance : 0.5 * std::pow(10.0, -decimals_of(printed));
    return std::abs(value - target) <= allowed * (1.0 + 1e-9);
}

std::map<std::string, std::vector<EnvironmentSpec>> env_groups(const Config& cfg) {
    std::map<std::string, std::vector<EnvironmentSpec>> out;
    for (const auto& e : cfg.entries()) {
        if (e.section != "envs") continue;
        try {
            out[e.key].push_back(parse_env(e.value));
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(cfg.source() + ":" + std::to_string(e.line) + ": [envs] " + e.key + ": " + ex.what());
        }
    }
    return out;
}

int cmd_table1(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    return run_tables("table1", opt, out, err);
}

int cmd_tables_appendix(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    return run_tables("tables-appendix", opt, out, err);
}

int cmd_sweep(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    // Penalty names are checked before the config so a typo reports the valid set.
    std::vector<PenaltyKind> kinds;
    for (const auto& name : opt.penalties) {
        try {
            kinds.push_back(parse_penalty(name));
        } catch (const std::invalid_argument&) {
            err << "unknown penalty '" << name << "'; valid names: " << penalty_names() << "\n";
            return kUsage;
        }
    }
    return guarded(err, [&] {
        const Config cfg = Config::load(resolve_config(opt, "sweep"));
        if (kinds.empty()) {
            if (!cfg.has("sweep", "penalty"))
                throw ConfigError(cfg.source() + ": no penalty given (--penalty or [sweep] penalty)");
            for (const auto& name : split_list(cfg.get("sweep", "penalty"))) {
                try {
                    kinds.push_back(parse_penalty(name));
                } catch (const std::invalid_argument&) {
                    throw ConfigError(cfg.where("sweep", "penalty") + ": unknown penalty '" + name +
                                      "'; valid names: " + penalty_names());
                }
            }
        }
        const auto groups = env_groups(cfg);
        const auto train_it = groups.find("train");
        if (train_it == groups.end() || train_it->second.size() < 2)
            throw ConfigError(cfg.source() + ": [envs] needs at least two 'train' lines");
        std::vector<double> grid = default_log2_grid();
        if (opt.grid)
            grid = parse_log2_grid(*opt.grid);
        else if (cfg.has("sweep", "grid"))
            grid = parse_log2_grid(cfg.get("sweep", "grid"));
        validate_log2_grid(grid);
        const OptimConfig optim = optim_from_config(cfg);
        prepare_out_dir(opt);
        RunManifest manifest("sweep", cfg);

        const bool need_mc = std::find(kinds.begin(), kinds.end(), PenaltyKind::fishr) != kinds.end();
        const SummaryOptions sopt = fishr_options(cfg, opt, need_mc);
        if (need_mc) manifest.set_seed("fishr", sopt.seed);
        const auto summaries = summarize_all(train_it->second, sopt);

        for (PenaltyKind kind : kinds) {
            const auto records = lambda_sweep(summaries, kind, grid, optim, opt.jobs);
            const std::string name(to_string(kind));
            const std::string csv = "sweep_" + name + ".csv";
            sweep_to_csv(records).write_atomic(out_path(opt, csv));
            manifest.add_output(csv);
            if (opt.svg) {
                const std::string svg = "sweep_" + name + ".svg";
                write_file_atomic(out_path(opt, svg), sweep_to_svg(records, name + " corner outputs"));
                manifest.add_output(svg);
            }
            std::size_t failed = 0;
            for (const auto& r : records) failed += r.converged ? 0 : 1;
            const auto& last = records.back();
            out << name << ": " << records.size() << " points, terminal w = (" << format_real(last.w.w1) << ", "
                << format_real(last.w.w2) << ") at log2 lambda " << format_real(last.log2_lambda);
            if (failed) out << ", " << failed << " not converged";
            out << "\n";
        }
        manifest.write(opt.out_dir, kOk);
        return int(kOk);
    });
}

int cmd_empirical(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Config cfg = Config::load(resolve_config(opt, "empirical"));
        const EmpiricalPlan plan = empirical_plan(cfg, opt);
        plan.base.validate();
        prepare_out_dir(opt);
        RunManifest manifest("empirical", cfg);
        manifest.set_seed("base", plan.seed);

        // Every method sees the same data and initial weights within a replicate.
        const std::size_t n_methods = plan.methods.size();
        std::vector<EmpiricalRun> runs(plan.seeds * n_methods);
        parallel_for(runs.size(), opt.jobs, [&](std::size_t i) {
            const std::size_t r = i / n_methods;
            EmpiricalRun& run = runs[i];
            run.method = plan.methods[i % n_methods];
            run.replicate = r;
            const std::uint64_t block = static_cast<std::uint64_t>(r) * 64;
            std::vector<Dataset> train;
            for (std::size_t e = 0; e < plan.train.size(); ++e)
                train.push_back(sample_two_bit(plan.train[e], plan.n_train, derive_seed(plan.seed, block + e)));
            EmpiricalConfig ec = plan.base;
            ec.mlp.seed = derive_seed(plan.seed, block + 63);
            ec.seed = derive_seed(plan.seed, block + 62);
            ec.objective = run.method == "erm" ? Objective{PenaltyKind::icorr, 0.0}
                                               : Objective{parse_penalty(run.method), lambda_from_log2(plan.log2_lambda)};
            try {
                const EmpiricalResult res = train_empirical(train, ec);
                for (std::size_t t = 0; t < plan.test.size(); ++t) {
                    const Dataset test =
                        sample_two_bit(plan.test[t], plan.n_test, derive_seed(plan.seed, block + 32 + t));
                    run.test.push_back(evaluate(res.model, test));
                }
            } catch (const std::runtime_error& e) {
                run.error = e.what();
            }
        });

        CsvTable runs_csv({"method", "replicate", "test_env", "risk", "accuracy", "error"});
        for (const auto& run : runs) {
            if (!run.error.empty()) {
                runs_csv.add_row({run.method, std::to_string(run.replicate), "", "nan", "nan", run.error});
                continue;
            }
            for (std::size_t t = 0; t < run.test.size(); ++t)
                runs_csv.add_row({run.method, std::to_string(run.replicate), describe(plan.test[t]),
                                  format_real(run.test[t].risk), format_real(run.test[t].accuracy), ""});
        }
        runs_csv.write_atomic(out_path(opt, "empirical_runs.csv"));
        manifest.add_output("empirical_runs.csv");

        // means[method][test env]
        std::map<std::string, std::vector<double>> means;
        CsvTable summary({"method", "test_env", "runs", "failed", "best", "worst", "mean"});
        out << std::left << std::setw(10) << "method" << std::setw(8) << "runs" << std::setw(10) << "best"
            << std::setw(10) << "worst" << "mean   (test env)\n";
        for (const auto& m : plan.methods) {
            for (std::size_t t = 0; t < plan.test.size(); ++t) {
                std::vector<double> acc;
                std::size_t failed = 0;
                for (const auto& run : runs) {
                    if (run.method != m) continue;
                    if (run.error.empty())
                        acc.push_back(run.test[t].accuracy);
                    else
                        ++failed;
                }
                const double best = acc.empty() ? NAN : *std::max_element(acc.begin(), acc.end());
                const double worst = acc.empty() ? NAN : *std::min_element(acc.begin(), acc.end());
                const double mu = mean(acc);
                means[m].push_back(mu);
                summary.add_row({m, describe(plan.test[t]), std::to_string(acc.size()), std::to_string(failed),
                                 format_real(best), format_real(worst), format_real(mu)});
                out << std::setw(10) << m << std::setw(8) << acc.size() << std::setw(10) << fixed(best, 4)
                    << std::setw(10) << fixed(worst, 4) << fixed(mu, 4) << "  (" << describe(plan.test[t]) << ")\n";
            }
        }
        out << std::right;
        summary.write_atomic(out_path(opt, "empirical_summary.csv"));
        manifest.add_output("empirical_summary.csv");

        int code = kOk;
        const bool has_icorr = means.count("icorr") > 0;
        if (plan.check && has_icorr && plan.methods.size() > 1) {
            for (std::size_t t = 0; t < plan.test.size(); ++t)
                for (const auto& m : plan.methods) {
                    if (m == "icorr") continue;
                    const double gap = means["icorr"][t] - means[m][t];
                    const bool ok = std::isfinite(gap) && gap >= plan.margin;
                    out << "check icorr - " << m << " = " << fixed(gap, 4) << " (need >= " << format_real(plan.margin)
                        << "): " << (ok ? "ok" : "FAILED") << "\n";
                    if (!ok) code = kMismatch;
                }
        }
        manifest.write(opt.out_dir, code);
        return code;
    });
}

int cmd_verify(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Config cfg = Config::load(resolve_config(opt, "verify"));
        const auto sems = sems_from_config(cfg);
        const std::size_t n = cfg.get_count("verify", "n", 1'000'000);
        const std::size_t reps = cfg.get_count("verify", "reps", 1);
        const std::uint64_t seed = opt.seed.value_or(cfg.get_seed("verify", "seed", 1));
        if (n < 2) throw ConfigError(cfg.where("verify", "n") + ": must be >= 2");
        prepare_out_dir(opt);
        RunManifest manifest("verify", cfg);
        manifest.set_seed("verify", seed);

        std::vector<std::vector<CheckReport>> per_sem(sems.size());
        parallel_for(sems.size(), opt.jobs, [&](std::size_t i) {
            per_sem[i] = verify_all(sems[i], n, reps, derive_seed(seed, i));
        });
        std::vector<CheckReport> reports;
        for (std::size_t i = 0; i < sems.size(); ++i)
            for (auto& r : per_sem[i]) {
                if (sems.size() > 1) r.check = "sem" + std::to_string(i) + "/" + r.check;
                reports.push_back(std::move(r));
            }

        reports_to_csv(reports).write_atomic(out_path(opt, "verify.csv"));
        manifest.add_output("verify.csv");
        const std::string text = reports_summary(reports);
        write_file_atomic(out_path(opt, "verify_summary.txt"), text);
        manifest.add_output("verify_summary.txt");

        std::size_t confirmed = 0, violated = 0, inconclusive = 0;
        for (const auto& r : reports) {
            switch (r.verdict) {
                case Verdict::confirmed: ++confirmed; break;
                case Verdict::violated:
                    ++violated;
                    out << "VIOLATED " << r.check << ": " << r.message << "\n";
                    break;
                case Verdict::inconclusive:
                    ++inconclusive;
                    out << "notice: " << r.check << " inconclusive: " << r.message << "\n";
                    break;
            }
        }
        out << reports.size() << " checks: " << confirmed << " confirmed, " << violated << " violated, "
            << inconclusive << " inconclusive\n";
        const int code = violated == 0 ? kOk : kMismatch;
        manifest.write(opt.out_dir, code);
        return code;
    });
}

}  // namespace invcorr::cli
