#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace invcorr::cli;

int main(int argc, char** argv) {
    CLI::App app{"Invariance penalties on two-bit environments: tables, sweeps, sampled runs, causal checks"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);

    RunOptions opt;
    std::uint64_t seed = 0;
    std::string grid;
    opt.jobs = std::max(1u, std::thread::hardware_concurrency());

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "Config file (default: the bundled one)");
        sub->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Override the config's seed");
        sub->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    };

    auto* table1 = app.add_subcommand("table1", "Closed-form risks for the clean and noisy case study");
    common(table1);
    auto* appendix = app.add_subcommand("tables-appendix", "Degenerate penalties and shifted eval noise");
    common(appendix);
    auto* sweep = app.add_subcommand("sweep", "Train over a log2 lambda grid and record corner outputs");
    common(sweep);
    sweep->add_option("--penalty", opt.penalties, "Penalty name; repeatable")->delimiter(',');
    sweep->add_option("--grid", grid, "log2 lambda grid, e.g. \"-1, 0..30\"");
    sweep->add_flag("--svg", opt.svg, "Also write an SVG chart per penalty");
    auto* empirical = app.add_subcommand("empirical", "Sampled training over seeds; flipped-correlation accuracy");
    common(empirical);
    auto* verify = app.add_subcommand("verify", "Monte-Carlo checks of the invariance results on SEMs");
    common(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    for (auto* sub : app.get_subcommands())
        if (sub->count("--seed")) opt.seed = seed;
    if (sweep->parsed() && sweep->count("--grid")) opt.grid = grid;

    if (table1->parsed()) return cmd_table1(opt, std::cout, std::cerr);
    if (appendix->parsed()) return cmd_tables_appendix(opt, std::cout, std::cerr);
    if (sweep->parsed()) return cmd_sweep(opt, std::cout, std::cerr);
    if (empirical->parsed()) return cmd_empirical(opt, std::cout, std::cerr);
    return cmd_verify(opt, std::cout, std::cerr);
}
