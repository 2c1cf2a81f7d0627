// Experiment runner: solve nonlocal Dirichlet instances, verify the
// structural estimates on them, and sweep parameters, emitting CSV/JSON
// artifacts for offline plotting.
//
//   hfrac solve  <config> [--out DIR] [--threads N] [--seed S]
//   hfrac verify <config> [--out DIR] [--threads N] [--seed S]
//   hfrac sweep  <config> --axis NAME --values v1,v2,... [--out DIR] ...
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include "CLI11.hpp"

#include "hfrac/runner.hpp"

#include <iostream>

namespace {

std::vector<std::string> split_csv_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream in(csv);
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nonlocal Dirichlet laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", axis, values_csv;
    int threads = 0;
    long long seed = -1;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "experiment config file")->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--threads", threads, "worker cap (0 = hardware)");
        cmd->add_option("--seed", seed, "override the config seed");
    };

    CLI::App* solve = app.add_subcommand("solve", "solve one instance");
    add_common(solve);
    CLI::App* verify = app.add_subcommand("verify", "run the configured checks");
    add_common(verify);
    CLI::App* sweep = app.add_subcommand("sweep", "rerun the pipeline along one axis");
    add_common(sweep);
    sweep->add_option("--axis", axis, "s | p | resolution | delta | sigma | d")->required();
    sweep->add_option("--values", values_csv, "comma-separated values")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        hfrac::ExperimentConfig cfg = hfrac::ExperimentConfig::from_file(config_path);
        if (seed >= 0) cfg.set("seed", std::to_string(seed));
        const int cap = threads > 0 ? threads : static_cast<int>(cfg.get_int("threads", 0));
        if (cap > 0) hfrac::ThreadPool::set_max_threads(cap);
        if (cfg.has("output.dir") && out_dir == "out") out_dir = cfg.get_string("output.dir");

        if (solve->parsed()) return hfrac::cmd_solve(cfg, out_dir);
        if (verify->parsed()) return hfrac::cmd_verify(cfg, out_dir);
        return hfrac::cmd_sweep(cfg, axis, split_csv_list(values_csv), out_dir);
    } catch (const hfrac::ExperimentConfig::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return hfrac::exit_code::input_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return hfrac::exit_code::input_error;
    } catch (const hfrac::resource_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return hfrac::exit_code::input_error;
    } catch (const hfrac::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return hfrac::exit_code::numerical_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hfrac::exit_code::numerical_failure;
    }
}
