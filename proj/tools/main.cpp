#include "jumpcap/cli.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> scale;
    std::optional<std::string> out_dir;
    std::optional<std::string> scheme;
    std::optional<int> threads;
    std::optional<double> threshold;
    std::optional<std::uint64_t> mc_paths;
    std::optional<int> sim_paths;
    std::optional<int> points;
    std::optional<std::string> policy;
    bool oracle_mode = false;
};

void add_common(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--config", ov.config_path, "Config file (key-value or JSON)");
    cmd->add_option("--seed", ov.seed, "Master seed");
    cmd->add_option("--scale", ov.scale, "Desk-scale factor in (0,1] for epoch counts");
    cmd->add_option("--out", ov.out_dir, "Output directory for artifacts");
    cmd->add_option("--scheme", ov.scheme, "Forward scheme: euler | exact-latent");
    cmd->add_option("--threads", ov.threads, "Worker threads (0 = hardware)");
    cmd->add_option("--threshold", ov.threshold, "Threshold policy level A");
    cmd->add_option("--policy", ov.policy, "Trained policy parameter file");
}

jumpcap::ExperimentConfig build_config(const Overrides& ov) {
    jumpcap::ExperimentConfig cfg;
    if (!ov.config_path.empty()) {
        cfg = jumpcap::load_config(ov.config_path);
    }
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.scale) cfg.scale = *ov.scale;
    if (ov.out_dir) cfg.out_dir = *ov.out_dir;
    if (ov.scheme) cfg.scheme = jumpcap::scheme_from(*ov.scheme);
    if (ov.threads) cfg.threads = *ov.threads;
    if (ov.threshold) cfg.threshold = *ov.threshold;
    if (ov.mc_paths) cfg.mc_paths = *ov.mc_paths;
    if (ov.sim_paths) cfg.sim_paths = *ov.sim_paths;
    if (ov.points) cfg.selector_points = *ov.points;
    if (ov.policy) cfg.policy_file = *ov.policy;
    if (ov.oracle_mode) cfg.oracle_mode = true;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"jumpcap: jump-driven renewable capacity installation toolkit"};
    app.require_subcommand(1);

    Overrides ov;
    CLI::App* simulate = app.add_subcommand("simulate", "Simulate forward paths to CSV");
    simulate->add_option("--paths", ov.sim_paths, "Number of paths to record");
    CLI::App* mc = app.add_subcommand("mc-oracle", "Monte Carlo cost of a fixed policy");
    mc->add_option("--paths", ov.mc_paths, "Monte Carlo path count");
    CLI::App* bsde = app.add_subcommand("solve-bsde", "Backward solver for one threshold");
    CLI::App* select = app.add_subcommand("select-threshold",
                                          "Evaluate the threshold grid and pick the argmin");
    select->add_flag("--oracle-mode", ov.oracle_mode,
                     "Use the Monte Carlo oracle instead of the backward solver");
    select->add_option("--points", ov.points, "Number of grid points");
    select->add_option("--paths", ov.mc_paths, "Oracle-mode Monte Carlo path count");
    CLI::App* train = app.add_subcommand("train-policy", "Train the feedback control network");
    CLI::App* evaluate = app.add_subcommand("evaluate-policy",
                                            "Monte Carlo cost of a trained policy file");
    evaluate->add_option("--paths", ov.mc_paths, "Monte Carlo path count");
    CLI::App* report = app.add_subcommand("report", "Aggregate manifests into a comparison");

    for (CLI::App* cmd : {simulate, mc, bsde, select, train, evaluate, report}) {
        add_common(cmd, ov);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const jumpcap::ExperimentConfig cfg = build_config(ov);
        return jumpcap::run_command(app.get_subcommands().front()->get_name(), cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
