#include "jumpcap/cli.hpp"

#include "jumpcap/parallel.hpp"
#include "jumpcap/selector.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>

namespace jumpcap {

namespace {

namespace fs = std::filesystem;

std::string manifest_name(const std::string& command) {
    std::string slug = command;
    for (char& ch : slug) {
        if (ch == '-') {
            ch = '_';
        }
    }
    return "manifest_" + slug + ".json";
}

class Csv {
public:
    Csv(ArtifactSession& session, const std::string& name,
        const std::vector<std::string>& columns)
        : out_(session.file(name)) {
        if (!out_) {
            throw std::runtime_error("cannot open artifact for writing: " + name);
        }
        for (std::size_t i = 0; i < columns.size(); ++i) {
            out_ << (i == 0 ? "" : ",") << columns[i];
        }
        out_ << "\n";
    }

    Csv& cell(double v) {
        sep();
        out_ << csv_double(v);
        return *this;
    }
    Csv& cell(long long v) {
        sep();
        out_ << v;
        return *this;
    }
    Csv& cell(const std::string& v) {
        sep();
        out_ << v;
        return *this;
    }
    void end_row() {
        out_ << "\n";
        first_ = true;
    }

private:
    void sep() {
        if (!first_) {
            out_ << ",";
        }
        first_ = false;
    }
    std::ofstream out_;
    bool first_ = true;
};

// The policy a standalone command simulates under: the parameter file when
// one is configured, the fixed threshold otherwise.
struct PolicyChoice {
    std::unique_ptr<MlpParams> net;
    std::unique_ptr<Policy> policy;
    bool feedback = false;
};

PolicyChoice choose_policy(const ExperimentConfig& cfg) {
    PolicyChoice choice;
    if (!cfg.policy_file.empty()) {
        choice.net = std::make_unique<MlpParams>(load_mlp(cfg.policy_file));
        choice.policy = std::make_unique<FeedbackPolicy>(*choice.net);
        choice.feedback = true;
    } else {
        choice.policy = std::make_unique<ThresholdPolicy>(cfg.threshold);
    }
    return choice;
}

void write_paths_csv(ArtifactSession& session, const std::string& name,
                     const ExperimentConfig& cfg, const PathBundle& bundle,
                     const Policy* rate_source) {
    std::vector<std::string> columns{"path_id", "n", "t", "v", "d", "c"};
    if (rate_source != nullptr) {
        columns.push_back("a1");
        columns.push_back("a2");
    }
    Csv csv(session, name, columns);
    const TimeGrid grid = cfg.grid();
    for (int j = 0; j < bundle.batch; ++j) {
        for (int n = 0; n <= bundle.steps; ++n) {
            const SystemState& s = bundle.state(j, n);
            const double t = grid.node(n);
            csv.cell(static_cast<long long>(j)).cell(static_cast<long long>(n)).cell(t);
            csv.cell(s.v).cell(s.d).cell(s.c);
            if (rate_source != nullptr) {
                const InstallRates rates = rate_source->rate_at(t, s);
                csv.cell(rates.a1).cell(rates.a2);
            }
            csv.end_row();
        }
    }
}

void write_surface_csv(ArtifactSession& session, const std::string& name,
                       const MlpParams& policy, const ModelParams& model, StateAxis a1,
                       StateAxis a2) {
    const auto points = policy_surface(policy, model, a1, a2, 21);
    Csv csv(session, name, {axis_name(a1), axis_name(a2), "a1", "a2"});
    for (const SurfacePoint& p : points) {
        csv.cell(p.x1).cell(p.x2).cell(p.a1).cell(p.a2).end_row();
    }
}

nlohmann::json read_manifest(const ExperimentConfig& cfg, const std::string& command) {
    const fs::path path = fs::path(cfg.out_dir) / manifest_name(command);
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("missing manifest " + path.string() + "; run `" + command +
                                 "` first");
    }
    return nlohmann::json::parse(in);
}

} // namespace

ArtifactSession::ArtifactSession(std::filesystem::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

std::filesystem::path ArtifactSession::file(const std::string& name) {
    fs::path path = dir_ / name;
    files_.push_back(path);
    return path;
}

void ArtifactSession::discard_files() {
    for (const fs::path& f : files_) {
        std::error_code ec;
        fs::remove(f, ec);
    }
    files_.clear();
}

std::string csv_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

nlohmann::json cmd_simulate(const ExperimentConfig& cfg, ArtifactSession& session) {
    const PolicyChoice choice = choose_policy(cfg);
    const PathBundle bundle = simulate(cfg.model, cfg.grid(), *choice.policy, cfg.sim_paths,
                                       RngStream::seeded(cfg.seed), cfg.scheme);
    write_paths_csv(session, "paths.csv", cfg, bundle,
                    choice.feedback ? choice.policy.get() : nullptr);

    double mean_cost = 0.0;
    double mean_c = 0.0;
    for (int j = 0; j < bundle.batch; ++j) {
        mean_cost += bundle.running_cost[static_cast<std::size_t>(j)] +
                     cfg.model.kappa * bundle.state(j, bundle.steps).c;
        mean_c += bundle.state(j, bundle.steps).c;
    }
    mean_cost /= bundle.batch;
    mean_c /= bundle.batch;
    return {{"paths", cfg.sim_paths},
            {"scheme", scheme_name(cfg.scheme)},
            {"policy", choice.feedback ? cfg.policy_file : "threshold"},
            {"threshold", cfg.threshold},
            {"mean_cost", mean_cost},
            {"mean_final_capacity", mean_c}};
}

nlohmann::json cmd_mc_oracle(const ExperimentConfig& cfg, ArtifactSession& session) {
    (void)session;
    const PolicyChoice choice = choose_policy(cfg);
    const McResult mc = mc_cost(cfg.model, cfg.grid(), *choice.policy, cfg.mc_paths,
                                RngStream::seeded(cfg.seed), cfg.scheme, cfg.threads);
    return {{"estimate", mc.estimate},
            {"std_error", mc.std_error},
            {"paths", mc.paths},
            {"scheme", scheme_name(cfg.scheme)},
            {"policy", choice.feedback ? cfg.policy_file : "threshold"},
            {"threshold", cfg.threshold}};
}

nlohmann::json cmd_solve_bsde(const ExperimentConfig& cfg, ArtifactSession& session) {
    BsdeProblem problem{cfg.model, cfg.grid(), cfg.threshold, cfg.scheme};
    BsdeTrainConfig train = cfg.bsde;
    train.seed = cfg.seed;
    train.scale = cfg.scale;
    const BsdeSolution solution = solve_bsde(problem, train);

    Csv csv(session, "bsde_loss.csv", {"step", "epoch", "loss"});
    nlohmann::json final_losses = nlohmann::json::array();
    for (std::size_t n = 0; n < solution.loss_history.size(); ++n) {
        const auto& losses = solution.loss_history[n];
        for (std::size_t e = 0; e < losses.size(); ++e) {
            csv.cell(static_cast<long long>(n)).cell(static_cast<long long>(e)).cell(losses[e]);
            csv.end_row();
        }
        final_losses.push_back(losses.empty() ? 0.0 : losses.back());
    }
    return {{"y0", solution.y0},
            {"threshold", cfg.threshold},
            {"scheme", scheme_name(cfg.scheme)},
            {"per_step_final_loss", final_losses}};
}

nlohmann::json cmd_select_threshold(const ExperimentConfig& cfg, ArtifactSession& session) {
    const std::vector<double> grid = build_grid(cfg.model.a_min, cfg.model.a_max,
                                                cfg.selector_points);
    SelectorConfig selector;
    selector.mode = cfg.oracle_mode ? SelectorMode::mc_oracle : SelectorMode::bsde;
    selector.bsde = cfg.bsde;
    selector.bsde.scale = cfg.scale;
    selector.mc_paths = cfg.mc_paths;
    selector.scheme = cfg.scheme;
    selector.seed = cfg.seed;
    selector.threads = resolve_threads(cfg.threads);
    const SelectorResult result = select_threshold(cfg.model, cfg.grid(), grid, selector);

    Csv csv(session, "scatter.csv", {"A", "Y0", "best"});
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        csv.cell(result.entries[i].threshold)
            .cell(result.entries[i].y0)
            .cell(static_cast<long long>(static_cast<int>(i) == result.best_index ? 1 : 0));
        csv.end_row();
    }
    return {{"a_star", result.best().threshold},
            {"y0_star", result.best().y0},
            {"mode", cfg.oracle_mode ? "mc-oracle" : "bsde"},
            {"points", cfg.selector_points},
            {"scheme", scheme_name(cfg.scheme)}};
}

nlohmann::json cmd_train_policy(const ExperimentConfig& cfg, ArtifactSession& session) {
    ControlTrainConfig train = cfg.control;
    train.seed = cfg.seed;
    train.scale = cfg.scale;
    const PolicyTrainResult result =
        train_policy(cfg.model, cfg.grid(), train, resolve_threads(cfg.threads));

    Csv csv(session, "control_loss.csv", {"epoch", "loss"});
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        csv.cell(static_cast<long long>(e)).cell(result.loss_history[e]).end_row();
    }

    const fs::path policy_path = session.file("policy.bin");
    save_mlp(policy_path, result.policy);
    write_surface_csv(session, "surface_t_v.csv", result.policy, cfg.model, StateAxis::time,
                      StateAxis::v);
    write_surface_csv(session, "surface_v_d.csv", result.policy, cfg.model, StateAxis::v,
                      StateAxis::d);

    const FeedbackPolicy rule(result.policy);
    const PathBundle sample = simulate(cfg.model, cfg.grid(), rule, cfg.sim_paths,
                                       RngStream::seeded(derive_seed(cfg.seed, 0x5A3D1E)),
                                       cfg.scheme);
    write_paths_csv(session, "sample_paths.csv", cfg, sample, &rule);

    return {{"epochs", result.loss_history.size()},
            {"final_loss", result.loss_history.empty() ? 0.0 : result.loss_history.back()},
            {"out_of_sample", result.out_of_sample.estimate},
            {"out_of_sample_se", result.out_of_sample.std_error},
            {"eval_paths", result.out_of_sample.paths},
            {"policy_file", policy_path.string()}};
}

nlohmann::json cmd_evaluate_policy(const ExperimentConfig& cfg, ArtifactSession& session) {
    (void)session;
    if (cfg.policy_file.empty()) {
        throw std::invalid_argument("evaluate-policy needs run.policy_file (or --policy)");
    }
    const MlpParams net = load_mlp(cfg.policy_file);
    const FeedbackPolicy rule(net);
    const McResult mc = mc_cost(cfg.model, cfg.grid(), rule, cfg.mc_paths,
                                RngStream::seeded(cfg.seed), cfg.scheme, cfg.threads);
    return {{"estimate", mc.estimate},
            {"std_error", mc.std_error},
            {"paths", mc.paths},
            {"scheme", scheme_name(cfg.scheme)},
            {"policy_file", cfg.policy_file}};
}

nlohmann::json cmd_report(const ExperimentConfig& cfg, ArtifactSession& session) {
    const nlohmann::json selector = read_manifest(cfg, "select-threshold");
    nlohmann::json control;
    try {
        control = read_manifest(cfg, "evaluate-policy");
    } catch (const std::runtime_error&) {
        control = read_manifest(cfg, "train-policy");
    }
    const double threshold_y0 = selector.at("headline").at("y0_star").get<double>();
    const double a_star = selector.at("headline").at("a_star").get<double>();
    const auto& control_headline = control.at("headline");
    const double control_cost = control_headline.contains("out_of_sample")
                                    ? control_headline.at("out_of_sample").get<double>()
                                    : control_headline.at("estimate").get<double>();

    Csv csv(session, "report.csv", {"method", "cost", "detail"});
    csv.cell(std::string("threshold-bsde")).cell(threshold_y0).cell("A*=" + csv_double(a_star));
    csv.end_row();
    csv.cell(std::string("deep-control")).cell(control_cost).cell(std::string("out-of-sample"));
    csv.end_row();

    std::cout << "method           cost\n";
    std::cout << "threshold-bsde   " << csv_double(threshold_y0) << "  (A* = "
              << csv_double(a_star) << ")\n";
    std::cout << "deep-control     " << csv_double(control_cost) << "\n";
    return {{"threshold_y0", threshold_y0},
            {"a_star", a_star},
            {"deep_control_cost", control_cost},
            {"improvement", threshold_y0 - control_cost}};
}

std::vector<std::string> command_names() {
    return {"simulate",     "mc-oracle",       "solve-bsde", "select-threshold",
            "train-policy", "evaluate-policy", "report"};
}

int run_command(const std::string& name, const ExperimentConfig& cfg) {
    cfg.validate();
    ArtifactSession session(cfg.out_dir);
    const auto started = std::chrono::steady_clock::now();
    nlohmann::json headline;
    try {
        if (name == "simulate") {
            headline = cmd_simulate(cfg, session);
        } else if (name == "mc-oracle") {
            headline = cmd_mc_oracle(cfg, session);
        } else if (name == "solve-bsde") {
            headline = cmd_solve_bsde(cfg, session);
        } else if (name == "select-threshold") {
            headline = cmd_select_threshold(cfg, session);
        } else if (name == "train-policy") {
            headline = cmd_train_policy(cfg, session);
        } else if (name == "evaluate-policy") {
            headline = cmd_evaluate_policy(cfg, session);
        } else if (name == "report") {
            headline = cmd_report(cfg, session);
        } else {
            throw std::invalid_argument("unknown command: " + name);
        }
    } catch (const std::exception& e) {
        session.discard_files();
        std::cerr << "error: " << name << ": " << e.what() << "\n";
        return 1;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    nlohmann::json manifest;
    manifest["command"] = name;
    manifest["config_hash"] = config_hash(cfg);
    manifest["config"] = emit_config(cfg);
    manifest["seed"] = cfg.seed;
    manifest["scale"] = cfg.scale;
    manifest["wall_time_s"] = elapsed;
    manifest["headline"] = headline;
    nlohmann::json artifact_list = nlohmann::json::array();
    for (const auto& f : session.files()) {
        artifact_list.push_back(f.filename().string());
    }
    manifest["artifacts"] = artifact_list;

    const fs::path manifest_path = fs::path(cfg.out_dir) / manifest_name(name);
    std::ofstream out(manifest_path);
    out << manifest.dump(2) << "\n";
    if (!out) {
        std::cerr << "error: cannot write manifest " << manifest_path << "\n";
        return 1;
    }
    std::cout << name << ": " << headline.dump() << "\n";
    return 0;
}

} // namespace jumpcap
