#pragma once

#include "jumpcap/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace jumpcap {

/// Tracks the files a command writes so a failed run leaves no partial
/// artifacts behind.
class ArtifactSession {
public:
    explicit ArtifactSession(std::filesystem::path dir);
    std::filesystem::path file(const std::string& name);
    const std::vector<std::filesystem::path>& files() const { return files_; }
    void discard_files();

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> files_;
};

/// Fixed 17-significant-digit decimal rendering used by every CSV artifact.
std::string csv_double(double value);

// Each command writes its CSV artifacts through the session and returns the
// manifest headline. Wall time, config hash and the artifact list are added
// by run_command.
nlohmann::json cmd_simulate(const ExperimentConfig& cfg, ArtifactSession& session);
nlohmann::json cmd_mc_oracle(const ExperimentConfig& cfg, ArtifactSession& session);
nlohmann::json cmd_solve_bsde(const ExperimentConfig& cfg, ArtifactSession& session);
nlohmann::json cmd_select_threshold(const ExperimentConfig& cfg, ArtifactSession& session);
nlohmann::json cmd_train_policy(const ExperimentConfig& cfg, ArtifactSession& session);
nlohmann::json cmd_evaluate_policy(const ExperimentConfig& cfg, ArtifactSession& session);
nlohmann::json cmd_report(const ExperimentConfig& cfg, ArtifactSession& session);

std::vector<std::string> command_names();

/// Runs one command end to end: dispatch, manifest write, cleanup of partial
/// artifacts on failure. Returns a process exit code.
int run_command(const std::string& name, const ExperimentConfig& cfg);

} // namespace jumpcap
