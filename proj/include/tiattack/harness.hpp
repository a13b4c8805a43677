#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tiattack/attacks.hpp"
#include "tiattack/training.hpp"

namespace tia {

nlohmann::json to_json(const AttackConfig& cfg);
/// Missing fields take AttackConfig::defaults(method, norm, input).
AttackConfig attack_config_from_json(const nlohmann::json& j, InputShape input);
/// FNV-1a 64 of the config's canonical JSON, as 16 hex digits.
std::string config_digest(const AttackConfig& cfg);
/// "none" or "<kind>:<k>".
std::string kernel_label(const AttackConfig& cfg);

struct ModelSpec {
    std::string id;
    std::filesystem::path path;
    std::optional<TrainConfig> train;  ///< used when `path` holds no model yet
};

struct SourceSpec {
    std::string id;
    std::vector<std::string> members;  ///< one entry for a single model
    std::vector<double> weights;       ///< empty: equal weights
};

struct ExperimentPlan {
    std::filesystem::path test_images, test_labels;
    std::filesystem::path train_images, train_labels;  ///< only needed when a model must be trained
    std::vector<ModelSpec> models;
    std::vector<SourceSpec> sources;
    std::vector<std::string> targets;
    std::vector<nlohmann::json> attacks;  ///< resolved against the model input shape at run time
    int samples = 500;
    int sample_offset = 0;
    bool filter_correct = false;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
};

/// Reads a JSON plan. Relative data/model paths resolve against the plan's
/// directory; a relative output_dir resolves against $TIA_OUTPUT_ROOT when set.
ExperimentPlan load_plan(const std::filesystem::path& path);
ExperimentPlan parse_plan(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct ReportRow {
    std::string source;
    std::string attack;
    std::string kernel;
    std::string norm;
    std::string target;
    int n = 0;
    double success_rate = 0.0;
    bool white_box = false;
    std::string config_digest;
    nlohmann::json config;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::uint64_t seed = 0;
    int samples = 0;
    bool filter_correct = false;
    std::vector<std::string> warnings;

    const ReportRow& find(const std::string& source, const std::string& attack, const std::string& kernel,
                          const std::string& target) const;
};

/// Header plus one line per row: source,attack,kernel,norm,target,n,success_rate.
std::string report_csv(const ExperimentReport& report);
nlohmann::json report_json(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::filesystem::path& dir, const std::string& stem);

/// Checks files and references without running anything. Throws ConfigError.
void validate_plan(const ExperimentPlan& plan);

/// Validates the plan, then loads (or trains and saves) every model in it.
std::vector<std::pair<std::string, ClassifierPtr>> load_zoo(const ExperimentPlan& plan);

/// One row per (source, attack, target). Writes report.csv / report.json into
/// plan.output_dir when it is non-empty.
ExperimentReport run_plan(const ExperimentPlan& plan);

/// Re-runs the plan's attacks with kernels of the given odd side lengths
/// (k = (size - 1) / 2), keeping each attack's kernel kind (Gaussian when it
/// has none). Duplicate sizes are dropped with a warning; even sizes throw
/// std::invalid_argument. Writes sweep.csv / sweep.json when output_dir is set.
ExperimentReport kernel_size_sweep(const ExperimentPlan& plan, std::vector<int> kernel_sizes);

}  // namespace tia
