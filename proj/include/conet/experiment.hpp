#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "conet/graph.hpp"
#include "conet/metrics.hpp"
#include "conet/policy.hpp"
#include "conet/sampler.hpp"

namespace conet {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct ExperimentConfig {
    std::uint64_t n = 8000;
    std::uint64_t k = 5;
    std::uint64_t graph_seed = 1;
    std::uint64_t task_seed = 1;
    std::uint64_t train_seed = 1;
    std::uint64_t m = 10000;
    std::uint32_t l_max = 200;
    std::uint64_t steps = 100;
    double learning_rate = 0.005;
    AdvantageMode advantage_mode = AdvantageMode::MeanBaseline;
    RewardMode reward_mode = RewardMode::Binary;
    ThetaInit theta_init = ThetaInit::constant(0.5);
    double theta_min = 5e-3;
    double theta_max = 1.0 - 1e-6;
    std::uint32_t d_min = 7;
    std::uint32_t d_max = 7;

    // Power-law fit at the critical step.
    FitWindow tail_window{10, 150};
    double tail_log_factor = 1.25;
    bool fit_include_failures = false;
    // Exponential fit at the critical step + post_offset, around the modal
    // success length L*: [L* + local_below, L* + local_above], linear(1) bins.
    double local_below = -10;
    double local_above = 20;
    Population local_population = Population::Odd;
    std::uint64_t post_offset = 5;

    std::uint64_t snapshot_every = 10;
    std::uint64_t hist_every = 1;
    unsigned workers = 1;
    std::filesystem::path output_dir = "run";
    bool dump_rollouts = false;
    bool dump_paths = false;

    /// Throws Error(ConfigInvalid).
    void validate() const;
    UpdateConfig update_config() const;
    Population tail_population() const { return fit_include_failures ? Population::All : Population::Success; }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys and bad values raise
/// Error(ConfigInvalid).
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
/// Applies one `key=value` override; the value is read as JSON when it parses
/// as JSON and as a plain string otherwise.
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);
/// Names accepted by config_from_json, in canonical order.
std::vector<std::string> config_keys();

/// FNV-1a over the canonical JSON of every field that influences results
/// (everything except steps, workers, output paths, and output cadence).
std::string config_hash(const ExperimentConfig& config);
bool same_trajectory(const ExperimentConfig& a, const ExperimentConfig& b);

struct StepEntry {
    std::uint64_t step = 0;
    std::optional<std::string> histogram;   // file name relative to the run dir
    std::optional<std::string> checkpoint;
    std::optional<std::string> rollouts;
    double wall_seconds = 0.0;
};

struct RunManifest {
    ExperimentConfig config;
    std::string config_hash;
    std::string artifact_version = kArtifactVersion;
    TaskInstance task;
    std::uint64_t graph_fingerprint = 0;
    std::vector<StepEntry> steps;
    std::vector<std::pair<std::uint64_t, std::string>> checkpoints;  // including step 0
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);
RunManifest load_manifest(const std::filesystem::path& run_dir);

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kGraphFile = "graph.txt";
inline constexpr const char* kTaskFile = "task.json";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kFitsFile = "fits.json";
inline constexpr const char* kReportFile = "report.txt";

std::string histogram_file(std::uint64_t step);
std::string checkpoint_file(std::uint64_t step);

nlohmann::json to_json(const TaskInstance& task);
TaskInstance task_from_json(const nlohmann::json& j);

struct TrainOptions {
    /// Continue from the latest checkpoint in output_dir when a manifest exists.
    bool resume = false;
    /// Stop after this many steps have been written (simulated interruption).
    std::optional<std::uint64_t> stop_after;
    std::function<void(const StepRecord&)> on_step;
    /// Called with the weights after each step's update.
    std::function<void(std::uint64_t, const Policy&)> on_update;
};

/// Runs steps 1..config.steps into config.output_dir. Throws Error(ConfigInvalid),
/// Error(IoFailure), Error(GenerationFailure), Error(CheckpointMismatch).
RunManifest run_training(const ExperimentConfig& config, const TrainOptions& options = {});

struct NamedFit {
    std::uint64_t step = 0;
    std::string role;  // "critical" or "post"
    Population population = Population::Success;
    Binning binning;
    FitResult fit;
};

struct ModelComparison {
    std::uint64_t step = 0;
    FitResult power_law;
    FitResult exponential;
    /// Strictly higher r^2 and strictly lower KS distance.
    bool power_law_wins() const;
    bool exponential_wins() const;
};

struct AnalysisReport {
    TransitionReport transition;
    double initial_accuracy = 0.0;
    double max_accuracy = 0.0;
    std::optional<ModelComparison> critical;  // tail window, power law expected
    std::optional<ModelComparison> post;      // local window, exponential expected
    std::optional<double> modal_length;       // L* at the post step
    std::vector<std::string> notes;           // fits that could not be made, and why
    std::vector<NamedFit> fits;
};

/// Fits at the variance peak and at post_offset steps later. Writes fits.json
/// and report.txt into run_dir. Throws Error(MissingArtifacts).
AnalysisReport analyze_run(const std::filesystem::path& run_dir);
std::string format_report(const AnalysisReport& report, const ExperimentConfig& config);

struct ReplayResult {
    Batch batch;
    StepRecord record;
    std::filesystem::path histogram_path;
};

/// Samples m fresh rollouts under the checkpointed weights, without updating.
/// Graph and task come from run_dir; the histogram is written to out_dir as
/// replay_<step>_<seed>.json. Throws Error(CheckpointMismatch).
ReplayResult replay(const std::filesystem::path& checkpoint, const std::filesystem::path& run_dir, std::uint64_t m,
                    std::uint64_t seed, const std::filesystem::path& out_dir, unsigned workers = 1);

}  // namespace conet
