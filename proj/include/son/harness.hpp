#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "son/agent.hpp"
#include "son/env.hpp"
#include "son/rsrp_map.hpp"
#include "son/static_opt.hpp"

namespace son {

enum class PolicyKind { kPdpg, kDdpg, kStatic };

struct EvaluationConfig {
  double horizon_days = 200.0;
  double sample_interval_minutes = 15.0;
  int moving_average = 96;  // samples; 1 day at 15 min
  // Weights for the summary objective w . [throughput, 1 - peak load]; empty
  // means the agent weights.
  std::vector<double> objective_weights;
};

struct ExperimentConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  PolicyKind policy = PolicyKind::kPdpg;
  std::vector<Point> bs_positions{{100.0, 100.0}, {300.0, 100.0}, {100.0, 300.0}, {300.0, 300.0}};
  std::vector<double> tilts_deg{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  MapGenConfig map;
  std::string map_path;  // load instead of generating when set
  EnvConfig env;
  PdpgConfig agent;
  StaticPolicyConfig static_policy;
  long train_periods = 10000;
  EvaluationConfig evaluation;
  std::string output_dir;

  // Cross-field checks; throws ConfigError before any simulation runs.
  void validate() const;
  long sample_every_ticks() const;
  long horizon_ticks() const;
  std::vector<double> objective_weights() const;
};

// Unknown keys are rejected; missing keys keep their defaults.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Fully resolved config, every default written out.
std::string config_to_json(const ExperimentConfig& cfg);

std::shared_ptr<const RsrpTensor> build_map(const ExperimentConfig& cfg);

struct EvalSample {
  long tick = 0;
  double throughput_norm = 0.0;
  double peak_load_norm = 0.0;
  std::vector<double> cell_load_norm;
  std::vector<double> cell_throughput_mbps;
  std::vector<int> handovers;
  std::vector<int> edge_users;
};

struct RunSummary {
  double mean_throughput_norm = 0.0;
  double mean_peak_load_norm = 0.0;
  double load_std = 0.0;  // population std over every (sample, cell) load
  double objective = 0.0;
};

struct RunResult {
  std::vector<PeriodLog> training;
  std::vector<EvalSample> samples;
  RunSummary summary;
  SolverStats solver;
};

RunSummary summarize(const std::vector<EvalSample>& samples, std::span<const double> objective_weights);

// Trains (RL policies) on the training mobility stream, then evaluates the
// frozen policy, or the static oracle policy, on the held-out stream over the
// horizon. Writes artifacts when cfg.output_dir is set.
RunResult run_experiment(const ExperimentConfig& cfg);

// Evaluation only, with an agent restored from `checkpoint`.
RunResult evaluate_checkpoint(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint);

// Scalarized per-period training reward w . [r1, 1 + r2, 1 + r3].
double shifted_reward(std::span<const double> reward, std::span<const double> weights);

// Simple moving average with a window growing from 1 up to `window`.
std::vector<double> moving_average(std::span<const double> x, std::size_t window);

inline constexpr const char* kThroughputSchema = "son-throughput/v1";
inline constexpr const char* kCellLoadSchema = "son-cell-load/v1";
inline constexpr const char* kConvergenceSchema = "son-convergence/v1";
inline constexpr const char* kTimelineSchema = "son-timeline/v1";

void write_artifacts(const ExperimentConfig& cfg, const RunResult& result, const Agent* agent);

struct RunArtifacts {
  std::string name;
  double sample_interval_minutes = 0.0;
  std::vector<double> throughput;             // per sample
  std::vector<std::vector<double>> cell_load;  // per sample, per cell
  std::vector<double> training_reward;        // shifted scalar, may be empty
};

RunArtifacts read_artifacts(const std::filesystem::path& dir);

struct CdfPoint {
  double value;
  double fraction;
};

struct RunComparison {
  std::string name;
  double p10 = 0.0, p50 = 0.0, p90 = 0.0;
  double mean_peak_load = 0.0;
  double load_std = 0.0;
  double final_window_mean = 0.0;
  double final_window_std = 0.0;
  std::vector<CdfPoint> cdf;
  // Differences against the first run.
  double delta_p50 = 0.0;
  double delta_mean_peak_load = 0.0;
};

// Empirical CDF: sorted distinct values, fraction of samples <= value.
std::vector<CdfPoint> empirical_cdf(std::vector<double> x);
// Linear-interpolated quantile of sorted data, q in [0, 1].
double quantile(std::vector<double> x, double q);

// Throws ComparisonError when runs differ in sampling.
std::vector<RunComparison> compare_runs(const std::vector<RunArtifacts>& runs, std::size_t final_window = 1000);

}  // namespace son
