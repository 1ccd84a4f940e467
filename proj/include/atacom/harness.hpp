#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "atacom/controller.hpp"
#include "atacom/envs.hpp"

namespace atacom::harness {

/// Episode-level success rule shared by the runner and the summaries:
/// reached the target with no constraint value above the tolerance.
inline constexpr double kViolationTolerance = 1e-3;
inline bool episode_success(bool reached_target, double max_violation) {
  return reached_target && max_violation <= kViolationTolerance;
}

/// Flat key-value experiment description; the README documents the
/// schema. Unknown keys are rejected when parsing.
struct ExperimentConfig {
  // env.*
  std::string env_id = "static2d";
  int obstacles = 2;
  std::string motion = "fixed";
  double speed_scale = 0.5;
  std::string observer = "exact";
  double observer_noise_std = 0.03;
  double obstacle_radius = -1.0;  // negative = per-env default
  // slack.*
  std::string slack_family = "exponential";
  double beta = 1.0;
  double slack_tol = 1e-6;
  // controller.*
  double lambda = 10.0;
  bool drift_clipping = true;
  double zeta_gain = 1.0;
  // policy.*
  std::string policy = "attractor";
  double kp = 5.0;
  std::vector<double> policy_constant;
  // run.*
  int episodes = 25;
  int horizon = 1000;
  double dt = 0.01;
  std::uint64_t seed = 1234;
  double gamma = 0.99;
  std::string output_dir;
};

/// Parse one "key = value" line per setting; '#' starts a comment.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Apply a single dotted key; used by the parser and the sweep axes.
void apply_config_field(ExperimentConfig& config, const std::string& key, const std::string& value);
void validate_config(const ExperimentConfig& config);

struct StepRecord {
  double t = 0.0;
  Vec state;      // controllable state (velocity appended for 2nd order)
  Vec action;     // agent action in the tangent frame
  Vec u_s;        // executed plant control
  Vec c;          // constraint residual
  double V = 0.0;
  double max_violation = 0.0;
  bool saturated = false;
  double residual = 0.0;
};

struct EpisodeRecord {
  std::vector<StepRecord> steps;
  bool success = false;
  bool fault = false;
  int length = 0;
  double discounted_return = 0.0;
  double max_violation = 0.0;
  // per-episode fold of the step diagnostics
  int singular_states = 0;
  bool rank_ok = true;
};

struct Summary {
  int episodes = 0;
  int faults = 0;
  double success_rate = 0.0;
  double mean_episode_length = 0.0;
  double mean_violation = 0.0;
  double max_violation = 0.0;
  double mean_return = 0.0;
  int singular_states = 0;
  bool rank_ok = true;
  std::vector<double> episode_returns;
  std::vector<int> episode_lengths;
};

struct ExperimentResult {
  Summary summary;
  std::vector<EpisodeRecord> records;
};

std::unique_ptr<envs::Env> make_env(const ExperimentConfig& config);

/// Run all episodes of a config; per-episode seeds are master seed +
/// index, so results do not depend on scheduling. parallel > 1 runs
/// episodes on that many threads.
ExperimentResult run_experiment(const ExperimentConfig& config, int parallel = 1);

struct SweepAxis {
  std::string field;
  std::vector<std::string> values;
};

struct SweepCell {
  std::string label;
  ExperimentConfig config;
  Summary summary;
};

/// Cartesian product of the axes over the base config, one summary per
/// cell. Axis fields must exist in the config schema.
std::vector<SweepCell> sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& axes,
                             int parallel = 1);

/// Deterministic JSON rendering of a summary (used for the byte-identity
/// reproducibility contract).
std::string summary_to_json(const Summary& summary, const ExperimentConfig& config);

/// Write episode CSVs (column order: t, s..., u..., u_s..., c..., V,
/// viol, sat), summary.json and a plot_data.csv of (x, y, series)
/// triples into the directory.
void emit_outputs(const ExperimentResult& result, const ExperimentConfig& config,
                  const std::string& out_dir);

/// Plot triples for a sweep: one series per cell, episode index against
/// discounted return.
void emit_sweep_plot_data(const std::vector<SweepCell>& cells, const std::string& path);

}  // namespace atacom::harness
