#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "atacom/harness.hpp"

namespace atacom::harness {

namespace {

std::string fmt(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EnvFault("cannot write output file '" + path + "'");
  out << content;
}

}  // namespace

std::string summary_to_json(const Summary& summary, const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  j["config"]["env"] = config.env_id;
  j["config"]["policy"] = config.policy;
  j["config"]["slack_family"] = config.slack_family;
  j["config"]["beta"] = config.beta;
  j["config"]["lambda"] = config.lambda;
  j["config"]["drift_clipping"] = config.drift_clipping;
  j["config"]["observer"] = config.observer;
  j["config"]["episodes"] = config.episodes;
  j["config"]["horizon"] = config.horizon;
  j["config"]["dt"] = config.dt;
  j["config"]["seed"] = config.seed;
  j["config"]["gamma"] = config.gamma;
  j["episodes"] = summary.episodes;
  j["faults"] = summary.faults;
  j["success_rate"] = summary.success_rate;
  j["mean_episode_length"] = summary.mean_episode_length;
  j["mean_violation"] = summary.mean_violation;
  j["max_violation"] = summary.max_violation;
  j["mean_return"] = summary.mean_return;
  j["singular_states"] = summary.singular_states;
  j["rank_ok"] = summary.rank_ok;
  j["episode_returns"] = summary.episode_returns;
  j["episode_lengths"] = summary.episode_lengths;
  return j.dump(2) + "\n";
}

void emit_outputs(const ExperimentResult& result, const ExperimentConfig& config,
                  const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw EnvFault("cannot create output directory '" + out_dir + "'");

  for (size_t e = 0; e < result.records.size(); ++e) {
    const EpisodeRecord& record = result.records[e];
    std::string csv;
    if (!record.steps.empty()) {
      const StepRecord& first = record.steps.front();
      csv += "t";
      for (Eigen::Index i = 0; i < first.state.size(); ++i) csv += ",s" + std::to_string(i);
      for (Eigen::Index i = 0; i < first.action.size(); ++i) csv += ",u" + std::to_string(i);
      for (Eigen::Index i = 0; i < first.u_s.size(); ++i) csv += ",us" + std::to_string(i);
      for (Eigen::Index i = 0; i < first.c.size(); ++i) csv += ",c" + std::to_string(i);
      csv += ",V,viol,sat\n";
      for (const StepRecord& step : record.steps) {
        csv += fmt(step.t);
        for (Eigen::Index i = 0; i < step.state.size(); ++i) csv += "," + fmt(step.state(i));
        for (Eigen::Index i = 0; i < step.action.size(); ++i) csv += "," + fmt(step.action(i));
        for (Eigen::Index i = 0; i < step.u_s.size(); ++i) csv += "," + fmt(step.u_s(i));
        for (Eigen::Index i = 0; i < step.c.size(); ++i) csv += "," + fmt(step.c(i));
        csv += "," + fmt(step.V) + "," + fmt(step.max_violation) + "," +
               (step.saturated ? "1" : "0") + "\n";
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "episode_%04zu.csv", e);
    write_file((fs::path(out_dir) / name).string(), csv);
  }

  write_file((fs::path(out_dir) / "summary.json").string(),
             summary_to_json(result.summary, config));

  // Plot triples: per-episode return curve plus the first trajectory.
  std::string plot = "x,y,series\n";
  for (size_t e = 0; e < result.records.size(); ++e)
    plot += std::to_string(e) + "," + fmt(result.records[e].discounted_return) + ",return\n";
  if (!result.records.empty()) {
    for (const StepRecord& step : result.records.front().steps) {
      if (step.state.size() >= 2)
        plot += fmt(step.state(0)) + "," + fmt(step.state(1)) + ",trajectory_ep0\n";
    }
  }
  write_file((fs::path(out_dir) / "plot_data.csv").string(), plot);
}

void emit_sweep_plot_data(const std::vector<SweepCell>& cells, const std::string& path) {
  std::string plot = "x,y,series\n";
  for (const SweepCell& cell : cells) {
    for (size_t e = 0; e < cell.summary.episode_returns.size(); ++e)
      plot += std::to_string(e) + "," + fmt(cell.summary.episode_returns[e]) + "," + cell.label +
              "\n";
  }
  write_file(path, plot);
}

}  // namespace atacom::harness
