#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atacom/harness.hpp"
#include "atacom/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPropertyFailure = 3;

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int parallel = 1;
};

void add_common(CLI::App* cmd, CommonOptions& options, bool config_required = true) {
  auto* config = cmd->add_option("--config", options.config_path, "experiment config file");
  if (config_required) config->required();
  cmd->add_option("--out", options.out_dir, "output directory");
  cmd->add_option("--seed", options.seed, "override the master seed")
      ->each([&](const std::string&) { options.seed_set = true; });
  cmd->add_option("--parallel", options.parallel, "number of worker threads")
      ->check(CLI::Range(1, 256));
}

atacom::harness::ExperimentConfig load(const CommonOptions& options) {
  auto config = atacom::harness::load_config(options.config_path);
  if (options.seed_set) config.seed = options.seed;
  if (!options.out_dir.empty()) config.output_dir = options.out_dir;
  return config;
}

std::vector<atacom::harness::SweepAxis> parse_axes(const std::vector<std::string>& specs) {
  std::vector<atacom::harness::SweepAxis> axes;
  for (const std::string& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw atacom::ConfigError("sweep axis '" + spec + "': expected field=v1,v2,...");
    atacom::harness::SweepAxis axis;
    axis.field = spec.substr(0, eq);
    std::string rest = spec.substr(eq + 1);
    size_t pos = 0;
    while (pos != std::string::npos) {
      const auto comma = rest.find(',', pos);
      axis.values.push_back(rest.substr(pos, comma == std::string::npos ? comma : comma - pos));
      pos = comma == std::string::npos ? comma : comma + 1;
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe action space construction on constraint manifolds: experiment runner"};
  app.require_subcommand(1);

  CommonOptions run_options, sweep_options, plot_options;
  std::vector<std::string> axis_specs;

  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment and write its outputs");
  add_common(run_cmd, run_options);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a grid of experiments");
  add_common(sweep_cmd, sweep_options);
  sweep_cmd->add_option("--axis", axis_specs, "sweep axis as field=v1,v2,... (repeatable)");

  CLI::App* verify_cmd = app.add_subcommand("verify", "run the property batteries");

  CLI::App* plot_cmd = app.add_subcommand("emit-plots", "run an experiment, write plot data only");
  add_common(plot_cmd, plot_options);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const auto config = load(run_options);
      const auto result = atacom::harness::run_experiment(config, run_options.parallel);
      const std::string out =
          config.output_dir.empty() ? std::string("atacom_out") : config.output_dir;
      atacom::harness::emit_outputs(result, config, out);
      std::cout << atacom::harness::summary_to_json(result.summary, config);
      return kExitOk;
    }
    if (sweep_cmd->parsed()) {
      const auto base = load(sweep_options);
      const auto axes = parse_axes(axis_specs);
      const auto cells = atacom::harness::sweep(base, axes, sweep_options.parallel);
      const std::string out =
          base.output_dir.empty() ? std::string("atacom_out") : base.output_dir;
      std::filesystem::create_directories(out);
      for (const auto& cell : cells) {
        std::cout << cell.label << ": success_rate=" << cell.summary.success_rate
                  << " mean_return=" << cell.summary.mean_return
                  << " max_violation=" << cell.summary.max_violation << "\n";
      }
      atacom::harness::emit_sweep_plot_data(cells,
                                            (std::filesystem::path(out) / "plot_data.csv").string());
      return kExitOk;
    }
    if (verify_cmd->parsed()) {
      bool all_pass = true;
      for (const auto& battery : atacom::verify::run_property_batteries()) {
        std::cout << (battery.pass ? "[PASS] " : "[FAIL] ") << battery.name << " (" << battery.detail
                  << ")\n";
        all_pass = all_pass && battery.pass;
      }
      return all_pass ? kExitOk : kExitPropertyFailure;
    }
    if (plot_cmd->parsed()) {
      const auto config = load(plot_options);
      const auto result = atacom::harness::run_experiment(config, plot_options.parallel);
      const std::string out =
          config.output_dir.empty() ? std::string("atacom_out") : config.output_dir;
      std::filesystem::create_directories(out);
      std::string plot = "x,y,series\n";
      for (size_t e = 0; e < result.records.size(); ++e) {
        char y[32];
        std::snprintf(y, sizeof(y), "%.17g", result.records[e].discounted_return);
        plot += std::to_string(e) + "," + y + ",return\n";
      }
      std::ofstream file((std::filesystem::path(out) / "plot_data.csv").string());
      file << plot;
      return kExitOk;
    }
  } catch (const atacom::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "runtime fault: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
