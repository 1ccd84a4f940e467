#include <algorithm>
#include <fstream>
#include <sstream>

#include "atacom/harness.hpp"

namespace atacom::harness {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': expected a number, got '" + value + "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': expected an integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("config field '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

}  // namespace

void apply_config_field(ExperimentConfig& config, const std::string& key,
                        const std::string& value) {
  if (key == "env.id") config.env_id = value;
  else if (key == "env.obstacles") config.obstacles = parse_int(key, value);
  else if (key == "env.motion") config.motion = value;
  else if (key == "env.speed_scale") config.speed_scale = parse_double(key, value);
  else if (key == "env.observer") config.observer = value;
  else if (key == "env.observer_noise_std") config.observer_noise_std = parse_double(key, value);
  else if (key == "env.obstacle_radius") config.obstacle_radius = parse_double(key, value);
  else if (key == "slack.family") config.slack_family = value;
  else if (key == "slack.beta") config.beta = parse_double(key, value);
  else if (key == "slack.tol") config.slack_tol = parse_double(key, value);
  else if (key == "controller.lambda") config.lambda = parse_double(key, value);
  else if (key == "controller.drift_clipping") config.drift_clipping = parse_bool(key, value);
  else if (key == "controller.zeta_gain") config.zeta_gain = parse_double(key, value);
  else if (key == "policy.id") config.policy = value;
  else if (key == "policy.kp") config.kp = parse_double(key, value);
  else if (key == "policy.constant") config.policy_constant = parse_double_list(key, value);
  else if (key == "run.episodes") config.episodes = parse_int(key, value);
  else if (key == "run.horizon") config.horizon = parse_int(key, value);
  else if (key == "run.dt") config.dt = parse_double(key, value);
  else if (key == "run.seed") config.seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "run.gamma") config.gamma = parse_double(key, value);
  else if (key == "run.output_dir") config.output_dir = value;
  else throw ConfigError("unknown config field '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    apply_config_field(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate_config(config);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void validate_config(const ExperimentConfig& config) {
  auto one_of = [](const std::string& key, const std::string& value,
                   std::initializer_list<const char*> allowed) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return value == a; }) == allowed.end()) {
      std::string msg = "config field '" + key + "': '" + value + "' not in {";
      bool first = true;
      for (const char* a : allowed) {
        if (!first) msg += ", ";
        msg += a;
        first = false;
      }
      throw ConfigError(msg + "}");
    }
  };
  one_of("env.id", config.env_id, {"static2d", "dynamic2d", "double_integrator", "circle_track"});
  one_of("env.motion", config.motion, {"fixed", "random"});
  one_of("env.observer", config.observer, {"exact", "fd", "none"});
  one_of("slack.family", config.slack_family, {"linear", "exponential"});
  one_of("policy.id", config.policy, {"attractor", "uniform_random", "scripted_constant"});
  if (config.obstacles < 1 || config.obstacles > 32)
    throw ConfigError("config field 'env.obstacles': must be in [1, 32]");
  if (!(config.speed_scale > 0.0 && config.speed_scale <= 1.5))
    throw ConfigError("config field 'env.speed_scale': must be in (0, 1.5]");
  if (config.observer_noise_std < 0.0)
    throw ConfigError("config field 'env.observer_noise_std': must be >= 0");
  if (!(config.beta > 0.0)) throw ConfigError("config field 'slack.beta': must be > 0");
  if (!(config.slack_tol > 0.0)) throw ConfigError("config field 'slack.tol': must be > 0");
  if (!(config.lambda > 0.0)) throw ConfigError("config field 'controller.lambda': must be > 0");
  if (!(config.zeta_gain > 0.0))
    throw ConfigError("config field 'controller.zeta_gain': must be > 0");
  if (!(config.kp > 0.0)) throw ConfigError("config field 'policy.kp': must be > 0");
  for (double v : config.policy_constant)
    if (std::abs(v) > 1.0)
      throw ConfigError("config field 'policy.constant': entries must be within [-1, 1]");
  if (config.episodes < 1) throw ConfigError("config field 'run.episodes': must be >= 1");
  if (config.horizon < 1) throw ConfigError("config field 'run.horizon': must be >= 1");
  if (!(config.dt > 0.0)) throw ConfigError("config field 'run.dt': must be > 0");
  if (!(config.gamma > 0.0 && config.gamma <= 1.0))
    throw ConfigError("config field 'run.gamma': must be in (0, 1]");
  if (config.policy == "scripted_constant" && config.policy_constant.empty())
    throw ConfigError("config field 'policy.constant': required for the scripted policy");
}

std::unique_ptr<envs::Env> make_env(const ExperimentConfig& config) {
  using namespace envs;
  if (config.env_id == "static2d") {
    Static2DParams p;
    p.dt = config.dt;
    p.horizon = config.horizon;
    if (config.obstacle_radius > 0.0) p.obstacle_radius = config.obstacle_radius;
    return std::make_unique<Env2DStatic>(p);
  }
  if (config.env_id == "dynamic2d") {
    Dynamic2DParams p;
    p.dt = config.dt;
    p.horizon = config.horizon;
    p.num_obstacles = config.obstacles;
    p.motion = config.motion == "fixed" ? ObstacleMotion::FixedCircle : ObstacleMotion::RandomWalk;
    p.speed_scale = config.speed_scale;
    if (config.obstacle_radius > 0.0) p.obstacle_radius = config.obstacle_radius;
    return std::make_unique<Env2DDynamic>(p);
  }
  if (config.env_id == "double_integrator") {
    DoubleIntegratorParams p;
    p.dt = config.dt;
    p.horizon = config.horizon;
    if (config.obstacle_radius > 0.0) p.obstacle_radius = config.obstacle_radius;
    return std::make_unique<EnvDoubleIntegrator>(p);
  }
  if (config.env_id == "circle_track") {
    CircleTrackParams p;
    p.dt = config.dt;
    p.horizon = config.horizon;
    return std::make_unique<EnvCircleTrack>(p);
  }
  throw ConfigError("config field 'env.id': unknown environment '" + config.env_id + "'");
}

}  // namespace atacom::harness
