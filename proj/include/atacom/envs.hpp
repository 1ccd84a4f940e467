#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "atacom/manifold.hpp"

namespace atacom::envs {

struct Observation {
  Vec robot;
  Vec robot_velocity;        // filled by second-order environments
  Vec target;
  Vec obstacles;             // stacked positions of moving obstacles
  Vec obstacle_velocities;   // true velocities of the same
};

struct StepInfo {
  Vec constraint_values;  // inequality rows at the new state
  double max_violation = 0.0;
  bool reached_target = false;
};

struct EnvStep {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Deterministic, seedable episode environment. The plant control u_s
/// produced by the safe controller goes straight into step(); the
/// geometry needed by the controller is exposed through variant(),
/// system(), constraints() and controller_state().
class Env {
 public:
  virtual ~Env() = default;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual EnvStep step(const Vec& u_s) = 0;

  virtual Variant variant() const = 0;
  virtual const ControlAffineSystem& system() const = 0;
  virtual const std::vector<ConstraintSpec>& constraints() const = 0;
  virtual AugmentedState controller_state() const = 0;
  virtual std::optional<Vec> uncontrolled_velocity() const { return std::nullopt; }
  virtual Observation observation() const = 0;

  virtual int action_dim() const = 0;
  virtual double dt() const = 0;
  virtual int horizon() const = 0;
};

/// Point robot under velocity control in a box workspace with one fixed
/// circular obstacle; reward is the negative distance to the target.
struct Static2DParams {
  double obstacle_x = 0.5, obstacle_y = 0.5;
  double obstacle_radius = 0.15;
  double lower = 0.0, upper = 1.0;
  double v_max = 1.0;
  double dt = 0.01;
  int horizon = 1000;
  double target_threshold = 0.05;
};

class Env2DStatic final : public Env {
 public:
  explicit Env2DStatic(const Static2DParams& params = {});
  Observation reset(std::uint64_t seed) override;
  EnvStep step(const Vec& u_s) override;
  Variant variant() const override { return Variant::FirstOrder; }
  const ControlAffineSystem& system() const override { return system_; }
  const std::vector<ConstraintSpec>& constraints() const override { return constraints_; }
  AugmentedState controller_state() const override;
  Observation observation() const override;
  int action_dim() const override { return 2; }
  double dt() const override { return params_.dt; }
  int horizon() const override { return params_.horizon; }

 private:
  Static2DParams params_;
  ControlAffineSystem system_;
  std::vector<ConstraintSpec> constraints_;
  Vec robot_, target_;
  std::mt19937_64 rng_;
  int steps_ = 0;
};

enum class ObstacleMotion { FixedCircle, RandomWalk };

/// Moving-obstacle collision avoidance: obstacles orbit their spawn
/// point or follow a reflected velocity random walk, at a speed given
/// as a fraction of the robot's maximum speed.
struct Dynamic2DParams {
  int num_obstacles = 2;
  ObstacleMotion motion = ObstacleMotion::FixedCircle;
  double speed_scale = 0.5;
  double obstacle_radius = 0.1;
  double pattern_radius = 0.1;
  double lower = 0.0, upper = 1.0;
  double v_max = 1.0;
  double dt = 0.01;
  int horizon = 1000;
  double target_threshold = 0.05;
};

class Env2DDynamic final : public Env {
 public:
  explicit Env2DDynamic(const Dynamic2DParams& params = {});
  Observation reset(std::uint64_t seed) override;
  EnvStep step(const Vec& u_s) override;
  Variant variant() const override { return Variant::Separable; }
  const ControlAffineSystem& system() const override { return system_; }
  const std::vector<ConstraintSpec>& constraints() const override { return constraints_; }
  AugmentedState controller_state() const override;
  std::optional<Vec> uncontrolled_velocity() const override;
  Observation observation() const override;
  int action_dim() const override { return 2; }
  double dt() const override { return params_.dt; }
  int horizon() const override { return params_.horizon; }

 private:
  void advance_obstacles();

  Dynamic2DParams params_;
  ControlAffineSystem system_;
  std::vector<ConstraintSpec> constraints_;
  Vec robot_, target_;
  struct Obstacle {
    Vec center, position, velocity;
    double phase = 0.0;
    double direction = 1.0;
  };
  std::vector<Obstacle> obstacles_;
  std::mt19937_64 rng_;
  int steps_ = 0;
  double time_ = 0.0;
};

/// Acceleration-controlled planar point with the position constraints
/// lifted to velocity level; linear drag keeps speeds bounded.
struct DoubleIntegratorParams {
  double obstacle_x = 0.5, obstacle_y = 0.5;
  double obstacle_radius = 0.15;
  double lower = 0.0, upper = 1.0;
  double a_max = 2.0;
  double drag = 0.5;
  double dt = 0.01;
  int horizon = 1000;
  double target_threshold = 0.05;
};

class EnvDoubleIntegrator final : public Env {
 public:
  explicit EnvDoubleIntegrator(const DoubleIntegratorParams& params = {});
  Observation reset(std::uint64_t seed) override;
  EnvStep step(const Vec& u_s) override;
  Variant variant() const override { return Variant::SecondOrder; }
  const ControlAffineSystem& system() const override { return system_; }
  const std::vector<ConstraintSpec>& constraints() const override { return constraints_; }
  AugmentedState controller_state() const override;
  Observation observation() const override;
  int action_dim() const override { return 2; }
  double dt() const override { return params_.dt; }
  int horizon() const override { return params_.horizon; }

 private:
  DoubleIntegratorParams params_;
  ControlAffineSystem system_;
  std::vector<ConstraintSpec> constraints_;
  Vec position_, velocity_, target_;
  std::mt19937_64 rng_;
  int steps_ = 0;
};

/// Velocity-controlled point holding the unit circle l(s) = 0, with an
/// always-inactive keep-out disc around the origin.
struct CircleTrackParams {
  double keepout_radius = 0.5;
  double v_max = 2.0;
  double dt = 0.01;
  int horizon = 1000;
};

class EnvCircleTrack final : public Env {
 public:
  explicit EnvCircleTrack(const CircleTrackParams& params = {});
  Observation reset(std::uint64_t seed) override;
  EnvStep step(const Vec& u_s) override;
  Variant variant() const override { return Variant::EqualityAugmented; }
  const ControlAffineSystem& system() const override { return system_; }
  const std::vector<ConstraintSpec>& constraints() const override { return constraints_; }
  AugmentedState controller_state() const override;
  Observation observation() const override;
  int action_dim() const override { return 1; }
  double dt() const override { return params_.dt; }
  int horizon() const override { return params_.horizon; }
  double equality_residual() const;

 private:
  CircleTrackParams params_;
  ControlAffineSystem system_;
  std::vector<ConstraintSpec> constraints_;
  Vec state_;
  std::mt19937_64 rng_;
  int steps_ = 0;
};

enum class ObserverMode { Exact, FiniteDifference, None };

/// Stateless observer rule on an explicit history of (already noised)
/// positions: Exact passes the true velocity through, None returns
/// zero, FiniteDifference uses the last two history entries.
Vec observe_velocity(ObserverMode mode, const std::vector<Vec>& position_history,
                     const Vec& true_velocity, double dt);

/// Stateful wrapper used by the episode loop: noises incoming positions
/// with its own seeded stream and keeps the two-entry history. Reports
/// a warm-up flag until the finite difference is defined.
class VelocityObserver {
 public:
  ObserverMode mode = ObserverMode::Exact;
  double position_noise_std = 0.03;

  void reset(std::uint64_t seed);
  Vec observe(const Vec& position, const Vec& true_velocity, double dt);
  bool warming_up() const { return warming_up_; }

 private:
  std::mt19937_64 rng_;
  std::vector<Vec> history_;
  bool warming_up_ = true;
};

/// Linear attractor toward the target, clipped to the unit action box.
Vec attractor_policy(const Observation& observation, const Mat& gain);

}  // namespace atacom::envs
