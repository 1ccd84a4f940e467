#include "atacom/envs.hpp"

#include <cmath>

namespace atacom::envs {

namespace {

ConstraintSpec disc_keepout(const Vec& center, double radius, int state_dim, int offset) {
  // radius - ||p - center|| <= 0 on the block starting at `offset`.
  ConstraintSpec spec;
  spec.kind = ConstraintKind::Inequality;
  spec.dim_out = 1;
  spec.eval = [=](const Vec& s) {
    Vec v(1);
    v(0) = radius - (s.segment(offset, center.size()) - center).norm();
    return v;
  };
  spec.jacobian = [=](const Vec& s) {
    const Vec d = s.segment(offset, center.size()) - center;
    Mat j = Mat::Zero(1, state_dim);
    j.block(0, offset, 1, center.size()) = -d.transpose() / d.norm();
    return j;
  };
  spec.jacobian_dot = [=](const Vec& s, const Vec& s_dot) {
    const Vec d = s.segment(offset, center.size()) - center;
    const Vec v = s_dot.segment(offset, center.size());
    const double dist = d.norm();
    Mat j = Mat::Zero(1, state_dim);
    j.block(0, offset, 1, center.size()) =
        (-v.transpose() * dist * dist + d.transpose() * d.dot(v)) / (dist * dist * dist);
    return j;
  };
  return spec;
}

ConstraintSpec moving_disc_keepout(double radius, int robot_dim, int obstacle_index) {
  // radius - ||q - z_i|| <= 0 on the stacked state [q; z_0; z_1; ...].
  ConstraintSpec spec;
  spec.kind = ConstraintKind::Inequality;
  spec.dim_out = 1;
  const int z_offset = robot_dim + 2 * obstacle_index;
  spec.eval = [=](const Vec& s) {
    Vec v(1);
    v(0) = radius - (s.head(robot_dim) - s.segment(z_offset, 2)).norm();
    return v;
  };
  spec.jacobian = [=](const Vec& s) {
    const Vec d = s.head(robot_dim) - s.segment(z_offset, 2);
    const double dist = d.norm();
    Mat j = Mat::Zero(1, s.size());
    j.block(0, 0, 1, robot_dim) = -d.transpose() / dist;
    j.block(0, z_offset, 1, 2) = d.transpose() / dist;
    return j;
  };
  return spec;
}

ConstraintSpec axis_bound(int axis, double bound, bool is_upper, int state_dim) {
  // is_upper: s[axis] - bound <= 0, otherwise bound - s[axis] <= 0.
  ConstraintSpec spec;
  spec.kind = ConstraintKind::Inequality;
  spec.dim_out = 1;
  spec.eval = [=](const Vec& s) {
    Vec v(1);
    v(0) = is_upper ? s(axis) - bound : bound - s(axis);
    return v;
  };
  spec.jacobian = [=](const Vec&) {
    Mat j = Mat::Zero(1, state_dim);
    j(0, axis) = is_upper ? 1.0 : -1.0;
    return j;
  };
  spec.jacobian_dot = [=](const Vec& s, const Vec&) { return Mat::Zero(1, s.size()); };
  return spec;
}

ControlAffineSystem velocity_plant(int dim, double v_max) {
  ControlAffineSystem sys;
  sys.dim_state = dim;
  sys.dim_control = dim;
  sys.drift = [dim](const Vec&) { return Vec::Zero(dim); };
  sys.input_matrix = [dim](const Vec&) { return Mat::Identity(dim, dim); };
  sys.control_lower = Vec::Constant(dim, -v_max);
  sys.control_upper = Vec::Constant(dim, v_max);
  return sys;
}

Vec sample_box(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec p(2);
  p << u(rng), u(rng);
  return p;
}

void require_control(const Vec& u, int dim) {
  if (u.size() != dim) throw EnvFault("env step: control dimension mismatch");
  if (!u.allFinite()) throw EnvFault("env step: non-finite control");
}

}  // namespace

// ---------------------------------------------------------------------------
// Env2DStatic

Env2DStatic::Env2DStatic(const Static2DParams& params) : params_(params) {
  system_ = velocity_plant(2, params_.v_max);
  Vec center(2);
  center << params_.obstacle_x, params_.obstacle_y;
  constraints_.push_back(disc_keepout(center, params_.obstacle_radius, 2, 0));
  for (int axis = 0; axis < 2; ++axis) {
    constraints_.push_back(axis_bound(axis, params_.lower, false, 2));
    constraints_.push_back(axis_bound(axis, params_.upper, true, 2));
  }
  robot_ = sample_box(rng_, 0.1, 0.2);
  target_ = sample_box(rng_, 0.8, 0.9);
}

Observation Env2DStatic::reset(std::uint64_t seed) {
  rng_.seed(seed);
  steps_ = 0;
  Vec center(2);
  center << params_.obstacle_x, params_.obstacle_y;
  const double margin = 0.02;
  auto safe = [&](const Vec& p, double clearance) {
    return (p - center).norm() >= params_.obstacle_radius + clearance &&
           p.minCoeff() >= params_.lower + margin && p.maxCoeff() <= params_.upper - margin;
  };
  do {
    robot_ = sample_box(rng_, params_.lower + 0.05, params_.upper - 0.05);
  } while (!safe(robot_, margin));
  do {
    target_ = sample_box(rng_, params_.lower + 0.05, params_.upper - 0.05);
  } while (!safe(target_, params_.target_threshold + margin));
  return observation();
}

EnvStep Env2DStatic::step(const Vec& u_s) {
  require_control(u_s, 2);
  robot_ += params_.dt * u_s;
  ++steps_;

  EnvStep out;
  out.observation = observation();
  out.reward = -(robot_ - target_).norm();
  Vec k(constraints_.size());
  for (size_t i = 0; i < constraints_.size(); ++i) k(i) = constraints_[i].eval(robot_)(0);
  out.info.constraint_values = k;
  out.info.max_violation = k.maxCoeff();
  out.info.reached_target = (robot_ - target_).norm() < params_.target_threshold;
  out.done = out.info.reached_target || steps_ >= params_.horizon;
  return out;
}

AugmentedState Env2DStatic::controller_state() const {
  AugmentedState state;
  state.s = robot_;
  return state;
}

Observation Env2DStatic::observation() const {
  Observation obs;
  obs.robot = robot_;
  obs.target = target_;
  return obs;
}

// ---------------------------------------------------------------------------
// Env2DDynamic

Env2DDynamic::Env2DDynamic(const Dynamic2DParams& params) : params_(params) {
  system_ = velocity_plant(2, params_.v_max);
  for (int i = 0; i < params_.num_obstacles; ++i)
    constraints_.push_back(moving_disc_keepout(params_.obstacle_radius, 2, i));
  robot_ = Vec::Zero(2);
  target_ = Vec::Ones(2);
  obstacles_.resize(params_.num_obstacles);
  for (auto& o : obstacles_) {
    o.center = Vec::Constant(2, 0.5);
    o.position = o.center;
    o.velocity = Vec::Zero(2);
  }
}

Observation Env2DDynamic::reset(std::uint64_t seed) {
  rng_.seed(seed);
  steps_ = 0;
  time_ = 0.0;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double speed = params_.speed_scale * params_.v_max;

  const double margin = 0.05;
  const double swept = params_.obstacle_radius +
                       (params_.motion == ObstacleMotion::FixedCircle ? params_.pattern_radius : 0.0);
  for (int attempt = 0;; ++attempt) {
    for (auto& o : obstacles_) {
      o.center = sample_box(rng_, 0.2, 0.8);
      o.phase = angle(rng_);
      o.direction = coin(rng_) < 0.5 ? 1.0 : -1.0;
      if (params_.motion == ObstacleMotion::FixedCircle) {
        o.position = o.center + params_.pattern_radius *
                                    (Vec(2) << std::cos(o.phase), std::sin(o.phase)).finished();
        const double omega = o.direction * speed / params_.pattern_radius;
        o.velocity = params_.pattern_radius * omega *
                     (Vec(2) << -std::sin(o.phase), std::cos(o.phase)).finished();
      } else {
        o.position = o.center;
        const double a = angle(rng_);
        o.velocity = speed * (Vec(2) << std::cos(a), std::sin(a)).finished();
      }
    }
    bool separated = true;
    for (size_t i = 0; i + 1 < obstacles_.size() && separated; ++i)
      for (size_t j = i + 1; j < obstacles_.size(); ++j)
        if ((obstacles_[i].center - obstacles_[j].center).norm() < 2.0 * swept) {
          separated = false;
          break;
        }
    if (separated || attempt > 200) break;
  }

  auto clear_of_obstacles = [&](const Vec& p, double clearance, bool include_swept) {
    for (const auto& o : obstacles_) {
      if ((p - o.position).norm() < params_.obstacle_radius + clearance) return false;
      if (include_swept && params_.motion == ObstacleMotion::FixedCircle &&
          (p - o.center).norm() < swept + clearance)
        return false;
    }
    return true;
  };
  // Rejection sampling with the swept-path clearance dropped after a
  // while: crowded configurations (many obstacles) may leave no point
  // clear of every orbit, but initial safety itself is never relaxed.
  int attempt = 0;
  do {
    robot_ = sample_box(rng_, 0.05, 0.95);
  } while (!clear_of_obstacles(robot_, margin, ++attempt < 400));
  attempt = 0;
  do {
    target_ = sample_box(rng_, 0.05, 0.95);
  } while (!clear_of_obstacles(target_, params_.target_threshold + margin, ++attempt < 400));
  return observation();
}

void Env2DDynamic::advance_obstacles() {
  const double speed = params_.speed_scale * params_.v_max;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& o : obstacles_) {
    if (params_.motion == ObstacleMotion::FixedCircle) {
      const double omega = o.direction * speed / params_.pattern_radius;
      o.phase += omega * params_.dt;
      o.position = o.center + params_.pattern_radius *
                                  (Vec(2) << std::cos(o.phase), std::sin(o.phase)).finished();
      o.velocity = params_.pattern_radius * omega *
                   (Vec(2) << -std::sin(o.phase), std::cos(o.phase)).finished();
    } else {
      // Velocity random walk, speed-capped, reflected at the workspace bounds.
      const double accel = 3.0;
      o.velocity(0) += accel * params_.dt * gauss(rng_);
      o.velocity(1) += accel * params_.dt * gauss(rng_);
      if (o.velocity.norm() > speed) o.velocity *= speed / o.velocity.norm();
      o.position += params_.dt * o.velocity;
      for (int axis = 0; axis < 2; ++axis) {
        if (o.position(axis) < params_.lower) {
          o.position(axis) = 2.0 * params_.lower - o.position(axis);
          o.velocity(axis) = -o.velocity(axis);
        } else if (o.position(axis) > params_.upper) {
          o.position(axis) = 2.0 * params_.upper - o.position(axis);
          o.velocity(axis) = -o.velocity(axis);
        }
      }
    }
  }
}

EnvStep Env2DDynamic::step(const Vec& u_s) {
  require_control(u_s, 2);
  robot_ += params_.dt * u_s;
  advance_obstacles();
  ++steps_;
  time_ += params_.dt;

  EnvStep out;
  out.observation = observation();
  out.reward = -(robot_ - target_).norm();
  Vec stacked(2 + 2 * obstacles_.size());
  stacked.head(2) = robot_;
  for (size_t i = 0; i < obstacles_.size(); ++i) stacked.segment(2 + 2 * i, 2) = obstacles_[i].position;
  Vec k(constraints_.size());
  for (size_t i = 0; i < constraints_.size(); ++i) k(i) = constraints_[i].eval(stacked)(0);
  out.info.constraint_values = k;
  out.info.max_violation = k.maxCoeff();
  out.info.reached_target = (robot_ - target_).norm() < params_.target_threshold;
  out.done = out.info.reached_target || steps_ >= params_.horizon;
  return out;
}

AugmentedState Env2DDynamic::controller_state() const {
  AugmentedState state;
  state.s = robot_;
  Vec z(2 * obstacles_.size());
  for (size_t i = 0; i < obstacles_.size(); ++i) z.segment(2 * i, 2) = obstacles_[i].position;
  state.z = z;
  return state;
}

std::optional<Vec> Env2DDynamic::uncontrolled_velocity() const {
  Vec zd(2 * obstacles_.size());
  for (size_t i = 0; i < obstacles_.size(); ++i) zd.segment(2 * i, 2) = obstacles_[i].velocity;
  return zd;
}

Observation Env2DDynamic::observation() const {
  Observation obs;
  obs.robot = robot_;
  obs.target = target_;
  obs.obstacles = Vec(2 * obstacles_.size());
  obs.obstacle_velocities = Vec(2 * obstacles_.size());
  for (size_t i = 0; i < obstacles_.size(); ++i) {
    obs.obstacles.segment(2 * i, 2) = obstacles_[i].position;
    obs.obstacle_velocities.segment(2 * i, 2) = obstacles_[i].velocity;
  }
  return obs;
}

// ---------------------------------------------------------------------------
// EnvDoubleIntegrator

EnvDoubleIntegrator::EnvDoubleIntegrator(const DoubleIntegratorParams& params) : params_(params) {
  const double drag = params_.drag;
  system_.dim_state = 2;
  system_.dim_control = 2;
  // drift/input see the stacked [position; velocity] and return accelerations
  system_.drift = [drag](const Vec& x) { return Vec(-drag * x.tail(2)); };
  system_.input_matrix = [](const Vec&) { return Mat::Identity(2, 2); };
  system_.control_lower = Vec::Constant(2, -params_.a_max);
  system_.control_upper = Vec::Constant(2, params_.a_max);

  Vec center(2);
  center << params_.obstacle_x, params_.obstacle_y;
  constraints_.push_back(disc_keepout(center, params_.obstacle_radius, 2, 0));
  for (int axis = 0; axis < 2; ++axis) {
    constraints_.push_back(axis_bound(axis, params_.lower, false, 2));
    constraints_.push_back(axis_bound(axis, params_.upper, true, 2));
  }
  position_ = Vec::Constant(2, 0.1);
  velocity_ = Vec::Zero(2);
  target_ = Vec::Constant(2, 0.9);
}

Observation EnvDoubleIntegrator::reset(std::uint64_t seed) {
  rng_.seed(seed);
  steps_ = 0;
  velocity_ = Vec::Zero(2);
  Vec center(2);
  center << params_.obstacle_x, params_.obstacle_y;
  const double margin = 0.02;
  auto safe = [&](const Vec& p, double clearance) {
    return (p - center).norm() >= params_.obstacle_radius + clearance &&
           p.minCoeff() >= params_.lower + margin && p.maxCoeff() <= params_.upper - margin;
  };
  do {
    position_ = sample_box(rng_, params_.lower + 0.05, params_.upper - 0.05);
  } while (!safe(position_, margin));
  do {
    target_ = sample_box(rng_, params_.lower + 0.05, params_.upper - 0.05);
  } while (!safe(target_, params_.target_threshold + margin));
  return observation();
}

EnvStep EnvDoubleIntegrator::step(const Vec& u_s) {
  require_control(u_s, 2);
  // semi-implicit Euler
  Vec x(4);
  x << position_, velocity_;
  velocity_ += params_.dt * (system_.drift(x) + u_s);
  position_ += params_.dt * velocity_;
  ++steps_;

  EnvStep out;
  out.observation = observation();
  out.reward = -(position_ - target_).norm();
  Vec k(constraints_.size());
  for (size_t i = 0; i < constraints_.size(); ++i) k(i) = constraints_[i].eval(position_)(0);
  out.info.constraint_values = k;
  out.info.max_violation = k.maxCoeff();
  out.info.reached_target = (position_ - target_).norm() < params_.target_threshold;
  out.done = out.info.reached_target || steps_ >= params_.horizon;
  return out;
}

AugmentedState EnvDoubleIntegrator::controller_state() const {
  AugmentedState state;
  state.s = position_;
  state.s_dot = velocity_;
  return state;
}

Observation EnvDoubleIntegrator::observation() const {
  Observation obs;
  obs.robot = position_;
  obs.robot_velocity = velocity_;
  obs.target = target_;
  return obs;
}

// ---------------------------------------------------------------------------
// EnvCircleTrack

EnvCircleTrack::EnvCircleTrack(const CircleTrackParams& params) : params_(params) {
  system_ = velocity_plant(2, params_.v_max);

  ConstraintSpec keepout;
  keepout.kind = ConstraintKind::Inequality;
  keepout.dim_out = 1;
  const double r = params_.keepout_radius;
  keepout.eval = [r](const Vec& s) {
    Vec v(1);
    v(0) = r - s.norm();
    return v;
  };
  keepout.jacobian = [r](const Vec& s) {
    Mat j(1, 2);
    j.row(0) = -s.transpose() / s.norm();
    return j;
  };
  constraints_.push_back(keepout);

  ConstraintSpec ring;
  ring.kind = ConstraintKind::Equality;
  ring.dim_out = 1;
  ring.eval = [](const Vec& s) {
    Vec v(1);
    v(0) = s.squaredNorm() - 1.0;
    return v;
  };
  ring.jacobian = [](const Vec& s) {
    Mat j(1, 2);
    j.row(0) = 2.0 * s.transpose();
    return j;
  };
  constraints_.push_back(ring);

  state_ = Vec(2);
  state_ << 1.0, 0.0;
}

Observation EnvCircleTrack::reset(std::uint64_t seed) {
  rng_.seed(seed);
  steps_ = 0;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  const double theta = angle(rng_);
  state_ << std::cos(theta), std::sin(theta);
  return observation();
}

EnvStep EnvCircleTrack::step(const Vec& u_s) {
  require_control(u_s, 2);
  state_ += params_.dt * u_s;
  ++steps_;

  EnvStep out;
  out.observation = observation();
  out.reward = -std::abs(equality_residual());
  Vec k(1);
  k(0) = constraints_[0].eval(state_)(0);
  out.info.constraint_values = k;
  out.info.max_violation = std::max(k(0), std::abs(equality_residual()));
  out.done = steps_ >= params_.horizon;
  return out;
}

AugmentedState EnvCircleTrack::controller_state() const {
  AugmentedState state;
  state.s = state_;
  return state;
}

Observation EnvCircleTrack::observation() const {
  Observation obs;
  obs.robot = state_;
  obs.target = Vec::Zero(2);
  return obs;
}

double EnvCircleTrack::equality_residual() const { return state_.squaredNorm() - 1.0; }

// ---------------------------------------------------------------------------
// Velocity observers and the attractor policy

Vec observe_velocity(ObserverMode mode, const std::vector<Vec>& position_history,
                     const Vec& true_velocity, double dt) {
  switch (mode) {
    case ObserverMode::Exact:
      return true_velocity;
    case ObserverMode::None:
      return Vec::Zero(true_velocity.size());
    case ObserverMode::FiniteDifference: {
      if (position_history.size() < 2) return Vec::Zero(true_velocity.size());
      const Vec& now = position_history.back();
      const Vec& before = position_history[position_history.size() - 2];
      return (now - before) / dt;
    }
  }
  return Vec::Zero(true_velocity.size());
}

void VelocityObserver::reset(std::uint64_t seed) {
  rng_.seed(seed);
  history_.clear();
  warming_up_ = true;
}

Vec VelocityObserver::observe(const Vec& position, const Vec& true_velocity, double dt) {
  if (mode == ObserverMode::FiniteDifference) {
    Vec noised = position;
    if (position_noise_std > 0.0) {
      std::normal_distribution<double> gauss(0.0, position_noise_std);
      for (Eigen::Index i = 0; i < noised.size(); ++i) noised(i) += gauss(rng_);
    }
    history_.push_back(noised);
    if (history_.size() > 2) history_.erase(history_.begin());
    warming_up_ = history_.size() < 2;
  } else {
    warming_up_ = false;
  }
  return observe_velocity(mode, history_, true_velocity, dt);
}

Vec attractor_policy(const Observation& observation, const Mat& gain) {
  const Vec raw = gain * (observation.target - observation.robot);
  return raw.cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace atacom::envs
