#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "atacom/harness.hpp"
#include "atacom/verify.hpp"

namespace py = pybind11;
using namespace atacom;

namespace {

envs::ObserverMode observer_mode_from(const std::string& name) {
  if (name == "exact") return envs::ObserverMode::Exact;
  if (name == "fd") return envs::ObserverMode::FiniteDifference;
  if (name == "none") return envs::ObserverMode::None;
  throw InvalidInputError("observer mode must be exact, fd or none");
}

}  // namespace

PYBIND11_MODULE(atacom, m) {
  m.doc() = "Safe action spaces on constraint manifolds: tangent-space "
            "controller, benchmark environments and experiment harness";

  py::register_exception<InvalidInputError>(m, "InvalidInputError", PyExc_ValueError);
  py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<EnvFault>(m, "EnvFault", PyExc_RuntimeError);

  // linear algebra kernels
  py::class_<RankPolicy>(m, "RankPolicy")
      .def(py::init<>())
      .def_readwrite("relative_tolerance", &RankPolicy::relative_tolerance);
  m.def("pseudoinverse", &pseudoinverse, py::arg("m"), py::arg("policy") = RankPolicy{});
  m.def("numerical_rank", &numerical_rank, py::arg("m"), py::arg("policy") = RankPolicy{});
  m.def("nullspace_basis", &nullspace_basis, py::arg("j"), py::arg("policy") = RankPolicy{});
  m.def("identity_aligned_frame", &identity_aligned_frame, py::arg("rows"), py::arg("cols"));
  m.def("procrustes_align", &procrustes_align, py::arg("basis"), py::arg("reference_frame"));
  m.def("smooth_basis", &smooth_basis, py::arg("j"), py::arg("reference_frame"),
        py::arg("policy") = RankPolicy{});

  // constraint manifold pieces
  py::enum_<ConstraintKind>(m, "ConstraintKind")
      .value("Inequality", ConstraintKind::Inequality)
      .value("Equality", ConstraintKind::Equality);
  py::enum_<SlackFamily>(m, "SlackFamily")
      .value("Linear", SlackFamily::Linear)
      .value("Exponential", SlackFamily::Exponential);
  py::enum_<Variant>(m, "Variant")
      .value("FirstOrder", Variant::FirstOrder)
      .value("Separable", Variant::Separable)
      .value("SecondOrder", Variant::SecondOrder)
      .value("EqualityAugmented", Variant::EqualityAugmented);

  py::class_<ConstraintSpec>(m, "ConstraintSpec")
      .def(py::init<>())
      .def_readwrite("kind", &ConstraintSpec::kind)
      .def_readwrite("dim_out", &ConstraintSpec::dim_out)
      .def_readwrite("eval", &ConstraintSpec::eval)
      .def_readwrite("jacobian", &ConstraintSpec::jacobian)
      .def_readwrite("jacobian_dot", &ConstraintSpec::jacobian_dot);

  py::class_<SlackModel>(m, "SlackModel")
      .def(py::init<>())
      .def_readwrite("family", &SlackModel::family)
      .def_readwrite("beta", &SlackModel::beta)
      .def_readwrite("tol", &SlackModel::tol)
      .def_readwrite("mu_cap", &SlackModel::mu_cap);
  m.def("slack_alpha", &slack_alpha, py::arg("model"), py::arg("mu"));
  m.def("slack_reset", &slack_reset, py::arg("model"), py::arg("k_value"));
  m.def("second_order_constraint", &second_order_constraint, py::arg("k_value"),
        py::arg("k_jacobian"), py::arg("s_dot"), py::arg("zeta_gain"));
  m.def("constraint_residual", &constraint_residual, py::arg("constraints"),
        py::arg("slack_values"), py::arg("state"));

  py::class_<ControlAffineSystem>(m, "ControlAffineSystem")
      .def(py::init<>())
      .def_readwrite("dim_state", &ControlAffineSystem::dim_state)
      .def_readwrite("dim_control", &ControlAffineSystem::dim_control)
      .def_readwrite("drift", &ControlAffineSystem::drift)
      .def_readwrite("input_matrix", &ControlAffineSystem::input_matrix)
      .def_readwrite("control_lower", &ControlAffineSystem::control_lower)
      .def_readwrite("control_upper", &ControlAffineSystem::control_upper);

  py::class_<AugmentedState>(m, "AugmentedState")
      .def(py::init<>())
      .def_readwrite("s", &AugmentedState::s)
      .def_readwrite("z", &AugmentedState::z)
      .def_readwrite("s_dot", &AugmentedState::s_dot)
      .def_readwrite("mu", &AugmentedState::mu);

  py::class_<AugmentedAssembly>(m, "AugmentedAssembly")
      .def_readonly("J_u", &AugmentedAssembly::J_u)
      .def_readonly("psi", &AugmentedAssembly::psi)
      .def_readonly("c", &AugmentedAssembly::c)
      .def_readonly("B_u", &AugmentedAssembly::B_u)
      .def_readonly("num_inequality", &AugmentedAssembly::num_inequality)
      .def_readonly("dim_control", &AugmentedAssembly::dim_control)
      .def_property_readonly("action_dim", &AugmentedAssembly::action_dim);

  m.def(
      "assemble",
      [](Variant variant, const ControlAffineSystem& system,
         const std::vector<ConstraintSpec>& constraints, const SlackModel& slack,
         const AugmentedState& state, const std::optional<Vec>& z_dot, double zeta_gain) {
        AssemblyOptions options;
        options.zeta_gain = zeta_gain;
        return assemble(variant, system, constraints, slack, state, z_dot, options);
      },
      py::arg("variant"), py::arg("system"), py::arg("constraints"), py::arg("slack"),
      py::arg("state"), py::arg("z_dot") = std::nullopt, py::arg("zeta_gain") = 1.0);

  // controller
  py::class_<ControllerConfig>(m, "ControllerConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &ControllerConfig::lambda)
      .def_readwrite("drift_clipping", &ControllerConfig::drift_clipping)
      .def_readwrite("reference_frame", &ControllerConfig::reference_frame)
      .def_readwrite("zeta_gain", &ControllerConfig::zeta_gain);

  py::class_<SafeAction>(m, "SafeAction")
      .def_readonly("u_s", &SafeAction::u_s)
      .def_readonly("u_mu", &SafeAction::u_mu)
      .def_readonly("saturated", &SafeAction::saturated)
      .def_readonly("residual", &SafeAction::residual);

  py::class_<StepResult>(m, "StepResult")
      .def_readonly("action", &StepResult::action)
      .def_readonly("assembly", &StepResult::assembly)
      .def_readonly("mu", &StepResult::mu);

  m.def("drift_clip", &drift_clip, py::arg("psi"));
  m.def("safe_action", &safe_action, py::arg("assembly"), py::arg("agent_action"),
        py::arg("config"));
  m.def("atacom_step", &atacom_step, py::arg("variant"), py::arg("system"),
        py::arg("constraints"), py::arg("slack"), py::arg("state"), py::arg("agent_action"),
        py::arg("config"), py::arg("z_dot") = std::nullopt);

  // verification helpers
  m.def("lyapunov_value", &verify::lyapunov_value, py::arg("c"));
  m.def("lyapunov_rate", &verify::lyapunov_rate, py::arg("c"), py::arg("J_u"), py::arg("lambda_"));
  m.def("singularity_check", &verify::singularity_check, py::arg("J_u"), py::arg("c"),
        py::arg("mu"), py::arg("tol") = 1e-9);

  // environments
  py::class_<envs::Observation>(m, "Observation")
      .def_readonly("robot", &envs::Observation::robot)
      .def_readonly("robot_velocity", &envs::Observation::robot_velocity)
      .def_readonly("target", &envs::Observation::target)
      .def_readonly("obstacles", &envs::Observation::obstacles)
      .def_readonly("obstacle_velocities", &envs::Observation::obstacle_velocities);
  py::class_<envs::StepInfo>(m, "StepInfo")
      .def_readonly("constraint_values", &envs::StepInfo::constraint_values)
      .def_readonly("max_violation", &envs::StepInfo::max_violation)
      .def_readonly("reached_target", &envs::StepInfo::reached_target);
  py::class_<envs::EnvStep>(m, "EnvStep")
      .def_readonly("observation", &envs::EnvStep::observation)
      .def_readonly("reward", &envs::EnvStep::reward)
      .def_readonly("done", &envs::EnvStep::done)
      .def_readonly("info", &envs::EnvStep::info);

  py::class_<envs::Env>(m, "Env")
      .def("reset", &envs::Env::reset, py::arg("seed"))
      .def("step", &envs::Env::step, py::arg("u_s"))
      .def("variant", &envs::Env::variant)
      .def("system", &envs::Env::system, py::return_value_policy::reference_internal)
      .def("constraints", &envs::Env::constraints, py::return_value_policy::reference_internal)
      .def("controller_state", &envs::Env::controller_state)
      .def("uncontrolled_velocity", &envs::Env::uncontrolled_velocity)
      .def("observation", &envs::Env::observation)
      .def("action_dim", &envs::Env::action_dim)
      .def("dt", &envs::Env::dt)
      .def("horizon", &envs::Env::horizon);

  py::class_<envs::Static2DParams>(m, "Static2DParams")
      .def(py::init<>())
      .def_readwrite("obstacle_radius", &envs::Static2DParams::obstacle_radius)
      .def_readwrite("v_max", &envs::Static2DParams::v_max)
      .def_readwrite("dt", &envs::Static2DParams::dt)
      .def_readwrite("horizon", &envs::Static2DParams::horizon);
  py::class_<envs::Env2DStatic, envs::Env>(m, "Env2DStatic")
      .def(py::init<>())
      .def(py::init<const envs::Static2DParams&>());

  py::class_<envs::Dynamic2DParams>(m, "Dynamic2DParams")
      .def(py::init<>())
      .def_readwrite("num_obstacles", &envs::Dynamic2DParams::num_obstacles)
      .def_readwrite("speed_scale", &envs::Dynamic2DParams::speed_scale)
      .def_readwrite("obstacle_radius", &envs::Dynamic2DParams::obstacle_radius)
      .def_readwrite("dt", &envs::Dynamic2DParams::dt)
      .def_readwrite("horizon", &envs::Dynamic2DParams::horizon);
  py::class_<envs::Env2DDynamic, envs::Env>(m, "Env2DDynamic")
      .def(py::init<>())
      .def(py::init<const envs::Dynamic2DParams&>());

  py::class_<envs::EnvDoubleIntegrator, envs::Env>(m, "EnvDoubleIntegrator").def(py::init<>());
  py::class_<envs::EnvCircleTrack, envs::Env>(m, "EnvCircleTrack")
      .def(py::init<>())
      .def("equality_residual", &envs::EnvCircleTrack::equality_residual);

  py::class_<envs::VelocityObserver>(m, "VelocityObserver")
      .def(py::init([](const std::string& mode, double noise_std) {
             envs::VelocityObserver observer;
             observer.mode = observer_mode_from(mode);
             observer.position_noise_std = noise_std;
             return observer;
           }),
           py::arg("mode") = "exact", py::arg("position_noise_std") = 0.03)
      .def("reset", &envs::VelocityObserver::reset, py::arg("seed"))
      .def("observe", &envs::VelocityObserver::observe, py::arg("position"),
           py::arg("true_velocity"), py::arg("dt"))
      .def("warming_up", &envs::VelocityObserver::warming_up);

  m.def("attractor_policy", &envs::attractor_policy, py::arg("observation"), py::arg("gain"));

  // harness
  m.def(
      "run_experiment",
      [](const std::string& config_text, int parallel) {
        const auto config = harness::parse_config(config_text);
        const auto result = harness::run_experiment(config, parallel);
        return harness::summary_to_json(result.summary, config);
      },
      py::arg("config_text"), py::arg("parallel") = 1,
      "Run an experiment from config text; returns the summary JSON document.");
  m.def(
      "run_experiment_file",
      [](const std::string& path, int parallel) {
        const auto config = harness::load_config(path);
        const auto result = harness::run_experiment(config, parallel);
        return harness::summary_to_json(result.summary, config);
      },
      py::arg("path"), py::arg("parallel") = 1);

  m.def("run_property_batteries", []() {
    py::list out;
    for (const auto& battery : verify::run_property_batteries()) {
      py::dict entry;
      entry["name"] = battery.name;
      entry["pass"] = battery.pass;
      entry["detail"] = battery.detail;
      out.append(entry);
    }
    return out;
  });

  m.attr("__version__") = "0.1.0";
}
