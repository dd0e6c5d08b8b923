#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wamc/ocp.hpp"
#include "wamc/rng.hpp"
#include "wamc/spatial.hpp"
#include "wamc/wrench_predict.hpp"
#include "wamc/wrenchgen.hpp"

namespace wamc {

using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Analytic stand-in for the learned locomotion policy: first-order command
/// tracking, passive height/roll/pitch decay, and a PSD admittance mapping
/// base-frame wrench to a twist perturbation.
struct BaseResponseModel {
  double cmd_time_constant = 0.3;    // s, planar twist tracking
  Vector3 kappa = Vector3(5.0, 10.0, 10.0);
  double h_des = 0.5;
  double actuation_lag = 0.15;       // s, lag of the compensation channel
  double max_cmd_speed = 0.5;        // m/s
  Matrix6 admittance = defaultAdmittance();

  // Diagonal twist response plus symmetric force/tilt coupling (lateral force
  // rolls the base, longitudinal force pitches it).
  static Matrix6 defaultAdmittance() {
    Matrix6 a = Matrix6::Zero();
    a.diagonal() << 2e-3, 2e-3, 2e-3, 2e-2, 2e-2, 2e-2;
    a(3, 1) = a(1, 3) = 5e-3;
    a(4, 0) = a(0, 4) = 5e-3;
    return a;
  }

  void validate() const {
    if (cmd_time_constant <= 0.0 || actuation_lag <= 0.0) throw std::invalid_argument("time constants must be positive");
    Eigen::SelfAdjointEigenSolver<Matrix6> es(admittance);
    if (es.eigenvalues().minCoeff() < -1e-12) throw std::invalid_argument("admittance must be PSD");
  }
};

enum class ControllerKind { Predictive, Reactive, Naive };

inline std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::Predictive: return "predictive";
    case ControllerKind::Reactive: return "reactive";
    case ControllerKind::Naive: return "naive";
  }
  return "?";
}

inline ControllerKind controller_from_string(const std::string& s) {
  if (s == "predictive") return ControllerKind::Predictive;
  if (s == "reactive") return ControllerKind::Reactive;
  if (s == "naive") return ControllerKind::Naive;
  throw std::invalid_argument("unknown controller: " + s);
}

/// Base controller: maps the wrench observation to the wrench it tries to
/// cancel via feedforward. All three variants consume the same observation type.
class BaseController {
 public:
  virtual ~BaseController() = default;
  virtual Vector6 compensationTarget(const WrenchObservation& obs) const = 0;
  virtual ControllerKind kind() const = 0;
};

class NaiveController : public BaseController {
 public:
  Vector6 compensationTarget(const WrenchObservation&) const override { return Vector6::Zero(); }
  ControllerKind kind() const override { return ControllerKind::Naive; }
};

class ReactiveController : public BaseController {
 public:
  Vector6 compensationTarget(const WrenchObservation& obs) const override {
    if (obs.predictions.empty()) return Vector6::Zero();
    return obs.predictions.front();
  }
  ControllerKind kind() const override { return ControllerKind::Reactive; }
};

/// Feedforward-cancels the predicted wrench, reading the prediction at a lead
/// time ahead to compensate the actuation lag.
class PredictiveController : public BaseController {
 public:
  PredictiveController(std::vector<double> offsets, double lead, double gain)
      : offsets_(std::move(offsets)), lead_(lead), gain_(gain) {}

  Vector6 compensationTarget(const WrenchObservation& obs) const override {
    if (obs.predictions.empty()) return Vector6::Zero();
    const double tau = std::clamp(lead_, offsets_.front(), offsets_.back());
    for (size_t i = 0; i + 1 < offsets_.size(); ++i) {
      if (tau <= offsets_[i + 1]) {
        const double s = (tau - offsets_[i]) / (offsets_[i + 1] - offsets_[i]);
        return gain_ * ((1.0 - s) * obs.predictions[i] + s * obs.predictions[i + 1]);
      }
    }
    return gain_ * obs.predictions.back();
  }
  ControllerKind kind() const override { return ControllerKind::Predictive; }

 private:
  std::vector<double> offsets_;
  double lead_;
  double gain_;
};

struct SimConfig {
  double dt = 0.02;
  int mpc_decimation = 5;
  BaseResponseModel base;
  double preview_gain = 1.0;
  double preview_lead = 0.1;  // s; below the actuation lag so the pre-onset lean stays moderate
  double fall_tilt = 60.0 * M_PI / 180.0;
  double fall_height_fraction = 0.5;
  double lean_tilt_limit = 0.35;  // rad; "stepping" threshold for the leaning test
  bool use_unobserved = true;
  GeneratorConfig generator;

  std::unique_ptr<BaseController> makeController(ControllerKind kind) const {
    switch (kind) {
      case ControllerKind::Predictive:
        return std::make_unique<PredictiveController>(generator.horizon_points, preview_lead, preview_gain);
      case ControllerKind::Reactive:
        return std::make_unique<ReactiveController>();
      case ControllerKind::Naive:
        return std::make_unique<NaiveController>();
    }
    throw std::logic_error("unreachable");
  }
};

struct SimStepRecord {
  double time = 0.0;
  Vector3 base_position = Vector3::Zero();
  Vector3 base_rpy = Vector3::Zero();
  Vector3 base_lin_vel = Vector3::Zero();
  Vector3 base_ang_vel = Vector3::Zero();
  VectorX arm_q, arm_dq;
  Vector6 observed_wrench = Vector6::Zero();    // base frame, applied this step
  Vector6 unobserved_wrench = Vector6::Zero();  // base frame
  Vector6 plan_wrench = Vector6::Zero();        // offset-0 prediction
  Vector3 commands = Vector3::Zero();
  Vector6 compensation = Vector6::Zero();       // lagged compensation twist state
  Vector3 ee_position = Vector3::Zero();
  Vector3 ee_reference = Vector3::Zero();
};

struct SimTrace {
  double dt = 0.02;
  std::vector<SimStepRecord> records;
};

struct Metrics {
  double mean_abs_tilt = 0.0;
  double mean_ang_vel_magnitude_rollpitch = 0.0;
  double mean_lin_vel_tracking_error = 0.0;
  int fall_count = 0;
  double time_before_falling = 0.0;
};

inline double tilt_angle(const Vector3& rpy) {
  // angle between the base z-axis and world z
  const double c = std::cos(rpy[0]) * std::cos(rpy[1]);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline Metrics compute_metrics(const SimTrace& trace, const SimConfig& cfg) {
  if (trace.records.empty()) throw std::invalid_argument("empty trace");
  Metrics m;
  bool fallen = false;
  const double t0 = trace.records.front().time;
  double duration = trace.records.back().time - t0 + trace.dt;
  for (const auto& r : trace.records) {
    const double tilt = tilt_angle(r.base_rpy);
    m.mean_abs_tilt += tilt;
    m.mean_ang_vel_magnitude_rollpitch += r.base_ang_vel.head<2>().norm();
    m.mean_lin_vel_tracking_error += (r.commands.head<2>() - r.base_lin_vel.head<2>()).norm();
    if (!fallen && (tilt > cfg.fall_tilt ||
                    r.base_position.z() < cfg.fall_height_fraction * cfg.base.h_des)) {
      fallen = true;
      m.fall_count = 1;
      m.time_before_falling = r.time - t0;
    }
  }
  const double n = static_cast<double>(trace.records.size());
  m.mean_abs_tilt /= n;
  m.mean_ang_vel_magnitude_rollpitch /= n;
  m.mean_lin_vel_tracking_error /= n;
  if (!fallen) m.time_before_falling = duration;
  return m;
}

// ---------------------------------------------------------------------------
// Closed-loop simulation with MPC in the loop.

struct SimState {
  double t = 0.0;
  Vector3 p = Vector3::Zero();
  Vector3 rpy = Vector3::Zero();
  Vector3 v_track = Vector3::Zero();  // tracked (v_x, v_y, omega_z)
  Vector6 comp = Vector6::Zero();     // lagged compensation twist
  ArmState arm;
  Vector3 prev_lin_vel = Vector3::Zero();
  Vector3 prev_ang_vel = Vector3::Zero();
};

class Simulation {
 public:
  Simulation(SimConfig cfg, OcpDefinition ocp_def, ControllerKind controller, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        mpc_(std::move(ocp_def)),
        controller_(cfg_.makeController(controller)),
        rng_(seed ^ 0x9e3779b97f4a7c15ull) {
    cfg_.base.validate();
    const int n = mpc_.definition().model.njoints();
    state_.arm = ArmState::Zero(n);
    state_.arm.q = mpc_.definition().model.nominal_posture;
    state_.p.z() = cfg_.base.h_des;
    if (cfg_.use_unobserved) {
      episode_ = episode_init(cfg_.generator, seed);
    }
    trace_.dt = cfg_.dt;
  }

  /// One control cycle: MPC plan -> wrench prediction -> observation ->
  /// controller feedforward -> base response integration -> arm integration.
  void step() {
    const auto& def = mpc_.definition();
    const auto L = def.layout();
    const double dt = cfg_.dt;

    VectorX x(L.nx());
    x << state_.p, state_.rpy, state_.arm.q, state_.arm.dq;
    if (step_count_ % cfg_.mpc_decimation == 0) {
      auto [u0, plan] = mpc_.step(x, state_.t);
      plan_ = plan;
    }
    const VectorX u = plan_.inputAt(state_.t);
    Vector3 cmd(u[0], u[1], u[2]);
    if (cmd.head<2>().norm() > cfg_.base.max_cmd_speed)
      cmd.head<2>() *= cfg_.base.max_cmd_speed / cmd.head<2>().norm();

    state_.arm.ddq = L.alpha(u);
    const Pose base_pose = Pose::fromRpy(state_.p, state_.rpy);
    const Wrench w_arm = rnea_base_wrench(def.model, base_pose, state_.arm);

    Vector6 w_unobs = Vector6::Zero();
    if (cfg_.use_unobserved && episode_) {
      const Vector3 a_lin = (prev_vel_valid_ ? Vector3((lin_vel_ - state_.prev_lin_vel) / dt) : Vector3::Zero());
      const Vector3 a_ang = (prev_vel_valid_ ? Vector3((ang_vel_ - state_.prev_ang_vel) / dt) : Vector3::Zero());
      const Wrench wu = unobserved_disturbance(*episode_, a_lin, a_ang, cfg_.generator, rng_);
      const Matrix3 R_T = base_pose.rotation().transpose();
      w_unobs.head<3>() = R_T * wu.force;
      w_unobs.tail<3>() = R_T * wu.torque;
    }

    const Vector6 w_applied = w_arm.vector() + w_unobs;

    const WrenchPlan wp = plan_to_wrench(plan_, def.model, cfg_.generator.horizon_points, state_.t);
    const WrenchObservation obs = assemble_observation(wp, cmd, lin_vel_, ang_vel_);
    const Vector6 what = controller_->compensationTarget(obs);

    integrateBase(cmd, w_applied, what, dt);
    state_.arm.q += state_.arm.dq * dt + 0.5 * state_.arm.ddq * dt * dt;
    state_.arm.dq += state_.arm.ddq * dt;

    SimStepRecord rec;
    rec.time = state_.t;
    rec.base_position = state_.p;
    rec.base_rpy = state_.rpy;
    rec.base_lin_vel = lin_vel_;
    rec.base_ang_vel = ang_vel_;
    rec.arm_q = state_.arm.q;
    rec.arm_dq = state_.arm.dq;
    rec.observed_wrench = w_arm.vector();
    rec.unobserved_wrench = w_unobs;
    rec.plan_wrench = wp.wrenches.front();
    rec.commands = cmd;
    rec.compensation = state_.comp;
    rec.ee_position = forward_kinematics(def.model, Pose::fromRpy(state_.p, state_.rpy), state_.arm.q).position;
    if (def.ee_reference) rec.ee_reference = def.ee_reference(state_.t);
    trace_.records.push_back(rec);

    state_.t += dt;
    ++step_count_;
  }

  void run(double duration) {
    if (duration <= 0.0) throw std::invalid_argument("duration must be positive");
    const int steps = static_cast<int>(std::round(duration / cfg_.dt));
    for (int k = 0; k < steps; ++k) step();
  }

  const SimTrace& trace() const { return trace_; }
  Metrics metrics() const { return compute_metrics(trace_, cfg_); }
  RecedingHorizonController& mpc() { return mpc_; }
  const SimConfig& config() const { return cfg_; }

 private:
  void integrateBase(const Vector3& cmd, const Vector6& w_applied, const Vector6& what, double dt) {
    const auto& b = cfg_.base;
    const Vector6 comp_target = -b.admittance * what;
    state_.comp += dt / b.actuation_lag * (comp_target - state_.comp);
    const Vector6 d = b.admittance * w_applied;

    Vector3 pdot, rpydot;
    pdot[0] = state_.v_track[0] + d[0] + state_.comp[0];
    pdot[1] = state_.v_track[1] + d[1] + state_.comp[1];
    pdot[2] = -b.kappa[0] * (state_.p.z() - b.h_des) + d[2] + state_.comp[2];
    rpydot[0] = -b.kappa[1] * state_.rpy[0] + d[3] + state_.comp[3];
    rpydot[1] = -b.kappa[2] * state_.rpy[1] + d[4] + state_.comp[4];
    rpydot[2] = state_.v_track[2] + d[5] + state_.comp[5];

    state_.prev_lin_vel = lin_vel_;
    state_.prev_ang_vel = ang_vel_;
    prev_vel_valid_ = true;
    lin_vel_ = pdot;
    ang_vel_ = rpydot;

    state_.p += pdot * dt;
    state_.rpy += rpydot * dt;
    state_.v_track += dt / b.cmd_time_constant * (cmd - state_.v_track);
  }

  SimConfig cfg_;
  RecedingHorizonController mpc_;
  std::unique_ptr<BaseController> controller_;
  Rng rng_;
  SimState state_;
  bool prev_vel_valid_ = false;
  Vector3 lin_vel_ = Vector3::Zero();
  Vector3 ang_vel_ = Vector3::Zero();
  PlanTrajectory plan_;
  std::optional<GeneratorEpisode> episode_;
  SimTrace trace_;
  int step_count_ = 0;
};

// ---------------------------------------------------------------------------
// Scenario runners

struct ScenarioResult {
  SimTrace trace;
  Metrics metrics;
};

inline OcpDefinition make_scenario_ocp(const RobotModel& model) {
  OcpDefinition def;
  def.model = model;
  def.h_des = model.base_height;
  def.setDefaultWeights();
  def.max_iterations = 25;
  def.convergence_tol = 1e-6;
  return def;
}

/// Experiment 1: random reference points in a 3x3 m square, height
/// Uniform(0.6, 1.1) m, re-sampled every five seconds.
inline ScenarioResult run_experiment_1(const RobotModel& model, ControllerKind controller,
                                       std::uint64_t seed, double duration,
                                       const SimConfig& cfg_in = SimConfig{}) {
  if (duration <= 0.0) throw std::invalid_argument("duration must be positive");
  OcpDefinition def = make_scenario_ocp(model);

  Rng target_rng(seed * 7919 + 13);
  const int n_targets = static_cast<int>(duration / 5.0) + 2;
  auto targets = std::make_shared<std::vector<Vector3>>();
  for (int i = 0; i < n_targets; ++i)
    targets->push_back(Vector3(target_rng.uniform(-1.5, 1.5), target_rng.uniform(-1.5, 1.5),
                               target_rng.uniform(0.6, 1.1)));
  def.ee_reference = [targets](double t) {
    const size_t idx = std::min(static_cast<size_t>(std::max(0.0, t) / 5.0), targets->size() - 1);
    return (*targets)[idx];
  };

  Simulation sim(cfg_in, def, controller, seed);
  sim.run(duration);
  return {sim.trace(), sim.metrics()};
}

/// Experiment 2: the EE reference oscillates laterally; the base is commanded
/// to the origin with zero yaw via a quadratic base-reference cost.
inline ScenarioResult run_experiment_2(const RobotModel& model, ControllerKind controller,
                                       std::uint64_t seed, double duration,
                                       const SimConfig& cfg_in = SimConfig{}) {
  if (duration <= 0.0) throw std::invalid_argument("duration must be positive");
  OcpDefinition def = make_scenario_ocp(model);
  def.ee_reference = [](double t) { return Vector3(0.5, 0.5 * std::sin(t / 0.6), 1.1); };
  def.has_base_reference = true;
  def.base_reference = Vector6::Zero();
  def.base_reference[2] = def.h_des;
  def.w_base = (Vector6() << 10, 10, 0, 0, 0, 10).finished();

  Simulation sim(cfg_in, def, controller, seed);
  sim.run(duration);
  return {sim.trace(), sim.metrics()};
}

struct LeaningResult {
  bool stabilized = false;
  double peak_tilt = 0.0;
  double preonset_compensation = 0.0;  // max |comp twist| before force onset
};

/// Step lateral force of 1 s duration with advance notice in the prediction
/// channel. No arm, no MPC: the observation is synthesized from the known
/// force profile, mirroring the generator's perfect preview.
inline LeaningResult run_leaning(double force_magnitude, ControllerKind controller,
                                 const SimConfig& cfg_in = SimConfig{}, double t_on = 2.0,
                                 double t_off = 3.0, double t_end = 6.0) {
  SimConfig cfg = cfg_in;
  cfg.base.validate();
  auto ctrl = cfg.makeController(controller);
  auto profile = [&](double t) -> Vector6 {
    Vector6 w = Vector6::Zero();
    if (t >= t_on && t < t_off) w[1] = force_magnitude;
    return w;
  };

  Vector3 rpy = Vector3::Zero();
  double p_z = cfg.base.h_des;
  Vector6 comp = Vector6::Zero();
  LeaningResult res;
  res.stabilized = true;
  for (double t = 0.0; t < t_end; t += cfg.dt) {
    WrenchObservation obs;
    for (double tau : cfg.generator.horizon_points) {
      const Vector6 w_world = profile(t + tau);
      const Matrix3 R_T = Pose::rpyToRotation(rpy).transpose();
      Vector6 wb;
      wb.head<3>() = R_T * w_world.head<3>();
      wb.tail<3>() = R_T * w_world.tail<3>();
      obs.predictions.push_back(wb);
    }
    const Vector6 what = ctrl->compensationTarget(obs);
    const Vector6 comp_target = -cfg.base.admittance * what;
    comp += cfg.dt / cfg.base.actuation_lag * (comp_target - comp);

    Vector6 wb_applied;
    const Matrix3 R_T = Pose::rpyToRotation(rpy).transpose();
    const Vector6 w_world = profile(t);
    wb_applied.head<3>() = R_T * w_world.head<3>();
    wb_applied.tail<3>() = R_T * w_world.tail<3>();
    const Vector6 d = cfg.base.admittance * wb_applied;

    rpy[0] += cfg.dt * (-cfg.base.kappa[1] * rpy[0] + d[3] + comp[3]);
    rpy[1] += cfg.dt * (-cfg.base.kappa[2] * rpy[1] + d[4] + comp[4]);
    p_z += cfg.dt * (-cfg.base.kappa[0] * (p_z - cfg.base.h_des) + d[2] + comp[2]);

    const double tilt = tilt_angle(rpy);
    res.peak_tilt = std::max(res.peak_tilt, tilt);
    if (t < t_on) res.preonset_compensation = std::max(res.preonset_compensation, comp.norm());
    if (tilt > cfg.lean_tilt_limit) res.stabilized = false;
  }
  return res;
}

/// Sweep the step force in 10 N increments; returns the largest stabilized
/// magnitude per the leaning protocol.
inline double max_stabilized_force(ControllerKind controller, const SimConfig& cfg = SimConfig{},
                                   double cap = 3000.0) {
  double best = 0.0;
  for (double f = 0.0; f <= cap + 1e-9; f += 10.0) {
    if (run_leaning(f, controller, cfg).stabilized) best = f;
    else break;
  }
  return best;
}

/// Frequency sweep: the shoulder-rotation joint follows (pi/2) sin(omega t);
/// the joint-reference cost replaces EE tracking.
inline ScenarioResult run_frequency_sweep_point(const RobotModel& model, ControllerKind controller,
                                                double omega, std::uint64_t seed, double duration,
                                                const SimConfig& cfg_in = SimConfig{}) {
  OcpDefinition def = make_scenario_ocp(model);
  def.has_joint_reference = true;
  def.joint_reference_index = 0;
  // stiff enough that the commanded amplitude survives at 5 rad/s; otherwise
  // the input cost attenuates the swing and the disturbance stops growing with
  // frequency
  def.w_joint_reference = 5000.0;
  def.joint_reference = [omega](double t) { return 0.5 * M_PI * std::sin(omega * t); };
  def.has_base_reference = true;
  def.base_reference = Vector6::Zero();
  def.base_reference[2] = def.h_des;
  def.w_base = (Vector6() << 10, 10, 0, 0, 0, 10).finished();

  Simulation sim(cfg_in, def, controller, seed);
  sim.run(duration);
  return {sim.trace(), sim.metrics()};
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"mean_abs_tilt", m.mean_abs_tilt},
          {"mean_ang_vel_magnitude_rollpitch", m.mean_ang_vel_magnitude_rollpitch},
          {"mean_lin_vel_tracking_error", m.mean_lin_vel_tracking_error},
          {"fall_count", m.fall_count},
          {"time_before_falling", m.time_before_falling}};
}

inline nlohmann::json record_to_json(const SimStepRecord& r) {
  auto vec = [](const auto& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  nlohmann::json j;
  j["time"] = r.time;
  j["base_position"] = vec(r.base_position);
  j["base_rpy"] = vec(r.base_rpy);
  j["base_lin_vel"] = vec(r.base_lin_vel);
  j["base_ang_vel"] = vec(r.base_ang_vel);
  j["arm_q"] = vec(r.arm_q);
  j["arm_dq"] = vec(r.arm_dq);
  j["observed_wrench"] = vec(r.observed_wrench);
  j["unobserved_wrench"] = vec(r.unobserved_wrench);
  j["plan_wrench"] = vec(r.plan_wrench);
  j["commands"] = vec(r.commands);
  j["ee_position"] = vec(r.ee_position);
  j["ee_reference"] = vec(r.ee_reference);
  return j;
}

}  // namespace wamc
