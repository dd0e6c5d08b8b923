#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "wamc/rng.hpp"
#include "wamc/spatial.hpp"

namespace wamc {

struct GeneratorConfig {
  // Per-dimension wrench bounds [N, N, N, N*m, N*m, N*m]. Non-normative defaults.
  Vector6 w_min = (Vector6() << -60, -60, -60, -20, -20, -20).finished();
  Vector6 w_max = (Vector6() << 60, 60, 60, 20, 20, 20).finished();
  double beta_min = 0.002;
  double beta_max = 0.02;
  double dt = 0.02;
  std::vector<double> horizon_points = {0.0, 0.2, 0.4, 0.6, 0.8};
  double unobserved_force_radius = 1.0;   // scales v_force (kg-like coupling)
  double unobserved_torque_radius = 0.1;  // scales v_torque
  Vector6 noise_std = (Vector6() << 1.0, 1.0, 1.0, 0.2, 0.2, 0.2).finished();
  Vector6 obs_noise_std = (Vector6() << 2.0, 2.0, 2.0, 0.5, 0.5, 0.5).finished();

  void validate() const {
    for (int i = 0; i < 6; ++i)
      if (!(w_min[i] < w_max[i])) throw std::invalid_argument("w_min must be < w_max elementwise");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (beta_min < 0.0 || beta_max < beta_min) throw std::invalid_argument("invalid beta range");
    if (horizon_points.empty() || horizon_points.front() != 0.0)
      throw std::invalid_argument("horizon points must start at 0");
    for (size_t i = 1; i < horizon_points.size(); ++i)
      if (horizon_points[i] <= horizon_points[i - 1])
        throw std::invalid_argument("horizon points must be sorted ascending");
  }
};

/// Per-episode state: six independent quadratics w(s) = a s^2 + b s + c over
/// the next 2 s, refitted every step through three anchors.
struct GeneratorEpisode {
  Vector6 coeff_a, coeff_b, coeff_c;
  Vector6 anchor0, anchor1, anchor2;  // values at offsets 0, 1, 2 s
  double beta = 0.0;
  Vector3 v_force = Vector3::Zero();
  Vector3 v_torque = Vector3::Zero();
  Rng rng{0};
  double current_time = 0.0;

  Vector6 evaluate(double offset) const {
    return coeff_a * (offset * offset) + coeff_b * offset + coeff_c;
  }

  // Decoder target of the unobserved-disturbance model.
  std::pair<double, double> unobservedMagnitudes() const {
    return {v_force.norm(), v_torque.norm()};
  }
};

namespace detail {

// Fit w(s) through (0, w0), (1, w1), (2, w2).
inline void fitQuadratic(GeneratorEpisode& ep) {
  ep.coeff_c = ep.anchor0;
  ep.coeff_a = 0.5 * (ep.anchor2 - 2.0 * ep.anchor1 + ep.anchor0);
  ep.coeff_b = 0.5 * (-ep.anchor2 + 4.0 * ep.anchor1 - 3.0 * ep.anchor0);
}

}  // namespace detail

inline GeneratorEpisode episode_init(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  GeneratorEpisode ep;
  ep.rng = Rng(seed);
  for (int i = 0; i < 6; ++i) {
    ep.anchor0[i] = ep.rng.uniform(cfg.w_min[i], cfg.w_max[i]);
    ep.anchor1[i] = ep.rng.uniform(cfg.w_min[i], cfg.w_max[i]);
    ep.anchor2[i] = ep.rng.uniform(cfg.w_min[i], cfg.w_max[i]);
  }
  detail::fitQuadratic(ep);
  ep.beta = ep.rng.uniform(cfg.beta_min, cfg.beta_max);
  ep.v_force = ep.rng.inBall(cfg.unobserved_force_radius);
  ep.v_torque = ep.rng.inBall(cfg.unobserved_torque_radius);
  ep.current_time = 0.0;
  return ep;
}

/// Advance one timestep: carry the near anchors from the previous polynomial,
/// draw a new far anchor in a beta-scaled band around the old one, clip, refit.
inline void episode_step(GeneratorEpisode& ep, const GeneratorConfig& cfg) {
  const Vector6 w0 = ep.evaluate(cfg.dt);
  const Vector6 w1 = ep.evaluate(1.0 + cfg.dt);
  Vector6 w2;
  for (int i = 0; i < 6; ++i) {
    const double lo = ep.anchor2[i] - ep.beta * std::abs(cfg.w_min[i]);
    const double hi = ep.anchor2[i] + ep.beta * std::abs(cfg.w_max[i]);
    w2[i] = std::clamp(ep.rng.uniform(lo, hi), cfg.w_min[i], cfg.w_max[i]);
  }
  ep.anchor0 = w0;
  ep.anchor1 = w1;
  ep.anchor2 = w2;
  detail::fitQuadratic(ep);
  ep.current_time += cfg.dt;
}

/// Wrench applied to the robot this step, world frame.
inline Wrench observed_wrench(const GeneratorEpisode& ep) {
  return Wrench::fromVector(ep.evaluate(0.0), WrenchFrame::World);
}

/// Five-point prediction, rotated into the body frame at the current time.
inline std::vector<Wrench> query_prediction(const GeneratorEpisode& ep, const Pose& base_pose,
                                            const std::vector<double>& offsets) {
  std::vector<Wrench> out;
  out.reserve(offsets.size());
  const Matrix3 R_T = base_pose.rotation().transpose();
  for (double tau : offsets) {
    if (tau < 0.0 || tau > 2.0) throw std::invalid_argument("prediction offset outside [0, 2] s");
    const Vector6 w = ep.evaluate(tau);
    Wrench wr;
    wr.frame = WrenchFrame::Base;
    wr.force = R_T * w.head<3>();
    wr.torque = R_T * w.tail<3>();
    out.push_back(wr);
  }
  return out;
}

/// Acceleration-coupled unobserved wrench plus Gaussian residual.
inline Wrench unobserved_disturbance(const GeneratorEpisode& ep, const Vector3& base_lin_acc,
                                     const Vector3& base_ang_acc, const GeneratorConfig& cfg,
                                     Rng& rng) {
  if (!base_lin_acc.allFinite() || !base_ang_acc.allFinite())
    throw std::invalid_argument("non-finite base acceleration");
  Wrench w;
  w.frame = WrenchFrame::World;
  w.force = ep.v_force.cwiseProduct(base_lin_acc);
  w.torque = ep.v_torque.cwiseProduct(base_ang_acc);
  for (int i = 0; i < 3; ++i) w.force[i] += rng.normal(0.0, cfg.noise_std[i]);
  for (int i = 0; i < 3; ++i) w.torque[i] += rng.normal(0.0, cfg.noise_std[3 + i]);
  return w;
}

/// Observation fed to the base controller; identical layout for the generator
/// path (training) and the MPC-plan path (deployment).
struct WrenchObservation {
  std::vector<Vector6> predictions;  // base frame at time 0, ordered by offset
  Vector3 commands = Vector3::Zero();  // v_x, v_y, omega_z
  Vector3 base_linear_velocity = Vector3::Zero();
  Vector3 base_angular_velocity = Vector3::Zero();
};

inline WrenchObservation assemble_generator_observation(const GeneratorEpisode& ep,
                                                        const Pose& base_pose,
                                                        const GeneratorConfig& cfg,
                                                        const Vector3& commands,
                                                        const Vector3& base_lin_vel,
                                                        const Vector3& base_ang_vel) {
  WrenchObservation obs;
  for (const auto& w : query_prediction(ep, base_pose, cfg.horizon_points))
    obs.predictions.push_back(w.vector());
  obs.commands = commands;
  obs.base_linear_velocity = base_lin_vel;
  obs.base_angular_velocity = base_ang_vel;
  return obs;
}

inline WrenchObservation noisify_observation(const WrenchObservation& obs, const GeneratorConfig& cfg,
                                             Rng& rng) {
  WrenchObservation out = obs;
  for (auto& p : out.predictions)
    for (int i = 0; i < 6; ++i) p[i] += rng.normal(0.0, cfg.obs_noise_std[i]);
  return out;
}

inline void to_json(nlohmann::json& j, const WrenchObservation& obs) {
  j = nlohmann::json::object();
  auto preds = nlohmann::json::array();
  for (const auto& p : obs.predictions) {
    auto row = nlohmann::json::array();
    for (int i = 0; i < 6; ++i) row.push_back(p[i]);
    preds.push_back(row);
  }
  j["predictions"] = preds;
  j["commands"] = {obs.commands[0], obs.commands[1], obs.commands[2]};
  j["base_linear_velocity"] = {obs.base_linear_velocity[0], obs.base_linear_velocity[1], obs.base_linear_velocity[2]};
  j["base_angular_velocity"] = {obs.base_angular_velocity[0], obs.base_angular_velocity[1], obs.base_angular_velocity[2]};
}

inline void from_json(const nlohmann::json& j, WrenchObservation& obs) {
  obs.predictions.clear();
  for (const auto& row : j.at("predictions")) {
    Vector6 p;
    for (int i = 0; i < 6; ++i) p[i] = row.at(i).get<double>();
    obs.predictions.push_back(p);
  }
  for (int i = 0; i < 3; ++i) {
    obs.commands[i] = j.at("commands").at(i).get<double>();
    obs.base_linear_velocity[i] = j.at("base_linear_velocity").at(i).get<double>();
    obs.base_angular_velocity[i] = j.at("base_angular_velocity").at(i).get<double>();
  }
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig cfg;
  auto read6 = [&](const char* key, Vector6& out) {
    if (!j.contains(key)) return;
    for (int i = 0; i < 6; ++i) out[i] = j.at(key).at(i).get<double>();
  };
  read6("w_min", cfg.w_min);
  read6("w_max", cfg.w_max);
  read6("noise_std", cfg.noise_std);
  read6("obs_noise_std", cfg.obs_noise_std);
  if (j.contains("beta_range")) {
    cfg.beta_min = j.at("beta_range").at(0).get<double>();
    cfg.beta_max = j.at("beta_range").at(1).get<double>();
  }
  if (j.contains("dt")) cfg.dt = j.at("dt").get<double>();
  if (j.contains("horizon_points")) cfg.horizon_points = j.at("horizon_points").get<std::vector<double>>();
  if (j.contains("unobserved_force_radius")) cfg.unobserved_force_radius = j.at("unobserved_force_radius").get<double>();
  if (j.contains("unobserved_torque_radius")) cfg.unobserved_torque_radius = j.at("unobserved_torque_radius").get<double>();
  cfg.validate();
  return cfg;
}

}  // namespace wamc
