#pragma once

#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "wamc/ocp.hpp"
#include "wamc/spatial.hpp"
#include "wamc/wrenchgen.hpp"

namespace wamc {

enum class WrenchSource { MpcPlan, Generator };

/// Predicted base-wrench samples at fixed offsets, all expressed in the body
/// frame at offset 0.
struct WrenchPlan {
  std::vector<double> offsets;
  std::vector<Vector6> wrenches;
  WrenchSource source = WrenchSource::MpcPlan;
};

namespace detail {

// Cubic Hermite for joint positions (slopes = joint velocities), linear for
// velocities and accelerations, linear for the base pose coordinates.
struct PlanSample {
  Pose base_pose;
  ArmState arm;
};

inline PlanSample sample_plan(const PlanTrajectory& plan, const StateLayout& L, double t) {
  const auto& ts = plan.times;
  const int K = static_cast<int>(plan.inputs.size());
  size_t k = 0;
  if (t >= ts[K - 1]) k = K - 1;
  else {
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    k = static_cast<size_t>(std::max<std::ptrdiff_t>(0, it - ts.begin() - 1));
  }
  const double h = ts[k + 1] - ts[k];
  const double s = std::clamp((t - ts[k]) / h, 0.0, 1.0);

  const VectorX& x0 = plan.states[k];
  const VectorX& x1 = plan.states[k + 1];
  const int n = L.n_joints;

  PlanSample out;
  out.arm.q.resize(n);
  out.arm.dq.resize(n);
  out.arm.ddq.resize(n);

  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  for (int i = 0; i < n; ++i) {
    const double q0 = x0[6 + i], q1 = x1[6 + i];
    const double w0 = x0[6 + n + i], w1 = x1[6 + n + i];
    out.arm.q[i] = h00 * q0 + h10 * h * w0 + h01 * q1 + h11 * h * w1;
    out.arm.dq[i] = (1.0 - s) * w0 + s * w1;
  }
  const VectorX& u0 = plan.inputs[k];
  const VectorX u1 = (k + 1 < plan.inputs.size()) ? plan.inputs[k + 1] : plan.inputs[k];
  for (int i = 0; i < n; ++i) out.arm.ddq[i] = (1.0 - s) * u0[3 + i] + s * u1[3 + i];

  const Vector3 p = (1.0 - s) * L.position(x0) + s * L.position(x1);
  const Vector3 rpy = (1.0 - s) * L.rpy(x0) + s * L.rpy(x1);
  out.base_pose = Pose::fromRpy(p, rpy);
  return out;
}

}  // namespace detail

/// Evaluate the planned base wrench at each offset via inverse dynamics and
/// rotate every sample into the body frame at offset 0.
inline WrenchPlan plan_to_wrench(const PlanTrajectory& plan, const RobotModel& model,
                                 const std::vector<double>& offsets,
                                 std::optional<double> now = std::nullopt) {
  if (plan.states.empty() || plan.inputs.empty()) throw std::invalid_argument("empty plan");
  const StateLayout L{model.njoints()};
  const double t_s = now.value_or(plan.startTime());
  if (t_s < plan.startTime() - 1e-12) throw std::invalid_argument("reference time before plan start");
  for (double tau : offsets)
    if (t_s + tau > plan.endTime() + 1e-12)
      throw std::invalid_argument("prediction offset beyond plan horizon");

  const Pose base0 = detail::sample_plan(plan, L, t_s).base_pose;
  const Matrix3 R0_T = base0.rotation().transpose();

  WrenchPlan wp;
  wp.source = WrenchSource::MpcPlan;
  wp.offsets = offsets;
  for (double tau : offsets) {
    const auto sample = detail::sample_plan(plan, L, t_s + tau);
    const Wrench w = rnea_base_wrench(model, sample.base_pose, sample.arm);
    // base frame at time tau -> world -> base frame at time 0 (rotation only,
    // matching the generator's observation convention)
    const Matrix3 R_tau = sample.base_pose.rotation();
    Vector6 v;
    v.head<3>() = R0_T * (R_tau * w.force);
    v.tail<3>() = R0_T * (R_tau * w.torque);
    wp.wrenches.push_back(v);
  }
  return wp;
}

inline WrenchObservation assemble_observation(const WrenchPlan& wp, const Vector3& commands,
                                              const Vector3& base_lin_vel,
                                              const Vector3& base_ang_vel) {
  WrenchObservation obs;
  obs.predictions = wp.wrenches;
  obs.commands = commands;
  obs.base_linear_velocity = base_lin_vel;
  obs.base_angular_velocity = base_ang_vel;
  return obs;
}

inline nlohmann::json wrench_plan_to_json(const WrenchPlan& wp) {
  nlohmann::json j;
  j["offsets"] = wp.offsets;
  auto arr = nlohmann::json::array();
  for (const auto& w : wp.wrenches) arr.push_back(std::vector<double>(w.data(), w.data() + 6));
  j["wrenches"] = arr;
  j["source"] = wp.source == WrenchSource::MpcPlan ? "mpc_plan" : "generator";
  return j;
}

}  // namespace wamc
