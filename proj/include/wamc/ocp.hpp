#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "wamc/spatial.hpp"

namespace wamc {

// State layout: [p_x, p_y, p_z, r_x, r_y, r_z, theta_1..N, omega_1..N]
// Input layout: [v_x, v_y, omega_z, alpha_1..N]

struct StateLayout {
  int n_joints = 0;
  int nx() const { return 6 + 2 * n_joints; }
  int nu() const { return 3 + n_joints; }

  Vector3 position(const VectorX& x) const { return x.segment<3>(0); }
  Vector3 rpy(const VectorX& x) const { return x.segment<3>(3); }
  VectorX theta(const VectorX& x) const { return x.segment(6, n_joints); }
  VectorX omega(const VectorX& x) const { return x.segment(6 + n_joints, n_joints); }
  VectorX alpha(const VectorX& u) const { return u.segment(3, n_joints); }

  Pose basePose(const VectorX& x) const { return Pose::fromRpy(position(x), rpy(x)); }
};

struct RelaxedBarrier {
  double mu = 1e-3;
  double delta = 0.05;

  // -mu ln(h) for h > delta, quadratic extension below.
  double value(double h) const {
    if (h > delta) return -mu * std::log(h);
    const double z = (h - 2.0 * delta) / delta;
    return 0.5 * mu * (z * z - 1.0) - mu * std::log(delta);
  }
  double derivative(double h) const {
    if (h > delta) return -mu / h;
    return mu * (h - 2.0 * delta) / (delta * delta);
  }
  double secondDerivative(double h) const {
    if (h > delta) return mu / (h * h);
    return mu / (delta * delta);
  }
};

struct OcpDefinition {
  RobotModel model;
  Vector3 kappa = Vector3(5.0, 10.0, 10.0);  // height, roll, pitch decay (1/s)
  double h_des = 0.5;
  double horizon = 1.0;
  double dt = 0.01;

  Vector3 w_ee = Vector3(200.0, 200.0, 200.0);
  VectorX w_input;   // dim 3+N
  VectorX w_theta;   // dim N
  VectorX w_omega;   // dim N
  RelaxedBarrier barrier;

  std::function<Vector3(double)> ee_reference;  // world-frame EE target vs absolute time

  // Optional base reference (Experiment-2 style: drive the base to a pose).
  bool has_base_reference = false;
  Vector6 base_reference = Vector6::Zero();  // [p_x,p_y,p_z,r_x,r_y,r_z] targets
  Vector6 w_base = Vector6::Zero();

  // Optional joint reference replacing the EE tracking cost (frequency sweep).
  bool has_joint_reference = false;
  int joint_reference_index = 0;
  double w_joint_reference = 0.0;
  std::function<double(double)> joint_reference;

  int max_iterations = 50;
  double convergence_tol = 1e-7;

  StateLayout layout() const { return StateLayout{model.njoints()}; }

  void setDefaultWeights() {
    const int n = model.njoints();
    w_input = VectorX::Constant(3 + n, 1.0);
    w_input.head<3>() = Vector3(10.0, 10.0, 10.0);
    w_theta = VectorX::Constant(n, 1.0);
    w_omega = VectorX::Constant(n, 0.2);
  }
};

// ---------------------------------------------------------------------------
// Dynamics (first-order base + double-integrator joints). Linear in (x, u).

inline VectorX ocp_dynamics(const VectorX& x, const VectorX& u, const OcpDefinition& def) {
  const auto L = def.layout();
  if (x.size() != L.nx() || u.size() != L.nu()) throw std::invalid_argument("ocp dimension mismatch");
  VectorX dx(L.nx());
  dx[0] = u[0];
  dx[1] = u[1];
  dx[2] = -def.kappa[0] * (x[2] - def.h_des);
  dx[3] = -def.kappa[1] * x[3];
  dx[4] = -def.kappa[2] * x[4];
  dx[5] = u[2];
  dx.segment(6, L.n_joints) = L.omega(x);
  dx.segment(6 + L.n_joints, L.n_joints) = L.alpha(u);
  return dx;
}

inline void ocp_dynamics_jacobians(const OcpDefinition& def, Eigen::MatrixXd& A, Eigen::MatrixXd& B) {
  const auto L = def.layout();
  A = Eigen::MatrixXd::Zero(L.nx(), L.nx());
  B = Eigen::MatrixXd::Zero(L.nx(), L.nu());
  A(2, 2) = -def.kappa[0];
  A(3, 3) = -def.kappa[1];
  A(4, 4) = -def.kappa[2];
  for (int i = 0; i < L.n_joints; ++i) A(6 + i, 6 + L.n_joints + i) = 1.0;
  B(0, 0) = 1.0;
  B(1, 1) = 1.0;
  B(5, 2) = 1.0;
  for (int i = 0; i < L.n_joints; ++i) B(6 + L.n_joints + i, 3 + i) = 1.0;
}

namespace detail {

// d(Rz(y)Ry(p)Rx(r))/d{r,p,y}
inline std::array<Matrix3, 3> rpyRotationDerivatives(const Vector3& rpy) {
  const double r = rpy[0], p = rpy[1], y = rpy[2];
  Matrix3 Rx, Ry, Rz, dRx, dRy, dRz;
  Rx = Eigen::AngleAxisd(r, Vector3::UnitX()).toRotationMatrix();
  Ry = Eigen::AngleAxisd(p, Vector3::UnitY()).toRotationMatrix();
  Rz = Eigen::AngleAxisd(y, Vector3::UnitZ()).toRotationMatrix();
  dRx << 0, 0, 0, 0, -std::sin(r), -std::cos(r), 0, std::cos(r), -std::sin(r);
  dRy << -std::sin(p), 0, std::cos(p), 0, 0, 0, -std::cos(p), 0, -std::sin(p);
  dRz << -std::sin(y), -std::cos(y), 0, std::cos(y), -std::sin(y), 0, 0, 0, 0;
  return {Rz * Ry * dRx, Rz * dRy * Rx, dRz * Ry * Rx};
}

}  // namespace detail

/// World EE position and its Jacobian w.r.t. the full OCP state.
inline Vector3 ee_position_world(const OcpDefinition& def, const VectorX& x,
                                 Eigen::MatrixXd* jac = nullptr) {
  const auto L = def.layout();
  Eigen::Matrix3Xd Jq;
  const Vector3 b = ee_position_in_base(def.model, L.theta(x), jac ? &Jq : nullptr);
  const Vector3 rpy = L.rpy(x);
  const Matrix3 R = Pose::rpyToRotation(rpy);
  const Vector3 p_ee = L.position(x) + R * b;
  if (jac) {
    jac->setZero(3, L.nx());
    jac->block<3, 3>(0, 0) = Matrix3::Identity();
    const auto dR = detail::rpyRotationDerivatives(rpy);
    for (int k = 0; k < 3; ++k) jac->col(3 + k) = dR[k] * b;
    jac->block(0, 6, 3, L.n_joints) = R * Jq;
  }
  return p_ee;
}

struct CostExpansion {
  double value = 0.0;
  VectorX lx, lu;
  Eigen::MatrixXd lxx, luu;  // Gauss-Newton for the EE term; l_ux is zero by structure
};

namespace detail {

inline void stateCostTerms(const OcpDefinition& def, const VectorX& x, double t, CostExpansion& c,
                           bool with_derivatives) {
  const auto L = def.layout();
  const int n = L.n_joints;

  if (!def.has_joint_reference && def.ee_reference) {
    Eigen::MatrixXd J;
    const Vector3 p_ee = ee_position_world(def, x, with_derivatives ? &J : nullptr);
    const Vector3 e = p_ee - def.ee_reference(t);
    const Matrix3 W = def.w_ee.asDiagonal();
    c.value += e.dot(W * e);
    if (with_derivatives) {
      c.lx += 2.0 * J.transpose() * (W * e);
      c.lxx += 2.0 * J.transpose() * W * J;
    }
  }
  if (def.has_joint_reference) {
    const int j = def.joint_reference_index;
    const double e = x[6 + j] - def.joint_reference(t);
    c.value += def.w_joint_reference * e * e;
    if (with_derivatives) {
      c.lx[6 + j] += 2.0 * def.w_joint_reference * e;
      c.lxx(6 + j, 6 + j) += 2.0 * def.w_joint_reference;
    }
  }
  for (int i = 0; i < n; ++i) {
    const double e = x[6 + i] - def.model.nominal_posture[i];
    c.value += def.w_theta[i] * e * e;
    const double w = x[6 + n + i];
    c.value += def.w_omega[i] * w * w;
    if (with_derivatives) {
      c.lx[6 + i] += 2.0 * def.w_theta[i] * e;
      c.lxx(6 + i, 6 + i) += 2.0 * def.w_theta[i];
      c.lx[6 + n + i] += 2.0 * def.w_omega[i] * w;
      c.lxx(6 + n + i, 6 + n + i) += 2.0 * def.w_omega[i];
    }
  }
  for (int i = 0; i < n; ++i) {
    const auto& joint = def.model.joints[i];
    const double h_lo = x[6 + i] - joint.position_lower;
    const double h_hi = joint.position_upper - x[6 + i];
    c.value += def.barrier.value(h_lo) + def.barrier.value(h_hi);
    if (with_derivatives) {
      c.lx[6 + i] += def.barrier.derivative(h_lo) - def.barrier.derivative(h_hi);
      c.lxx(6 + i, 6 + i) += def.barrier.secondDerivative(h_lo) + def.barrier.secondDerivative(h_hi);
    }
  }
  if (def.has_base_reference) {
    for (int i = 0; i < 6; ++i) {
      const double e = x[i] - def.base_reference[i];
      c.value += def.w_base[i] * e * e;
      if (with_derivatives) {
        c.lx[i] += 2.0 * def.w_base[i] * e;
        c.lxx(i, i) += 2.0 * def.w_base[i];
      }
    }
  }
}

}  // namespace detail

inline CostExpansion ocp_cost(const OcpDefinition& def, const VectorX& x, const VectorX& u, double t,
                              bool with_derivatives = true) {
  const auto L = def.layout();
  CostExpansion c;
  if (with_derivatives) {
    c.lx = VectorX::Zero(L.nx());
    c.lu = VectorX::Zero(L.nu());
    c.lxx = Eigen::MatrixXd::Zero(L.nx(), L.nx());
    c.luu = Eigen::MatrixXd::Zero(L.nu(), L.nu());
  }
  detail::stateCostTerms(def, x, t, c, with_derivatives);
  for (int i = 0; i < L.nu(); ++i) {
    c.value += def.w_input[i] * u[i] * u[i];
    if (with_derivatives) {
      c.lu[i] += 2.0 * def.w_input[i] * u[i];
      c.luu(i, i) += 2.0 * def.w_input[i];
    }
  }
  return c;
}

/// Terminal cost: the state portion of the running cost at t_f.
inline CostExpansion ocp_cost_terminal(const OcpDefinition& def, const VectorX& x, double t,
                                       bool with_derivatives = true) {
  const auto L = def.layout();
  CostExpansion c;
  if (with_derivatives) {
    c.lx = VectorX::Zero(L.nx());
    c.lxx = Eigen::MatrixXd::Zero(L.nx(), L.nx());
  }
  detail::stateCostTerms(def, x, t, c, with_derivatives);
  return c;
}

// ---------------------------------------------------------------------------

struct PlanTrajectory {
  std::vector<double> times;           // K+1 knot times (absolute)
  std::vector<VectorX> states;         // K+1
  std::vector<VectorX> inputs;         // K
  std::vector<Eigen::MatrixXd> gains;  // K feedback gains (nu x nx)
  double total_cost = 0.0;
  std::vector<double> cost_history;  // cost after each accepted iteration
  int iterations = 0;
  bool degraded = false;

  double startTime() const { return times.front(); }
  double endTime() const { return times.back(); }

  VectorX stateAt(double t) const { return interpolate(times, states, t); }
  VectorX inputAt(double t) const {
    if (inputs.empty()) throw std::invalid_argument("empty plan");
    if (t >= times[inputs.size() - 1]) return inputs.back();
    return interpolate(std::vector<double>(times.begin(), times.begin() + inputs.size()), inputs, t);
  }

  static VectorX interpolate(const std::vector<double>& ts, const std::vector<VectorX>& vs, double t) {
    if (vs.empty()) throw std::invalid_argument("empty trajectory");
    if (t <= ts.front()) return vs.front();
    if (t >= ts.back()) return vs.back();
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const size_t k = static_cast<size_t>(it - ts.begin()) - 1;
    const double s = (t - ts[k]) / (ts[k + 1] - ts[k]);
    return (1.0 - s) * vs[k] + s * vs[k + 1];
  }
};

namespace detail {

struct DiscreteDynamics {
  Eigen::MatrixXd Ad, Bd;
  VectorX cd;

  VectorX step(const VectorX& x, const VectorX& u) const { return Ad * x + Bd * u + cd; }
};

// Exact RK4 discretization of the (linear) continuous dynamics.
inline DiscreteDynamics discretize(const OcpDefinition& def) {
  const auto L = def.layout();
  Eigen::MatrixXd A, B;
  ocp_dynamics_jacobians(def, A, B);
  VectorX c = ocp_dynamics(VectorX::Zero(L.nx()), VectorX::Zero(L.nu()), def);

  auto rk4 = [&](const VectorX& x, const VectorX& u) -> VectorX {
    auto f = [&](const VectorX& xi) -> VectorX { return A * xi + B * u + c; };
    const VectorX k1 = f(x);
    const VectorX k2 = f(x + 0.5 * def.dt * k1);
    const VectorX k3 = f(x + 0.5 * def.dt * k2);
    const VectorX k4 = f(x + def.dt * k3);
    return x + def.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  DiscreteDynamics d;
  d.cd = rk4(VectorX::Zero(L.nx()), VectorX::Zero(L.nu()));
  d.Ad.resize(L.nx(), L.nx());
  d.Bd.resize(L.nx(), L.nu());
  for (int j = 0; j < L.nx(); ++j)
    d.Ad.col(j) = rk4(VectorX::Unit(L.nx(), j), VectorX::Zero(L.nu())) - d.cd;
  for (int j = 0; j < L.nu(); ++j)
    d.Bd.col(j) = rk4(VectorX::Zero(L.nx()), VectorX::Unit(L.nu(), j)) - d.cd;
  return d;
}

inline double rollout(const OcpDefinition& def, const DiscreteDynamics& dyn, const VectorX& x0,
                      double t0, const std::vector<VectorX>& inputs, std::vector<VectorX>& states) {
  const int K = static_cast<int>(inputs.size());
  states.assign(K + 1, VectorX());
  states[0] = x0;
  double cost = 0.0;
  for (int k = 0; k < K; ++k) {
    cost += ocp_cost(def, states[k], inputs[k], t0 + k * def.dt, false).value * def.dt;
    states[k + 1] = dyn.step(states[k], inputs[k]);
    if (!states[k + 1].allFinite()) return std::numeric_limits<double>::infinity();
  }
  cost += ocp_cost_terminal(def, states[K], t0 + K * def.dt, false).value;
  return cost;
}

}  // namespace detail

/// iLQR with line search and backward-pass regularization.
inline PlanTrajectory ocp_solve(const OcpDefinition& def, const VectorX& x0, double t_start = 0.0,
                                const PlanTrajectory* warm_start = nullptr) {
  const auto L = def.layout();
  if (x0.size() != L.nx() || !x0.allFinite()) throw std::invalid_argument("invalid initial state");
  const int K = std::max(1, static_cast<int>(std::round(def.horizon / def.dt)));
  const auto dyn = detail::discretize(def);

  std::vector<VectorX> U(K, VectorX::Zero(L.nu()));
  if (warm_start && !warm_start->inputs.empty()) {
    for (int k = 0; k < K; ++k) U[k] = warm_start->inputAt(t_start + k * def.dt);
  }

  std::vector<VectorX> X;
  double cost = detail::rollout(def, dyn, x0, t_start, U, X);
  if (!std::isfinite(cost)) throw std::runtime_error("ocp_solve: initial rollout diverged");

  std::vector<double> cost_history = {cost};
  std::vector<VectorX> kff(K);
  std::vector<Eigen::MatrixXd> Kfb(K);
  double lambda = 1e-6;
  const double lambda_max = 1e10;
  int iter = 0;
  bool converged = false;

  for (iter = 1; iter <= def.max_iterations; ++iter) {
    // Quadratize cost along the current trajectory.
    std::vector<CostExpansion> lk(K);
    for (int k = 0; k < K; ++k) {
      lk[k] = ocp_cost(def, X[k], U[k], t_start + k * def.dt);
      lk[k].value *= def.dt;
      lk[k].lx *= def.dt;
      lk[k].lu *= def.dt;
      lk[k].lxx *= def.dt;
      lk[k].luu *= def.dt;
    }
    const CostExpansion lf = ocp_cost_terminal(def, X[K], t_start + K * def.dt);

    // Backward pass; bump regularization until the Hessians factor.
    bool backward_ok = false;
    while (!backward_ok && lambda < lambda_max) {
      backward_ok = true;
      VectorX Vx = lf.lx;
      Eigen::MatrixXd Vxx = lf.lxx;
      for (int k = K - 1; k >= 0; --k) {
        const VectorX Qx = lk[k].lx + dyn.Ad.transpose() * Vx;
        const VectorX Qu = lk[k].lu + dyn.Bd.transpose() * Vx;
        const Eigen::MatrixXd Qxx = lk[k].lxx + dyn.Ad.transpose() * Vxx * dyn.Ad;
        const Eigen::MatrixXd Qux = dyn.Bd.transpose() * Vxx * dyn.Ad;
        Eigen::MatrixXd Quu = lk[k].luu + dyn.Bd.transpose() * Vxx * dyn.Bd;
        Quu.diagonal().array() += lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(Quu);
        if (llt.info() != Eigen::Success) {
          backward_ok = false;
          lambda *= 10.0;
          break;
        }
        kff[k] = -llt.solve(Qu);
        Kfb[k] = -llt.solve(Qux);
        Vx = Qx + Kfb[k].transpose() * Quu * kff[k] + Kfb[k].transpose() * Qu + Qux.transpose() * kff[k];
        Vxx = Qxx + Kfb[k].transpose() * Quu * Kfb[k] + Kfb[k].transpose() * Qux + Qux.transpose() * Kfb[k];
        Vxx = 0.5 * (Vxx + Vxx.transpose());
      }
    }
    if (!backward_ok) break;

    // Backtracking line search on total cost.
    bool accepted = false;
    for (double alpha = 1.0; alpha > 1e-4; alpha *= 0.5) {
      std::vector<VectorX> Xnew(K + 1), Unew(K);
      Xnew[0] = x0;
      double cost_new = 0.0;
      bool finite = true;
      for (int k = 0; k < K; ++k) {
        Unew[k] = U[k] + alpha * kff[k] + Kfb[k] * (Xnew[k] - X[k]);
        cost_new += ocp_cost(def, Xnew[k], Unew[k], t_start + k * def.dt, false).value * def.dt;
        Xnew[k + 1] = dyn.step(Xnew[k], Unew[k]);
        if (!Xnew[k + 1].allFinite()) { finite = false; break; }
      }
      if (!finite) continue;
      cost_new += ocp_cost_terminal(def, Xnew[K], t_start + K * def.dt, false).value;
      if (cost_new < cost) {
        const double improvement = cost - cost_new;
        X = std::move(Xnew);
        U = std::move(Unew);
        cost = cost_new;
        cost_history.push_back(cost);
        accepted = true;
        lambda = std::max(lambda * 0.5, 1e-10);
        if (improvement < def.convergence_tol) converged = true;
        break;
      }
    }
    if (!accepted) {
      lambda *= 10.0;
      if (lambda >= lambda_max) { converged = true; break; }  // no further progress possible
      continue;
    }
    if (converged) break;
  }

  PlanTrajectory plan;
  plan.times.resize(K + 1);
  for (int k = 0; k <= K; ++k) plan.times[k] = t_start + k * def.dt;
  plan.states = X;
  plan.inputs = U;
  plan.gains = Kfb;
  plan.total_cost = cost;
  plan.cost_history = std::move(cost_history);
  plan.iterations = std::min(iter, def.max_iterations);
  plan.degraded = !converged && iter > def.max_iterations;
  return plan;
}

/// Receding-horizon wrapper: shifts and warm-starts from the previous plan.
class RecedingHorizonController {
 public:
  explicit RecedingHorizonController(OcpDefinition def) : def_(std::move(def)) {}

  std::pair<VectorX, PlanTrajectory> step(const VectorX& x_measured, double t) {
    const PlanTrajectory* warm = last_plan_ ? &*last_plan_ : nullptr;
    PlanTrajectory plan = ocp_solve(def_, x_measured, t, warm);
    last_plan_ = plan;
    return {plan.inputs.front(), plan};
  }

  const OcpDefinition& definition() const { return def_; }
  OcpDefinition& definition() { return def_; }
  void reset() { last_plan_.reset(); }

 private:
  OcpDefinition def_;
  std::optional<PlanTrajectory> last_plan_;
};

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json plan_to_json(const PlanTrajectory& plan) {
  nlohmann::json j;
  j["times"] = plan.times;
  auto dump = [](const std::vector<VectorX>& vs) {
    auto arr = nlohmann::json::array();
    for (const auto& v : vs) arr.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    return arr;
  };
  j["states"] = dump(plan.states);
  j["inputs"] = dump(plan.inputs);
  j["total_cost"] = plan.total_cost;
  j["iterations"] = plan.iterations;
  j["degraded"] = plan.degraded;
  return j;
}

inline PlanTrajectory plan_from_json(const nlohmann::json& j) {
  PlanTrajectory plan;
  plan.times = j.at("times").get<std::vector<double>>();
  auto load = [](const nlohmann::json& arr) {
    std::vector<VectorX> vs;
    for (const auto& row : arr) {
      const auto vals = row.get<std::vector<double>>();
      vs.push_back(Eigen::Map<const VectorX>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    return vs;
  };
  plan.states = load(j.at("states"));
  plan.inputs = load(j.at("inputs"));
  plan.total_cost = j.at("total_cost").get<double>();
  plan.iterations = j.at("iterations").get<int>();
  plan.degraded = j.at("degraded").get<bool>();
  return plan;
}

inline void apply_ocp_config(OcpDefinition& def, const nlohmann::json& j) {
  if (j.contains("kappa"))
    for (int i = 0; i < 3; ++i) def.kappa[i] = j.at("kappa").at(i).get<double>();
  if (j.contains("h_des")) def.h_des = j.at("h_des").get<double>();
  if (j.contains("horizon")) def.horizon = j.at("horizon").get<double>();
  if (j.contains("dt")) def.dt = j.at("dt").get<double>();
  if (j.contains("w_ee"))
    for (int i = 0; i < 3; ++i) def.w_ee[i] = j.at("w_ee").at(i).get<double>();
  if (j.contains("barrier_mu")) def.barrier.mu = j.at("barrier_mu").get<double>();
  if (j.contains("barrier_delta")) def.barrier.delta = j.at("barrier_delta").get<double>();
  if (j.contains("max_iterations")) def.max_iterations = j.at("max_iterations").get<int>();
  if (j.contains("convergence_tol")) def.convergence_tol = j.at("convergence_tol").get<double>();
}

}  // namespace wamc
