#include <doctest.h>

#include <cmath>
#include <functional>

#include "wamc/model_io.hpp"
#include "wamc/wrench_predict.hpp"

using namespace wamc;

namespace {

// Build a plan whose knots follow analytic base-pose and joint trajectories.
// Joint velocities/accelerations are stored consistently with q so that
// knot-aligned samples reproduce the analytic state exactly.
PlanTrajectory make_plan(const RobotModel& model, double t0, double dt, int steps,
                         const std::function<Vector3(double)>& pos,
                         const std::function<Vector3(double)>& rpy,
                         const std::function<double(double, int)>& q,
                         const std::function<double(double, int)>& dq,
                         const std::function<double(double, int)>& ddq) {
  const int n = model.njoints();
  PlanTrajectory plan;
  for (int k = 0; k <= steps; ++k) {
    const double t = t0 + k * dt;
    plan.times.push_back(t);
    VectorX x(6 + 2 * n);
    x.segment<3>(0) = pos(t);
    x.segment<3>(3) = rpy(t);
    for (int i = 0; i < n; ++i) {
      x[6 + i] = q(t, i);
      x[6 + n + i] = dq(t, i);
    }
    plan.states.push_back(x);
    if (k < steps) {
      VectorX u = VectorX::Zero(3 + n);
      for (int i = 0; i < n; ++i) u[3 + i] = ddq(t, i);
      plan.inputs.push_back(u);
    }
  }
  return plan;
}

PlanTrajectory make_static_plan(const RobotModel& model, const VectorX& q0, double t0 = 0.0,
                                const Vector3& rpy0 = Vector3::Zero()) {
  return make_plan(
      model, t0, 0.1, 10, [](double) { return Vector3(0, 0, 0.6); },
      [rpy0](double) { return rpy0; }, [&](double, int i) { return q0[i]; },
      [](double, int) { return 0.0; }, [](double, int) { return 0.0; });
}

const std::vector<double> kOffsets = {0.0, 0.2, 0.4, 0.6, 0.8};

}  // namespace

TEST_CASE("static plan reproduces the gravity wrench at every offset") {
  const auto model = make_sample_arm();
  const auto plan = make_static_plan(model, model.nominal_posture);
  const auto wp = plan_to_wrench(plan, model, kOffsets);
  REQUIRE(wp.wrenches.size() == kOffsets.size());

  ArmState arm;
  arm.q = model.nominal_posture;
  arm.dq = VectorX::Zero(model.njoints());
  arm.ddq = VectorX::Zero(model.njoints());
  const Wrench ref = rnea_base_wrench(model, Pose::fromRpy(Vector3(0, 0, 0.6), Vector3::Zero()), arm);
  for (const auto& w : wp.wrenches) {
    CHECK((w.head<3>() - ref.force).norm() < 1e-12);
    CHECK((w.tail<3>() - ref.torque).norm() < 1e-12);
  }
}

TEST_CASE("zero-mass model predicts a zero wrench") {
  auto model = make_sample_arm();
  for (auto& l : model.links) {
    l.mass = 0.0;
    l.inertia.setZero();
  }
  const auto plan = make_static_plan(model, model.nominal_posture);
  const auto wp = plan_to_wrench(plan, model, kOffsets);
  for (const auto& w : wp.wrenches) CHECK(w.norm() == 0.0);
}

TEST_CASE("offset zero matches direct inverse dynamics exactly") {
  const auto model = make_sample_arm();
  const double A = 0.5, om = 3.0;
  const auto plan = make_plan(
      model, 0.0, 0.05, 20, [](double) { return Vector3(0.1, -0.2, 0.7); },
      [](double) { return Vector3(0.05, -0.03, 0.4); },
      [&](double t, int i) { return model.nominal_posture[i] + A * std::sin(om * t + i); },
      [&](double t, int i) { return A * om * std::cos(om * t + i); },
      [&](double t, int i) { return -A * om * om * std::sin(om * t + i); });
  const auto wp = plan_to_wrench(plan, model, {0.0});

  ArmState arm;
  const int n = model.njoints();
  arm.q.resize(n);
  arm.dq.resize(n);
  arm.ddq.resize(n);
  for (int i = 0; i < n; ++i) {
    arm.q[i] = model.nominal_posture[i] + A * std::sin(static_cast<double>(i));
    arm.dq[i] = A * om * std::cos(static_cast<double>(i));
    arm.ddq[i] = -A * om * om * std::sin(static_cast<double>(i));
  }
  const Pose pose = Pose::fromRpy(Vector3(0.1, -0.2, 0.7), Vector3(0.05, -0.03, 0.4));
  const Wrench ref = rnea_base_wrench(model, pose, arm);
  CHECK((wp.wrenches[0].head<3>() - ref.force).norm() < 1e-12);
  CHECK((wp.wrenches[0].tail<3>() - ref.torque).norm() < 1e-12);
}

TEST_CASE("oscillating plan matches the inverse-dynamics oracle at knot-aligned offsets") {
  const auto model = make_sample_arm();
  const double A = 0.4, om = 2.5;
  const auto q = [&](double t, int i) { return model.nominal_posture[i] + A * std::sin(om * t + 0.3 * i); };
  const auto dq = [&](double t, int i) { return A * om * std::cos(om * t + 0.3 * i); };
  const auto ddq = [&](double t, int i) { return -A * om * om * std::sin(om * t + 0.3 * i); };
  const auto pos = [](double t) { return Vector3(0.02 * t, 0.0, 0.65); };
  const auto rpy = [](double t) { return Vector3(0.0, 0.0, 0.1 * t); };
  // knot spacing 0.2 so every requested offset lands on a knot
  const auto plan = make_plan(model, 0.0, 0.2, 5, pos, rpy, q, dq, ddq);
  const auto wp = plan_to_wrench(plan, model, kOffsets);

  const Matrix3 R0_T = Pose::fromRpy(pos(0), rpy(0)).rotation().transpose();
  const int n = model.njoints();
  for (size_t s = 0; s < kOffsets.size(); ++s) {
    const double t = kOffsets[s];
    ArmState arm;
    arm.q.resize(n);
    arm.dq.resize(n);
    arm.ddq.resize(n);
    for (int i = 0; i < n; ++i) {
      arm.q[i] = q(t, i);
      arm.dq[i] = dq(t, i);
      arm.ddq[i] = ddq(t, i);
    }
    const Pose pose = Pose::fromRpy(pos(t), rpy(t));
    const Wrench w = rnea_base_wrench(model, pose, arm);
    Vector6 ref;
    ref.head<3>() = R0_T * (pose.rotation() * w.force);
    ref.tail<3>() = R0_T * (pose.rotation() * w.torque);
    CHECK((wp.wrenches[s] - ref).norm() < 1e-9);
  }
}

TEST_CASE("samples are re-expressed in the body frame at offset zero") {
  const auto model = make_sample_arm();
  // yaw ramps linearly; the gravity wrench in a yawed body frame differs from
  // the world expression by exactly the relative rotation
  const auto plan = make_plan(
      model, 0.0, 0.2, 5, [](double) { return Vector3(0, 0, 0.6); },
      [](double t) { return Vector3(0, 0, 0.5 * t); },
      [&](double, int i) { return model.nominal_posture[i]; }, [](double, int) { return 0.0; },
      [](double, int) { return 0.0; });
  const auto wp = plan_to_wrench(plan, model, {0.0, 0.4});

  ArmState arm;
  arm.q = model.nominal_posture;
  arm.dq = VectorX::Zero(model.njoints());
  arm.ddq = VectorX::Zero(model.njoints());
  const Pose p0 = Pose::fromRpy(Vector3(0, 0, 0.6), Vector3::Zero());
  const Pose p1 = Pose::fromRpy(Vector3(0, 0, 0.6), Vector3(0, 0, 0.2));
  const Wrench w1 = rnea_base_wrench(model, p1, arm);
  const Matrix3 R_rel = p0.rotation().transpose() * p1.rotation();
  CHECK((wp.wrenches[1].head<3>() - R_rel * w1.force).norm() < 1e-12);
  CHECK((wp.wrenches[1].tail<3>() - R_rel * w1.torque).norm() < 1e-12);
}

TEST_CASE("reference time selects the matching plan segment") {
  const auto model = make_sample_arm();
  const double A = 0.3, om = 2.0;
  const auto q = [&](double t, int i) { return model.nominal_posture[i] + A * std::sin(om * t + i); };
  const auto dq = [&](double t, int i) { return A * om * std::cos(om * t + i); };
  const auto ddq = [&](double t, int i) { return -A * om * om * std::sin(om * t + i); };
  const auto pos = [](double) { return Vector3(0, 0, 0.6); };
  const auto rpy = [](double) { return Vector3::Zero().eval(); };
  const auto plan = make_plan(model, 0.0, 0.2, 10, pos, rpy, q, dq, ddq);

  const auto shifted = plan_to_wrench(plan, model, {0.0, 0.2}, 0.4);
  const auto direct = plan_to_wrench(plan, model, {0.4, 0.6});
  CHECK((shifted.wrenches[0] - direct.wrenches[0]).norm() < 1e-12);
  CHECK((shifted.wrenches[1] - direct.wrenches[1]).norm() < 1e-12);
}

TEST_CASE("offsets beyond the plan horizon are rejected") {
  const auto model = make_sample_arm();
  const auto plan = make_static_plan(model, model.nominal_posture);  // 1 s horizon
  CHECK_THROWS_AS(plan_to_wrench(plan, model, {0.0, 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(plan_to_wrench(plan, model, {0.4}, 0.8), std::invalid_argument);
  CHECK_THROWS_AS(plan_to_wrench(plan, model, {0.0}, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(plan_to_wrench(PlanTrajectory{}, model, {0.0}), std::invalid_argument);
}

TEST_CASE("plan observations are interchangeable with generator observations") {
  const auto model = make_sample_arm();
  const auto plan = make_static_plan(model, model.nominal_posture);
  const auto wp = plan_to_wrench(plan, model, kOffsets);
  const auto obs = assemble_observation(wp, Vector3(0.1, 0.0, 0.05), Vector3(0.02, 0, 0),
                                        Vector3(0, 0, 0.01));
  REQUIRE(obs.predictions.size() == kOffsets.size());
  CHECK(obs.commands == Vector3(0.1, 0.0, 0.05));

  // same wire format as the generator path
  const nlohmann::json j = obs;
  const auto back = j.get<WrenchObservation>();
  REQUIRE(back.predictions.size() == obs.predictions.size());
  for (size_t i = 0; i < obs.predictions.size(); ++i)
    CHECK((back.predictions[i] - obs.predictions[i]).norm() == 0.0);
  CHECK((back.commands - obs.commands).norm() == 0.0);
  CHECK((back.base_linear_velocity - obs.base_linear_velocity).norm() == 0.0);
  CHECK((back.base_angular_velocity - obs.base_angular_velocity).norm() == 0.0);
}

TEST_CASE("wrench plan serialization carries offsets, samples, and source") {
  const auto model = make_sample_arm();
  const auto plan = make_static_plan(model, model.nominal_posture);
  const auto wp = plan_to_wrench(plan, model, kOffsets);
  const auto j = wrench_plan_to_json(wp);
  CHECK(j["source"] == "mpc_plan");
  CHECK(j["offsets"].size() == kOffsets.size());
  CHECK(j["wrenches"].size() == kOffsets.size());
  for (size_t s = 0; s < kOffsets.size(); ++s)
    for (int i = 0; i < 6; ++i)
      CHECK(j["wrenches"][s][i].get<double>() == wp.wrenches[s][i]);
}
