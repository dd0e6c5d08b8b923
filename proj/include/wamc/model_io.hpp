#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "wamc/spatial.hpp"

namespace wamc {

// Robot model JSON schema (all units SI: m, kg, rad, s):
// {
//   "gravity": [0, 0, -9.81],
//   "base_height": 0.5,
//   "base_mount": {"position": [x,y,z], "rpy": [r,p,y]},
//   "ee_transform": {"position": [x,y,z], "rpy": [r,p,y]},
//   "nominal_posture": [q1, ...],
//   "links": [{"mass": m, "com": [x,y,z], "inertia_diag": [ixx,iyy,izz]} | {"inertia": 3x3}],
//   "joints": [{"axis": [x,y,z], "origin": {"position": ..., "rpy": ...},
//               "position_limits": [lo, hi], "velocity_limit": v}]
// }

namespace detail {

inline Vector3 readVec3(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected 3-vector");
  return Vector3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Pose readPose(const nlohmann::json& j) {
  Vector3 pos = j.contains("position") ? readVec3(j.at("position")) : Vector3::Zero();
  Vector3 rpy = j.contains("rpy") ? readVec3(j.at("rpy")) : Vector3::Zero();
  return Pose::fromRpy(pos, rpy);
}

}  // namespace detail

inline RobotModel robot_model_from_json(const nlohmann::json& j) {
  RobotModel m;
  if (j.contains("gravity")) m.gravity = detail::readVec3(j.at("gravity"));
  if (j.contains("base_height")) m.base_height = j.at("base_height").get<double>();
  if (j.contains("base_mount")) m.base_mount = detail::readPose(j.at("base_mount"));
  if (j.contains("ee_transform")) m.ee_transform = detail::readPose(j.at("ee_transform"));

  for (const auto& lj : j.at("links")) {
    LinkProperties l;
    l.mass = lj.at("mass").get<double>();
    l.com = detail::readVec3(lj.at("com"));
    if (lj.contains("inertia_diag")) {
      l.inertia = detail::readVec3(lj.at("inertia_diag")).asDiagonal();
    } else if (lj.contains("inertia")) {
      const auto& ij = lj.at("inertia");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) l.inertia(r, c) = ij.at(r).at(c).get<double>();
    }
    m.links.push_back(l);
  }
  for (const auto& jj : j.at("joints")) {
    JointProperties jp;
    jp.axis = detail::readVec3(jj.at("axis")).normalized();
    if (jj.contains("origin")) jp.parent_transform = detail::readPose(jj.at("origin"));
    if (jj.contains("position_limits")) {
      jp.position_lower = jj.at("position_limits").at(0).get<double>();
      jp.position_upper = jj.at("position_limits").at(1).get<double>();
    }
    if (jj.contains("velocity_limit")) jp.velocity_limit = jj.at("velocity_limit").get<double>();
    m.joints.push_back(jp);
  }

  const int n = m.njoints();
  m.nominal_posture = VectorX::Zero(n);
  if (j.contains("nominal_posture")) {
    const auto& np = j.at("nominal_posture");
    if (static_cast<int>(np.size()) != n) throw std::invalid_argument("nominal_posture size mismatch");
    for (int i = 0; i < n; ++i) m.nominal_posture[i] = np.at(i).get<double>();
  }
  m.validate();
  return m;
}

inline RobotModel load_robot_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  return robot_model_from_json(j);
}

/// 3-dof desk-scale arm: shoulder rotation about x, shoulder flexion and
/// elbow about y. Joint 1 swings the arm laterally, matching the shoulder
/// rotation used in the frequency-sweep scenario.
inline RobotModel make_sample_arm() {
  RobotModel m;
  m.base_height = 0.5;
  m.base_mount = Pose::fromRpy(Vector3(0.2, 0.0, 0.1), Vector3::Zero());

  auto link = [](double mass, const Vector3& com, const Vector3& inertia_diag) {
    LinkProperties l;
    l.mass = mass;
    l.com = com;
    l.inertia = inertia_diag.asDiagonal();
    return l;
  };
  auto joint = [](const Vector3& axis, const Pose& origin, double lo, double hi) {
    JointProperties j;
    j.axis = axis;
    j.parent_transform = origin;
    j.position_lower = lo;
    j.position_upper = hi;
    return j;
  };

  m.joints.push_back(joint(Vector3::UnitX(), Pose::Identity(), -2.6, 2.6));
  m.links.push_back(link(2.0, Vector3(0.0, 0.0, 0.08), Vector3(0.01, 0.01, 0.005)));

  m.joints.push_back(joint(Vector3::UnitY(), Pose::fromRpy(Vector3(0.0, 0.0, 0.15), Vector3::Zero()), -1.8, 1.8));
  m.links.push_back(link(2.5, Vector3(0.15, 0.0, 0.0), Vector3(0.005, 0.03, 0.03)));

  m.joints.push_back(joint(Vector3::UnitY(), Pose::fromRpy(Vector3(0.3, 0.0, 0.0), Vector3::Zero()), -2.4, 2.4));
  m.links.push_back(link(1.5, Vector3(0.15, 0.0, 0.0), Vector3(0.002, 0.02, 0.02)));

  m.ee_transform = Pose::fromRpy(Vector3(0.3, 0.0, 0.0), Vector3::Zero());
  m.nominal_posture = VectorX::Zero(3);
  m.nominal_posture << 0.0, 0.5, -1.0;
  m.validate();
  return m;
}

}  // namespace wamc
