#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace wamc {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using VectorX = Eigen::VectorXd;

/// Rigid-body pose: position plus unit-quaternion orientation.
struct Pose {
  Vector3 position = Vector3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  static Pose Identity() { return Pose{}; }

  static Pose fromRpy(const Vector3& position, const Vector3& rpy) {
    Pose p;
    p.position = position;
    p.orientation = rpyToQuaternion(rpy);
    return p;
  }

  // Extrinsic roll-pitch-yaw about fixed x-y-z: R = Rz(yaw) * Ry(pitch) * Rx(roll).
  static Eigen::Quaterniond rpyToQuaternion(const Vector3& rpy) {
    return Eigen::AngleAxisd(rpy.z(), Vector3::UnitZ()) *
           Eigen::AngleAxisd(rpy.y(), Vector3::UnitY()) *
           Eigen::AngleAxisd(rpy.x(), Vector3::UnitX());
  }

  static Matrix3 rpyToRotation(const Vector3& rpy) { return rpyToQuaternion(rpy).toRotationMatrix(); }

  Matrix3 rotation() const { return orientation.toRotationMatrix(); }

  Pose compose(const Pose& other) const {
    Pose out;
    out.position = position + orientation * other.position;
    out.orientation = (orientation * other.orientation).normalized();
    return out;
  }

  Pose inverse() const {
    Pose out;
    out.orientation = orientation.conjugate();
    out.position = -(out.orientation * position);
    return out;
  }

  Vector3 transformPoint(const Vector3& p) const { return position + orientation * p; }
};

enum class WrenchFrame { World, Base };

/// 6-D force/torque with an explicit frame tag. Sign convention throughout:
/// a wrench predicted for the base is the reaction ON the base FROM the arm.
struct Wrench {
  Vector3 force = Vector3::Zero();
  Vector3 torque = Vector3::Zero();
  WrenchFrame frame = WrenchFrame::World;
  Vector3 application_point = Vector3::Zero();  // in `frame` coordinates

  Vector6 vector() const {
    Vector6 v;
    v << force, torque;
    return v;
  }

  static Wrench fromVector(const Vector6& v, WrenchFrame frame) {
    Wrench w;
    w.force = v.head<3>();
    w.torque = v.tail<3>();
    w.frame = frame;
    return w;
  }
};

struct LinkProperties {
  double mass = 0.0;
  Vector3 com = Vector3::Zero();     // in link frame
  Matrix3 inertia = Matrix3::Zero(); // about the CoM, link frame
};

struct JointProperties {
  Vector3 axis = Vector3::UnitZ();       // in the frame after parent_transform
  Pose parent_transform;                 // parent link frame -> joint frame
  double position_lower = -3.14;
  double position_upper = 3.14;
  double velocity_limit = 10.0;
};

/// Serial-chain arm on a floating base. Link i is the child of joint i.
struct RobotModel {
  std::vector<LinkProperties> links;
  std::vector<JointProperties> joints;
  Pose base_mount;      // base frame -> joint-1 parent frame
  Pose ee_transform;    // last link frame -> end-effector frame
  VectorX nominal_posture;
  Vector3 gravity = Vector3(0, 0, -9.81);
  double base_height = 0.5;  // nominal base height, used as h_des default

  int njoints() const { return static_cast<int>(joints.size()); }

  void validate() const {
    if (links.size() != joints.size()) throw std::invalid_argument("links/joints size mismatch");
    if (nominal_posture.size() != njoints()) throw std::invalid_argument("nominal posture size mismatch");
    for (const auto& l : links) {
      if (l.mass < 0.0) throw std::invalid_argument("negative link mass");
      if ((l.inertia - l.inertia.transpose()).norm() > 1e-9)
        throw std::invalid_argument("inertia not symmetric");
    }
    for (const auto& j : joints) {
      if (!(j.position_lower < j.position_upper)) throw std::invalid_argument("joint limits inverted");
      if (std::abs(j.axis.norm() - 1.0) > 1e-9) throw std::invalid_argument("joint axis not unit");
    }
  }
};

struct ArmState {
  VectorX q;
  VectorX dq;
  VectorX ddq;

  static ArmState Zero(int n) {
    ArmState s;
    s.q = VectorX::Zero(n);
    s.dq = VectorX::Zero(n);
    s.ddq = VectorX::Zero(n);
    return s;
  }
};

namespace detail {

inline void checkArmState(const RobotModel& model, const ArmState& arm) {
  const int n = model.njoints();
  if (arm.q.size() != n || arm.dq.size() != n || arm.ddq.size() != n)
    throw std::invalid_argument("arm state dimension mismatch");
  if (!arm.q.allFinite() || !arm.dq.allFinite() || !arm.ddq.allFinite())
    throw std::invalid_argument("non-finite arm state");
}

// World-frame kinematic sweep with the base held at zero twist/acceleration.
struct LinkKinematics {
  Pose frame;           // world pose of link frame
  Vector3 joint_origin; // world position of joint origin
  Vector3 axis_world;   // joint axis in world
  Vector3 omega;        // link angular velocity
  Vector3 alpha;        // link angular acceleration
  Vector3 a_origin;     // linear acceleration of the joint origin
  Vector3 com_world;    // CoM position
  Vector3 a_com;        // CoM linear acceleration
};

inline std::vector<LinkKinematics> sweep(const RobotModel& model, const Pose& base_pose,
                                         const ArmState& arm) {
  const int n = model.njoints();
  std::vector<LinkKinematics> ks(n);
  Pose parent = base_pose.compose(model.base_mount);
  Vector3 omega_p = Vector3::Zero();
  Vector3 alpha_p = Vector3::Zero();
  Vector3 a_p = Vector3::Zero();
  Vector3 origin_p = parent.position;
  for (int i = 0; i < n; ++i) {
    const auto& joint = model.joints[i];
    const Pose joint_frame = parent.compose(joint.parent_transform);
    const Vector3 z = joint_frame.orientation * joint.axis;
    Pose link = joint_frame;
    link.orientation = (link.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(arm.q[i], joint.axis))).normalized();

    auto& k = ks[i];
    k.frame = link;
    k.joint_origin = joint_frame.position;
    k.axis_world = z;
    k.omega = omega_p + z * arm.dq[i];
    k.alpha = alpha_p + z * arm.ddq[i] + omega_p.cross(z * arm.dq[i]);

    const Vector3 r = k.joint_origin - origin_p;
    k.a_origin = a_p + alpha_p.cross(r) + omega_p.cross(omega_p.cross(r));

    const Vector3 rc = link.orientation * model.links[i].com;
    k.com_world = k.joint_origin + rc;
    k.a_com = k.a_origin + k.alpha.cross(rc) + k.omega.cross(k.omega.cross(rc));

    parent = link;
    omega_p = k.omega;
    alpha_p = k.alpha;
    a_p = k.a_origin;
    origin_p = k.joint_origin;
  }
  return ks;
}

}  // namespace detail

inline Pose forward_kinematics(const RobotModel& model, const Pose& base_pose, const VectorX& q) {
  if (q.size() != model.njoints()) throw std::invalid_argument("q dimension mismatch");
  Pose t = base_pose.compose(model.base_mount);
  for (int i = 0; i < model.njoints(); ++i) {
    t = t.compose(model.joints[i].parent_transform);
    t.orientation = (t.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(q[i], model.joints[i].axis))).normalized();
  }
  return t.compose(model.ee_transform);
}

/// EE position in base frame and its Jacobian w.r.t. joint angles (base frame).
inline Vector3 ee_position_in_base(const RobotModel& model, const VectorX& q,
                                   Eigen::Matrix3Xd* jacobian = nullptr) {
  const int n = model.njoints();
  if (q.size() != n) throw std::invalid_argument("q dimension mismatch");
  ArmState arm = ArmState::Zero(n);
  arm.q = q;
  const auto ks = detail::sweep(model, Pose::Identity(), arm);
  Pose ee = (n > 0 ? ks.back().frame : Pose::Identity().compose(model.base_mount)).compose(model.ee_transform);
  if (jacobian != nullptr) {
    jacobian->resize(3, n);
    for (int i = 0; i < n; ++i)
      jacobian->col(i) = ks[i].axis_world.cross(ee.position - ks[i].joint_origin);
  }
  return ee.position;
}

/// Reaction wrench the arm exerts on the base, referenced at the mounting
/// point and shifted to the base origin (geometric center), in base frame.
/// The base is treated as having zero twist and zero acceleration; gravity acts.
inline Wrench rnea_base_wrench(const RobotModel& model, const Pose& base_pose, const ArmState& arm) {
  detail::checkArmState(model, arm);
  const int n = model.njoints();
  const auto ks = detail::sweep(model, base_pose, arm);

  // Backward accumulation of the net force and the moment about the mount.
  const Vector3 mount_w = base_pose.compose(model.base_mount).position;
  Vector3 f = Vector3::Zero();
  Vector3 tau = Vector3::Zero();
  for (int i = 0; i < n; ++i) {
    const auto& k = ks[i];
    const auto& link = model.links[i];
    const Matrix3 I_w = k.frame.rotation() * link.inertia * k.frame.rotation().transpose();
    const Vector3 fi = link.mass * (k.a_com - model.gravity);
    const Vector3 ni = I_w * k.alpha + k.omega.cross(I_w * k.omega);
    f += fi;
    tau += ni + (k.com_world - mount_w).cross(fi);
  }

  // f, tau: what the base must exert on the arm. Reaction on the base is the negation.
  const Matrix3 R_base_T = base_pose.rotation().transpose();
  Wrench w;
  w.frame = WrenchFrame::Base;
  w.force = R_base_T * (-f);
  const Vector3 tau_base_at_mount = R_base_T * (-tau);
  const Vector3 mount_b = model.base_mount.position;
  w.torque = tau_base_at_mount + mount_b.cross(w.force);
  w.application_point = Vector3::Zero();
  return w;
}

/// Joint torques consistent with the given motion (gravity included), base at rest.
inline VectorX rnea_joint_torques(const RobotModel& model, const Pose& base_pose, const ArmState& arm) {
  detail::checkArmState(model, arm);
  const int n = model.njoints();
  const auto ks = detail::sweep(model, base_pose, arm);

  VectorX tau(n);
  Vector3 f_child = Vector3::Zero();
  Vector3 n_child = Vector3::Zero();  // moment about the child joint origin
  Vector3 child_origin = Vector3::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const auto& k = ks[i];
    const auto& link = model.links[i];
    const Matrix3 I_w = k.frame.rotation() * link.inertia * k.frame.rotation().transpose();
    const Vector3 fi = link.mass * (k.a_com - model.gravity);
    const Vector3 ni = I_w * k.alpha + k.omega.cross(I_w * k.omega);

    Vector3 f_total = fi + f_child;
    Vector3 n_total = ni + (k.com_world - k.joint_origin).cross(fi);
    if (i < n - 1) n_total += n_child + (child_origin - k.joint_origin).cross(f_child);

    tau[i] = k.axis_world.dot(n_total);
    f_child = f_total;
    n_child = n_total;
    child_origin = k.joint_origin;
  }
  return tau;
}

/// Re-express a wrench from one frame into another. The result is referenced
/// at the target frame's origin; the torque picks up the lever-arm term of the
/// application-point displacement.
inline Wrench reexpress_wrench(const Wrench& w, const Pose& from, const Pose& to) {
  const Matrix3 R_from = from.rotation();
  const Vector3 f_w = R_from * w.force;
  const Vector3 tau_w = R_from * w.torque;
  const Vector3 app_w = from.transformPoint(w.application_point);

  const Matrix3 R_to_T = to.rotation().transpose();
  Wrench out;
  out.frame = w.frame;
  out.force = R_to_T * f_w;
  out.torque = R_to_T * (tau_w + (app_w - to.position).cross(f_w));
  out.application_point = Vector3::Zero();
  return out;
}

}  // namespace wamc
