#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <span>
#include <vector>

namespace skelgrow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rotation stored as a unit quaternion, canonicalized to w >= 0 so that
/// the double cover maps to a unique representative. Construction
/// renormalizes, which keeps values valid after gradient-style updates.
class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}

  static Rotation from_quaternion(double w, double x, double y, double z);
  /// For reloading previously canonicalized values: validates unit norm
  /// and w >= 0 within 1e-9 but does not renormalize, so stored
  /// coefficients survive a save/load cycle bit-exactly.
  static Rotation from_unit_quaternion(double w, double x, double y, double z);
  static Rotation from_matrix(const Mat3& m);
  static Rotation from_axis_angle(const Vec3& axis_angle);

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Vec3 axis_angle() const;
  Vec3 apply(const Vec3& v) const { return q_ * v; }
  Rotation inverse() const;
  Rotation operator*(const Rotation& rhs) const;

  const Eigen::Quaterniond& quaternion() const { return q_; }
  bool is_identity(double tol = 0.0) const;

 private:
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q) {}
  Eigen::Quaterniond q_;  // (w, x, y, z), unit norm, w >= 0
};

/// Rigid map x -> R x + t.
struct Transform {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& v) const { return rotation.apply(v) + translation; }
  Transform inverse() const;
};

/// (a o b)(x) = a(b(x)).
Transform compose(const Transform& a, const Transform& b);

/// Exponential map of so(3): rotation by |v| radians about v/|v|.
/// Uses a series branch below |v| = 1e-8 so the zero vector maps to the
/// identity without a 0/0.
Rotation exp_so3(const Vec3& axis_angle);

Mat3 skew(const Vec3& v);

/// Left Jacobian of SO(3): exp(v + d) ~ exp(J_l(v) d) * exp(v) for small d.
Mat3 so3_left_jacobian(const Vec3& axis_angle);

/// d(exp_so3(a) * w) / da, a 3x3 matrix. Equals -[R w]_x J_l(a).
Mat3 exp_so3_apply_jacobian(const Vec3& axis_angle, const Vec3& w);

/// NeRF-style encoding of a scalar:
/// [sin(pi x), cos(pi x), sin(2 pi x), cos(2 pi x), ..., sin(2^{L-1} pi x), cos(2^{L-1} pi x)].
/// Output span must have size 2 * num_freqs.
void positional_encoding(double x, int num_freqs, std::span<double> out);
std::vector<double> positional_encoding(double x, int num_freqs);

/// N frames x `count` items of 3-vectors, frame-major.
struct Vec3Grid {
  int frames = 0;
  int count = 0;
  std::vector<Vec3> data;

  Vec3Grid() = default;
  Vec3Grid(int frames_, int count_)
      : frames(frames_), count(count_),
        data(static_cast<size_t>(frames_) * static_cast<size_t>(count_), Vec3::Zero()) {}

  Vec3& at(int frame, int item) { return data[static_cast<size_t>(frame) * count + item]; }
  const Vec3& at(int frame, int item) const {
    return data[static_cast<size_t>(frame) * count + item];
  }
  bool empty() const { return data.empty(); }
};

}  // namespace skelgrow
