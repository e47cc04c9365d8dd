#include "skelgrow/geometry.hpp"

#include <cmath>

#include "skelgrow/errors.hpp"

namespace skelgrow {

namespace {

Eigen::Quaterniond canonicalized(Eigen::Quaterniond q) {
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

}  // namespace

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  return Rotation(canonicalized(Eigen::Quaterniond(w, x, y, z)));
}

Rotation Rotation::from_unit_quaternion(double w, double x, double y, double z) {
  const Eigen::Quaterniond q(w, x, y, z);
  if (std::abs(q.norm() - 1.0) > 1e-9 || w < 0.0) {
    throw ValidationError("Rotation: stored quaternion is not canonical unit form");
  }
  return Rotation(q);
}

Rotation Rotation::from_matrix(const Mat3& m) {
  return Rotation(canonicalized(Eigen::Quaterniond(m)));
}

Rotation Rotation::from_axis_angle(const Vec3& axis_angle) { return exp_so3(axis_angle); }

Vec3 Rotation::axis_angle() const {
  const Eigen::AngleAxisd aa(q_);
  return aa.angle() * aa.axis();
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& rhs) const {
  return Rotation(canonicalized(q_ * rhs.q_));
}

bool Rotation::is_identity(double tol) const {
  return std::abs(q_.w() - 1.0) <= tol && q_.vec().norm() <= tol;
}

Transform Transform::inverse() const {
  const Rotation rinv = rotation.inverse();
  return Transform{rinv, -rinv.apply(translation)};
}

Transform compose(const Transform& a, const Transform& b) {
  return Transform{a.rotation * b.rotation, a.rotation.apply(b.translation) + a.translation};
}

Rotation exp_so3(const Vec3& axis_angle) {
  const double theta2 = axis_angle.squaredNorm();
  double cos_half;
  double sinc_half;  // sin(theta/2) / theta
  if (theta2 < 1e-16) {
    // |v| < 1e-8: second-order series of both terms.
    sinc_half = 0.5 - theta2 / 48.0;
    cos_half = 1.0 - theta2 / 8.0;
  } else {
    const double theta = std::sqrt(theta2);
    sinc_half = std::sin(0.5 * theta) / theta;
    cos_half = std::cos(0.5 * theta);
  }
  return Rotation::from_quaternion(cos_half, axis_angle.x() * sinc_half,
                                   axis_angle.y() * sinc_half, axis_angle.z() * sinc_half);
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<    0.0, -v.z(),  v.y(),
        v.z(),    0.0, -v.x(),
       -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

Mat3 so3_left_jacobian(const Vec3& axis_angle) {
  const double theta2 = axis_angle.squaredNorm();
  const Mat3 vx = skew(axis_angle);
  double c1;  // (1 - cos theta) / theta^2
  double c2;  // (theta - sin theta) / theta^3
  if (theta2 < 1e-12) {
    c1 = 0.5 - theta2 / 24.0;
    c2 = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    c1 = (1.0 - std::cos(theta)) / theta2;
    c2 = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + c1 * vx + c2 * vx * vx;
}

Mat3 exp_so3_apply_jacobian(const Vec3& axis_angle, const Vec3& w) {
  const Vec3 rotated = exp_so3(axis_angle).apply(w);
  return -skew(rotated) * so3_left_jacobian(axis_angle);
}

void positional_encoding(double x, int num_freqs, std::span<double> out) {
  if (num_freqs < 1) throw ValidationError("positional_encoding: num_freqs must be >= 1");
  if (out.size() != static_cast<size_t>(2 * num_freqs)) {
    throw ValidationError("positional_encoding: output span has wrong size");
  }
  double freq = M_PI;
  for (int l = 0; l < num_freqs; ++l) {
    out[2 * l] = std::sin(freq * x);
    out[2 * l + 1] = std::cos(freq * x);
    freq *= 2.0;
  }
}

std::vector<double> positional_encoding(double x, int num_freqs) {
  std::vector<double> out(static_cast<size_t>(2 * std::max(num_freqs, 1)));
  positional_encoding(x, num_freqs, out);
  return out;
}

}  // namespace skelgrow
