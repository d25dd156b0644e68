#ifndef GECTL_MATH_HPP_
#define GECTL_MATH_HPP_

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace gectl {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = 3.14159265358979323846;

inline Vec3 WorldZ() { return Vec3::UnitZ(); }

inline Mat3 Skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

inline double Clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

// ||R^T R - I||_max; used to reject non-rotations at API boundaries.
inline double OrthonormalityError(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

// Angle between body z and world z.
inline double TiltAngle(const Mat3& r) {
  return std::acos(Clamp(r.col(2).dot(WorldZ()), -1.0, 1.0));
}

// Geodesic distance on SO(3) between two attitudes, in [0, pi].
inline double GeodesicAngle(const Quat& a, const Quat& b) {
  const double w = std::abs(a.normalized().dot(b.normalized()));
  return 2.0 * std::acos(Clamp(w, 0.0, 1.0));
}

}  // namespace gectl

#endif  // GECTL_MATH_HPP_
