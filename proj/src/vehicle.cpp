#include "gectl/vehicle.hpp"

#include <cmath>
#include <string>

#include "gectl/errors.hpp"

namespace gectl {

namespace {

void RequirePositive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ParameterError(std::string(name) + " must be positive and finite, got " +
                         std::to_string(value));
  }
}

}  // namespace

void VehicleParams::Validate() const {
  RequirePositive(mass, "mass");
  RequirePositive(wheelbase, "wheelbase");
  RequirePositive(k_thrust, "k_thrust");
  RequirePositive(k_roll, "k_roll");
  RequirePositive(k_pitch, "k_pitch");
  RequirePositive(k_yaw, "k_yaw");
  RequirePositive(max_rotor_speed, "max_rotor_speed");
  if (!inertia.allFinite() || (inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ParameterError("inertia must be a finite symmetric matrix");
  }
  Eigen::LLT<Mat3> llt(inertia);
  if (llt.info() != Eigen::Success) {
    throw ParameterError("inertia must be positive definite");
  }
  if (!std::isfinite(rotor_plane_offset)) {
    throw ParameterError("rotor_plane_offset must be finite");
  }
}

double VehicleParams::HoverRotorSpeed(double gravity) const {
  return std::sqrt(mass * gravity / (4.0 * k_thrust));
}

RotorSpeeds::RotorSpeeds(const Vec4& speeds)
    : n{speeds[0], speeds[1], speeds[2], speeds[3]} {}

bool RotorSpeeds::WithinLimits(double max_speed) const {
  for (double s : n) {
    if (s < 0.0 || s > max_speed) return false;
  }
  return true;
}

Mat4 MixingSigns() {
  Mat4 s;
  s <<  1,  1,  1,  1,
       -1,  1,  1, -1,
       -1,  1, -1,  1,
       -1, -1,  1,  1;
  return s;
}

Mat4 BuildMixingMatrix(const VehicleParams& params) {
  params.Validate();
  const double arm = std::sqrt(2.0) * params.wheelbase / 4.0;
  const Vec4 scale(params.k_thrust, arm * params.k_roll, arm * params.k_pitch,
                   params.k_yaw);
  return scale.asDiagonal() * MixingSigns();
}

double ThrustFromSpeeds(const RotorSpeeds& speeds, const VehicleParams& params) {
  double total = 0.0;
  for (double s : speeds.n) total += params.k_thrust * s * s;
  return total;
}

Vec4 WrenchFromSpeeds(const RotorSpeeds& speeds, const VehicleParams& params) {
  return BuildMixingMatrix(params) * speeds.Squared();
}

Vec4 CompositeSpeeds(const RotorSpeeds& speeds, const VehicleParams& params) {
  const Vec4 coeff(params.k_thrust, params.k_roll, params.k_pitch, params.k_yaw);
  return coeff.cwiseInverse().asDiagonal() * BuildMixingMatrix(params) *
         speeds.Squared();
}

}  // namespace gectl
