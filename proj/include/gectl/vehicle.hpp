#ifndef GECTL_VEHICLE_HPP_
#define GECTL_VEHICLE_HPP_

#include <array>

#include "gectl/math.hpp"

namespace gectl {

/// Physical description of an X-configuration quadrotor.
///
/// Rotor speeds are in rpm and every coefficient carries rpm^-2 units, so
/// thrust is k_thrust * n^2 in newtons without any conversion.
///
/// Rotor layout implied by the mixing sign matrix (x forward, y left, z up):
///   rotor 1: front-right, rotor 2: rear-left,
///   rotor 3: front-left,  rotor 4: rear-right.
/// Rotors 1 and 2 produce negative yaw reaction torque, 3 and 4 positive.
struct VehicleParams {
  double mass = 1.0;                                      // kg
  Mat3 inertia = Vec3(5e-3, 5e-3, 9e-3).asDiagonal();     // kg m^2
  double wheelbase = 0.30;                                // diagonal, m
  double k_thrust = 1.7025e-8;                            // N / rpm^2
  double k_roll = 1.7025e-8;                              // N / rpm^2
  double k_pitch = 1.7025e-8;                             // N / rpm^2
  double k_yaw = 2.5e-10;                                 // N m / rpm^2
  double max_rotor_speed = 20000.0;                       // rpm
  double rotor_plane_offset = 0.0;  // rotor plane height above origin, m

  // Throws ParameterError on any violated invariant.
  void Validate() const;

  // Height of the rotor plane above the ground for a body at altitude p_z.
  double RotorPlaneHeight(double p_z) const { return p_z + rotor_plane_offset; }

  // Speed at which all four rotors together lift m*g.
  double HoverRotorSpeed(double gravity) const;
};

/// Speeds of the four rotors in rpm.
struct RotorSpeeds {
  std::array<double, 4> n{0.0, 0.0, 0.0, 0.0};

  RotorSpeeds() = default;
  explicit RotorSpeeds(const Vec4& speeds);
  RotorSpeeds(double n1, double n2, double n3, double n4) : n{n1, n2, n3, n4} {}
  static RotorSpeeds Uniform(double speed) {
    return {speed, speed, speed, speed};
  }

  Vec4 AsVector() const { return {n[0], n[1], n[2], n[3]}; }
  Vec4 Squared() const { return AsVector().cwiseProduct(AsVector()); }
  double& operator[](int i) { return n[i]; }
  double operator[](int i) const { return n[i]; }

  // All speeds in [0, max]?
  bool WithinLimits(double max_speed) const;
};

/// The fixed sign pattern of the quad-X mixer.
Mat4 MixingSigns();

/// Maps squared rotor speeds to (T, tau_x, tau_y, tau_z).
Mat4 BuildMixingMatrix(const VehicleParams& params);

/// Total rotor thrust sum(k_T n_i^2), newtons.
double ThrustFromSpeeds(const RotorSpeeds& speeds, const VehicleParams& params);

/// Thrust and body torque produced by the given speeds.
Vec4 WrenchFromSpeeds(const RotorSpeeds& speeds, const VehicleParams& params);

/// Composite speed combinations diag(kT,kTX,kTY,kI)^-1 M N^2: entry 0 is the
/// thrust-equivalent sum of squares, entries 1..3 the roll/pitch/yaw
/// composites.
Vec4 CompositeSpeeds(const RotorSpeeds& speeds, const VehicleParams& params);

}  // namespace gectl

#endif  // GECTL_VEHICLE_HPP_
