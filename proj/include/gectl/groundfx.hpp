#ifndef GECTL_GROUNDFX_HPP_
#define GECTL_GROUNDFX_HPP_

#include <vector>

#include "gectl/math.hpp"
#include "gectl/vehicle.hpp"

namespace gectl {

/// One row of the altitude-dependent rotor drag table. Coefficients are
/// force per unit body-frame velocity (kg/s), so f = -d * v.
struct DragSample {
  double h = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

/// Ground-effect model constants.
///
///   thrust gain       F_G(h) = g2 / (h^2 + g1)
///   leveling lever    M_G(h) = g5 h / (h^2 + g3 h + g4)^2
///   rotor drag        D(h)   = diag(dx(h), dy(h), 0), piecewise linear
///
/// h is the height of the rotor-plane center above flat ground.
///
/// The defaults tie g3 = 0, g4 = g1, g5 = b^2 g2 / 4 for b = 0.30 m so the
/// leveling lever equals -(b^2/8) F_G'(h) exactly; its peak is at
/// sqrt(g1/3) ~ 0.17 m.
struct GroundEffectParams {
  double g1 = 0.0864;    // m^2
  double g2 = 0.0405;    // m^2
  double g3 = 0.0;       // m
  double g4 = 0.0864;    // m^2
  double g5 = 9.1125e-4; // m^3
  std::vector<DragSample> drag_table = DefaultDragTable();

  // The leveling torque grows with sin(tilt) only up to this angle.
  bool tilt_saturation = true;
  double tilt_saturation_angle = 10.0 * kPi / 180.0;  // rad

  static std::vector<DragSample> DefaultDragTable();

  // Parameters with the thrust/torque identity enforced for wheelbase b.
  static GroundEffectParams Tied(double g1, double g2, double wheelbase);

  // Throws ParameterError / ConfigError on violated invariants.
  void Validate() const;

  // Every constant scaled by `factor` (drag coefficients included); used to
  // give a controller a deliberately wrong model.
  GroundEffectParams Scaled(double factor) const;
};

/// Ground-effect thrust gain F_G(h), dimensionless.
double Fg(double h, const GroundEffectParams& ge);

/// dF_G/dh, 1/m. Never positive for h >= 0.
double FgPrime(double h, const GroundEffectParams& ge);

/// Leveling torque per unit thrust per unit sin(tilt), m.
double Mg(double h, const GroundEffectParams& ge);

/// Altitude at which Mg peaks, found by golden-section search on [lo, hi].
double MgPeakHeight(const GroundEffectParams& ge, double lo = 1e-4, double hi = 5.0);

/// Restoring body-frame torque on a tilted vehicle near the ground:
/// M_G(h) T R^T (z_B x z_W), with sin(tilt) clamped at the saturation angle
/// when enabled. Always orthogonal to body z.
Vec3 LevelingTorque(const Mat3& rotation, double thrust, double h,
                    const GroundEffectParams& ge);

/// Extra world-frame force F_G(h) T z_B.
Vec3 GroundEffectForce(const Mat3& rotation, double thrust, double h,
                       const GroundEffectParams& ge);

/// Body-frame drag matrix D(h) (interpolated, clamped at table ends).
Mat3 DragCoefficients(double h, const GroundEffectParams& ge);

/// World-frame rotor drag -R D(h) R^T v.
Vec3 DragForce(const Mat3& rotation, const Vec3& velocity, double h,
               const GroundEffectParams& ge);

/// Hover approximation of M_G(h) T, i.e. m g M_G / (1 + F_G).
double HoverLevelingGain(double h, const GroundEffectParams& ge,
                         const VehicleParams& vehicle, double gravity);

/// Inertia J'(h) that absorbs the leveling torque into a lowered control
/// center: J + diag(k, k, 0) with k = (M_G T)^2 / (m g^2). When thrust_hint
/// is not positive the hover approximation of M_G T is used.
Mat3 EquivalentInertia(double h, double thrust_hint, const GroundEffectParams& ge,
                       const VehicleParams& vehicle, double gravity);

/// Disturbances acting on the vehicle at one instant.
struct DisturbanceWrench {
  Vec3 ground_force = Vec3::Zero();     // world, N
  Vec3 drag_force = Vec3::Zero();       // world, N
  Vec3 leveling_torque = Vec3::Zero();  // body, N m
};

}  // namespace gectl

#endif  // GECTL_GROUNDFX_HPP_
