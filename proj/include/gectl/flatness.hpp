#ifndef GECTL_FLATNESS_HPP_
#define GECTL_FLATNESS_HPP_

#include <string>

#include "gectl/groundfx.hpp"
#include "gectl/math.hpp"
#include "gectl/vehicle.hpp"

namespace gectl {

/// Position derivatives through snap plus yaw and its first two
/// derivatives. World frame, z up.
struct FlatOutput {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
  Vec3 snap = Vec3::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
  double yaw_acceleration = 0.0;
};

/// Figure-eight (lemniscate of Gerono) at constant altitude:
///   p(t) = center + (A sin wt, A/2 sin 2wt, 0)
/// The vehicle passes the crossing point at t = 0 with peak speed
/// sqrt(2) A w, so w is chosen from the requested peak speed.
struct LemniscateSpec {
  Vec3 center = Vec3(0.0, 0.0, 0.12);
  double half_width = 1.0;  // A, m
  double peak_speed = 1.0;  // m/s

  double AngularRate() const;
  double Period() const;
};

FlatOutput Lemniscate(double t, const LemniscateSpec& spec);

/// Vertical move from start_height to end_height along a degree-9
/// polynomial whose first four derivatives vanish at both ends. Optional
/// holds before and after. Heights are world z of the vehicle origin.
struct DescentSpec {
  Vec3 start = Vec3(0.0, 0.0, 1.0);  // x, y, start height
  double end_height = 0.08;
  double duration = 60.0;
  double hold_before = 0.0;

  // Throws ParameterError on invalid heights / duration.
  void Validate() const;
  // Peak |v_z| reached at mid-descent: 630/256 * |dh| / duration.
  double PeakSpeed() const;
};

FlatOutput HoverDescent(double t, const DescentSpec& spec);

/// Stationary hover at a fixed point.
FlatOutput Hover(const Vec3& position, double yaw = 0.0);

/// Trajectory selected by scenario configuration.
struct TrajectorySpec {
  enum class Kind { kHover, kHoverDescent, kLemniscate };
  Kind kind = Kind::kHover;
  Vec3 hover_position = Vec3(0.0, 0.0, 1.0);
  DescentSpec descent;
  LemniscateSpec lemniscate;
  double duration = 10.0;  // total run length, s

  FlatOutput Evaluate(double t) const;
  std::string KindName() const;
};

/// What the reference generator assumes about the vehicle.
struct FlatnessModel {
  VehicleParams vehicle;
  GroundEffectParams ground;
  double gravity = 9.80665;
  bool ground_force = true;        // F_G(h) thrust gain
  bool drag = true;                // altitude-dependent rotor drag
  bool equivalent_inertia = true;  // J'(h) in the torque
  // Include -m c F_G'(h) h_dot / (1 + F_G)^2 in the thrust rate.
  bool thrust_rate_uses_fg_slope = true;

  int max_iterations = 20;
  double tolerance = 1e-10;

  double FgAt(double h) const;
  Mat3 NormalizedDrag(double h) const;  // D(h) / m
  Mat3 InertiaAt(double h, double thrust) const;
};

/// Body frame whose z axis is `thrust_axis` and whose x axis stays in the
/// vertical plane of heading `yaw` (Z-Y-X Euler convention).
Mat3 AttitudeFromThrustAxis(const Vec3& thrust_axis, double yaw);

struct ThrustAttitude {
  double thrust = 0.0;
  Mat3 rotation = Mat3::Identity();
  Quat attitude = Quat::Identity();
  // (1 + F_G) T / m: the kinematic collective acceleration.
  double collective = 0.0;
  int iterations = 0;
};

/// Solves a + g z_W + R D_a R^T v = c z_B for z_B by fixed-point iteration
/// and completes the attitude from yaw; T = m z_B^T (a + g z_W) / (1 + F_G).
/// Throws ReferenceError for free fall or non-convergence.
ThrustAttitude RefThrustAttitude(const FlatOutput& flat, double h,
                                 const FlatnessModel& model);

struct ReferenceRates {
  Vec3 body_rate = Vec3::Zero();
  Vec3 body_acceleration = Vec3::Zero();
  double collective_rate = 0.0;
  double collective_acceleration = 0.0;
  double thrust_rate = 0.0;
};

/// Body rates and accelerations by differentiating the force balance twice
/// with D(h) frozen. h_rate only enters the thrust rate.
ReferenceRates RefRates(const FlatOutput& flat, double h, double h_rate,
                        const ThrustAttitude& solved, const FlatnessModel& model);

/// tau = J'(h) w_dot + w x J'(h) w.
Vec3 RefTorque(const Vec3& body_rate, const Vec3& body_acceleration, double h,
               double thrust, const FlatnessModel& model);

/// Everything a controller needs at one instant of the reference.
struct FlatReference {
  FlatOutput flat;
  double height = 0.0;  // rotor-plane height
  double thrust = 0.0;
  double thrust_rate = 0.0;
  Quat attitude = Quat::Identity();
  Mat3 rotation = Mat3::Identity();
  Vec3 body_rate = Vec3::Zero();
  Vec3 body_acceleration = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
  Vec4 rotors_squared = Vec4::Zero();  // unclamped M^-1 (T, tau)
  RotorSpeeds rotors;                  // sqrt of the clamped squares
  bool feasible = true;                // rotors within [0, n_max]
  int iterations = 0;
};

FlatReference ComputeReference(const FlatOutput& flat, const FlatnessModel& model);

}  // namespace gectl

#endif  // GECTL_FLATNESS_HPP_
