#ifndef GECTL_DYNAMICS_HPP_
#define GECTL_DYNAMICS_HPP_

#include <cstdint>
#include <random>

#include "gectl/groundfx.hpp"
#include "gectl/math.hpp"
#include "gectl/vehicle.hpp"

namespace gectl {

struct DisturbanceToggles {
  bool ge_force = true;
  bool ge_torque = true;
  bool ge_drag = true;

  static DisturbanceToggles None() { return {false, false, false}; }
};

// Constant wrench switched on at `start_time`; zero by default.
struct ExternalWrench {
  Vec3 force = Vec3::Zero();   // world, N
  Vec3 torque = Vec3::Zero();  // body, N m
  double start_time = 0.0;
};

struct ImuNoise {
  double accel_std = 0.0;  // m/s^2
  double gyro_std = 0.0;   // rad/s
};

struct SimConfig {
  double dt = 0.0005;               // physics step, s
  double control_period = 0.002;    // attitude / rate loop, s
  double position_period = 0.01;    // position loop, s
  double gravity = 9.80665;         // m/s^2
  DisturbanceToggles toggles;
  double motor_time_constant = 0.03;  // s; 0 makes rotors follow instantly
  ImuNoise imu_noise;
  double model_mismatch = 0.0;      // controller's ground-effect model = (1 + x) * truth
  ExternalWrench external;
  double ground_clearance = 0.0;    // lowest rotor tip below this height = crash

  // Throws ConfigError unless the periods are positive integer multiples.
  void Validate() const;
  int ControlDecimation() const;   // physics steps per control tick
  int PositionDecimation() const;  // control ticks per position tick
};

/// Full simulated state. Attitude maps body vectors into the world frame.
struct RigidState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();
  Vec3 body_rate = Vec3::Zero();
  RotorSpeeds rotors;

  Mat3 Rotation() const { return attitude.toRotationMatrix(); }
  bool AllFinite() const;
};

/// Everything the physics integrator and sensors need from one evaluation
/// of the equations of motion.
struct StateDerivative {
  Vec3 position_dot = Vec3::Zero();
  Vec3 velocity_dot = Vec3::Zero();
  Vec4 attitude_dot = Vec4::Zero();  // (w, x, y, z)
  Vec3 body_rate_dot = Vec3::Zero();
  Vec4 rotors_dot = Vec4::Zero();

  double thrust = 0.0;
  Vec3 body_torque = Vec3::Zero();
  DisturbanceWrench disturbance;
  double rotor_plane_height = 0.0;
  bool below_ground = false;
};

/// Physical plant shared by the derivative and the integrator.
struct Plant {
  VehicleParams vehicle;
  GroundEffectParams ground;
  SimConfig config;
};

/// Rigid-body equations of motion with ground-effect disturbances:
///   m a     = -m g z_W + T z_B + f_G + f_D + f_ext
///   J w_dot = -w x J w + tau_B + tau_G + tau_ext
/// with (T, tau_B) from the measured rotor speeds through the mixer and a
/// first-order lag from `command` to the rotor speeds. When the rotor plane
/// is below the ground the models are evaluated at h = 0 and
/// `below_ground` is set.
StateDerivative ComputeStateDerivative(const RigidState& state,
                                       const RotorSpeeds& command,
                                       const Plant& plant, double time);

/// One classic fourth-order Runge-Kutta step with the command held.
/// Renormalizes the attitude. Throws IntegrationFault on NaN.
RigidState Rk4Step(const RigidState& state, const RotorSpeeds& command,
                   const Plant& plant, double time, double dt);

/// True when the lowest rotor is at or below the ground clearance.
bool IsCrashed(const RigidState& state, const Plant& plant);

struct ImuSample {
  Vec3 specific_force = Vec3::Zero();  // body frame, R^T (a + g z_W)
  Vec3 gyro = Vec3::Zero();            // body frame
};

/// Accelerometer and gyro reading consistent with the disturbance observer:
/// at zero noise R * specific_force - T z_B / m equals the external
/// acceleration exactly.
ImuSample SampleImu(const RigidState& state, const StateDerivative& derivative,
                    double gravity, const ImuNoise& noise, std::mt19937_64& rng);

/// Owns one simulated vehicle: state, clock, sensor RNG.
class Simulator {
 public:
  Simulator(Plant plant, std::uint64_t seed);

  void Reset(const RigidState& state, double time = 0.0);
  void Step(const RotorSpeeds& command);

  // Reading at the current state with the last command held.
  ImuSample Imu();
  // Disturbances at the current state with the last command held.
  StateDerivative Derivative() const;

  const RigidState& state() const { return state_; }
  double time() const { return time_; }
  bool crashed() const { return crashed_; }
  const Plant& plant() const { return plant_; }

 private:
  Plant plant_;
  RigidState state_;
  RotorSpeeds last_command_;
  double time_ = 0.0;
  bool crashed_ = false;
  std::mt19937_64 rng_;
};

}  // namespace gectl

#endif  // GECTL_DYNAMICS_HPP_
