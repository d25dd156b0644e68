#include "gectl/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "gectl/errors.hpp"

namespace gectl {

namespace {

int RatioOrThrow(double num, double den, const char* what) {
  const double ratio = num / den;
  const long rounded = std::lround(ratio);
  if (rounded < 1 || std::abs(ratio - static_cast<double>(rounded)) > 1e-9 * ratio) {
    throw ConfigError(std::string(what) + " must be a positive integer multiple");
  }
  return static_cast<int>(rounded);
}

Vec4 QuatToVec(const Quat& q) { return {q.w(), q.x(), q.y(), q.z()}; }

RigidState Advance(const RigidState& s, const StateDerivative& d, double h) {
  RigidState out;
  out.position = s.position + h * d.position_dot;
  out.velocity = s.velocity + h * d.velocity_dot;
  const Vec4 q = QuatToVec(s.attitude) + h * d.attitude_dot;
  out.attitude = Quat(q[0], q[1], q[2], q[3]);  // renormalized at step end
  out.body_rate = s.body_rate + h * d.body_rate_dot;
  out.rotors = RotorSpeeds(s.rotors.AsVector() + h * d.rotors_dot);
  return out;
}

std::string DumpState(const RigidState& s, double time) {
  std::ostringstream os;
  os.precision(17);
  os << "t=" << time << " p=[" << s.position.transpose() << "] v=["
     << s.velocity.transpose() << "] q=[" << s.attitude.coeffs().transpose()
     << "] w=[" << s.body_rate.transpose() << "] n=[" << s.rotors.AsVector().transpose()
     << "]";
  return os.str();
}

}  // namespace

void SimConfig::Validate() const {
  if (!(dt > 0.0)) throw ConfigError("must be positive", "sim.dt");
  if (!(gravity > 0.0)) throw ConfigError("must be positive", "sim.gravity");
  if (motor_time_constant < 0.0) {
    throw ConfigError("must be non-negative", "sim.motor_time_constant");
  }
  if (imu_noise.accel_std < 0.0 || imu_noise.gyro_std < 0.0) {
    throw ConfigError("noise std must be non-negative", "sim.imu_noise");
  }
  ControlDecimation();
  PositionDecimation();
}

int SimConfig::ControlDecimation() const {
  return RatioOrThrow(control_period, dt, "sim.control_period / sim.dt");
}

int SimConfig::PositionDecimation() const {
  return RatioOrThrow(position_period, control_period,
                      "sim.position_period / sim.control_period");
}

bool RigidState::AllFinite() const {
  return position.allFinite() && velocity.allFinite() &&
         attitude.coeffs().allFinite() && body_rate.allFinite() &&
         rotors.AsVector().allFinite();
}

StateDerivative ComputeStateDerivative(const RigidState& state,
                                       const RotorSpeeds& command,
                                       const Plant& plant, double time) {
  const VehicleParams& veh = plant.vehicle;
  const SimConfig& cfg = plant.config;
  StateDerivative d;

  const Quat q = state.attitude.normalized();
  const Mat3 rot = q.toRotationMatrix();

  RotorSpeeds actual = state.rotors;
  for (double& n : actual.n) n = std::max(n, 0.0);
  const Vec4 wrench = WrenchFromSpeeds(actual, veh);
  d.thrust = wrench[0];
  d.body_torque = wrench.tail<3>();

  double h = veh.RotorPlaneHeight(state.position.z());
  d.rotor_plane_height = h;
  if (h < 0.0) {
    d.below_ground = true;
    h = 0.0;
  }

  if (cfg.toggles.ge_force) {
    d.disturbance.ground_force = GroundEffectForce(rot, d.thrust, h, plant.ground);
  }
  if (cfg.toggles.ge_drag) {
    d.disturbance.drag_force = DragForce(rot, state.velocity, h, plant.ground);
  }
  if (cfg.toggles.ge_torque) {
    d.disturbance.leveling_torque = LevelingTorque(rot, d.thrust, h, plant.ground);
  }

  Vec3 ext_force = Vec3::Zero();
  Vec3 ext_torque = Vec3::Zero();
  if (time >= cfg.external.start_time) {
    ext_force = cfg.external.force;
    ext_torque = cfg.external.torque;
  }

  d.position_dot = state.velocity;
  d.velocity_dot = -cfg.gravity * WorldZ() +
                   (d.thrust * rot.col(2) + d.disturbance.ground_force +
                    d.disturbance.drag_force + ext_force) /
                       veh.mass;

  const Vec3& w = state.body_rate;
  const Vec3 torque = -w.cross(veh.inertia * w) + d.body_torque +
                      d.disturbance.leveling_torque + ext_torque;
  d.body_rate_dot = veh.inertia.ldlt().solve(torque);

  const Quat omega_q(0.0, w.x(), w.y(), w.z());
  const Quat qdot = state.attitude * omega_q;
  d.attitude_dot = 0.5 * QuatToVec(qdot);

  if (cfg.motor_time_constant > 0.0) {
    d.rotors_dot = (command.AsVector() - state.rotors.AsVector()) / cfg.motor_time_constant;
  }
  return d;
}

RigidState Rk4Step(const RigidState& state, const RotorSpeeds& command,
                   const Plant& plant, double time, double dt) {
  if (!state.AllFinite()) {
    throw IntegrationFault("non-finite state entering RK4 step: " + DumpState(state, time));
  }
  RigidState start = state;
  if (plant.config.motor_time_constant <= 0.0) start.rotors = command;

  const StateDerivative k1 = ComputeStateDerivative(start, command, plant, time);
  const StateDerivative k2 = ComputeStateDerivative(Advance(start, k1, dt / 2), command,
                                                    plant, time + dt / 2);
  const StateDerivative k3 = ComputeStateDerivative(Advance(start, k2, dt / 2), command,
                                                    plant, time + dt / 2);
  const StateDerivative k4 =
      ComputeStateDerivative(Advance(start, k3, dt), command, plant, time + dt);

  StateDerivative sum;
  sum.position_dot = (k1.position_dot + 2 * k2.position_dot + 2 * k3.position_dot + k4.position_dot) / 6;
  sum.velocity_dot = (k1.velocity_dot + 2 * k2.velocity_dot + 2 * k3.velocity_dot + k4.velocity_dot) / 6;
  sum.attitude_dot = (k1.attitude_dot + 2 * k2.attitude_dot + 2 * k3.attitude_dot + k4.attitude_dot) / 6;
  sum.body_rate_dot = (k1.body_rate_dot + 2 * k2.body_rate_dot + 2 * k3.body_rate_dot + k4.body_rate_dot) / 6;
  sum.rotors_dot = (k1.rotors_dot + 2 * k2.rotors_dot + 2 * k3.rotors_dot + k4.rotors_dot) / 6;

  RigidState next = Advance(start, sum, dt);
  next.attitude.normalize();
  if (!next.AllFinite()) {
    throw IntegrationFault("non-finite state after RK4 step: " + DumpState(state, time));
  }
  return next;
}

bool IsCrashed(const RigidState& state, const Plant& plant) {
  const double h = plant.vehicle.RotorPlaneHeight(state.position.z());
  const double sin_tilt = state.Rotation().col(2).cross(WorldZ()).norm();
  const double lowest = h - 0.5 * plant.vehicle.wheelbase * sin_tilt;
  return lowest <= plant.config.ground_clearance || h < 0.0;
}

ImuSample SampleImu(const RigidState& state, const StateDerivative& derivative,
                    double gravity, const ImuNoise& noise, std::mt19937_64& rng) {
  ImuSample s;
  const Mat3 rot = state.Rotation();
  s.specific_force = rot.transpose() * (derivative.velocity_dot + gravity * WorldZ());
  s.gyro = state.body_rate;
  // Draw unconditionally so the RNG stream does not depend on which
  // channels are noisy.
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 3; ++i) s.specific_force[i] += noise.accel_std * unit(rng);
  for (int i = 0; i < 3; ++i) s.gyro[i] += noise.gyro_std * unit(rng);
  return s;
}

Simulator::Simulator(Plant plant, std::uint64_t seed)
    : plant_(std::move(plant)), rng_(seed) {
  plant_.vehicle.Validate();
  plant_.ground.Validate();
  plant_.config.Validate();
}

void Simulator::Reset(const RigidState& state, double time) {
  state_ = state;
  state_.attitude.normalize();
  last_command_ = state.rotors;
  time_ = time;
  crashed_ = IsCrashed(state_, plant_);
}

void Simulator::Step(const RotorSpeeds& command) {
  last_command_ = command;
  if (crashed_) return;
  state_ = Rk4Step(state_, command, plant_, time_, plant_.config.dt);
  time_ += plant_.config.dt;
  if (IsCrashed(state_, plant_)) crashed_ = true;
}

StateDerivative Simulator::Derivative() const {
  return ComputeStateDerivative(state_, last_command_, plant_, time_);
}

ImuSample Simulator::Imu() {
  return SampleImu(state_, Derivative(), plant_.config.gravity,
                   plant_.config.imu_noise, rng_);
}

}  // namespace gectl
