#ifndef GECTL_CONTROLLER_HPP_
#define GECTL_CONTROLLER_HPP_

#include <string>

#include "gectl/dynamics.hpp"
#include "gectl/estimation.hpp"
#include "gectl/flatness.hpp"
#include "gectl/groundfx.hpp"
#include "gectl/math.hpp"
#include "gectl/vehicle.hpp"

namespace gectl {

enum class AccelMode { kNone, kIndi, kModel };
enum class TorqueMode { kNone, kModel, kIndi, kHybrid };

AccelMode ParseAccelMode(const std::string& name);    // none | indi | model
TorqueMode ParseTorqueMode(const std::string& name);  // none | model | indi | hybrid
std::string ToString(AccelMode mode);
std::string ToString(TorqueMode mode);

struct ControlGains {
  Vec3 kp = Vec3(6.0, 6.0, 8.0);         // 1/s^2
  Vec3 kv = Vec3(4.0, 4.0, 5.0);         // 1/s
  Vec3 k_att = Vec3(10.0, 10.0, 5.0);    // 1/s
  Vec3 k_rate = Vec3(25.0, 25.0, 12.0);  // 1/s
  AccelMode accel_mode = AccelMode::kModel;
  TorqueMode torque_mode = TorqueMode::kHybrid;
  double filter_cutoff = 40.0;  // Hz, gyro / accelerometer / actuation

  // Throws ConfigError on negative or non-finite gains.
  void Validate() const;
};

/// K_P (p_ref - p) + K_V (v_ref - v).
Vec3 PositionFeedback(const Vec3& p_ref, const Vec3& v_ref, const Vec3& p_est,
                      const Vec3& v_est, const ControlGains& gains);

/// Feedforward cancellation of the disturbance acceleration. Model mode
/// returns -(a_D + a_G) evaluated at the desired state; INDI mode returns
/// -ext_accel_f; none returns zero.
Vec3 AccelerationCompensation(const FlatReference& ref, AccelMode mode,
                              const FlatnessModel& model, const Vec3& ext_accel_f);

/// Desired total acceleration including gravity:
///   a_des = a_ref + g z_W + K_P e_p + K_V e_v - a_D - a_G
/// (thrust direction and magnitude follow directly from it).
Vec3 AccelerationCommand(const FlatReference& ref, const Vec3& p_est, const Vec3& v_est,
                         const ControlGains& gains, const FlatnessModel& model,
                         const Vec3& ext_accel_f = Vec3::Zero());

/// Rotation vector of conj(q_est) * q_des taken on the short way round.
/// Throws InputError unless both quaternions are unit within 1e-6.
Vec3 AttitudeErrorVector(const Quat& q_est, const Quat& q_des);

struct RateCommand {
  Vec3 rate = Vec3::Zero();
  Vec3 rate_dot = Vec3::Zero();
};

RateCommand BodyrateCommand(const Vec3& att_error, const Vec3& rate_ref,
                            const Vec3& rate_f, const Vec3& rate_dot_ref,
                            const ControlGains& gains);

/// m a_des . z_B / |z_B|, floored at zero.
double ThrustCommand(const Vec3& a_des, const Vec3& z_b, double mass);

/// J w_dot + w x J w with J = J'(h) when `equivalent` is set.
Vec3 TorqueCommandModel(const Vec3& rate_des, const Vec3& rate_dot_des, double h,
                        double thrust_ref, const FlatnessModel& model, bool equivalent);

/// tau_B + J (w_dot_des - w_dot_f). Throws ControllerFault when the
/// actuation measurement is older than two control periods.
Vec3 TorqueCommandIndi(const Vec3& body_torque, const Vec3& rate_dot_des,
                       const Vec3& rate_dot_f, const Mat3& inertia,
                       double actuation_age = 0.0, double control_period = 1.0);

struct Allocation {
  RotorSpeeds rotors;
  Vec4 achieved = Vec4::Zero();  // (T, tau) actually produced
  bool saturated = false;
  bool yaw_reduced = false;
  bool roll_pitch_reduced = false;
  bool thrust_clamped = false;
};

/// N^2 = M^-1 (T, tau). When a rotor leaves [0, n_max] the yaw torque is
/// scaled down first, then roll/pitch, and thrust is clamped last.
Allocation Allocate(double thrust, const Vec3& torque, const VehicleParams& vehicle);

/// What a controller hands to the simulator each tick.
struct ControlCommand {
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();
  Allocation allocation;
};

/// Everything a policy sees at one tick.
struct SensorPacket {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();
  ImuSample imu;
  RotorSpeeds rotors;       // measured
  double rotor_time = 0.0;  // when `rotors` was measured
};

struct ControlTelemetry {
  FlatReference ref;
  Quat attitude_des = Quat::Identity();
  Vec3 accel_des = Vec3::Zero();
  RateCommand rates;
  WrenchEstimate wrench;
};

/// Common interface of closed-loop and open-loop policies.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual ControlCommand Update(const SensorPacket& packet) = 0;
  virtual const ControlTelemetry& telemetry() const = 0;
  virtual const TrajectorySpec& trajectory() const = 0;
};

struct ControllerConfig {
  ControlGains gains;
  FlatnessModel model;  // what the controller believes about the vehicle
  double control_period = 0.002;
  int position_decimation = 5;
};

/// The full cascade with filters, disturbance observer and a position loop
/// that runs every `position_decimation` ticks.
class Controller : public Policy {
 public:
  Controller(ControllerConfig config, TrajectorySpec trajectory);

  ControlCommand Update(const SensorPacket& packet) override;
  const ControlTelemetry& telemetry() const override { return telemetry_; }
  const TrajectorySpec& trajectory() const override { return trajectory_; }
  const FlatnessModel& reference_model() const { return ref_model_; }
  const WrenchObserver& observer() const { return observer_; }

 private:
  ControllerConfig cfg_;
  TrajectorySpec trajectory_;
  FlatnessModel ref_model_;
  WrenchObserver observer_;
  ControlTelemetry telemetry_;
  Vec3 feedback_ = Vec3::Zero();
  long tick_ = 0;
};

/// Open loop: replays the reference rotor speeds, sampled `lookahead`
/// seconds ahead. With `exact_leveling` the plant's leveling torque is
/// cancelled explicitly instead of through J'(h).
class FeedforwardPolicy : public Policy {
 public:
  FeedforwardPolicy(FlatnessModel model, TrajectorySpec trajectory, double lookahead,
                    bool exact_leveling);

  ControlCommand Update(const SensorPacket& packet) override;
  const ControlTelemetry& telemetry() const override { return telemetry_; }
  const TrajectorySpec& trajectory() const override { return trajectory_; }

 private:
  FlatnessModel model_;
  TrajectorySpec trajectory_;
  double lookahead_;
  bool exact_leveling_;
  ControlTelemetry telemetry_;
};

}  // namespace gectl

#endif  // GECTL_CONTROLLER_HPP_
