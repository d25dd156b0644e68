#include "gectl/controller.hpp"

#include <cmath>
#include <limits>

#include "gectl/errors.hpp"

namespace gectl {

AccelMode ParseAccelMode(const std::string& name) {
  if (name == "none") return AccelMode::kNone;
  if (name == "indi") return AccelMode::kIndi;
  if (name == "model") return AccelMode::kModel;
  throw ConfigError("unknown acceleration mode '" + name + "' (none|indi|model)");
}

TorqueMode ParseTorqueMode(const std::string& name) {
  if (name == "none") return TorqueMode::kNone;
  if (name == "model") return TorqueMode::kModel;
  if (name == "indi") return TorqueMode::kIndi;
  if (name == "hybrid") return TorqueMode::kHybrid;
  throw ConfigError("unknown torque mode '" + name + "' (none|model|indi|hybrid)");
}

std::string ToString(AccelMode mode) {
  switch (mode) {
    case AccelMode::kNone: return "none";
    case AccelMode::kIndi: return "indi";
    case AccelMode::kModel: return "model";
  }
  return "?";
}

std::string ToString(TorqueMode mode) {
  switch (mode) {
    case TorqueMode::kNone: return "none";
    case TorqueMode::kModel: return "model";
    case TorqueMode::kIndi: return "indi";
    case TorqueMode::kHybrid: return "hybrid";
  }
  return "?";
}

void ControlGains::Validate() const {
  auto check = [](const Vec3& v, const char* key) {
    if (!v.allFinite() || (v.array() < 0.0).any()) {
      throw ConfigError("gains must be finite and non-negative", key);
    }
  };
  check(kp, "gains.kp");
  check(kv, "gains.kv");
  check(k_att, "gains.k_att");
  check(k_rate, "gains.k_rate");
  if (!(filter_cutoff > 0.0)) {
    throw ConfigError("must be positive", "gains.filter_cutoff");
  }
}

Vec3 PositionFeedback(const Vec3& p_ref, const Vec3& v_ref, const Vec3& p_est,
                      const Vec3& v_est, const ControlGains& gains) {
  return gains.kp.cwiseProduct(p_ref - p_est) + gains.kv.cwiseProduct(v_ref - v_est);
}

Vec3 AccelerationCompensation(const FlatReference& ref, AccelMode mode,
                              const FlatnessModel& model, const Vec3& ext_accel_f) {
  switch (mode) {
    case AccelMode::kNone:
      return Vec3::Zero();
    case AccelMode::kIndi:
      return -ext_accel_f;
    case AccelMode::kModel: {
      const Mat3& r = ref.rotation;
      const Vec3 a_drag = -r * model.NormalizedDrag(ref.height) * r.transpose() *
                          ref.flat.velocity;
      const Vec3 a_ground =
          ref.thrust / model.vehicle.mass * model.FgAt(ref.height) * r.col(2);
      return -(a_drag + a_ground);
    }
  }
  return Vec3::Zero();
}

Vec3 AccelerationCommand(const FlatReference& ref, const Vec3& p_est, const Vec3& v_est,
                         const ControlGains& gains, const FlatnessModel& model,
                         const Vec3& ext_accel_f) {
  return ref.flat.acceleration + model.gravity * WorldZ() +
         PositionFeedback(ref.flat.position, ref.flat.velocity, p_est, v_est, gains) +
         AccelerationCompensation(ref, gains.accel_mode, model, ext_accel_f);
}

Vec3 AttitudeErrorVector(const Quat& q_est, const Quat& q_des) {
  if (std::abs(q_est.norm() - 1.0) > 1e-6 || std::abs(q_des.norm() - 1.0) > 1e-6) {
    throw InputError("attitude error needs unit quaternions");
  }
  Quat e = q_est.conjugate() * q_des;
  if (e.w() < 0.0) e.coeffs() *= -1.0;
  const Vec3 v = e.vec();
  const double w = Clamp(e.w(), -1.0, 1.0);
  if (1.0 - w < 1e-8) return 2.0 * v;
  return 2.0 * std::acos(w) / std::sqrt(1.0 - w * w) * v;
}

RateCommand BodyrateCommand(const Vec3& att_error, const Vec3& rate_ref,
                            const Vec3& rate_f, const Vec3& rate_dot_ref,
                            const ControlGains& gains) {
  RateCommand out;
  out.rate = gains.k_att.cwiseProduct(att_error) + rate_ref;
  out.rate_dot = gains.k_rate.cwiseProduct(out.rate - rate_f) + rate_dot_ref;
  return out;
}

double ThrustCommand(const Vec3& a_des, const Vec3& z_b, double mass) {
  const double n = z_b.norm();
  if (!(n > 0.0)) throw InputError("thrust axis has zero length");
  return std::max(0.0, mass * a_des.dot(z_b) / n);
}

Vec3 TorqueCommandModel(const Vec3& rate_des, const Vec3& rate_dot_des, double h,
                        double thrust_ref, const FlatnessModel& model, bool equivalent) {
  const Mat3 j = equivalent ? EquivalentInertia(std::max(h, 0.0), thrust_ref, model.ground,
                                                model.vehicle, model.gravity)
                            : model.vehicle.inertia;
  return j * rate_dot_des + rate_des.cross(j * rate_des);
}

Vec3 TorqueCommandIndi(const Vec3& body_torque, const Vec3& rate_dot_des,
                       const Vec3& rate_dot_f, const Mat3& inertia, double actuation_age,
                       double control_period) {
  if (actuation_age > 2.0 * control_period * (1.0 + 1e-9)) {
    throw ControllerFault("actuation measurement is stale (" +
                          std::to_string(actuation_age) + " s old)");
  }
  return body_torque + inertia * (rate_dot_des - rate_dot_f);
}

namespace {

// Largest s in [0, 1] with lo <= base + s dir <= hi componentwise, or -1
// when base itself is out of range.
double MaxScale(const Vec4& base, const Vec4& dir, double lo, double hi) {
  const double slack = 1e-9 * hi;
  double s = 1.0;
  for (int i = 0; i < 4; ++i) {
    if (base[i] < lo - slack || base[i] > hi + slack) return -1.0;
    if (dir[i] > 0.0) s = std::min(s, (hi - base[i]) / dir[i]);
    if (dir[i] < 0.0) s = std::min(s, (lo - base[i]) / dir[i]);
  }
  return std::max(s, 0.0);
}

bool InRange(const Vec4& v, double lo, double hi) {
  const double slack = 1e-9 * hi;
  return (v.array() >= lo - slack).all() && (v.array() <= hi + slack).all();
}

}  // namespace

Allocation Allocate(double thrust, const Vec3& torque, const VehicleParams& vehicle) {
  const Mat4 mix = BuildMixingMatrix(vehicle);
  const Mat4 inv = mix.inverse();
  const double max_sq = vehicle.max_rotor_speed * vehicle.max_rotor_speed;
  const double max_thrust = 4.0 * vehicle.k_thrust * max_sq;

  Allocation out;
  double t = thrust;
  if (!(t >= 0.0) || t > max_thrust) {
    t = Clamp(std::isfinite(t) ? t : 0.0, 0.0, max_thrust);
    out.thrust_clamped = true;
  }
  const Vec4 base = inv.col(0) * t;
  const Vec4 rp = inv.col(1) * torque.x() + inv.col(2) * torque.y();
  const Vec4 yaw = inv.col(3) * torque.z();

  Vec4 sq = base + rp + yaw;
  if (!InRange(sq, 0.0, max_sq)) {
    const double s_yaw = MaxScale(base + rp, yaw, 0.0, max_sq);
    if (s_yaw >= 0.0) {
      sq = base + rp + s_yaw * yaw;
      out.yaw_reduced = true;
    } else {
      const double s_rp = std::max(MaxScale(base, rp, 0.0, max_sq), 0.0);
      sq = base + s_rp * rp;
      out.yaw_reduced = torque.z() != 0.0;
      out.roll_pitch_reduced = true;
    }
  }
  out.saturated = out.thrust_clamped || out.yaw_reduced || out.roll_pitch_reduced;
  for (int i = 0; i < 4; ++i) out.rotors[i] = std::sqrt(Clamp(sq[i], 0.0, max_sq));
  out.achieved = mix * out.rotors.Squared();
  return out;
}

namespace {

FlatnessModel ReferenceModelFor(const FlatnessModel& belief, const ControlGains& gains) {
  FlatnessModel m = belief;
  const bool model_accel = gains.accel_mode == AccelMode::kModel;
  m.ground_force = belief.ground_force && model_accel;
  m.drag = belief.drag && model_accel;
  m.equivalent_inertia = belief.equivalent_inertia &&
                         (gains.torque_mode == TorqueMode::kModel ||
                          gains.torque_mode == TorqueMode::kHybrid);
  return m;
}

}  // namespace

Controller::Controller(ControllerConfig config, TrajectorySpec trajectory)
    : cfg_(std::move(config)),
      trajectory_(std::move(trajectory)),
      ref_model_(ReferenceModelFor(cfg_.model, cfg_.gains)),
      observer_(cfg_.model.vehicle, cfg_.gains.filter_cutoff, cfg_.control_period) {
  cfg_.gains.Validate();
  if (cfg_.position_decimation < 1) {
    throw ConfigError("position loop decimation must be >= 1");
  }
}

ControlCommand Controller::Update(const SensorPacket& pk) {
  const VehicleParams& veh = cfg_.model.vehicle;
  const GroundEffectParams& ge = cfg_.model.ground;
  const ControlGains& gains = cfg_.gains;

  ControlTelemetry& tm = telemetry_;
  tm.ref = ComputeReference(trajectory_.Evaluate(pk.time), ref_model_);
  const FlatReference& ref = tm.ref;

  const Mat3 r_est = pk.attitude.toRotationMatrix();
  const double h_est = std::max(veh.RotorPlaneHeight(pk.position.z()), 0.0);
  const double thrust_meas = ThrustFromSpeeds(pk.rotors, veh);

  ObserverInput obs;
  obs.imu_time = pk.time;
  obs.actuation_time = pk.rotor_time;
  obs.imu = pk.imu;
  obs.rotation = r_est;
  obs.rotors = pk.rotors;
  if (cfg_.model.ground_force) {
    obs.model_accel += GroundEffectForce(r_est, thrust_meas, h_est, ge) / veh.mass;
  }
  if (cfg_.model.drag) {
    obs.model_accel += DragForce(r_est, pk.velocity, h_est, ge) / veh.mass;
  }
  if (cfg_.model.equivalent_inertia) {
    obs.model_torque = LevelingTorque(r_est, thrust_meas, h_est, ge);
  }
  if (tick_ == 0) observer_.SeedBodyRateDot(ref.body_acceleration);
  tm.wrench = observer_.Update(obs);

  if (tick_ % cfg_.position_decimation == 0) {
    feedback_ = PositionFeedback(ref.flat.position, ref.flat.velocity, pk.position,
                                 pk.velocity, gains);
  }
  tm.accel_des = ref.flat.acceleration + cfg_.model.gravity * WorldZ() + feedback_ +
                 AccelerationCompensation(ref, gains.accel_mode, ref_model_,
                                          observer_.estimate().accel);
  if (tm.accel_des.norm() > 1e-6) {
    tm.attitude_des = Quat(AttitudeFromThrustAxis(tm.accel_des, ref.flat.yaw)).normalized();
  }

  ControlCommand cmd;
  cmd.thrust = ThrustCommand(tm.accel_des, r_est.col(2), veh.mass);

  const Vec3 att_err = AttitudeErrorVector(pk.attitude.normalized(), tm.attitude_des);
  tm.rates = BodyrateCommand(att_err, ref.body_rate, observer_.body_rate_f(),
                             ref.body_acceleration, gains);

  const double age = pk.time - pk.rotor_time;
  switch (gains.torque_mode) {
    case TorqueMode::kNone:
      cmd.torque = TorqueCommandModel(tm.rates.rate, tm.rates.rate_dot, ref.height,
                                      ref.thrust, cfg_.model, false);
      break;
    case TorqueMode::kModel:
      cmd.torque = TorqueCommandModel(tm.rates.rate, tm.rates.rate_dot, ref.height,
                                      ref.thrust, cfg_.model, ref_model_.equivalent_inertia);
      break;
    case TorqueMode::kIndi:
      cmd.torque = TorqueCommandIndi(observer_.body_torque_f(), tm.rates.rate_dot,
                                     observer_.body_rate_dot_f(), veh.inertia, age,
                                     cfg_.control_period);
      break;
    case TorqueMode::kHybrid:
      cmd.torque = TorqueCommandIndi(
          observer_.body_torque_f(), tm.rates.rate_dot, observer_.body_rate_dot_f(),
          ref_model_.InertiaAt(ref.height, ref.thrust), age,
          cfg_.control_period);
      break;
  }
  cmd.allocation = Allocate(cmd.thrust, cmd.torque, veh);
  ++tick_;
  return cmd;
}

FeedforwardPolicy::FeedforwardPolicy(FlatnessModel model, TrajectorySpec trajectory,
                                     double lookahead, bool exact_leveling)
    : model_(std::move(model)),
      trajectory_(std::move(trajectory)),
      lookahead_(lookahead),
      exact_leveling_(exact_leveling) {}

ControlCommand FeedforwardPolicy::Update(const SensorPacket& pk) {
  telemetry_.ref = ComputeReference(trajectory_.Evaluate(pk.time + lookahead_), model_);
  const FlatReference& ref = telemetry_.ref;
  telemetry_.attitude_des = ref.attitude;
  telemetry_.rates.rate = ref.body_rate;
  telemetry_.rates.rate_dot = ref.body_acceleration;

  ControlCommand cmd;
  cmd.thrust = ref.thrust;
  cmd.torque = ref.torque;
  if (exact_leveling_) {
    cmd.torque -= LevelingTorque(ref.rotation, ref.thrust, std::max(ref.height, 0.0),
                                 model_.ground);
  }
  cmd.allocation = Allocate(cmd.thrust, cmd.torque, model_.vehicle);
  return cmd;
}

}  // namespace gectl
