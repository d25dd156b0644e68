#include "gectl/controller.hpp"

#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "gectl/errors.hpp"
#include "gectl/harness.hpp"

namespace gectl {
namespace {

constexpr double kG = 9.80665;

FlatnessModel NoGroundModel() {
  FlatnessModel m;
  m.ground_force = false;
  m.drag = false;
  m.equivalent_inertia = false;
  return m;
}

TEST(ModeNamesTest, RoundTrip) {
  for (auto m : {AccelMode::kNone, AccelMode::kIndi, AccelMode::kModel}) {
    EXPECT_EQ(ParseAccelMode(ToString(m)), m);
  }
  for (auto m : {TorqueMode::kNone, TorqueMode::kModel, TorqueMode::kIndi, TorqueMode::kHybrid}) {
    EXPECT_EQ(ParseTorqueMode(ToString(m)), m);
  }
  EXPECT_THROW(ParseAccelMode("hybrid"), ConfigError);
  EXPECT_THROW(ParseTorqueMode("pid"), ConfigError);
}

TEST(ControlGainsTest, RejectsNegative) {
  ControlGains g;
  g.kv.y() = -1.0;
  EXPECT_THROW(g.Validate(), ConfigError);
}

TEST(AccelerationCommandTest, ZeroErrorNoDisturbance) {
  const FlatnessModel m = NoGroundModel();
  FlatOutput f = Hover(Vec3(0, 0, 1));
  f.acceleration = Vec3(0.3, -0.2, 0.1);
  f.velocity = Vec3(1, 0, 0);
  const FlatReference ref = ComputeReference(f, m);
  const Vec3 a = AccelerationCommand(ref, f.position, f.velocity, ControlGains{}, m);
  EXPECT_LT((a - kG * Vec3::UnitZ() - f.acceleration).norm(), 1e-15);
}

TEST(AccelerationCommandTest, GroundThrustCompensation) {
  FlatnessModel m;
  m.drag = false;
  const double h = std::sqrt(m.ground.g2 / 0.25 - m.ground.g1);
  const FlatReference ref = ComputeReference(Hover(Vec3(0, 0, h)), m);
  const Vec3 c = AccelerationCompensation(ref, AccelMode::kModel, m, Vec3::Zero());
  EXPECT_NEAR(c.norm(), kG / 1.25 * 0.25, 1e-12);
  EXPECT_LT(c.z(), 0.0);
  EXPECT_EQ(AccelerationCompensation(ref, AccelMode::kNone, m, Vec3::Ones()).norm(), 0.0);
  EXPECT_EQ(AccelerationCompensation(ref, AccelMode::kIndi, m, Vec3(1, 2, 3)), Vec3(-1, -2, -3));
}

TEST(AccelerationCommandTest, AffineInErrors) {
  const FlatnessModel m;
  const ControlGains g;
  const FlatReference ref = ComputeReference(Hover(Vec3(0, 0, 0.3)), m);
  const Vec3 a0 = AccelerationCommand(ref, ref.flat.position, ref.flat.velocity, g, m);
  const Vec3 ep(0.02, -0.01, 0.03), ev(0.1, 0.2, -0.05);
  const Vec3 a = AccelerationCommand(ref, ref.flat.position - ep, ref.flat.velocity - ev, g, m);
  EXPECT_LT((a - a0 - g.kp.cwiseProduct(ep) - g.kv.cwiseProduct(ev)).norm(), 1e-14);
}

TEST(AttitudeErrorTest, IdentityAndAxisAngle) {
  const Quat q = Quat::UnitRandom();
  EXPECT_EQ(AttitudeErrorVector(q, q).norm(), 0.0);
  const Quat target(Eigen::AngleAxisd(kPi / 2, Vec3::UnitX()));
  const Vec3 e = AttitudeErrorVector(Quat::Identity(), target);
  EXPECT_LT((e - Vec3(kPi / 2, 0, 0)).norm(), 1e-12);
}

TEST(AttitudeErrorTest, NormIsGeodesicAngle) {
  std::srand(17);
  for (int k = 0; k < 200; ++k) {
    const Quat a = Quat::UnitRandom(), b = Quat::UnitRandom();
    const double angle = Eigen::AngleAxisd(a.toRotationMatrix().transpose() *
                                           b.toRotationMatrix()).angle();
    EXPECT_NEAR(AttitudeErrorVector(a, b).norm(), angle, 1e-9);
    Quat nb = b;
    nb.coeffs() *= -1.0;
    EXPECT_LT((AttitudeErrorVector(a, nb) - AttitudeErrorVector(a, b)).norm(), 1e-12);
  }
}

TEST(AttitudeErrorTest, SmallAngleBranch) {
  const Quat t(Eigen::AngleAxisd(1e-6, Vec3(0, 1, 0)));
  EXPECT_NEAR(AttitudeErrorVector(Quat::Identity(), t).y(), 1e-6, 1e-15);
}

TEST(AttitudeErrorTest, RejectsNonUnit) {
  Quat q = Quat::Identity();
  q.w() = 1.01;
  EXPECT_THROW(AttitudeErrorVector(q, Quat::Identity()), InputError);
}

TEST(BodyrateCommandTest, Cases) {
  const ControlGains g;
  const Vec3 w_ref(0.1, 0.2, 0.3), wd_ref(1, 2, 3);
  RateCommand c = BodyrateCommand(Vec3::Zero(), w_ref, w_ref, wd_ref, g);
  EXPECT_EQ(c.rate, w_ref);
  EXPECT_EQ(c.rate_dot, wd_ref);
  const Vec3 e(0.02, -0.01, 0.05);
  c = BodyrateCommand(e, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), g);
  EXPECT_LT((c.rate_dot - g.k_rate.cwiseProduct(g.k_att.cwiseProduct(e))).norm(), 1e-15);
  ControlGains g2 = g;
  g2.k_att *= 2.0;
  const RateCommand c2 = BodyrateCommand(e, w_ref, Vec3::Zero(), Vec3::Zero(), g2);
  const RateCommand c1 = BodyrateCommand(e, w_ref, Vec3::Zero(), Vec3::Zero(), g);
  EXPECT_LT(((c2.rate - w_ref) - 2.0 * (c1.rate - w_ref)).norm(), 1e-15);
}

TEST(ThrustCommandTest, Cases) {
  EXPECT_NEAR(ThrustCommand(kG * Vec3::UnitZ(), Vec3::UnitZ(), 1.2), 1.2 * kG, 1e-15);
  EXPECT_EQ(ThrustCommand(Vec3::UnitX(), Vec3::UnitZ(), 1.0), 0.0);
  EXPECT_EQ(ThrustCommand(-Vec3::UnitZ(), Vec3::UnitZ(), 1.0), 0.0);
  const Vec3 zb = Eigen::AngleAxisd(kPi / 6, Vec3::UnitX()) * Vec3::UnitZ();
  EXPECT_NEAR(ThrustCommand(kG * Vec3::UnitZ(), 3.0 * zb, 1.0), kG * std::cos(kPi / 6), 1e-12);
}

TEST(TorqueCommandModelTest, Cases) {
  const FlatnessModel m;
  EXPECT_EQ(TorqueCommandModel(Vec3::Zero(), Vec3::Zero(), 0.2, 9.8, m, true).norm(), 0.0);
  const Vec3 w(0.2, 0.1, -0.3), wd(3.0, -2.0, 1.0);
  const Mat3& j = m.vehicle.inertia;
  EXPECT_LT((TorqueCommandModel(w, wd, 100.0, 9.8, m, true) - (j * wd + w.cross(j * w))).norm(),
            1e-12);
  const double peak = MgPeakHeight(m.ground);
  const Vec3 low = TorqueCommandModel(w, wd, peak, 9.8, m, true);
  const Vec3 high = TorqueCommandModel(w, wd, 2.0, 9.8, m, true);
  EXPECT_GT(std::abs(low.x()), std::abs(high.x()));
  EXPECT_GT(std::abs(low.y()), std::abs(high.y()));
  const Vec3 plain = TorqueCommandModel(w, wd, peak, 9.8, m, false);
  EXPECT_LT((plain - (j * wd + w.cross(j * w))).norm(), 1e-15);
}

TEST(TorqueCommandIndiTest, FixedPointAndStaleness) {
  const Mat3 j = FlatnessModel{}.vehicle.inertia;
  const Vec3 tau(0.01, -0.02, 0.003), wd(1, 2, 3);
  EXPECT_EQ(TorqueCommandIndi(tau, wd, wd, j), tau);
  EXPECT_LT((TorqueCommandIndi(tau, wd, Vec3::Zero(), j) - (tau + j * wd)).norm(), 1e-18);
  EXPECT_NO_THROW(TorqueCommandIndi(tau, wd, wd, j, 0.004, 0.002));
  EXPECT_THROW(TorqueCommandIndi(tau, wd, wd, j, 0.0041, 0.002), ControllerFault);
}

TEST(AllocateTest, SymmetricHover) {
  const VehicleParams v;
  const double n0 = 11000.0;
  const Allocation a = Allocate(4 * v.k_thrust * n0 * n0, Vec3::Zero(), v);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(a.rotors[i], n0, 1e-8);
  EXPECT_FALSE(a.saturated);
}

TEST(AllocateTest, RoundTripUnsaturated) {
  const VehicleParams v;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double t = 10.0 + u(rng);
    const Vec3 tau(0.05 * u(rng), 0.05 * u(rng), 0.005 * u(rng));
    const Allocation a = Allocate(t, tau, v);
    ASSERT_FALSE(a.saturated);
    EXPECT_LT(std::abs(a.achieved[0] - t), 1e-9);
    EXPECT_LT((a.achieved.tail<3>() - tau).norm(), 1e-9);
  }
}

TEST(AllocateTest, YawShedFirst) {
  const VehicleParams v;
  const double t_max = 4.0 * v.k_thrust * v.max_rotor_speed * v.max_rotor_speed;
  const Vec3 tau(0.02, 0.0, 0.2);
  const Allocation a = Allocate(0.8 * t_max, tau, v);
  EXPECT_TRUE(a.saturated);
  EXPECT_TRUE(a.yaw_reduced);
  EXPECT_FALSE(a.roll_pitch_reduced);
  EXPECT_NEAR(a.achieved[0], 0.8 * t_max, 1e-9);
  EXPECT_NEAR(a.achieved[1], tau.x(), 1e-9);
  EXPECT_LT(std::abs(a.achieved[3]), tau.z());
  EXPECT_TRUE(a.rotors.WithinLimits(v.max_rotor_speed));
}

TEST(AllocateTest, RollPitchThenThrust) {
  const VehicleParams v;
  const Allocation a = Allocate(1.0, Vec3(5.0, 0.0, 0.0), v);
  EXPECT_TRUE(a.roll_pitch_reduced);
  EXPECT_NEAR(a.achieved[0], 1.0, 1e-9);
  const Allocation b = Allocate(1e6, Vec3::Zero(), v);
  EXPECT_TRUE(b.thrust_clamped);
  EXPECT_TRUE(b.rotors.WithinLimits(v.max_rotor_speed));
  const Allocation c = Allocate(-3.0, Vec3::Zero(), v);
  EXPECT_TRUE(c.thrust_clamped);
  EXPECT_EQ(c.achieved[0], 0.0);
}

Scenario HoverScenario(double h) {
  Scenario s;
  s.trajectory.kind = TrajectorySpec::Kind::kHover;
  s.trajectory.hover_position = Vec3(0, 0, h);
  s.trajectory.duration = 4.0;
  return s;
}

TEST(ControllerClosedLoopTest, PerfectModelHover) {
  const RunResult r = gectl::Run(HoverScenario(1.0));
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_LT(r.metrics.rmse_all, 1.0);
}

TEST(ControllerClosedLoopTest, PerfectModelLemniscate) {
  Scenario s;
  s.trajectory.kind = TrajectorySpec::Kind::kLemniscate;
  s.trajectory.duration = s.trajectory.lemniscate.Period();
  const RunResult r = gectl::Run(s);
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_LT(r.metrics.rmse_all, 1.0);
}

TEST(ControllerClosedLoopTest, IndiRejectsConstantTorque) {
  Scenario s = HoverScenario(1.0);
  s.sim.external.torque = Vec3(0.02, -0.01, 0.0);
  s.sim.external.start_time = 0.5;
  s.gains.torque_mode = TorqueMode::kIndi;
  const RunResult indi = gectl::Run(s);
  s.gains.torque_mode = TorqueMode::kModel;
  const RunResult model = gectl::Run(s);
  ASSERT_EQ(indi.exit_code, kExitOk);
  const LogRow& last = indi.log.rows.back();
  EXPECT_LT((last.w - last.w_ref).norm(), 1e-3);
  EXPECT_LT(GeodesicAngle(last.q, last.q_des), 1e-3);
  const LogRow& lm = model.log.rows.back();
  EXPECT_GT(GeodesicAngle(lm.q, lm.q_des), 10.0 * GeodesicAngle(last.q, last.q_des));
}

TEST(ControllerClosedLoopTest, HybridBeatsPlainIndiAtPeakHeight) {
  Scenario s;
  s.trajectory.kind = TrajectorySpec::Kind::kLemniscate;
  s.trajectory.duration = s.trajectory.lemniscate.Period();
  s.sim.model_mismatch = 0.05;
  s.sim.imu_noise = {0.05, 0.005};
  s.seed = 11;
  s.gains.torque_mode = TorqueMode::kHybrid;
  const double hybrid = gectl::Run(s).metrics.attitude_rmse_low;
  s.gains.torque_mode = TorqueMode::kIndi;
  const double indi = gectl::Run(s).metrics.attitude_rmse_low;
  s.gains.torque_mode = TorqueMode::kModel;
  const double model = gectl::Run(s).metrics.attitude_rmse_low;
  EXPECT_LT(hybrid, indi);
  EXPECT_LT(hybrid, model);
}

TEST(FeedforwardPolicyTest, ReplaysReferenceRotors) {
  TrajectorySpec t;
  t.kind = TrajectorySpec::Kind::kLemniscate;
  const FlatnessModel m;
  FeedforwardPolicy p(m, t, 0.0, false);
  SensorPacket pk;
  pk.time = 0.7;
  const ControlCommand c = p.Update(pk);
  const FlatReference r = ComputeReference(t.Evaluate(0.7), m);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(c.allocation.rotors[i], r.rotors[i], 1e-9);
}

}  // namespace
}  // namespace gectl
