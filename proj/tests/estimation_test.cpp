#include "gectl/estimation.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gectl/errors.hpp"
#include "gectl/filters.hpp"
#include "gectl_oracles/oracles.hpp"

namespace gectl {
namespace {

constexpr double kG = 9.80665;

TEST(LowPassTest, DcGainAndTimeConstant) {
  const double fc = 10.0, dt = 0.001;
  LowPass<double> f(fc, dt);
  f.SetWarmStart(false);
  const double tau = 1.0 / (2.0 * kPi * fc);
  const int n_tau = static_cast<int>(std::lround(tau / dt));
  double y = 0.0;
  for (int k = 0; k < n_tau; ++k) y = f.Update(1.0);
  EXPECT_NEAR(y, 1.0 - std::exp(-1.0), 0.05 * 0.632);
  for (int k = 0; k < 5000; ++k) y = f.Update(1.0);
  EXPECT_NEAR(y, 1.0, 1e-12);
}

TEST(LowPassTest, ZeroInputAndWarmStart) {
  LowPass<Vec3> f(40.0, 0.002);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(f.Update(Vec3::Zero()).norm(), 0.0);
  LowPass<double> w(40.0, 0.002);
  EXPECT_EQ(w.Update(3.0), 3.0);
  EXPECT_EQ(w.Update(3.0), 3.0);
}

TEST(LowPassTest, RejectsBadCutoff) {
  EXPECT_THROW(LowPass<double>(250.0, 0.002), ConfigError);
  EXPECT_THROW(LowPass<double>(0.0, 0.002), ConfigError);
  EXPECT_THROW(LowPass<double>(10.0, 0.0), ConfigError);
}

ObserverInput HoverInput(const VehicleParams& v, double extra_specific_force, double t) {
  ObserverInput in;
  in.imu_time = in.actuation_time = t;
  const double n = v.HoverRotorSpeed(kG);
  in.rotors = RotorSpeeds::Uniform(n);
  const double thrust = ThrustFromSpeeds(in.rotors, v);
  in.imu.specific_force = Vec3(0, 0, thrust / v.mass + extra_specific_force);
  return in;
}

TEST(ObserveWrenchTest, Arithmetic) {
  const VehicleParams v;
  const Vec3 w(0.1, -0.2, 0.3), wd(1, 2, 3), tau(0.01, 0.0, -0.02);
  const WrenchEstimate e = ObserveWrench(Vec3(0, 0, 12), Vec3(0, 0, 10), w, wd, tau, v, 0.5);
  EXPECT_LT((e.accel - Vec3(0, 0, 12 - 10 / v.mass)).norm(), 1e-15);
  const Mat3& j = v.inertia;
  EXPECT_LT((e.torque - (j * wd + w.cross(j * w) - tau)).norm(), 1e-15);
  EXPECT_TRUE(e.valid);
  EXPECT_EQ(e.timestamp, 0.5);
}

TEST(WrenchObserverTest, HoverGivesZero) {
  const VehicleParams v;
  WrenchObserver obs(v, 40.0, 0.002);
  for (int k = 0; k < 200; ++k) obs.Update(HoverInput(v, 0.0, 0.002 * k));
  EXPECT_LT(obs.estimate().accel.norm(), 1e-12);
  EXPECT_LT(obs.estimate().torque.norm(), 1e-15);
}

TEST(WrenchObserverTest, GroundForceEstimate) {
  const VehicleParams v;
  const GroundEffectParams ge;
  const double h = 0.2;
  WrenchObserver obs(v, 40.0, 0.002);
  const double thrust = v.mass * kG;
  for (int k = 0; k < 200; ++k) {
    obs.Update(HoverInput(v, Fg(h, ge) * thrust / v.mass, 0.002 * k));
  }
  const auto fg = MeasureFgFlight(obs.estimate().accel, obs.thrust_f(), v.mass);
  ASSERT_TRUE(fg.has_value());
  EXPECT_NEAR(*fg, Fg(h, ge), 0.05 * Fg(h, ge));
}

TEST(WrenchObserverTest, ExternalTorqueStep) {
  Plant plant;
  plant.config.toggles = DisturbanceToggles::None();
  plant.config.external.torque = Vec3(0.004, -0.002, 0.001);
  plant.config.external.start_time = 0.1;
  Simulator sim(plant, 1);
  RigidState s;
  s.position = Vec3(0, 0, 2);
  s.rotors = RotorSpeeds::Uniform(plant.vehicle.HoverRotorSpeed(kG));
  sim.Reset(s);
  const double period = 0.002;
  WrenchObserver obs(plant.vehicle, 40.0, period);
  for (int tick = 0; tick < 150; ++tick) {
    ObserverInput in;
    in.imu_time = in.actuation_time = sim.time();
    in.imu = sim.Imu();
    in.rotation = sim.state().attitude.toRotationMatrix();
    in.rotors = sim.state().rotors;
    obs.Update(in);
    for (int k = 0; k < 4; ++k) sim.Step(s.rotors);
  }
  const Vec3 err = obs.estimate().torque - plant.config.external.torque;
  EXPECT_LT(err.norm(), 0.05 * plant.config.external.torque.norm());
}

TEST(WrenchObserverTest, DropsMisalignedSamples) {
  const VehicleParams v;
  WrenchObserver obs(v, 40.0, 0.002);
  obs.Update(HoverInput(v, 0.0, 0.0));
  ObserverInput late = HoverInput(v, 1.0, 0.002);
  late.actuation_time = 0.002 - 0.0045;
  EXPECT_FALSE(obs.Update(late).valid);
  EXPECT_EQ(obs.dropped_samples(), 1);
  EXPECT_TRUE(obs.Update(HoverInput(v, 0.0, 0.004)).valid);
}

TEST(WrenchObserverTest, ResidualSubtractsModel) {
  const VehicleParams v;
  WrenchObserver obs(v, 40.0, 0.002);
  for (int k = 0; k < 300; ++k) {
    ObserverInput in = HoverInput(v, 0.7, 0.002 * k);
    in.model_accel = Vec3(0, 0, 0.7);
    obs.Update(in);
  }
  EXPECT_NEAR(obs.estimate().accel.z(), 0.7, 1e-9);
  EXPECT_LT(obs.estimate().residual_accel.norm(), 1e-9);
}

TEST(SpearmanTest, MonotoneAndTies) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(Spearman(x, {2, 4, 8, 16, 32}), 1.0);
  EXPECT_DOUBLE_EQ(Spearman(x, {5, 4, 3, 2, 1}), -1.0);
  const std::vector<double> r = AverageRanks({10, 20, 20, 30});
  EXPECT_EQ(r, (std::vector<double>{1, 2.5, 2.5, 4}));
  const std::vector<double> a{1, 2, 2, 3, 5, 4}, b{3, 1, 2, 2, 6, 5};
  EXPECT_NEAR(Spearman(a, b), oracles::BruteForceSpearman(a, b), 1e-12);
}

TEST(SpearmanTest, Errors) {
  EXPECT_THROW(Spearman({1, 2}, {1, 2}), InputError);
  EXPECT_THROW(Spearman({1, 2, 3}, {1, 2}), InputError);
  EXPECT_THROW(Spearman({1, 1, 1}, {1, 2, 3}), DomainError);
}

TEST(SpearmanTest, InvariantUnderMonotoneMaps) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<double> x(50), y(50), ex(50), cy(50);
  for (int i = 0; i < 50; ++i) {
    x[i] = n(rng);
    y[i] = x[i] + n(rng);
    ex[i] = std::exp(x[i]);
    cy[i] = y[i] * y[i] * y[i];
  }
  EXPECT_NEAR(Spearman(x, y), Spearman(ex, cy), 1e-14);
}

TEST(MeasureFgTest, PlatformAndFlightAgree) {
  const GroundEffectParams ge;
  const double h = 0.15, t = 9.0, m = 1.1;
  const auto a = MeasureFgPlatform((1.0 + Fg(h, ge)) * t, t);
  const auto b = MeasureFgFlight(Vec3(0, 0, Fg(h, ge) * t / m), t, m);
  ASSERT_TRUE(a && b);
  EXPECT_NEAR(*a, *b, 1e-14);
  EXPECT_FALSE(MeasureFgPlatform(1.0, 0.0).has_value());
  EXPECT_FALSE(MeasureFgFlight(Vec3::UnitZ(), -1.0, 1.0).has_value());
}

std::vector<FgSample> FgSamples(const GroundEffectParams& ge, int n, double noise,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, 1.0);
  std::vector<FgSample> out;
  for (int i = 0; i < n; ++i) {
    const double h = 0.05 + 0.95 * i / (n - 1);
    const double fg = Fg(h, ge);
    out.push_back({h, fg * (1.0 + noise * e(rng))});
  }
  return out;
}

TEST(FitFgTest, NoiselessRecovery) {
  const GroundEffectParams ge;
  const FitReport r = FitFg(FgSamples(ge, 40, 0.0, 1));
  EXPECT_NEAR(r.params[0], ge.g1, 1e-8);
  EXPECT_NEAR(r.params[1], ge.g2, 1e-8);
  EXPECT_EQ(r.names, (std::vector<std::string>{"g1", "g2"}));
}

TEST(FitFgTest, NoisyRecovery) {
  const GroundEffectParams ge;
  const FitReport r = FitFg(FgSamples(ge, 200, 0.02, 3));
  EXPECT_NEAR(r.params[0], ge.g1, 0.05 * ge.g1);
  EXPECT_NEAR(r.params[1], ge.g2, 0.05 * ge.g2);
  EXPECT_GT(r.ci95[0], 0.0);
}

TEST(FitFgTest, Degenerate) {
  std::vector<FgSample> narrow;
  for (int i = 0; i < 20; ++i) narrow.push_back({0.5 + 0.01 * i, 0.1});
  EXPECT_THROW(FitFg(narrow), FitFailure);
  EXPECT_THROW(FitFg(FgSamples(GroundEffectParams{}, 5, 0.0, 1)), InputError);
}

std::vector<MgSample> MgSamples(const GroundEffectParams& ge) {
  std::vector<MgSample> out;
  for (int i = 0; i < 60; ++i) {
    const double h = 0.06 + 0.02 * i;
    for (double deg : {1.0, 3.0, 5.0}) {
      const double tilt = deg * kPi / 180.0;
      out.push_back({h, tilt, 9.0, Mg(h, ge) * 9.0 * std::sin(tilt)});
    }
  }
  return out;
}

TEST(FitMgTest, NoiselessRecoveryAndPeak) {
  const GroundEffectParams ge;
  const FitReport r = FitMg(MgSamples(ge));
  EXPECT_NEAR(r.params[0], ge.g3, 1e-6);
  EXPECT_NEAR(r.params[1], ge.g4, 1e-6);
  EXPECT_NEAR(r.params[2], ge.g5, 1e-6);
  GroundEffectParams fit = ge;
  fit.g3 = r.params[0];
  fit.g4 = r.params[1];
  fit.g5 = r.params[2];
  EXPECT_NEAR(MgPeakHeight(fit), MgPeakHeight(ge), 0.02);
}

TEST(FitMgTest, SingleAltitudeFails) {
  const GroundEffectParams ge;
  std::vector<MgSample> s;
  for (int i = 0; i < 30; ++i) {
    const double tilt = (0.5 + 0.2 * i) * kPi / 180.0;
    s.push_back({0.2, tilt, 9.0, Mg(0.2, ge) * 9.0 * std::sin(tilt)});
  }
  EXPECT_THROW(FitMg(s), FitFailure);
}

TEST(NormalizeCoeffTest, Cases) {
  std::vector<CoeffSample> flat;
  for (int i = 0; i < 20; ++i) flat.push_back({0.1 * (i + 1), 0.3});
  for (const CoeffSample& c : NormalizeCoeff(flat)) EXPECT_NEAR(c.k, 0.0, 1e-15);
  const auto scaled = NormalizeCoeff({{0.1, 1.3}, {1.0, 1.0}}, 1.0);
  EXPECT_NEAR(scaled[0].k, 0.3, 1e-15);
  EXPECT_THROW(NormalizeCoeff({}), InputError);
  EXPECT_THROW(NormalizeCoeff(flat, 0.0), DomainError);
}

TEST(NormalizeCoeffTest, TopDecileReference) {
  const GroundEffectParams ge;
  std::vector<CoeffSample> s;
  for (int i = 0; i <= 100; ++i) {
    const double h = 0.05 + 0.03 * i;
    s.push_back({h, 0.5 * (1.0 + Fg(h, ge))});
  }
  const auto n = NormalizeCoeff(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double want = Fg(s[i].h, ge);
    if (want > 0.1) EXPECT_NEAR(n[i].k, want, 0.1 * want);
  }
}

std::vector<DragObservation> SimulatedDrag(double h, std::uint64_t seed) {
  Plant plant;
  plant.config.toggles = DisturbanceToggles::None();
  plant.config.toggles.ge_drag = true;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<DragObservation> out;
  for (int i = 0; i < 200; ++i) {
    RigidState s;
    s.position = Vec3(0, 0, h);
    s.attitude = Quat(Eigen::AngleAxisd(kPi * u(rng), Vec3::UnitZ()));
    s.velocity = Vec3(2.0 * u(rng), 2.0 * u(rng), 0.2 * u(rng));
    s.rotors = RotorSpeeds::Uniform(plant.vehicle.HoverRotorSpeed(kG));
    const StateDerivative d = ComputeStateDerivative(s, s.rotors, plant, 0.0);
    const Mat3 r = s.attitude.toRotationMatrix();
    out.push_back({d.rotor_plane_height, r.transpose() * s.velocity,
                   r.transpose() * d.disturbance.drag_force / plant.vehicle.mass});
  }
  return out;
}

TEST(FitDragTest, RecoversCoefficientsAndRatio) {
  const GroundEffectParams ge;
  const DragFit low = FitDrag(SimulatedDrag(0.1, 1), 1.0);
  const DragFit high = FitDrag(SimulatedDrag(2.0, 2), 1.0);
  const Mat3 d_low = DragCoefficients(0.1, ge);
  EXPECT_NEAR(low.dx, d_low(0, 0), 0.03 * d_low(0, 0));
  EXPECT_NEAR(low.dy, d_low(1, 1), 0.03 * d_low(1, 1));
  EXPECT_NEAR(low.dx / high.dx, 0.5963, 0.03 * 0.5963);
}

TEST(FitDragTest, ZeroDragAndNoExcitation) {
  std::vector<DragObservation> obs;
  for (int i = 0; i < 20; ++i) {
    obs.push_back({0.5, Vec3(-1.0 + 0.1 * i, 0.5 - 0.05 * i, 0), Vec3::Zero()});
  }
  const DragFit f = FitDrag(obs, 1.0);
  EXPECT_NEAR(f.dx, 0.0, 1e-15);
  EXPECT_NEAR(f.dy, 0.0, 1e-15);
  for (DragObservation& o : obs) o.body_velocity *= 0.1;
  EXPECT_THROW(FitDrag(obs, 1.0), FitFailure);
}

TEST(FitDragTest, ByAltitudeBins) {
  std::vector<DragObservation> obs = SimulatedDrag(0.1, 4);
  const auto more = SimulatedDrag(1.0, 5);
  obs.insert(obs.end(), more.begin(), more.end());
  const auto fits = FitDragByAltitude(obs, 1.0, 0.05, 50);
  ASSERT_EQ(fits.size(), 2u);
  EXPECT_LT(fits[0].h, fits[1].h);
  EXPECT_LT(fits[0].dx, fits[1].dx);
}

TEST(LevenbergMarquardtTest, RankDeficient) {
  auto r = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(3);
    v << x[0] + x[1] - 1.0, x[0] + x[1] - 2.0, x[0] + x[1];
    return v;
  };
  auto j = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(3, 2); };
  EXPECT_THROW(LevenbergMarquardt(r, j, Eigen::Vector2d(0, 0), {"a", "b"}), FitFailure);
}

TEST(FitReportTest, Serializes) {
  const FitReport r = FitFg(FgSamples(GroundEffectParams{}, 40, 0.0, 1));
  EXPECT_NE(r.ToJson().find("\"g1\""), std::string::npos);
  EXPECT_NE(r.ToText().find("g2 = "), std::string::npos);
}

}  // namespace
}  // namespace gectl
