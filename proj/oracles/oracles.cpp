#include "gectl_oracles/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "gectl/controller.hpp"
#include "gectl/errors.hpp"
#include "gectl/estimation.hpp"
#include "gectl/flatness.hpp"

namespace gectl::oracles {

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Mat3 Roll(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(); }

Vec3 LogMap(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

std::string Fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

}  // namespace

double QuadratureLevelingTorque(double h, double tilt, double thrust,
                                const GroundEffectParams& ge, double wheelbase,
                                int intervals) {
  const double arm = 0.5 * wheelbase;
  if (!(h - arm * std::sin(std::abs(tilt)) > 0.0)) {
    throw DomainError("quadrature oracle: rotor circle touches the ground");
  }
  if (intervals < 2 || intervals % 2 != 0) {
    throw InputError("quadrature oracle: interval count must be even");
  }
  const double step = 2.0 * kPi / intervals;
  const double density = thrust / (2.0 * kPi);
  auto f = [&](double theta) {
    const double height = h - arm * std::sin(tilt) * std::cos(theta);
    return Fg(height, ge) * density * arm * std::cos(theta);
  };
  double sum = f(0.0) + f(2.0 * kPi);
  for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * step);
  return std::abs(sum * step / 3.0);
}

double BruteForceSpearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<long double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      long double smaller = 0, equal = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (v[j] < v[i]) smaller += 1;
        if (v[j] == v[i]) equal += 1;
      }
      r[i] = 1 + smaller + (equal - 1) / 2;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  long double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  return static_cast<double>(cov / (std::sqrt(vx / n) * std::sqrt(vy / n)) / n);
}

OracleResult CheckTorqueModel() {
  const auto start = Clock::now();
  const VehicleParams vehicle;
  const GroundEffectParams ge;
  const double thrust = vehicle.mass * 9.80665;
  double err_small = 0.0, err_all = 0.0;
  for (int ih = 0; ih <= 90; ++ih) {
    const double h = 0.1 + 0.01 * ih;
    for (int id = 1; id <= 100; ++id) {
      const double tilt = 0.1 * id * kPi / 180.0;
      const double closed = LevelingTorque(Roll(tilt), thrust, h, ge).norm();
      const double quad = QuadratureLevelingTorque(h, tilt, thrust, ge, vehicle.wheelbase);
      const double rel = std::abs(closed - quad) / quad;
      if (id <= 20) err_small = std::max(err_small, rel);
      err_all = std::max(err_all, rel);
    }
  }
  OracleResult r;
  r.name = "torque-model";
  r.seconds = Seconds(start);
  r.value = err_all;
  r.threshold = 0.05;
  r.passed = err_small <= 0.005 && err_all <= 0.05 && r.seconds < 5.0;
  r.detail = "max rel err tilt<=2deg " + Fmt(err_small) + " (<= 0.005), tilt<=10deg " +
             Fmt(err_all) + " (<= 0.05), " + Fmt(r.seconds) + " s";
  return r;
}

OracleResult CheckDerivativeIdentity() {
  const VehicleParams vehicle;
  const double b = vehicle.wheelbase;
  const GroundEffectParams base;
  const GroundEffectParams ge = GroundEffectParams::Tied(base.g1, base.g2, b);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double h = 0.001 + 2.0 * i / 999.0;
    worst = std::max(worst, std::abs(Mg(h, ge) + b * b / 8.0 * FgPrime(h, ge)));
  }
  OracleResult r;
  r.name = "derivative-identity";
  r.value = worst;
  r.threshold = 1e-9;
  r.passed = worst <= 1e-9;
  r.detail = "max |mg + (b^2/8) fg'| over 1000 heights in (0, 2] m: " + Fmt(worst);
  return r;
}

OracleResult CheckLemniscate() {
  const LemniscateSpec spec;
  const double period = spec.Period();
  const double e = 1e-3;
  auto d5 = [e](const std::function<Vec3(double)>& f, double t) {
    return (f(t - 2 * e) - 8.0 * f(t - e) + 8.0 * f(t + e) - f(t + 2 * e)) / (12.0 * e);
  };
  const std::function<Vec3(double)> pos = [&](double t) { return Lemniscate(t, spec).position; };
  const std::function<Vec3(double)> vel = [&](double t) { return Lemniscate(t, spec).velocity; };
  const std::function<Vec3(double)> acc = [&](double t) {
    return Lemniscate(t, spec).acceleration;
  };
  const std::function<Vec3(double)> jrk = [&](double t) { return Lemniscate(t, spec).jerk; };
  double scale[4] = {0, 0, 0, 0}, err[4] = {0, 0, 0, 0};
  double peak = 0.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const double t = period * i / n;
    const FlatOutput f = Lemniscate(t, spec);
    const Vec3 fd[4] = {d5(pos, t), d5(vel, t), d5(acc, t), d5(jrk, t)};
    const Vec3 an[4] = {f.velocity, f.acceleration, f.jerk, f.snap};
    for (int k = 0; k < 4; ++k) {
      scale[k] = std::max(scale[k], an[k].norm());
      err[k] = std::max(err[k], (fd[k] - an[k]).norm());
    }
  }
  for (int i = 0; i < 200000; ++i) {
    peak = std::max(peak, Lemniscate(period * i / 200000.0, spec).velocity.norm());
  }
  double rel = 0.0;
  for (int k = 0; k < 4; ++k) rel = std::max(rel, err[k] / scale[k]);
  const double speed_err = std::abs(peak - spec.peak_speed);
  OracleResult r;
  r.name = "lemniscate";
  r.value = rel;
  r.threshold = 1e-6;
  r.passed = rel <= 1e-6 && speed_err <= 1e-6;
  r.detail = "max rel derivative err " + Fmt(rel) + ", peak speed err " + Fmt(speed_err);
  return r;
}

OracleResult CheckReferenceRates() {
  TrajectorySpec traj;
  traj.kind = TrajectorySpec::Kind::kLemniscate;
  FlatnessModel model;
  auto ref = [&](double t) { return ComputeReference(traj.Evaluate(t), model); };
  const double period = traj.lemniscate.Period();
  const double e1 = 1e-4, e2 = 1e-3;
  double rate_err = 0.0, acc_err = 0.0;
  for (int i = 0; i < 400; ++i) {
    const double t = period * (i + 0.5) / 400;
    const FlatReference r0 = ref(t);
    const Vec3 fd_rate = LogMap(ref(t - e1).rotation.transpose() * ref(t + e1).rotation) / (2 * e1);
    rate_err = std::max(rate_err, (fd_rate - r0.body_rate).norm());
    const Vec3 fd_acc = (ref(t + e2).body_rate - ref(t - e2).body_rate) / (2 * e2);
    acc_err = std::max(acc_err, (fd_acc - r0.body_acceleration).norm());
  }
  OracleResult r;
  r.name = "reference-rates";
  r.value = rate_err;
  r.threshold = 1e-4;
  r.passed = rate_err <= 1e-4 && acc_err <= 1e-3;
  r.detail = "max body-rate err " + Fmt(rate_err) + " rad/s (<= 1e-4), body-accel err " +
             Fmt(acc_err) + " rad/s^2 (<= 1e-3)";
  return r;
}

OracleResult CheckSpearman() {
  std::mt19937_64 rng(20240521);
  std::uniform_int_distribution<int> size(5, 80), level(0, 9);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int n = size(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = level(rng);
      y[i] = 0.5 * x[i] + level(rng);
    }
    x[0] = 0.0;  // keep both sequences non-constant
    x[1] = 9.0;
    worst = std::max(worst, std::abs(Spearman(x, y) - BruteForceSpearman(x, y)));
  }
  std::vector<double> a(50), up(50), down(50);
  for (int i = 0; i < 50; ++i) {
    a[i] = i * 0.37;
    up[i] = std::exp(a[i]);
    down[i] = -a[i] * a[i] * a[i];
  }
  const bool monotone = Spearman(a, up) == 1.0 && Spearman(a, down) == -1.0;
  OracleResult r;
  r.name = "spearman";
  r.value = worst;
  r.threshold = 1e-12;
  r.passed = worst <= 1e-12 && monotone;
  r.detail = "max |spearman - brute force| over 100 tied datasets " + Fmt(worst) +
             (monotone ? ", monotone cases exact" : ", monotone cases NOT exact");
  return r;
}

EquivalenceResult RunEquivalence(const VehicleParams& vehicle, const GroundEffectParams& ge,
                                 double gravity, double tilt0, double duration, double dt) {
  EquivalenceResult out;
  const double h = MgPeakHeight(ge);
  const double thrust = vehicle.mass * gravity / (1.0 + Fg(h, ge));
  const Mat3 j = vehicle.inertia;
  const Mat3 jp = EquivalentInertia(h, thrust, ge, vehicle, gravity);
  out.height = h;
  out.added_inertia = jp(0, 0) - j(0, 0);

  // Shared regulator: the default cascade's roll/pitch gains collapsed to PD,
  // tau = J' (-kp xi - kd w) with xi the rotation vector to level.
  const ControlGains gains;
  const double kp = gains.k_att.x() * gains.k_rate.x(), kd = gains.k_rate.x();
  struct State {
    Quat q;
    Vec3 w;
  };
  auto regulator = [&](const State& s, bool closed) -> Vec3 {
    if (!closed) return Vec3::Zero();
    return jp * (-kp * LogMap(s.q.toRotationMatrix()) - kd * s.w);
  };
  auto explicit_rhs = [&](const State& s, bool closed) {
    const Mat3 r = s.q.toRotationMatrix();
    const Vec3 tau_g = Mg(h, ge) * thrust * (r.transpose() * r.col(2).cross(WorldZ()));
    return Vec3(j.inverse() * (regulator(s, closed) + tau_g - s.w.cross(j * s.w)));
  };
  auto inertia_rhs = [&](const State& s, bool closed) {
    return Vec3(jp.inverse() * (regulator(s, closed) - s.w.cross(jp * s.w)));
  };
  auto step = [dt](State s, const std::function<Vec3(const State&)>& f) {
    auto deriv = [&](const State& x, Quat& qd, Vec3& wd) {
      const Quat wq(0.0, x.w.x(), x.w.y(), x.w.z());
      qd.coeffs() = 0.5 * (x.q * wq).coeffs();
      wd = f(x);
    };
    auto add = [](const State& x, const Quat& qd, const Vec3& wd, double a) {
      State y;
      y.q.coeffs() = x.q.coeffs() + a * qd.coeffs();
      y.w = x.w + a * wd;
      return y;
    };
    Quat q1, q2, q3, q4;
    Vec3 w1, w2, w3, w4;
    deriv(s, q1, w1);
    deriv(add(s, q1, w1, dt / 2), q2, w2);
    deriv(add(s, q2, w2, dt / 2), q3, w3);
    deriv(add(s, q3, w3, dt), q4, w4);
    s.q.coeffs() += dt / 6 * (q1.coeffs() + 2 * q2.coeffs() + 2 * q3.coeffs() + q4.coeffs());
    s.q.normalize();
    s.w += dt / 6 * (w1 + 2 * w2 + 2 * w3 + w4);
    return s;
  };
  auto tilt = [](const State& s) { return TiltAngle(s.q.toRotationMatrix()); };

  for (bool closed : {true, false}) {
    State a{Quat(Eigen::AngleAxisd(tilt0, Vec3::UnitX())), Vec3::Zero()};
    State b = a;
    const std::function<Vec3(const State&)> fa = [&](const State& s) {
      return explicit_rhs(s, closed);
    };
    const std::function<Vec3(const State&)> fb = [&](const State& s) {
      return inertia_rhs(s, closed);
    };
    double num = 0.0, den = 0.0;
    const int n = static_cast<int>(std::lround(duration / dt));
    for (int k = 0; k <= n; ++k) {
      const double ta = tilt(a), tb = tilt(b);
      num += (ta - tb) * (ta - tb);
      den += ta * ta;
      if (closed) {
        out.time.push_back(k * dt);
        out.tilt_explicit.push_back(ta);
        out.tilt_inertia.push_back(tb);
      }
      if (k < n) {
        a = step(a, fa);
        b = step(b, fb);
      }
    }
    (closed ? out.relative_rms : out.open_loop_relative_rms) = std::sqrt(num / den);
  }
  return out;
}

OracleResult CheckEquivalence() {
  const EquivalenceResult e = RunEquivalence(VehicleParams{}, GroundEffectParams{});
  OracleResult r;
  r.name = "equivalence";
  r.value = e.relative_rms;
  r.threshold = 0.02;
  r.passed = e.relative_rms <= 0.02;
  r.detail = "h = " + Fmt(e.height) + " m, dJ = " + Fmt(e.added_inertia) +
             " kg m^2, closed-loop rel RMS " + Fmt(e.relative_rms) +
             " (<= 0.02), open-loop rel RMS " + Fmt(e.open_loop_relative_rms);
  return r;
}

std::vector<std::string> OracleNames() {
  return {"torque-model", "derivative-identity", "equivalence", "lemniscate",
          "reference-rates", "spearman"};
}

OracleResult RunOracle(const std::string& name) {
  const auto start = Clock::now();
  OracleResult r;
  if (name == "torque-model") {
    r = CheckTorqueModel();
  } else if (name == "derivative-identity") {
    r = CheckDerivativeIdentity();
  } else if (name == "equivalence") {
    r = CheckEquivalence();
  } else if (name == "lemniscate") {
    r = CheckLemniscate();
  } else if (name == "reference-rates") {
    r = CheckReferenceRates();
  } else if (name == "spearman") {
    r = CheckSpearman();
  } else {
    throw InputError("unknown oracle '" + name + "'");
  }
  if (r.seconds == 0.0) r.seconds = Seconds(start);
  return r;
}

}  // namespace gectl::oracles
