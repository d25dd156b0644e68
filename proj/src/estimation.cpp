#include "gectl/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gectl/errors.hpp"

namespace gectl {

WrenchEstimate ObserveWrench(const Vec3& specific_force_f, const Vec3& thrust_vector_f,
                             const Vec3& body_rate_f, const Vec3& body_rate_dot_f,
                             const Vec3& body_torque_f, const VehicleParams& vehicle,
                             double timestamp) {
  WrenchEstimate out;
  out.accel = specific_force_f - thrust_vector_f / vehicle.mass;
  out.torque = vehicle.inertia * body_rate_dot_f +
               body_rate_f.cross(vehicle.inertia * body_rate_f) - body_torque_f;
  out.residual_accel = out.accel;
  out.residual_torque = out.torque;
  out.timestamp = timestamp;
  out.valid = true;
  return out;
}

WrenchObserver::WrenchObserver(const VehicleParams& vehicle, double cutoff_hz,
                               double sample_period)
    : vehicle_(vehicle), period_(sample_period) {
  for (LowPass<Vec3>* f : {&accel_f_, &thrust_vec_f_, &rate_f_, &rate_dot_f_, &torque_f_,
                           &model_accel_f_, &model_torque_f_}) {
    f->Configure(cutoff_hz, sample_period);
  }
  thrust_f_.Configure(cutoff_hz, sample_period);
}

void WrenchObserver::SeedBodyRateDot(const Vec3& value) { seed_rate_dot_ = value; }

const WrenchEstimate& WrenchObserver::Update(const ObserverInput& in) {
  if (std::abs(in.imu_time - in.actuation_time) > period_ * (1.0 + 1e-9)) {
    ++dropped_;
    estimate_.valid = false;
    return estimate_;
  }
  const Vec4 wrench = WrenchFromSpeeds(in.rotors, vehicle_);
  const double thrust = wrench[0];
  const Vec3 torque = wrench.tail<3>();
  const Vec3 gyro = in.imu.gyro;

  Vec3 rate_dot_raw;
  if (!started_) {
    rate_dot_raw = seed_rate_dot_.value_or(Vec3::Zero());
  } else {
    rate_dot_raw = (gyro - last_gyro_) / period_;
  }
  last_gyro_ = gyro;

  const Vec3& sf = accel_f_.Update(in.rotation * in.imu.specific_force);
  const Vec3& tv = thrust_vec_f_.Update(thrust * in.rotation.col(2));
  thrust_f_.Update(thrust);
  const Vec3& w_f = rate_f_.Update(gyro);
  const Vec3& wd_f = rate_dot_f_.Update(rate_dot_raw);
  const Vec3& tq_f = torque_f_.Update(torque);
  const Vec3& ma_f = model_accel_f_.Update(in.model_accel);
  const Vec3& mt_f = model_torque_f_.Update(in.model_torque);

  // The difference quotient lives half a sample in the past.
  if (!started_) {
    torque_aligned_ = tq_f;
    model_torque_aligned_ = mt_f;
  } else {
    torque_aligned_ = 0.5 * (tq_f + last_torque_f_);
    model_torque_aligned_ = 0.5 * (mt_f + last_model_torque_f_);
  }
  last_torque_f_ = tq_f;
  last_model_torque_f_ = mt_f;
  started_ = true;

  estimate_ = ObserveWrench(sf, tv, w_f, wd_f, torque_aligned_, vehicle_, in.imu_time);
  estimate_.residual_accel = estimate_.accel - ma_f;
  estimate_.residual_torque = estimate_.torque - model_torque_aligned_;
  return estimate_;
}

std::vector<double> AverageRanks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  return rank;
}

double Spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InputError("spearman: sequences differ in length");
  if (x.size() < 3) throw InputError("spearman: need at least three pairs");
  const std::vector<double> rx = AverageRanks(x), ry = AverageRanks(y);
  const double n = static_cast<double>(x.size());
  // Average ranks always sum to n(n+1)/2.
  const double mean = 0.5 * (n + 1.0);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean, dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw DomainError("spearman: constant sequence, correlation undefined");
  }
  return Clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> MeasureFgPlatform(double force_z, double thrust, double eps) {
  if (!(thrust > eps)) return std::nullopt;
  return force_z / thrust - 1.0;
}

std::optional<double> MeasureFgFlight(const Vec3& ext_accel, double thrust, double mass,
                                      double eps) {
  if (!(thrust > eps)) return std::nullopt;
  return mass * ext_accel.z() / thrust;
}

std::string FitReport::ToJson() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  nlohmann::ordered_json ci = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    p[names[i]] = params[static_cast<Eigen::Index>(i)];
    ci[names[i]] = ci95[static_cast<Eigen::Index>(i)];
  }
  j["params"] = p;
  j["ci95"] = ci;
  j["residual_rms"] = residual_rms;
  j["samples"] = samples;
  j["iterations"] = iterations;
  return j.dump(2);
}

std::string FitReport::ToText() const {
  std::ostringstream os;
  os.precision(8);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    os << names[i] << " = " << params[k] << " +/- " << ci95[k] << "\n";
  }
  os << "residual_rms = " << residual_rms << "\nsamples = " << samples
     << "\niterations = " << iterations << "\n";
  return os.str();
}

FitReport LevenbergMarquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
    Eigen::VectorXd x, std::vector<std::string> names, const LmOptions& opts) {
  Eigen::VectorXd r = residual(x);
  const auto n = r.size();
  const auto p = x.size();
  auto rms = [n](const Eigen::VectorXd& v) {
    return std::sqrt(v.squaredNorm() / static_cast<double>(n));
  };
  if (!r.allFinite()) throw FitFailure("residual is not finite at the initial guess");
  if (n < p) throw FitFailure("fewer samples than parameters");

  double cost = r.squaredNorm();
  double lambda = 1e-3;
  Eigen::MatrixXd jac;
  bool converged = false;
  int it = 0;
  for (it = 1; it <= opts.max_iterations; ++it) {
    jac = jacobian(x);
    const Eigen::VectorXd col = jac.colwise().norm();
    if (col.minCoeff() <= 0.0 || !jac.allFinite()) {
      throw FitFailure("rank-deficient Jacobian (parameter has no effect)", rms(r));
    }
    const Eigen::MatrixXd scaled = jac * col.cwiseInverse().asDiagonal();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
    const auto& sv = svd.singularValues();
    if (sv[sv.size() - 1] < opts.rank_tolerance * sv[0]) {
      throw FitFailure("rank-deficient Jacobian (parameters unidentifiable)", rms(r));
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;

    bool accepted = false;
    Eigen::VectorXd step;
    while (lambda < 1e16) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += lambda * a.diagonal();
      step = damped.ldlt().solve(-g);
      const Eigen::VectorXd x_new = x + step;
      const Eigen::VectorXd r_new = residual(x_new);
      const double cost_new = r_new.allFinite() ? r_new.squaredNorm()
                                                : std::numeric_limits<double>::infinity();
      if (cost_new <= cost) {
        x = x_new;
        r = r_new;
        cost = cost_new;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    // No descent direction left: we are at the minimum to working precision.
    if (!accepted) {
      converged = true;
      break;
    }
    if (step.norm() <= opts.step_tolerance * (x.norm() + opts.step_tolerance)) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw FitFailure("no convergence after " + std::to_string(opts.max_iterations) +
                         " iterations",
                     rms(r));
  }

  jac = jacobian(x);
  FitReport rep;
  rep.names = std::move(names);
  rep.params = x;
  rep.samples = static_cast<int>(n);
  rep.iterations = std::min(it, opts.max_iterations);
  rep.residual_rms = rms(r);
  const double dof = static_cast<double>(std::max<Eigen::Index>(n - p, 1));
  const Eigen::MatrixXd cov =
      (jac.transpose() * jac).inverse() * (r.squaredNorm() / dof);
  rep.ci95 = 1.96 * cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return rep;
}

namespace {

void RequireSpan(const std::vector<double>& h, std::size_t min_count, const char* what) {
  if (h.size() < min_count) {
    throw InputError(std::string(what) + ": need at least " + std::to_string(min_count) +
                     " samples");
  }
  const auto [lo, hi] = std::minmax_element(h.begin(), h.end());
  if (!(*lo > 0.0)) throw InputError(std::string(what) + ": altitudes must be positive");
  if (*hi < 3.0 * *lo) {
    throw FitFailure(std::string(what) +
                     ": altitudes span less than a factor of 3, parameters unidentifiable");
  }
}

}  // namespace

FitReport FitFg(const std::vector<FgSample>& samples, const LmOptions& opts) {
  std::vector<double> hs;
  for (const FgSample& s : samples) hs.push_back(s.h);
  RequireSpan(hs, 10, "fit_fg");
  const auto n = static_cast<Eigen::Index>(samples.size());

  // Initial guess from 1/F = h^2 / g2 + g1 / g2.
  double g1 = 0.1, g2 = 0.0;
  {
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    Eigen::Index m = 0;
    for (const FgSample& s : samples) {
      if (s.fg <= 0.0) continue;
      a(m, 0) = s.h * s.h;
      a(m, 1) = 1.0;
      b[m] = 1.0 / s.fg;
      ++m;
    }
    if (m >= 2) {
      const Eigen::Vector2d c =
          a.topRows(m).colPivHouseholderQr().solve(b.head(m));
      if (c[0] > 0.0 && c[1] > 0.0) {
        g2 = 1.0 / c[0];
        g1 = c[1] / c[0];
      }
    }
    if (g2 <= 0.0) {
      double mean = 0.0;
      for (const FgSample& s : samples) mean += s.fg * (s.h * s.h + g1);
      g2 = std::max(mean / static_cast<double>(n), 1e-6);
    }
  }

  auto residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const FgSample& s = samples[static_cast<std::size_t>(i)];
      r[i] = x[1] / (s.h * s.h + x[0]) - s.fg;
    }
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = samples[static_cast<std::size_t>(i)].h;
      const double den = h * h + x[0];
      j(i, 0) = -x[1] / (den * den);
      j(i, 1) = 1.0 / den;
    }
    return j;
  };
  return LevenbergMarquardt(residual, jacobian, Eigen::Vector2d(g1, g2), {"g1", "g2"},
                            opts);
}

FitReport FitMg(const std::vector<MgSample>& all, const LmOptions& opts) {
  const double max_tilt = 10.0 * kPi / 180.0 + 1e-12;
  std::vector<MgSample> samples;
  std::vector<double> hs;
  for (const MgSample& s : all) {
    if (s.tilt > max_tilt || s.tilt <= 0.0 || s.thrust <= 0.0) continue;
    samples.push_back(s);
    hs.push_back(s.h);
  }
  RequireSpan(hs, 10, "fit_mg");
  const auto n = static_cast<Eigen::Index>(samples.size());

  // Initial guess: sqrt(h / y) = (h^2 + g3 h + g4) / sqrt(g5), y = |tau| / (T sin d).
  double g3 = 0.0, g4 = 0.05, g5 = 1e-3;
  {
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    Eigen::Index m = 0;
    for (const MgSample& s : samples) {
      const double y = s.torque / (s.thrust * std::sin(s.tilt));
      if (!(y > 0.0)) continue;
      a.row(m) << s.h * s.h, s.h, 1.0;
      b[m] = std::sqrt(s.h / y);
      ++m;
    }
    if (m >= 3) {
      const Eigen::Vector3d c =
          a.topRows(m).completeOrthogonalDecomposition().solve(b.head(m));
      if (c[0] > 0.0 && c[2] / c[0] > 0.0) {
        g5 = 1.0 / (c[0] * c[0]);
        g3 = c[1] / c[0];
        g4 = c[2] / c[0];
      }
    }
  }

  auto residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const MgSample& s = samples[static_cast<std::size_t>(i)];
      const double den = s.h * s.h + x[0] * s.h + x[1];
      r[i] = x[2] * s.h / (den * den) * s.thrust * std::sin(s.tilt) - s.torque;
    }
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const MgSample& s = samples[static_cast<std::size_t>(i)];
      const double scale = s.thrust * std::sin(s.tilt);
      const double den = s.h * s.h + x[0] * s.h + x[1];
      const double d3 = den * den * den;
      j(i, 0) = -2.0 * x[2] * s.h * s.h / d3 * scale;
      j(i, 1) = -2.0 * x[2] * s.h / d3 * scale;
      j(i, 2) = s.h / (den * den) * scale;
    }
    return j;
  };
  return LevenbergMarquardt(residual, jacobian, Eigen::Vector3d(g3, g4, g5),
                            {"g3", "g4", "g5"}, opts);
}

std::vector<CoeffSample> NormalizeCoeff(const std::vector<CoeffSample>& samples,
                                        std::optional<double> k_inf) {
  if (samples.empty()) throw InputError("normalize_coeff: no samples");
  double k_ref = 0.0;
  if (k_inf.has_value()) {
    k_ref = *k_inf;
  } else {
    std::vector<CoeffSample> sorted = samples;
    std::sort(sorted.begin(), sorted.end(),
              [](const CoeffSample& a, const CoeffSample& b) { return a.h > b.h; });
    const std::size_t top = std::max<std::size_t>(1, (sorted.size() + 9) / 10);
    for (std::size_t i = 0; i < top; ++i) k_ref += sorted[i].k;
    k_ref /= static_cast<double>(top);
  }
  if (k_ref == 0.0 || !std::isfinite(k_ref)) {
    throw DomainError("normalize_coeff: reference coefficient is zero");
  }
  std::vector<CoeffSample> out;
  out.reserve(samples.size());
  for (const CoeffSample& s : samples) out.push_back({s.h, s.k / k_ref - 1.0});
  return out;
}

namespace {

// Least-squares line y = a + b x; returns (slope, standard error).
std::pair<double, double> SlopeFit(const std::vector<double>& x,
                                   const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - my - slope * (x[i] - mx);
    sse += e * e;
  }
  const double se = std::sqrt(sse / std::max(n - 2.0, 1.0) / sxx);
  return {slope, se};
}

}  // namespace

DragFit FitDrag(const std::vector<DragObservation>& segment, double mass,
                double min_speed) {
  if (segment.size() < 3) throw InputError("fit_drag: need at least three samples");
  DragFit fit;
  fit.samples = static_cast<int>(segment.size());
  std::vector<double> vx, vy, ax, ay;
  double max_x = 0.0, max_y = 0.0;
  for (const DragObservation& o : segment) {
    fit.h += o.h;
    vx.push_back(o.body_velocity.x());
    vy.push_back(o.body_velocity.y());
    ax.push_back(o.body_ext_accel.x());
    ay.push_back(o.body_ext_accel.y());
    max_x = std::max(max_x, std::abs(o.body_velocity.x()));
    max_y = std::max(max_y, std::abs(o.body_velocity.y()));
    fit.max_speed = std::max(fit.max_speed, o.body_velocity.head<2>().norm());
  }
  fit.h /= static_cast<double>(segment.size());
  if (fit.max_speed < min_speed) {
    throw FitFailure("fit_drag: insufficient velocity excitation (max |v| = " +
                     std::to_string(fit.max_speed) + " m/s)");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  fit.dx = fit.dy = nan;
  fit.dx_se = fit.dy_se = nan;
  if (max_x >= min_speed) {
    const auto [s, se] = SlopeFit(vx, ax);
    fit.dx = -s * mass;
    fit.dx_se = se * mass;
  }
  if (max_y >= min_speed) {
    const auto [s, se] = SlopeFit(vy, ay);
    fit.dy = -s * mass;
    fit.dy_se = se * mass;
  }
  return fit;
}

std::vector<DragFit> FitDragByAltitude(const std::vector<DragObservation>& obs,
                                       double mass, double bin, int min_samples) {
  if (!(bin > 0.0)) throw InputError("fit_drag: bin width must be positive");
  std::map<long, std::vector<DragObservation>> bins;
  for (const DragObservation& o : obs) bins[std::lround(std::floor(o.h / bin))].push_back(o);
  std::vector<DragFit> out;
  for (const auto& [key, seg] : bins) {
    if (static_cast<int>(seg.size()) < min_samples) continue;
    try {
      out.push_back(FitDrag(seg, mass));
    } catch (const FitFailure&) {
    }
  }
  return out;
}

}  // namespace gectl
