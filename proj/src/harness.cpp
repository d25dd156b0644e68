#include "gectl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "gectl/errors.hpp"

namespace gectl {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kRepeatable = {"drag_sample"};

std::string Num(double x) { return FormatDouble(x); }

std::string Vec(const Vec3& v) {
  return Num(v.x()) + ", " + Num(v.y()) + ", " + Num(v.z());
}

std::string Bool(bool b) { return b ? "true" : "false"; }

TrajectorySpec::Kind ParseKind(const std::string& s) {
  if (s == "hover") return TrajectorySpec::Kind::kHover;
  if (s == "hover_descent") return TrajectorySpec::Kind::kHoverDescent;
  if (s == "lemniscate") return TrajectorySpec::Kind::kLemniscate;
  throw ConfigError("unknown trajectory type '" + s + "' (hover|hover_descent|lemniscate)",
                    "trajectory.type");
}

double DefaultDuration(const TrajectorySpec& t) {
  switch (t.kind) {
    case TrajectorySpec::Kind::kHover:
      return 10.0;
    case TrajectorySpec::Kind::kHoverDescent:
      return t.descent.hold_before + t.descent.duration + 2.0;
    case TrajectorySpec::Kind::kLemniscate:
      return t.lemniscate.Period();
  }
  return 10.0;
}

}  // namespace

FlatnessModel Scenario::ControllerModel() const {
  FlatnessModel m;
  m.vehicle = vehicle;
  m.ground = ground.Scaled(1.0 + sim.model_mismatch);
  m.gravity = sim.gravity;
  m.ground_force = model_ground_force;
  m.drag = model_drag;
  m.equivalent_inertia = model_leveling;
  m.thrust_rate_uses_fg_slope = thrust_rate_uses_fg_slope;
  return m;
}

Plant Scenario::MakePlant() const { return Plant{vehicle, ground, sim}; }

std::string Scenario::TrajectorySignature() const {
  std::ostringstream os;
  os << trajectory.KindName();
  switch (trajectory.kind) {
    case TrajectorySpec::Kind::kHover:
      os << " p=" << Vec(trajectory.hover_position);
      break;
    case TrajectorySpec::Kind::kHoverDescent:
      os << " start=" << Vec(trajectory.descent.start)
         << " end=" << Num(trajectory.descent.end_height)
         << " T=" << Num(trajectory.descent.duration);
      break;
    case TrajectorySpec::Kind::kLemniscate:
      os << " c=" << Vec(trajectory.lemniscate.center)
         << " A=" << Num(trajectory.lemniscate.half_width)
         << " v=" << Num(trajectory.lemniscate.peak_speed);
      break;
  }
  os << " dur=" << Num(trajectory.duration);
  return os.str();
}

const std::set<std::string>& ScenarioKeys() {
  static const std::set<std::string> keys = {
      "name", "seed", "duration", "log_decimation", "ground_file",
      "trajectory.type", "trajectory.position", "trajectory.start",
      "trajectory.end_height", "trajectory.descent_duration", "trajectory.hold_before",
      "trajectory.center", "trajectory.half_width", "trajectory.speed",
      "vehicle.mass", "vehicle.inertia", "vehicle.wheelbase", "vehicle.k_thrust",
      "vehicle.k_roll", "vehicle.k_pitch", "vehicle.k_yaw", "vehicle.max_rotor_speed",
      "vehicle.rotor_plane_offset",
      "ground.g1", "ground.g2", "ground.g3", "ground.g4", "ground.g5", "ground.tied",
      "ground.tilt_saturation", "ground.tilt_saturation_deg", "drag_sample",
      "sim.dt", "sim.control_period", "sim.position_period", "sim.gravity",
      "sim.ge_force", "sim.ge_torque", "sim.ge_drag", "sim.motor_time_constant",
      "sim.accel_noise", "sim.gyro_noise", "sim.mismatch", "sim.ext_force",
      "sim.ext_torque", "sim.ext_start", "sim.ground_clearance",
      "gains.kp", "gains.kv", "gains.k_att", "gains.k_rate", "gains.accel_mode",
      "gains.torque_mode", "gains.filter_cutoff",
      "model.ground_force", "model.drag", "model.leveling", "model.fg_slope",
      "controller.type", "controller.lookahead", "controller.exact_leveling",
      "metrics.start", "metrics.low_altitude", "metrics.profile_bin",
  };
  return keys;
}

KeyValueConfig LoadScenarioConfig(const fs::path& path) {
  KeyValueConfig cfg = KeyValueConfig::Load(path, kRepeatable);
  if (!cfg.Has("ground_file")) return cfg;
  fs::path gpath = cfg.GetString("ground_file", "");
  if (gpath.is_relative()) gpath = path.parent_path() / gpath;
  const KeyValueConfig ground = KeyValueConfig::Load(gpath, kRepeatable);
  KeyValueConfig merged;
  for (const auto& e : ground.entries()) {
    if (e.key.rfind("ground.", 0) != 0 && e.key != "drag_sample") {
      throw ConfigError("ground file may only hold ground.* and drag_sample keys", e.key,
                        e.line);
    }
    if (!cfg.Has(e.key)) merged.Append(e);
  }
  for (const auto& e : cfg.entries()) merged.Append(e);
  return merged;
}

Scenario ScenarioFromConfig(const KeyValueConfig& c) {
  c.RequireKnown(ScenarioKeys());
  Scenario s;
  s.name = c.GetString("name", s.name);
  s.seed = c.GetU64("seed");

  TrajectorySpec& t = s.trajectory;
  t.kind = ParseKind(c.GetString("trajectory.type", "hover"));
  t.hover_position = c.GetVec3("trajectory.position", t.hover_position);
  t.descent.start = c.GetVec3("trajectory.start", t.descent.start);
  t.descent.end_height = c.GetDouble("trajectory.end_height", t.descent.end_height);
  t.descent.duration = c.GetDouble("trajectory.descent_duration", t.descent.duration);
  t.descent.hold_before = c.GetDouble("trajectory.hold_before", t.descent.hold_before);
  t.lemniscate.center = c.GetVec3("trajectory.center", t.lemniscate.center);
  t.lemniscate.half_width = c.GetDouble("trajectory.half_width", t.lemniscate.half_width);
  t.lemniscate.peak_speed = c.GetDouble("trajectory.speed", t.lemniscate.peak_speed);
  if (t.kind == TrajectorySpec::Kind::kHoverDescent) {
    try {
      t.descent.Validate();
    } catch (const ParameterError& e) {
      throw ConfigError(e.what(), "trajectory.end_height");
    }
  }
  if (t.kind == TrajectorySpec::Kind::kLemniscate &&
      !(t.lemniscate.half_width > 0.0 && t.lemniscate.peak_speed > 0.0)) {
    throw ConfigError("half width and speed must be positive", "trajectory.speed");
  }
  t.duration = c.GetDouble("duration", DefaultDuration(t));
  if (!(t.duration > 0.0)) throw ConfigError("must be positive", "duration");

  VehicleParams& v = s.vehicle;
  v.mass = c.GetDouble("vehicle.mass", v.mass);
  if (c.Has("vehicle.inertia")) {
    const auto e = c.All("vehicle.inertia").front();
    const std::vector<double> j = c.GetList(e);
    if (j.size() == 3) {
      v.inertia = Vec3(j[0], j[1], j[2]).asDiagonal();
    } else if (j.size() == 9) {
      v.inertia = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(j.data());
    } else {
      throw ConfigError("expected 3 (diagonal) or 9 (row-major) numbers", e.key, e.line);
    }
  }
  v.wheelbase = c.GetDouble("vehicle.wheelbase", v.wheelbase);
  v.k_thrust = c.GetDouble("vehicle.k_thrust", v.k_thrust);
  v.k_roll = c.GetDouble("vehicle.k_roll", v.k_roll);
  v.k_pitch = c.GetDouble("vehicle.k_pitch", v.k_pitch);
  v.k_yaw = c.GetDouble("vehicle.k_yaw", v.k_yaw);
  v.max_rotor_speed = c.GetDouble("vehicle.max_rotor_speed", v.max_rotor_speed);
  v.rotor_plane_offset = c.GetDouble("vehicle.rotor_plane_offset", v.rotor_plane_offset);
  try {
    v.Validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what(), "vehicle");
  }

  GroundEffectParams& g = s.ground;
  g.g1 = c.GetDouble("ground.g1", g.g1);
  g.g2 = c.GetDouble("ground.g2", g.g2);
  if (c.GetBool("ground.tied", false)) {
    for (const char* k : {"ground.g3", "ground.g4", "ground.g5"}) {
      if (c.Has(k)) throw ConfigError("conflicts with ground.tied = true", k);
    }
    const GroundEffectParams tied = GroundEffectParams::Tied(g.g1, g.g2, v.wheelbase);
    g.g3 = tied.g3;
    g.g4 = tied.g4;
    g.g5 = tied.g5;
  } else {
    g.g3 = c.GetDouble("ground.g3", g.g3);
    g.g4 = c.GetDouble("ground.g4", g.g4);
    g.g5 = c.GetDouble("ground.g5", g.g5);
  }
  g.tilt_saturation = c.GetBool("ground.tilt_saturation", g.tilt_saturation);
  g.tilt_saturation_angle =
      c.GetDouble("ground.tilt_saturation_deg", g.tilt_saturation_angle * 180.0 / kPi) *
      kPi / 180.0;
  const auto samples = c.All("drag_sample");
  if (!samples.empty()) {
    g.drag_table.clear();
    for (const auto& e : samples) {
      const std::vector<double> row = c.GetList(e);
      if (row.size() != 3) throw ConfigError("expected 'h, dx, dy'", e.key, e.line);
      g.drag_table.push_back({row[0], row[1], row[2]});
    }
  }
  try {
    g.Validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what(), "ground");
  }

  SimConfig& m = s.sim;
  m.dt = c.GetDouble("sim.dt", m.dt);
  m.control_period = c.GetDouble("sim.control_period", m.control_period);
  m.position_period = c.GetDouble("sim.position_period", m.position_period);
  m.gravity = c.GetDouble("sim.gravity", m.gravity);
  m.toggles.ge_force = c.GetBool("sim.ge_force", m.toggles.ge_force);
  m.toggles.ge_torque = c.GetBool("sim.ge_torque", m.toggles.ge_torque);
  m.toggles.ge_drag = c.GetBool("sim.ge_drag", m.toggles.ge_drag);
  m.motor_time_constant = c.GetDouble("sim.motor_time_constant", m.motor_time_constant);
  m.imu_noise.accel_std = c.GetDouble("sim.accel_noise", m.imu_noise.accel_std);
  m.imu_noise.gyro_std = c.GetDouble("sim.gyro_noise", m.imu_noise.gyro_std);
  m.model_mismatch = c.GetDouble("sim.mismatch", m.model_mismatch);
  m.external.force = c.GetVec3("sim.ext_force", m.external.force);
  m.external.torque = c.GetVec3("sim.ext_torque", m.external.torque);
  m.external.start_time = c.GetDouble("sim.ext_start", m.external.start_time);
  m.ground_clearance = c.GetDouble("sim.ground_clearance", m.ground_clearance);
  m.Validate();
  if (!(1.0 + m.model_mismatch > 0.0)) throw ConfigError("must exceed -1", "sim.mismatch");

  ControlGains& k = s.gains;
  k.kp = c.GetVec3("gains.kp", k.kp);
  k.kv = c.GetVec3("gains.kv", k.kv);
  k.k_att = c.GetVec3("gains.k_att", k.k_att);
  k.k_rate = c.GetVec3("gains.k_rate", k.k_rate);
  k.accel_mode = ParseAccelMode(c.GetString("gains.accel_mode", ToString(k.accel_mode)));
  k.torque_mode = ParseTorqueMode(c.GetString("gains.torque_mode", ToString(k.torque_mode)));
  k.filter_cutoff = c.GetDouble("gains.filter_cutoff", k.filter_cutoff);
  k.Validate();
  if (k.filter_cutoff >= 0.5 / m.control_period) {
    throw ConfigError("must be below the control-rate Nyquist frequency",
                      "gains.filter_cutoff");
  }

  s.model_ground_force = c.GetBool("model.ground_force", s.model_ground_force);
  s.model_drag = c.GetBool("model.drag", s.model_drag);
  s.model_leveling = c.GetBool("model.leveling", s.model_leveling);
  s.thrust_rate_uses_fg_slope = c.GetBool("model.fg_slope", s.thrust_rate_uses_fg_slope);

  const std::string policy = c.GetString("controller.type", "feedback");
  if (policy == "feedback") {
    s.policy = PolicyKind::kFeedback;
  } else if (policy == "feedforward") {
    s.policy = PolicyKind::kFeedforward;
  } else {
    throw ConfigError("expected feedback|feedforward", "controller.type");
  }
  s.lookahead = c.GetDouble("controller.lookahead", s.lookahead);
  s.exact_leveling = c.GetBool("controller.exact_leveling", s.exact_leveling);

  s.log_decimation = static_cast<int>(c.GetInt("log_decimation", s.log_decimation));
  if (s.log_decimation < 1) throw ConfigError("must be >= 1", "log_decimation");
  s.metric_start = c.GetDouble("metrics.start", s.metric_start);
  s.low_altitude = c.GetDouble("metrics.low_altitude", s.low_altitude);
  s.profile_bin = c.GetDouble("metrics.profile_bin", s.profile_bin);
  if (!(s.profile_bin > 0.0)) throw ConfigError("must be positive", "metrics.profile_bin");
  return s;
}

Scenario LoadScenario(const fs::path& path) {
  return ScenarioFromConfig(LoadScenarioConfig(path));
}

std::string SerializeScenario(const Scenario& s) {
  std::ostringstream os;
  const TrajectorySpec& t = s.trajectory;
  os << "name = " << s.name << "\n";
  os << "seed = " << s.seed << "\n";
  os << "duration = " << Num(t.duration) << "\n";
  os << "log_decimation = " << s.log_decimation << "\n";
  os << "trajectory.type = " << t.KindName() << "\n";
  os << "trajectory.position = " << Vec(t.hover_position) << "\n";
  os << "trajectory.start = " << Vec(t.descent.start) << "\n";
  os << "trajectory.end_height = " << Num(t.descent.end_height) << "\n";
  os << "trajectory.descent_duration = " << Num(t.descent.duration) << "\n";
  os << "trajectory.hold_before = " << Num(t.descent.hold_before) << "\n";
  os << "trajectory.center = " << Vec(t.lemniscate.center) << "\n";
  os << "trajectory.half_width = " << Num(t.lemniscate.half_width) << "\n";
  os << "trajectory.speed = " << Num(t.lemniscate.peak_speed) << "\n";

  const VehicleParams& v = s.vehicle;
  os << "vehicle.mass = " << Num(v.mass) << "\n";
  os << "vehicle.inertia = ";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) os << (r || c ? ", " : "") << Num(v.inertia(r, c));
  }
  os << "\n";
  os << "vehicle.wheelbase = " << Num(v.wheelbase) << "\n";
  os << "vehicle.k_thrust = " << Num(v.k_thrust) << "\n";
  os << "vehicle.k_roll = " << Num(v.k_roll) << "\n";
  os << "vehicle.k_pitch = " << Num(v.k_pitch) << "\n";
  os << "vehicle.k_yaw = " << Num(v.k_yaw) << "\n";
  os << "vehicle.max_rotor_speed = " << Num(v.max_rotor_speed) << "\n";
  os << "vehicle.rotor_plane_offset = " << Num(v.rotor_plane_offset) << "\n";

  const GroundEffectParams& g = s.ground;
  os << "ground.g1 = " << Num(g.g1) << "\n";
  os << "ground.g2 = " << Num(g.g2) << "\n";
  os << "ground.g3 = " << Num(g.g3) << "\n";
  os << "ground.g4 = " << Num(g.g4) << "\n";
  os << "ground.g5 = " << Num(g.g5) << "\n";
  os << "ground.tilt_saturation = " << Bool(g.tilt_saturation) << "\n";
  os << "ground.tilt_saturation_deg = " << Num(g.tilt_saturation_angle * 180.0 / kPi)
     << "\n";
  for (const DragSample& d : g.drag_table) {
    os << "drag_sample = " << Num(d.h) << ", " << Num(d.dx) << ", " << Num(d.dy) << "\n";
  }

  const SimConfig& m = s.sim;
  os << "sim.dt = " << Num(m.dt) << "\n";
  os << "sim.control_period = " << Num(m.control_period) << "\n";
  os << "sim.position_period = " << Num(m.position_period) << "\n";
  os << "sim.gravity = " << Num(m.gravity) << "\n";
  os << "sim.ge_force = " << Bool(m.toggles.ge_force) << "\n";
  os << "sim.ge_torque = " << Bool(m.toggles.ge_torque) << "\n";
  os << "sim.ge_drag = " << Bool(m.toggles.ge_drag) << "\n";
  os << "sim.motor_time_constant = " << Num(m.motor_time_constant) << "\n";
  os << "sim.accel_noise = " << Num(m.imu_noise.accel_std) << "\n";
  os << "sim.gyro_noise = " << Num(m.imu_noise.gyro_std) << "\n";
  os << "sim.mismatch = " << Num(m.model_mismatch) << "\n";
  os << "sim.ext_force = " << Vec(m.external.force) << "\n";
  os << "sim.ext_torque = " << Vec(m.external.torque) << "\n";
  os << "sim.ext_start = " << Num(m.external.start_time) << "\n";
  os << "sim.ground_clearance = " << Num(m.ground_clearance) << "\n";

  const ControlGains& k = s.gains;
  os << "gains.kp = " << Vec(k.kp) << "\n";
  os << "gains.kv = " << Vec(k.kv) << "\n";
  os << "gains.k_att = " << Vec(k.k_att) << "\n";
  os << "gains.k_rate = " << Vec(k.k_rate) << "\n";
  os << "gains.accel_mode = " << ToString(k.accel_mode) << "\n";
  os << "gains.torque_mode = " << ToString(k.torque_mode) << "\n";
  os << "gains.filter_cutoff = " << Num(k.filter_cutoff) << "\n";

  os << "model.ground_force = " << Bool(s.model_ground_force) << "\n";
  os << "model.drag = " << Bool(s.model_drag) << "\n";
  os << "model.leveling = " << Bool(s.model_leveling) << "\n";
  os << "model.fg_slope = " << Bool(s.thrust_rate_uses_fg_slope) << "\n";

  os << "controller.type = "
     << (s.policy == PolicyKind::kFeedback ? "feedback" : "feedforward") << "\n";
  os << "controller.lookahead = " << Num(s.lookahead) << "\n";
  os << "controller.exact_leveling = " << Bool(s.exact_leveling) << "\n";

  os << "metrics.start = " << Num(s.metric_start) << "\n";
  os << "metrics.low_altitude = " << Num(s.low_altitude) << "\n";
  os << "metrics.profile_bin = " << Num(s.profile_bin) << "\n";
  return os.str();
}

std::vector<ProfileBin> AngleErrorProfile(const TrajectoryLog& log, double dh,
                                          double t_start) {
  if (log.rows.empty()) throw InputError("angle error profile: empty log");
  if (!(dh > 0.0)) throw InputError("angle error profile: bin width must be positive");
  std::vector<std::pair<double, double>> pts;  // (h, angle^2)
  for (const LogRow& r : log.rows) {
    if (r.t < t_start) continue;
    const double a = GeodesicAngle(r.q, r.q_des);
    pts.emplace_back(r.h, a * a);
  }
  if (pts.empty()) throw InputError("angle error profile: no rows after start time");
  std::sort(pts.begin(), pts.end());
  const double lo = pts.front().first, hi = pts.back().first;
  std::vector<ProfileBin> out;
  const long k0 = std::lround(std::ceil(lo / dh - 1e-9));
  const long k1 = std::lround(std::floor(hi / dh + 1e-9));
  std::size_t begin = 0;
  for (long k = k0; k <= k1; ++k) {
    const double h0 = static_cast<double>(k) * dh;
    while (begin < pts.size() && pts[begin].first < h0 - dh) ++begin;
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = begin; i < pts.size() && pts[i].first <= h0 + dh; ++i) {
      sum += pts[i].second;
      ++n;
    }
    if (n >= 10) out.push_back({h0, std::sqrt(sum / n), n});
  }
  return out;
}

MetricsReport ComputeMetrics(const TrajectoryLog& log, const Scenario& s) {
  MetricsReport m;
  m.name = s.name;
  m.trajectory = s.TrajectorySignature();
  m.seed = s.seed;
  m.accel_mode = ToString(s.gains.accel_mode);
  m.torque_mode = ToString(s.gains.torque_mode);
  m.crashed = log.crashed;
  m.crash_time = log.crash_time;
  m.infeasible_ticks = log.infeasible_ticks;
  m.saturated_ticks = log.saturated_ticks;

  double sxy = 0.0, sz = 0.0, snorm = 0.0, snorm2 = 0.0, satt = 0.0, slow = 0.0;
  for (const LogRow& r : log.rows) {
    if (r.t < s.metric_start) continue;
    const Vec3 e = r.p_ref - r.p;
    const double exy2 = e.head<2>().squaredNorm();
    const double ez2 = e.z() * e.z();
    const double en = e.norm();
    sxy += exy2;
    sz += ez2;
    snorm += en;
    snorm2 += en * en;
    m.max_error = std::max(m.max_error, en);
    const double a = GeodesicAngle(r.q, r.q_des);
    satt += a * a;
    if (r.h < s.low_altitude) {
      slow += a * a;
      ++m.low_samples;
    }
    m.residual_accel_max = std::max(m.residual_accel_max, r.res_acc.norm());
    m.residual_torque_max = std::max(m.residual_torque_max, r.res_tau.norm());
    ++m.samples;
  }
  if (m.samples > 0) {
    const double n = m.samples;
    m.rmse_xoy = 100.0 * std::sqrt(sxy / n);
    m.rmse_z = 100.0 * std::sqrt(sz / n);
    m.rmse_all = 100.0 * std::sqrt((sxy + sz) / n);
    const double mean = snorm / n;
    m.std_error = 100.0 * std::sqrt(std::max(snorm2 / n - mean * mean, 0.0));
    m.max_error *= 100.0;
    m.attitude_rmse = std::sqrt(satt / n) * 180.0 / kPi;
  }
  if (m.low_samples > 0) m.attitude_rmse_low = std::sqrt(slow / m.low_samples) * 180.0 / kPi;
  if (s.trajectory.kind == TrajectorySpec::Kind::kHoverDescent && !log.rows.empty()) {
    try {
      m.profile = AngleErrorProfile(log, s.profile_bin, s.metric_start);
    } catch (const InputError&) {
    }
  }
  if (log.crashed) {
    m.status = "crashed";
  } else if (log.infeasible_ticks > 0) {
    m.status = "infeasible_reference";
  }
  return m;
}

std::string MetricsReport::ToJson() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["trajectory"] = trajectory;
  j["seed"] = seed;
  j["accel_mode"] = accel_mode;
  j["torque_mode"] = torque_mode;
  j["status"] = status;
  j["rmse_xoy_cm"] = rmse_xoy;
  j["rmse_z_cm"] = rmse_z;
  j["rmse_all_cm"] = rmse_all;
  j["max_error_cm"] = max_error;
  j["std_error_cm"] = std_error;
  j["attitude_rmse_deg"] = attitude_rmse;
  j["attitude_rmse_low_deg"] = attitude_rmse_low;
  j["residual_accel_max"] = residual_accel_max;
  j["residual_torque_max"] = residual_torque_max;
  j["samples"] = samples;
  j["low_samples"] = low_samples;
  j["crashed"] = crashed;
  j["crash_time"] = crash_time;
  j["infeasible_ticks"] = infeasible_ticks;
  j["saturated_ticks"] = saturated_ticks;
  nlohmann::ordered_json prof = nlohmann::ordered_json::array();
  for (const ProfileBin& b : profile) {
    prof.push_back({{"h", b.h}, {"error_rad", b.error}, {"samples", b.samples}});
  }
  j["angle_error_profile"] = prof;
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::FromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("metrics json: ") + e.what());
  }
  MetricsReport m;
  try {
    m.name = j.at("name").get<std::string>();
    m.trajectory = j.at("trajectory").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.accel_mode = j.at("accel_mode").get<std::string>();
    m.torque_mode = j.at("torque_mode").get<std::string>();
    m.status = j.at("status").get<std::string>();
    m.rmse_xoy = j.at("rmse_xoy_cm").get<double>();
    m.rmse_z = j.at("rmse_z_cm").get<double>();
    m.rmse_all = j.at("rmse_all_cm").get<double>();
    m.max_error = j.at("max_error_cm").get<double>();
    m.std_error = j.at("std_error_cm").get<double>();
    m.attitude_rmse = j.at("attitude_rmse_deg").get<double>();
    m.attitude_rmse_low = j.at("attitude_rmse_low_deg").get<double>();
    m.residual_accel_max = j.at("residual_accel_max").get<double>();
    m.residual_torque_max = j.at("residual_torque_max").get<double>();
    m.samples = j.at("samples").get<int>();
    m.low_samples = j.at("low_samples").get<int>();
    m.crashed = j.at("crashed").get<bool>();
    m.crash_time = j.at("crash_time").get<double>();
    m.infeasible_ticks = j.at("infeasible_ticks").get<int>();
    m.saturated_ticks = j.at("saturated_ticks").get<int>();
    for (const auto& b : j.at("angle_error_profile")) {
      m.profile.push_back({b.at("h").get<double>(), b.at("error_rad").get<double>(),
                           b.at("samples").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("metrics json: ") + e.what());
  }
  return m;
}

RunResult Run(const Scenario& s) {
  RunResult out;
  const Plant plant = s.MakePlant();
  Simulator sim(plant, s.seed);
  try {
    sim.Reset(InitialStateFromReference(s.trajectory.Evaluate(0.0), plant));
    std::unique_ptr<Policy> policy;
    if (s.policy == PolicyKind::kFeedback) {
      ControllerConfig cc;
      cc.gains = s.gains;
      cc.model = s.ControllerModel();
      cc.control_period = s.sim.control_period;
      cc.position_decimation = s.sim.PositionDecimation();
      policy = std::make_unique<Controller>(cc, s.trajectory);
    } else {
      FlatnessModel fm = s.ControllerModel();
      fm.equivalent_inertia = s.model_leveling && !s.exact_leveling;
      policy = std::make_unique<FeedforwardPolicy>(fm, s.trajectory, s.lookahead,
                                                   s.exact_leveling);
    }
    RunOptions opts;
    opts.duration = s.trajectory.duration;
    opts.log_decimation = s.log_decimation;
    out.log = RunScenario(sim, *policy, opts);
    if (const auto* c = dynamic_cast<const Controller*>(policy.get())) {
      out.log.observer_drops = c->observer().dropped_samples();
    }
  } catch (const ReferenceError& e) {
    out.exit_code = kExitInfeasible;
    out.error = e.what();
  } catch (const IntegrationFault& e) {
    out.exit_code = kExitIntegration;
    out.error = e.what();
  } catch (const ControllerFault& e) {
    out.exit_code = kExitControllerFault;
    out.error = e.what();
  } catch (const DomainError& e) {
    out.exit_code = kExitIntegration;
    out.error = e.what();
  } catch (const InputError& e) {
    out.exit_code = kExitIntegration;
    out.error = e.what();
  }
  out.metrics = ComputeMetrics(out.log, s);
  if (out.exit_code != kExitOk) {
    out.metrics.status = "error: " + out.error;
  } else if (out.log.crashed) {
    out.exit_code = kExitCrash;
  } else if (out.log.infeasible_ticks > 0) {
    out.exit_code = kExitInfeasible;
  }
  return out;
}

RunResult RunToDirectory(const Scenario& s, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream f(out_dir / "scenario.resolved");
    f << SerializeScenario(s);
  }
  RunResult r = Run(s);
  {
    std::ofstream f(out_dir / "log.csv");
    WriteLogCsv(f, r.log);
  }
  {
    std::ofstream f(out_dir / "metrics.json");
    f << r.metrics.ToJson();
  }
  return r;
}

std::vector<ComparisonRow> Compare(const std::vector<MetricsReport>& reports,
                                   const std::string& baseline) {
  if (reports.empty()) throw InputError("compare: no reports");
  std::size_t base = 0;
  if (!baseline.empty()) {
    base = reports.size();
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (reports[i].name == baseline) {
        base = i;
        break;
      }
    }
    if (base == reports.size()) throw InputError("compare: no report named " + baseline);
  }
  const MetricsReport& b = reports[base];
  std::vector<ComparisonRow> rows;
  for (const MetricsReport& r : reports) {
    ComparisonRow row;
    row.report = r;
    row.reduction_pct = b.rmse_all > 0.0 ? 100.0 * (b.rmse_all - r.rmse_all) / b.rmse_all
                                         : 0.0;
    row.comparable = r.trajectory == b.trajectory;
    rows.push_back(row);
  }
  return rows;
}

std::string ComparisonText(const std::vector<ComparisonRow>& rows) {
  int width = 12;
  for (const ComparisonRow& r : rows) {
    width = std::max(width, static_cast<int>(r.report.name.size()) + 2);
  }
  std::ostringstream os;
  os << std::left << std::setw(width) << "name" << std::right << std::setw(10) << "XOY"
     << std::setw(10) << "Z" << std::setw(10) << "All" << std::setw(10) << "max|E|"
     << std::setw(10) << "sd|E|" << std::setw(11) << "reduct%" << "\n";
  os << std::fixed << std::setprecision(2);
  for (const ComparisonRow& r : rows) {
    const MetricsReport& m = r.report;
    os << std::left << std::setw(width) << m.name << std::right << std::setw(10) << m.rmse_xoy
       << std::setw(10) << m.rmse_z << std::setw(10) << m.rmse_all << std::setw(10)
       << m.max_error << std::setw(10) << m.std_error << std::setw(11) << r.reduction_pct;
    if (!r.comparable) os << "  [different trajectory]";
    if (m.status != "ok") os << "  [" << m.status << "]";
    os << "\n";
  }
  os << "(all lengths in cm)\n";
  return os.str();
}

std::string ComparisonCsv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "name,rmse_xoy_cm,rmse_z_cm,rmse_all_cm,max_error_cm,std_error_cm,"
        "reduction_pct,comparable,status\n";
  for (const ComparisonRow& r : rows) {
    const MetricsReport& m = r.report;
    os << m.name << ',' << Num(m.rmse_xoy) << ',' << Num(m.rmse_z) << ','
       << Num(m.rmse_all) << ',' << Num(m.max_error) << ',' << Num(m.std_error) << ','
       << Num(r.reduction_pct) << ',' << (r.comparable ? 1 : 0) << ',' << m.status << "\n";
  }
  return os.str();
}

}  // namespace gectl
