#include "gectl/runner.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "gectl/errors.hpp"

namespace gectl {

namespace {

// Column groups: name prefix and component suffixes, in file order.
struct Field {
  const char* name;
  int width;
};

constexpr Field kFields[] = {
    {"t", 1},         {"p", 3},          {"v", 3},        {"q", 4},
    {"w", 3},         {"n", 4},          {"h", 1},        {"p_ref", 3},
    {"v_ref", 3},     {"q_ref", 4},      {"q_des", 4},    {"w_ref", 3},
    {"thrust_ref", 1}, {"thrust_des", 1}, {"tau_des", 3},  {"n_cmd", 4},
    {"saturated", 1}, {"feasible", 1},   {"ext_acc", 3},  {"ext_tau", 3},
    {"res_acc", 3},   {"res_tau", 3},    {"f_ground", 3}, {"f_drag", 3},
    {"tau_ground", 3},
};

std::vector<double> Flatten(const LogRow& r) {
  std::vector<double> out;
  out.reserve(80);
  auto v3 = [&](const Vec3& v) { out.insert(out.end(), {v.x(), v.y(), v.z()}); };
  auto v4 = [&](const Vec4& v) { out.insert(out.end(), {v[0], v[1], v[2], v[3]}); };
  auto qt = [&](const Quat& q) { out.insert(out.end(), {q.w(), q.x(), q.y(), q.z()}); };
  out.push_back(r.t);
  v3(r.p);
  v3(r.v);
  qt(r.q);
  v3(r.w);
  v4(r.n);
  out.push_back(r.h);
  v3(r.p_ref);
  v3(r.v_ref);
  qt(r.q_ref);
  qt(r.q_des);
  v3(r.w_ref);
  out.push_back(r.thrust_ref);
  out.push_back(r.thrust_des);
  v3(r.tau_des);
  v4(r.n_cmd);
  out.push_back(r.saturated);
  out.push_back(r.feasible);
  v3(r.ext_acc);
  v3(r.ext_tau);
  v3(r.res_acc);
  v3(r.res_tau);
  v3(r.f_ground);
  v3(r.f_drag);
  v3(r.tau_ground);
  return out;
}

LogRow Unflatten(const std::vector<double>& f) {
  LogRow r;
  std::size_t i = 0;
  auto s = [&]() { return f[i++]; };
  auto v3 = [&]() { Vec3 v; v.x() = s(); v.y() = s(); v.z() = s(); return v; };
  auto v4 = [&]() { Vec4 v; for (int k = 0; k < 4; ++k) v[k] = s(); return v; };
  auto qt = [&]() {
    const double w = s(), x = s(), y = s(), z = s();
    return Quat(w, x, y, z);
  };
  r.t = s();
  r.p = v3();
  r.v = v3();
  r.q = qt();
  r.w = v3();
  r.n = v4();
  r.h = s();
  r.p_ref = v3();
  r.v_ref = v3();
  r.q_ref = qt();
  r.q_des = qt();
  r.w_ref = v3();
  r.thrust_ref = s();
  r.thrust_des = s();
  r.tau_des = v3();
  r.n_cmd = v4();
  r.saturated = static_cast<int>(s());
  r.feasible = static_cast<int>(s());
  r.ext_acc = v3();
  r.ext_tau = v3();
  r.res_acc = v3();
  r.res_tau = v3();
  r.f_ground = v3();
  r.f_drag = v3();
  r.tau_ground = v3();
  return r;
}

}  // namespace

bool LogRow::operator==(const LogRow& o) const { return Flatten(*this) == Flatten(o); }

const std::vector<std::string>& LogColumns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c;
    for (const Field& f : kFields) {
      const std::string base = f.name;
      if (f.width == 1) {
        c.push_back(base);
      } else if (f.width == 3) {
        for (const char* s : {"_x", "_y", "_z"}) c.push_back(base + s);
      } else if (base == "n" || base == "n_cmd") {
        for (const char* s : {"_1", "_2", "_3", "_4"}) c.push_back(base + s);
      } else {
        for (const char* s : {"_w", "_x", "_y", "_z"}) c.push_back(base + s);
      }
    }
    return c;
  }();
  return cols;
}

std::string FormatDouble(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void WriteLogCsv(std::ostream& os, const TrajectoryLog& log) {
  const auto& cols = LogColumns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  std::string line;
  for (const LogRow& r : log.rows) {
    line.clear();
    const std::vector<double> f = Flatten(r);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) line += ',';
      line += FormatDouble(f[i]);
    }
    line += '\n';
    os << line;
  }
}

TrajectoryLog ReadLogCsv(std::istream& is) {
  const auto& cols = LogColumns();
  std::string line;
  if (!std::getline(is, line)) throw InputError("log csv: missing header");
  {
    std::stringstream ss(line);
    std::string name;
    std::size_t i = 0;
    while (std::getline(ss, name, ',')) {
      if (!name.empty() && name.back() == '\r') name.pop_back();
      if (i >= cols.size() || name != cols[i]) {
        throw InputError("log csv: unexpected column '" + name + "' at position " +
                         std::to_string(i));
      }
      ++i;
    }
    if (i != cols.size()) throw InputError("log csv: header has too few columns");
  }
  TrajectoryLog log;
  std::vector<double> f(cols.size());
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto res = std::from_chars(p, end, f[i]);
      if (res.ec != std::errc()) {
        throw InputError("log csv: bad number on line " + std::to_string(line_no) +
                         ", column " + cols[i]);
      }
      p = res.ptr;
      if (i + 1 < cols.size()) {
        if (p == end || *p != ',') {
          throw InputError("log csv: too few fields on line " + std::to_string(line_no));
        }
        ++p;
      }
    }
    log.rows.push_back(Unflatten(f));
  }
  return log;
}

RigidState InitialStateFromReference(const FlatOutput& flat, const Plant& plant) {
  FlatnessModel truth;
  truth.vehicle = plant.vehicle;
  truth.ground = plant.ground;
  truth.gravity = plant.config.gravity;
  truth.ground_force = plant.config.toggles.ge_force;
  truth.drag = plant.config.toggles.ge_drag;
  truth.equivalent_inertia = false;
  const FlatReference ref = ComputeReference(flat, truth);

  RigidState s;
  s.position = flat.position;
  s.velocity = flat.velocity;
  s.attitude = ref.attitude;
  s.body_rate = ref.body_rate;
  Vec3 torque = ref.torque;
  if (plant.config.toggles.ge_torque) {
    torque -= LevelingTorque(ref.rotation, ref.thrust, std::max(ref.height, 0.0),
                             plant.ground);
  }
  Vec4 wrench;
  wrench << ref.thrust, torque;
  const Vec4 sq = BuildMixingMatrix(plant.vehicle).partialPivLu().solve(wrench);
  for (int i = 0; i < 4; ++i) s.rotors[i] = std::sqrt(std::max(sq[i], 0.0));
  return s;
}

TrajectoryLog RunScenario(Simulator& sim, Policy& policy, const RunOptions& opts) {
  const Plant& plant = sim.plant();
  const double dt = plant.config.dt;
  const int ctrl_dec = plant.config.ControlDecimation();
  const int log_dec = std::max(opts.log_decimation, 1);
  const long steps = std::lround(opts.duration / dt);

  TrajectoryLog log;
  ControlCommand cmd;
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const RigidState& st = sim.state();
    if (k % ctrl_dec == 0) {
      SensorPacket pk;
      pk.time = t;
      pk.position = st.position;
      pk.velocity = st.velocity;
      pk.attitude = st.attitude;
      pk.imu = sim.Imu();
      pk.rotors = st.rotors;
      pk.rotor_time = t;
      cmd = policy.Update(pk);
      if (!policy.telemetry().ref.feasible) ++log.infeasible_ticks;
      if (cmd.allocation.saturated) ++log.saturated_ticks;
    }
    const bool last = k == steps || sim.crashed();
    if (k % log_dec == 0 || last) {
      const ControlTelemetry& tm = policy.telemetry();
      const StateDerivative d = sim.Derivative();
      LogRow r;
      r.t = t;
      r.p = st.position;
      r.v = st.velocity;
      r.q = st.attitude;
      r.w = st.body_rate;
      r.n = st.rotors.AsVector();
      r.h = d.rotor_plane_height;
      const FlatOutput flat = policy.trajectory().Evaluate(t);
      r.p_ref = flat.position;
      r.v_ref = flat.velocity;
      r.q_ref = tm.ref.attitude;
      r.q_des = tm.attitude_des;
      r.w_ref = tm.ref.body_rate;
      r.thrust_ref = tm.ref.thrust;
      r.thrust_des = cmd.thrust;
      r.tau_des = cmd.torque;
      r.n_cmd = cmd.allocation.rotors.AsVector();
      r.saturated = cmd.allocation.saturated ? 1 : 0;
      r.feasible = tm.ref.feasible ? 1 : 0;
      r.ext_acc = tm.wrench.accel;
      r.ext_tau = tm.wrench.torque;
      r.res_acc = tm.wrench.residual_accel;
      r.res_tau = tm.wrench.residual_torque;
      r.f_ground = d.disturbance.ground_force;
      r.f_drag = d.disturbance.drag_force;
      r.tau_ground = d.disturbance.leveling_torque;
      log.rows.push_back(r);
    }
    if (sim.crashed()) {
      log.crashed = true;
      log.crash_time = t;
      break;
    }
    if (k == steps) break;
    sim.Step(cmd.allocation.rotors);
  }
  return log;
}

}  // namespace gectl
