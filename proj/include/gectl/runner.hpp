#ifndef GECTL_RUNNER_HPP_
#define GECTL_RUNNER_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "gectl/controller.hpp"
#include "gectl/dynamics.hpp"
#include "gectl/flatness.hpp"

namespace gectl {

/// One logged physics tick. Units: SI, rotor speeds in rpm.
struct LogRow {
  double t = 0.0;
  Vec3 p = Vec3::Zero(), v = Vec3::Zero();
  Quat q = Quat::Identity();
  Vec3 w = Vec3::Zero();
  Vec4 n = Vec4::Zero();  // actual rotor speeds
  double h = 0.0;         // rotor-plane height
  Vec3 p_ref = Vec3::Zero(), v_ref = Vec3::Zero();
  Quat q_ref = Quat::Identity(), q_des = Quat::Identity();
  Vec3 w_ref = Vec3::Zero();
  double thrust_ref = 0.0, thrust_des = 0.0;
  Vec3 tau_des = Vec3::Zero();
  Vec4 n_cmd = Vec4::Zero();
  int saturated = 0;
  int feasible = 1;
  Vec3 ext_acc = Vec3::Zero(), ext_tau = Vec3::Zero();  // observer, raw
  Vec3 res_acc = Vec3::Zero(), res_tau = Vec3::Zero();  // observer minus model
  Vec3 f_ground = Vec3::Zero(), f_drag = Vec3::Zero();  // true, world
  Vec3 tau_ground = Vec3::Zero();                       // true, body

  bool operator==(const LogRow& o) const;
};

struct TrajectoryLog {
  std::vector<LogRow> rows;
  bool crashed = false;
  double crash_time = -1.0;
  int infeasible_ticks = 0;   // control ticks with n_ref out of range
  int saturated_ticks = 0;
  int observer_drops = 0;
};

/// Column names in file order; `t` first.
const std::vector<std::string>& LogColumns();

/// Writes header plus rows using shortest round-trip decimal formatting.
void WriteLogCsv(std::ostream& os, const TrajectoryLog& log);
/// Parses a file written by WriteLogCsv. Throws InputError on a header or
/// field mismatch.
TrajectoryLog ReadLogCsv(std::istream& is);

/// Shortest decimal string that parses back to the same double.
std::string FormatDouble(double x);

/// State that makes the plant follow `flat` exactly at t = 0: pose and rates
/// from the reference built with the plant's own disturbance model, rotors
/// at the speeds producing the required wrench.
RigidState InitialStateFromReference(const FlatOutput& flat, const Plant& plant);

struct RunOptions {
  double duration = 10.0;
  int log_decimation = 4;  // physics ticks per log row
};

/// Steps the simulator at dt, calls the policy every control period with
/// ground-truth pose, the IMU sample and measured rotor speeds, and logs.
/// Stops at `duration` or on crash (flagged, log truncated).
TrajectoryLog RunScenario(Simulator& sim, Policy& policy, const RunOptions& opts);

}  // namespace gectl

#endif  // GECTL_RUNNER_HPP_
