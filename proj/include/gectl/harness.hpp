#ifndef GECTL_HARNESS_HPP_
#define GECTL_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gectl/config.hpp"
#include "gectl/controller.hpp"
#include "gectl/dynamics.hpp"
#include "gectl/flatness.hpp"
#include "gectl/groundfx.hpp"
#include "gectl/runner.hpp"
#include "gectl/vehicle.hpp"

namespace gectl {

/// Process exit codes shared by the CLI and the harness.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitCrash = 3,
  kExitInfeasible = 4,
  kExitIntegration = 5,
  kExitControllerFault = 6,
  kExitFitFailure = 7,
  kExitOracleFailed = 8,
};

enum class PolicyKind { kFeedback, kFeedforward };

struct Scenario {
  std::string name = "unnamed";
  std::uint64_t seed = 0;
  TrajectorySpec trajectory;
  VehicleParams vehicle;
  GroundEffectParams ground;
  SimConfig sim;
  ControlGains gains;

  // What the controller's model contains besides the mismatch scaling.
  bool model_ground_force = true;
  bool model_drag = true;
  bool model_leveling = true;
  bool thrust_rate_uses_fg_slope = true;

  PolicyKind policy = PolicyKind::kFeedback;
  double lookahead = 0.0;        // feedforward sampling offset, s
  bool exact_leveling = false;   // feedforward cancels tau_G explicitly

  int log_decimation = 4;
  double metric_start = 0.0;     // rows before this time are not scored
  double low_altitude = 0.3;     // "low altitude" threshold for attitude RMSE
  double profile_bin = 0.02;     // half-width of the angle-error bins

  // Controller's copy of the ground-effect model.
  FlatnessModel ControllerModel() const;
  Plant MakePlant() const;
  std::string TrajectorySignature() const;
};

/// Keys accepted in scenario files.
const std::set<std::string>& ScenarioKeys();

/// Reads a scenario file (plus the optional `ground_file` it names, resolved
/// relative to the scenario) into one config; scenario keys win.
KeyValueConfig LoadScenarioConfig(const std::filesystem::path& path);
Scenario ScenarioFromConfig(const KeyValueConfig& cfg);
Scenario LoadScenario(const std::filesystem::path& path);

/// Every field as `key = value` lines; parses back to an equal scenario.
std::string SerializeScenario(const Scenario& s);

struct ProfileBin {
  double h = 0.0;
  double error = 0.0;  // rad, RMS geodesic angle
  int samples = 0;
};

/// RMS attitude error versus rotor-plane height over windows
/// [h0 - dh, h0 + dh] with centers every dh. Bins with < 10 samples are
/// dropped. Throws InputError on an empty log.
std::vector<ProfileBin> AngleErrorProfile(const TrajectoryLog& log, double dh,
                                          double t_start = 0.0);

struct MetricsReport {
  std::string name;
  std::string trajectory;  // signature for comparability checks
  std::uint64_t seed = 0;
  std::string accel_mode, torque_mode;
  double rmse_xoy = 0.0, rmse_z = 0.0, rmse_all = 0.0;  // cm
  double max_error = 0.0, std_error = 0.0;               // cm, of |E_P|
  double attitude_rmse = 0.0;      // deg
  double attitude_rmse_low = 0.0;  // deg, h below the low-altitude threshold
  double residual_accel_max = 0.0;   // m/s^2
  double residual_torque_max = 0.0;  // N m
  int samples = 0;
  int low_samples = 0;
  bool crashed = false;
  double crash_time = -1.0;
  int infeasible_ticks = 0;
  int saturated_ticks = 0;
  std::string status = "ok";
  std::vector<ProfileBin> profile;

  std::string ToJson() const;
  static MetricsReport FromJson(const std::string& text);
};

MetricsReport ComputeMetrics(const TrajectoryLog& log, const Scenario& s);

struct RunResult {
  TrajectoryLog log;
  MetricsReport metrics;
  int exit_code = kExitOk;
  std::string error;
};

/// Builds plant, policy and simulator from the scenario and runs it.
/// Simulation-side failures become exit codes; ConfigError propagates.
RunResult Run(const Scenario& s);

/// Run() plus scenario.resolved, log.csv and metrics.json in `out_dir`.
RunResult RunToDirectory(const Scenario& s, const std::filesystem::path& out_dir);

struct ComparisonRow {
  MetricsReport report;
  double reduction_pct = 0.0;  // RMSE all reduction vs the baseline
  bool comparable = true;      // same trajectory signature as the baseline
};

/// Table-style comparison against the report named `baseline` (the first
/// report when empty). Throws InputError on an empty list or unknown name.
std::vector<ComparisonRow> Compare(const std::vector<MetricsReport>& reports,
                                   const std::string& baseline = "");
std::string ComparisonText(const std::vector<ComparisonRow>& rows);
std::string ComparisonCsv(const std::vector<ComparisonRow>& rows);

}  // namespace gectl

#endif  // GECTL_HARNESS_HPP_
