#ifndef GECTL_ESTIMATION_HPP_
#define GECTL_ESTIMATION_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gectl/dynamics.hpp"
#include "gectl/filters.hpp"
#include "gectl/groundfx.hpp"
#include "gectl/math.hpp"
#include "gectl/vehicle.hpp"

namespace gectl {

/// External acceleration (world) and torque (body) inferred from the IMU and
/// the commanded actuation.
struct WrenchEstimate {
  Vec3 accel = Vec3::Zero();   // m/s^2, world
  Vec3 torque = Vec3::Zero();  // N m, body
  // Same, minus the filtered model prediction supplied with the input.
  Vec3 residual_accel = Vec3::Zero();
  Vec3 residual_torque = Vec3::Zero();
  double timestamp = 0.0;
  bool valid = false;
};

/// Pure observer arithmetic on already filtered signals:
///   a_ext   = f_f - (T z_B)_f / m
///   tau_ext = J w_dot_f + w_f x J w_f - tau_B,f
/// `specific_force_f` is the world-frame accelerometer reading (a + g z_W)
/// and `thrust_vector_f` the world-frame rotor thrust T z_B.
WrenchEstimate ObserveWrench(const Vec3& specific_force_f, const Vec3& thrust_vector_f,
                             const Vec3& body_rate_f, const Vec3& body_rate_dot_f,
                             const Vec3& body_torque_f, const VehicleParams& vehicle,
                             double timestamp = 0.0);

/// Signals available to the observer at one control tick.
struct ObserverInput {
  double imu_time = 0.0;
  double actuation_time = 0.0;
  ImuSample imu;
  Mat3 rotation = Mat3::Identity();  // estimated attitude
  RotorSpeeds rotors;                // measured speeds
  // Disturbances the model predicts at this state; subtracted to give the
  // residual wrench.
  Vec3 model_accel = Vec3::Zero();   // world
  Vec3 model_torque = Vec3::Zero();  // body
};

/// Stateful observer: filters the accelerometer, gyro, its difference
/// quotient and the actuation with one cutoff, then applies ObserveWrench.
/// The actuation path gets the same half-sample delay as the differentiated
/// gyro so both sides of the torque balance stay aligned.
class WrenchObserver {
 public:
  WrenchObserver(const VehicleParams& vehicle, double cutoff_hz, double sample_period);

  // Returns the new estimate, or the previous one (valid = false) if the
  // IMU and actuation timestamps differ by more than one sample period.
  const WrenchEstimate& Update(const ObserverInput& input);

  // Seeds the angular-acceleration filter, e.g. with a reference value.
  void SeedBodyRateDot(const Vec3& value);

  const Vec3& body_rate_f() const { return rate_f_.value(); }
  const Vec3& body_rate_dot_f() const { return rate_dot_f_.value(); }
  // Filtered actuation torque aligned with body_rate_dot_f().
  const Vec3& body_torque_f() const { return torque_aligned_; }
  double thrust_f() const { return thrust_f_.value(); }
  const WrenchEstimate& estimate() const { return estimate_; }
  int dropped_samples() const { return dropped_; }

 private:
  VehicleParams vehicle_;
  double period_;
  LowPass<Vec3> accel_f_, thrust_vec_f_, rate_f_, rate_dot_f_, torque_f_;
  LowPass<Vec3> model_accel_f_, model_torque_f_;
  LowPass<double> thrust_f_;
  Vec3 last_gyro_ = Vec3::Zero();
  Vec3 last_torque_f_ = Vec3::Zero();
  Vec3 last_model_torque_f_ = Vec3::Zero();
  Vec3 torque_aligned_ = Vec3::Zero();
  Vec3 model_torque_aligned_ = Vec3::Zero();
  std::optional<Vec3> seed_rate_dot_;
  bool started_ = false;
  WrenchEstimate estimate_;
  int dropped_ = 0;
};

/// Ranks with ties replaced by their average rank (1-based).
std::vector<double> AverageRanks(const std::vector<double>& x);

/// Spearman's rank correlation: Pearson correlation of average ranks.
/// Throws InputError for unequal lengths or n < 3, DomainError when either
/// sequence is constant.
double Spearman(const std::vector<double>& x, const std::vector<double>& y);

/// F_G sample from a force/torque platform: z-force / T - 1. Returns
/// nullopt when T is not positive.
std::optional<double> MeasureFgPlatform(double force_z, double thrust,
                                        double eps = 1e-9);

/// F_G sample from flight data: m * a_ext,z / T.
std::optional<double> MeasureFgFlight(const Vec3& ext_accel, double thrust, double mass,
                                      double eps = 1e-9);

/// Nonlinear least-squares result.
struct FitReport {
  std::vector<std::string> names;
  Eigen::VectorXd params;
  Eigen::VectorXd ci95;  // half-width from the linearized covariance
  double residual_rms = 0.0;
  int samples = 0;
  int iterations = 0;

  std::string ToJson() const;
  std::string ToText() const;
};

struct LmOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10;  // relative
  double rank_tolerance = 1e-10;  // on column-scaled singular values
};

/// Levenberg-Marquardt on r(x) with Jacobian J(x). Throws FitFailure on
/// rank deficiency or when the iteration limit is hit.
FitReport LevenbergMarquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
    Eigen::VectorXd x0, std::vector<std::string> names, const LmOptions& opts = {});

struct FgSample {
  double h = 0.0;
  double fg = 0.0;
};

/// Fits F_G = g2 / (h^2 + g1). Needs >= 10 samples spanning a factor >= 3
/// in h.
FitReport FitFg(const std::vector<FgSample>& samples, const LmOptions& opts = {});

struct MgSample {
  double h = 0.0;
  double tilt = 0.0;    // rad
  double thrust = 0.0;  // N
  double torque = 0.0;  // |tau_G|, N m
};

/// Fits |tau_G| = M_G(h) T sin(tilt) for (g3, g4, g5). Samples tilted more
/// than 10 degrees are skipped.
FitReport FitMg(const std::vector<MgSample>& samples, const LmOptions& opts = {});

struct CoeffSample {
  double h = 0.0;
  double k = 0.0;
};

/// k(h) / k_inf - 1. When k_inf is absent it is the mean k over the top
/// altitude decile.
std::vector<CoeffSample> NormalizeCoeff(const std::vector<CoeffSample>& samples,
                                        std::optional<double> k_inf = std::nullopt);

struct DragObservation {
  double h = 0.0;
  Vec3 body_velocity = Vec3::Zero();
  Vec3 body_ext_accel = Vec3::Zero();
};

struct DragFit {
  double h = 0.0;  // mean altitude of the segment
  double dx = 0.0, dy = 0.0;          // kg/s
  double dx_se = 0.0, dy_se = 0.0;    // standard errors
  double max_speed = 0.0;
  int samples = 0;
};

/// Regresses body-frame external acceleration on body velocity per axis
/// (with intercept); d = -slope * m. Throws FitFailure when the in-plane
/// speed never reaches `min_speed`.
DragFit FitDrag(const std::vector<DragObservation>& segment, double mass,
                double min_speed = 0.3);

/// Splits observations into altitude bins of width `bin` and fits each bin
/// with enough samples and excitation.
std::vector<DragFit> FitDragByAltitude(const std::vector<DragObservation>& obs,
                                       double mass, double bin = 0.05,
                                       int min_samples = 50);

}  // namespace gectl

#endif  // GECTL_ESTIMATION_HPP_
