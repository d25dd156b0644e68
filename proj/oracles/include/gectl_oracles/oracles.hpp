#ifndef GECTL_ORACLES_ORACLES_HPP_
#define GECTL_ORACLES_ORACLES_HPP_

#include <string>
#include <vector>

#include "gectl/groundfx.hpp"
#include "gectl/vehicle.hpp"

namespace gectl::oracles {

/// |tau_G| by composite Simpson over the rotor circle with the exact
/// F_G(h - (b/2) sin(tilt) cos(theta)). Throws DomainError when the lowest
/// rotor point is at or below the ground.
double QuadratureLevelingTorque(double h, double tilt, double thrust,
                                const GroundEffectParams& ge, double wheelbase,
                                int intervals = 4096);

/// Rank correlation straight from the definition: each rank counted as
/// 1 + #smaller + (#equal - 1) / 2, then cov / (sigma sigma) in long double.
double BruteForceSpearman(const std::vector<double>& x, const std::vector<double>& y);

struct OracleResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // the headline error / metric
  double threshold = 0.0;
  double seconds = 0.0;
  std::string detail;
};

OracleResult CheckTorqueModel();          // closed form vs quadrature
OracleResult CheckDerivativeIdentity();   // M_G = -(b^2/8) F_G' with tied constants
OracleResult CheckLemniscate();           // derivatives and peak speed
OracleResult CheckReferenceRates();       // body rate / acceleration vs finite differences
OracleResult CheckSpearman();             // tied random datasets vs brute force

struct EquivalenceResult {
  double relative_rms = 0.0;  // closed loop, RMS(d_explicit - d_inertia) / RMS(d_explicit)
  double open_loop_relative_rms = 0.0;
  double height = 0.0;
  double added_inertia = 0.0;  // J'_xx - J_xx
  std::vector<double> time, tilt_explicit, tilt_inertia;
};

/// Attitude-only RK4 runs of the explicit leveling-torque model (inertia J)
/// and the torque-free model with J'(h), from a 5 degree roll at the M_G
/// peak, for 1 s. Both are driven by the same PD regulator (default
/// attitude-cascade gains, torque scaled by J').
EquivalenceResult RunEquivalence(const VehicleParams& vehicle, const GroundEffectParams& ge,
                                 double gravity = 9.80665, double tilt0 = 5.0 * kPi / 180.0,
                                 double duration = 1.0, double dt = 5e-4);
OracleResult CheckEquivalence();

std::vector<std::string> OracleNames();
/// Throws InputError for an unknown name.
OracleResult RunOracle(const std::string& name);

}  // namespace gectl::oracles

#endif  // GECTL_ORACLES_ORACLES_HPP_
