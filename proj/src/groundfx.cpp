#include "gectl/groundfx.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gectl/errors.hpp"

namespace gectl {

namespace {

void RequireAltitude(double h) {
  if (!(h >= 0.0) || !std::isfinite(h)) {
    throw DomainError("altitude must be finite and non-negative, got " +
                      std::to_string(h));
  }
}

void RequireRotation(const Mat3& r) {
  if (!r.allFinite() || OrthonormalityError(r) > 1e-6) {
    throw InputError("rotation matrix is not orthonormal");
  }
}

double TorqueDenominator(double h, const GroundEffectParams& ge) {
  return h * h + ge.g3 * h + ge.g4;
}

}  // namespace

std::vector<DragSample> GroundEffectParams::DefaultDragTable() {
  // High-altitude coefficients 0.30 / 0.32 kg/s; the 0.1 m row keeps the
  // measured near-ground ratios 0.5963 (x) and 0.6179 (y).
  return {
      {0.1, 0.30 * 0.5963, 0.32 * 0.6179},
      {0.3, 0.30 * 0.80, 0.32 * 0.81},
      {0.6, 0.30 * 0.92, 0.32 * 0.92},
      {1.0, 0.30 * 0.97, 0.32 * 0.97},
      {2.0, 0.30, 0.32},
  };
}

GroundEffectParams GroundEffectParams::Tied(double g1, double g2, double wheelbase) {
  GroundEffectParams ge;
  ge.g1 = g1;
  ge.g2 = g2;
  ge.g3 = 0.0;
  ge.g4 = g1;
  ge.g5 = wheelbase * wheelbase * g2 / 4.0;
  return ge;
}

void GroundEffectParams::Validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(g1) || !finite(g2) || !finite(g3) || !finite(g4) || !finite(g5)) {
    throw ParameterError("ground-effect constants must be finite");
  }
  if (!(g1 > 0.0)) throw ParameterError("g1 must be positive");
  if (g2 < 0.0) throw ParameterError("g2 must be non-negative");
  if (!(g4 > 0.0)) throw ParameterError("g4 must be positive");
  if (g5 < 0.0) throw ParameterError("g5 must be non-negative");
  // h^2 + g3 h + g4 > 0 on h >= 0: only a negative g3 can create a root.
  if (g3 < 0.0 && g4 - g3 * g3 / 4.0 <= 0.0) {
    throw ParameterError("h^2 + g3 h + g4 must stay positive for h >= 0");
  }
  if (!(tilt_saturation_angle > 0.0) || tilt_saturation_angle > kPi / 2.0) {
    throw ParameterError("tilt saturation angle must lie in (0, pi/2]");
  }
  if (drag_table.size() < 2) {
    throw ConfigError("drag table needs at least two samples", "drag_sample");
  }
  for (std::size_t i = 0; i < drag_table.size(); ++i) {
    const DragSample& s = drag_table[i];
    if (!finite(s.h) || !finite(s.dx) || !finite(s.dy) || s.h < 0.0) {
      throw ConfigError("drag sample must be finite with h >= 0", "drag_sample");
    }
    if (s.dx < 0.0 || s.dy < 0.0) {
      throw ConfigError("drag coefficients must be non-negative", "drag_sample");
    }
    if (i > 0 && !(s.h > drag_table[i - 1].h)) {
      throw ConfigError("drag table must be strictly increasing in h", "drag_sample");
    }
  }
}

GroundEffectParams GroundEffectParams::Scaled(double factor) const {
  GroundEffectParams out = *this;
  out.g1 *= factor;
  out.g2 *= factor;
  out.g3 *= factor;
  out.g4 *= factor;
  out.g5 *= factor;
  for (DragSample& s : out.drag_table) {
    s.dx *= factor;
    s.dy *= factor;
  }
  return out;
}

double Fg(double h, const GroundEffectParams& ge) {
  RequireAltitude(h);
  return ge.g2 / (h * h + ge.g1);
}

double FgPrime(double h, const GroundEffectParams& ge) {
  RequireAltitude(h);
  const double d = h * h + ge.g1;
  return -2.0 * ge.g2 * h / (d * d);
}

double Mg(double h, const GroundEffectParams& ge) {
  RequireAltitude(h);
  if (!(ge.g4 > 0.0) || ge.g5 < 0.0 || (ge.g3 < 0.0 && ge.g4 - ge.g3 * ge.g3 / 4.0 <= 0.0)) {
    throw ParameterError("leveling-torque constants violate positivity");
  }
  const double d = TorqueDenominator(h, ge);
  return ge.g5 * h / (d * d);
}

double MgPeakHeight(const GroundEffectParams& ge, double lo, double hi) {
  // Mg is unimodal on h >= 0, so golden-section search is enough.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = Mg(c, ge), fd = Mg(d, ge);
  while (b - a > 1e-12) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = Mg(c, ge);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = Mg(d, ge);
    }
  }
  return 0.5 * (a + b);
}

Vec3 LevelingTorque(const Mat3& rotation, double thrust, double h,
                    const GroundEffectParams& ge) {
  RequireRotation(rotation);
  RequireAltitude(h);
  Vec3 axis = rotation.col(2).cross(WorldZ());  // |axis| = sin(tilt)
  const double sin_tilt = axis.norm();
  if (sin_tilt == 0.0) return Vec3::Zero();
  if (ge.tilt_saturation && TiltAngle(rotation) > ge.tilt_saturation_angle) {
    axis *= std::sin(ge.tilt_saturation_angle) / sin_tilt;
  }
  return Mg(h, ge) * thrust * (rotation.transpose() * axis);
}

Vec3 GroundEffectForce(const Mat3& rotation, double thrust, double h,
                       const GroundEffectParams& ge) {
  RequireRotation(rotation);
  return Fg(h, ge) * thrust * rotation.col(2);
}

Mat3 DragCoefficients(double h, const GroundEffectParams& ge) {
  RequireAltitude(h);
  const auto& table = ge.drag_table;
  if (table.empty()) {
    throw ConfigError("drag table is empty", "drag_sample");
  }
  double dx, dy;
  if (h <= table.front().h) {
    dx = table.front().dx;
    dy = table.front().dy;
  } else if (h >= table.back().h) {
    dx = table.back().dx;
    dy = table.back().dy;
  } else {
    auto upper = std::upper_bound(
        table.begin(), table.end(), h,
        [](double value, const DragSample& s) { return value < s.h; });
    const DragSample& hi = *upper;
    const DragSample& lo = *(upper - 1);
    const double w = (h - lo.h) / (hi.h - lo.h);
    dx = lo.dx + w * (hi.dx - lo.dx);
    dy = lo.dy + w * (hi.dy - lo.dy);
  }
  return Vec3(dx, dy, 0.0).asDiagonal();
}

Vec3 DragForce(const Mat3& rotation, const Vec3& velocity, double h,
               const GroundEffectParams& ge) {
  RequireRotation(rotation);
  return -rotation * DragCoefficients(h, ge) * rotation.transpose() * velocity;
}

double HoverLevelingGain(double h, const GroundEffectParams& ge,
                         const VehicleParams& vehicle, double gravity) {
  return vehicle.mass * gravity * Mg(h, ge) / (1.0 + Fg(h, ge));
}

Mat3 EquivalentInertia(double h, double thrust_hint, const GroundEffectParams& ge,
                       const VehicleParams& vehicle, double gravity) {
  const double gain = thrust_hint > 0.0 ? Mg(h, ge) * thrust_hint
                                        : HoverLevelingGain(h, ge, vehicle, gravity);
  const double added = gain * gain / (vehicle.mass * gravity * gravity);
  Mat3 out = vehicle.inertia;
  out(0, 0) += added;
  out(1, 1) += added;
  return out;
}

}  // namespace gectl
