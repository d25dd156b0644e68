#include "gectl/flatness.hpp"

#include <array>
#include <cmath>

#include "gectl/errors.hpp"

namespace gectl {

namespace {

// Smooth step 126t^5 - 420t^6 + 540t^7 - 315t^8 + 70t^9 and its first four
// derivatives with respect to t.
std::array<double, 5> SmoothStep(double t) {
  static constexpr std::array<double, 10> kCoeff = {0, 0, 0, 0, 0, 126, -420, 540, -315, 70};
  std::array<double, 5> out{};
  for (int d = 0; d < 5; ++d) {
    double acc = 0.0;
    for (int k = 9; k >= d; --k) {
      double c = kCoeff[k];
      for (int j = 0; j < d; ++j) c *= (k - j);
      acc = acc * t + c;
    }
    out[d] = acc;
  }
  return out;
}

}  // namespace

double LemniscateSpec::AngularRate() const {
  return peak_speed / (std::sqrt(2.0) * half_width);
}

double LemniscateSpec::Period() const { return 2.0 * kPi / AngularRate(); }

FlatOutput Lemniscate(double t, const LemniscateSpec& spec) {
  const double a = spec.half_width;
  const double w = spec.AngularRate();
  const double s1 = std::sin(w * t), c1 = std::cos(w * t);
  const double s2 = std::sin(2 * w * t), c2 = std::cos(2 * w * t);
  const double w2 = w * w, w3 = w2 * w, w4 = w3 * w;
  FlatOutput f;
  f.position = spec.center + Vec3(a * s1, 0.5 * a * s2, 0.0);
  f.velocity = Vec3(a * w * c1, a * w * c2, 0.0);
  f.acceleration = Vec3(-a * w2 * s1, -2.0 * a * w2 * s2, 0.0);
  f.jerk = Vec3(-a * w3 * c1, -4.0 * a * w3 * c2, 0.0);
  f.snap = Vec3(a * w4 * s1, 8.0 * a * w4 * s2, 0.0);
  return f;
}

void DescentSpec::Validate() const {
  if (!(start.z() > end_height)) {
    throw ParameterError("descent start height must exceed end height");
  }
  if (!(end_height > 0.0)) {
    throw ParameterError("descent end height must be above the ground");
  }
  if (!(duration > 0.0) || hold_before < 0.0) {
    throw ParameterError("descent duration must be positive and hold non-negative");
  }
}

double DescentSpec::PeakSpeed() const {
  return 630.0 / 256.0 * (start.z() - end_height) / duration;
}

FlatOutput HoverDescent(double t, const DescentSpec& spec) {
  spec.Validate();
  if (t < 0.0) throw DomainError("trajectory time must be non-negative");
  const double tau = Clamp((t - spec.hold_before) / spec.duration, 0.0, 1.0);
  const auto s = SmoothStep(tau);
  const double dh = spec.end_height - spec.start.z();
  const bool moving = tau > 0.0 && tau < 1.0;
  FlatOutput f;
  f.position = Vec3(spec.start.x(), spec.start.y(),
                    tau >= 1.0 ? spec.end_height : spec.start.z() + dh * s[0]);
  if (moving) {
    double scale = dh;
    Vec3* derivs[4] = {&f.velocity, &f.acceleration, &f.jerk, &f.snap};
    for (int d = 1; d <= 4; ++d) {
      scale /= spec.duration;
      derivs[d - 1]->z() = scale * s[d];
    }
  }
  return f;
}

FlatOutput Hover(const Vec3& position, double yaw) {
  FlatOutput f;
  f.position = position;
  f.yaw = yaw;
  return f;
}

FlatOutput TrajectorySpec::Evaluate(double t) const {
  switch (kind) {
    case Kind::kHover:
      return Hover(hover_position);
    case Kind::kHoverDescent:
      return HoverDescent(t, descent);
    case Kind::kLemniscate:
      return Lemniscate(t, lemniscate);
  }
  throw ParameterError("unknown trajectory kind");
}

std::string TrajectorySpec::KindName() const {
  switch (kind) {
    case Kind::kHover:
      return "hover";
    case Kind::kHoverDescent:
      return "hover_descent";
    case Kind::kLemniscate:
      return "lemniscate";
  }
  return "unknown";
}

double FlatnessModel::FgAt(double h) const {
  return ground_force ? Fg(std::max(h, 0.0), ground) : 0.0;
}

Mat3 FlatnessModel::NormalizedDrag(double h) const {
  if (!drag) return Mat3::Zero();
  return DragCoefficients(std::max(h, 0.0), ground) / vehicle.mass;
}

Mat3 FlatnessModel::InertiaAt(double h, double thrust) const {
  if (!equivalent_inertia) return vehicle.inertia;
  return EquivalentInertia(std::max(h, 0.0), thrust, ground, vehicle, gravity);
}

Mat3 AttitudeFromThrustAxis(const Vec3& thrust_axis, double yaw) {
  const Vec3 z_b = thrust_axis.normalized();
  const Vec3 y_c(-std::sin(yaw), std::cos(yaw), 0.0);
  Vec3 x_b = y_c.cross(z_b);
  const double n = x_b.norm();
  if (n < 1e-9) {
    throw ReferenceError("thrust axis is parallel to the heading's lateral axis");
  }
  x_b /= n;
  const Vec3 y_b = z_b.cross(x_b);
  Mat3 r;
  r.col(0) = x_b;
  r.col(1) = y_b;
  r.col(2) = z_b;
  return r;
}

ThrustAttitude RefThrustAttitude(const FlatOutput& flat, double h,
                                 const FlatnessModel& model) {
  const Vec3 specific = flat.acceleration + model.gravity * WorldZ();
  if (specific.norm() < 1e-9) {
    throw ReferenceError("reference demands free fall; thrust direction undefined");
  }
  const Mat3 drag = model.NormalizedDrag(h);
  const double dx = drag(0, 0), dy = drag(1, 1);

  ThrustAttitude out;
  Vec3 z_b = specific.normalized();
  Mat3 r = AttitudeFromThrustAxis(z_b, flat.yaw);
  bool converged = false;
  for (int k = 1; k <= model.max_iterations; ++k) {
    const Vec3 x_b = r.col(0), y_b = r.col(1);
    const Vec3 alpha = specific + dx * x_b.dot(flat.velocity) * x_b +
                       dy * y_b.dot(flat.velocity) * y_b;
    const Vec3 next = alpha.normalized();
    const double step = (next - z_b).norm();
    z_b = next;
    r = AttitudeFromThrustAxis(z_b, flat.yaw);
    out.iterations = k;
    if (step < model.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ReferenceError("thrust-axis iteration did not converge in " +
                         std::to_string(model.max_iterations) + " iterations");
  }
  out.rotation = r;
  out.attitude = Quat(r).normalized();
  out.collective = z_b.dot(specific);
  out.thrust = model.vehicle.mass * out.collective / (1.0 + model.FgAt(h));
  return out;
}

ReferenceRates RefRates(const FlatOutput& flat, double h, double h_rate,
                        const ThrustAttitude& solved, const FlatnessModel& model) {
  const Mat3& r = solved.rotation;
  const Mat3 rt = r.transpose();
  const Mat3 d = model.NormalizedDrag(h);
  const double c = solved.collective;
  const Vec3 e1 = Vec3::UnitX(), e3 = Vec3::UnitZ();

  const Vec3 x_c(std::cos(flat.yaw), std::sin(flat.yaw), 0.0);
  const Vec3 y_c(-std::sin(flat.yaw), std::cos(flat.yaw), 0.0);
  const double psi_d = flat.yaw_rate, psi_dd = flat.yaw_acceleration;

  const Vec3 u = rt * flat.velocity;      // body velocity
  const Vec3 a_b = rt * flat.acceleration;
  const Vec3 j_b = rt * flat.jerk;
  const Vec3 s_b = rt * flat.snap;
  const Mat3 q = -Skew(d * u) + d * Skew(u);

  // Unknowns (c_dot, w) and (c_ddot, w_dot) share one linear operator:
  // three body-frame force rows and the heading constraint y_C . x_B = 0.
  Mat4 a = Mat4::Zero();
  a.block<3, 1>(0, 0) = e3;
  a.block<3, 3>(0, 1) = -c * Skew(e3) - q;
  a(3, 2) = -y_c.dot(r.col(2));
  a(3, 3) = y_c.dot(r.col(1));
  const Eigen::PartialPivLU<Mat4> lu(a);
  if (std::abs(a.determinant()) < 1e-12) {
    throw ReferenceError("rate equations are singular (zero collective thrust?)");
  }

  Vec4 rhs1;
  rhs1.head<3>() = j_b + d * a_b;
  rhs1[3] = psi_d * x_c.dot(r.col(0));
  const Vec4 x1 = lu.solve(rhs1);
  const double c_dot = x1[0];
  const Vec3 w = x1.tail<3>();

  const Vec3 u_dot = -w.cross(u) + a_b;
  const Vec3 y1 = w.cross(d * u) + d * u_dot;
  const Vec3 ra_dot = -w.cross(a_b) + j_b;  // d/dt (R^T a)
  const Vec3 known_body = s_b + w.cross(y1) + w.cross(d * u_dot) +
                          d * (-w.cross(u_dot) + ra_dot) -
                          2.0 * c_dot * w.cross(e3) - c * w.cross(w.cross(e3));
  const Vec3 yc_dd = -psi_dd * x_c - psi_d * psi_d * y_c;
  const Vec3 yc_d = -psi_d * x_c;
  const Vec3 xb_d = r * w.cross(e1);
  const double known_yaw = yc_dd.dot(r.col(0)) + 2.0 * yc_d.dot(xb_d) +
                           y_c.dot(r * w.cross(w.cross(e1)));
  Vec4 rhs2;
  rhs2.head<3>() = known_body;
  rhs2[3] = -known_yaw;
  const Vec4 x2 = lu.solve(rhs2);

  ReferenceRates out;
  out.body_rate = w;
  out.body_acceleration = x2.tail<3>();
  out.collective_rate = c_dot;
  out.collective_acceleration = x2[0];
  const double gain = 1.0 + model.FgAt(h);
  out.thrust_rate = model.vehicle.mass * c_dot / gain;
  if (model.thrust_rate_uses_fg_slope && model.ground_force && h > 0.0) {
    out.thrust_rate -= model.vehicle.mass * c * FgPrime(h, model.ground) * h_rate /
                       (gain * gain);
  }
  return out;
}

Vec3 RefTorque(const Vec3& body_rate, const Vec3& body_acceleration, double h,
               double thrust, const FlatnessModel& model) {
  const Mat3 j = model.InertiaAt(h, thrust);
  return j * body_acceleration + body_rate.cross(j * body_rate);
}

FlatReference ComputeReference(const FlatOutput& flat, const FlatnessModel& model) {
  FlatReference ref;
  ref.flat = flat;
  ref.height = model.vehicle.RotorPlaneHeight(flat.position.z());
  const ThrustAttitude ta = RefThrustAttitude(flat, ref.height, model);
  const ReferenceRates rates = RefRates(flat, ref.height, flat.velocity.z(), ta, model);
  ref.thrust = ta.thrust;
  ref.thrust_rate = rates.thrust_rate;
  ref.attitude = ta.attitude;
  ref.rotation = ta.rotation;
  ref.iterations = ta.iterations;
  ref.body_rate = rates.body_rate;
  ref.body_acceleration = rates.body_acceleration;
  ref.torque = RefTorque(rates.body_rate, rates.body_acceleration, ref.height,
                         ta.thrust, model);

  Vec4 wrench;
  wrench << ref.thrust, ref.torque;
  ref.rotors_squared = BuildMixingMatrix(model.vehicle).partialPivLu().solve(wrench);
  const double max_sq = model.vehicle.max_rotor_speed * model.vehicle.max_rotor_speed;
  ref.feasible = true;
  for (int i = 0; i < 4; ++i) {
    const double sq = ref.rotors_squared[i];
    if (sq < 0.0 || sq > max_sq) ref.feasible = false;
    ref.rotors[i] = std::sqrt(Clamp(sq, 0.0, max_sq));
  }
  return ref;
}

}  // namespace gectl
