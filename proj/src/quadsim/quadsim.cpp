#include "skillab/quadsim/quadsim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace skillab::quadsim {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double vec_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Action ActionBounds::center() const {
  Action c{};
  for (int i = 0; i < 4; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
  return c;
}

Action ActionBounds::half_width() const {
  Action h{};
  for (int i = 0; i < 4; ++i) h[i] = 0.5 * (hi[i] - lo[i]);
  return h;
}

Action ActionBounds::clip(const Action& a) const {
  Action out{};
  for (int i = 0; i < 4; ++i) out[i] = std::isfinite(a[i]) ? numkit::clamp(a[i], lo[i], hi[i]) : center()[i];
  return out;
}

void PhysicalParams::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ParameterError("PhysicalParams: " + what);
  };
  require(mass > 0, "mass must be positive");
  require(arm_length > 0, "arm_length must be positive");
  for (double j : inertia) require(j > 0, "inertia entries must be positive");
  for (double e : efficiency) require(e > 0 && e <= 1.2, "efficiency must lie in (0, 1.2]");
  require(control_period > 0, "control_period must be positive");
  require(motor_time_constant > 0, "motor_time_constant must be positive");
  require(force_scale > 0 && max_motor_force > 0, "force scales must be positive");
  require(noise.position >= 0 && noise.attitude >= 0 && noise.velocity >= 0 && noise.angular_velocity >= 0,
          "noise std must be nonnegative");
  require(delay_steps >= 0, "delay_steps must be nonnegative");
}

void GapSpec::validate() const {
  for (double m : efficiency_multiplier)
    if (!(m > 0)) throw ParameterError("GapSpec: efficiency multipliers must be positive");
  if (observation_noise < 0) throw ParameterError("GapSpec: observation noise must be nonnegative");
  if (delay_steps < 0) throw ParameterError("GapSpec: delay steps must be nonnegative");
}

StepResult step(const QuadState& s, const Action& a, const PhysicalParams& params) {
  StepResult r{integrate(s, a, params), false};
  r.fault = !is_finite(r.state);
  return r;
}

double reward(const QuadState& s, const Action& a, const Vec3d& goal) {
  const Vec3d rpy = geo::rpy_from_quat(s.q);
  const double pos_err = geo::norm(geo::sub(s.p, goal));
  const double tilt = std::hypot(rpy[0], rpy[1]);
  return 2.0 - 2.5 * pos_err - 1.5 * tilt - 0.05 * geo::norm(s.v) - 0.05 * geo::norm(s.w) - 0.1 * vec_norm(a);
}

QuadState reset(const PhysicalParams& params, numkit::Rng& rng, const Vec3d& mean) {
  (void)params;
  const double pos_std = std::sqrt(0.02);
  QuadState s{};
  for (int i = 0; i < 3; ++i) s.p[i] = rng.normal(mean[i], pos_std);
  const double roll = rng.normal(0.0, 5.0 * kDeg);
  const double pitch = rng.normal(0.0, 5.0 * kDeg);
  const double yaw = rng.normal(0.0, 5.0 * kDeg);
  s.q = geo::quat_from_rpy(roll, pitch, yaw);
  return s;
}

QuadState hover_state(const PhysicalParams& params, const Vec3d& position) {
  QuadState s{};
  s.p = position;
  s.q = {1.0, 0.0, 0.0, 0.0};
  s.motor.fill(params.mass * params.gravity / 4.0);
  return s;
}

PhysicalParams apply_gap(const PhysicalParams& params, const GapSpec& gap) {
  gap.validate();
  PhysicalParams out = params;
  out.mass = params.mass + gap.added_mass;
  if (!(out.mass > 0)) throw ParameterError("apply_gap: resulting mass must be positive");
  for (int i = 0; i < 4; ++i) out.efficiency[i] = params.efficiency[i] * gap.efficiency_multiplier[i];
  out.noise = {gap.observation_noise, gap.observation_noise, gap.observation_noise, gap.observation_noise};
  out.delay_steps = gap.delay_steps;
  out.validate();
  return out;
}

QuadState measure(const QuadState& s, const PhysicalParams& params, numkit::Rng& rng) {
  const ObservationNoise& n = params.noise;
  QuadState m = s;
  if (n.position > 0)
    for (double& x : m.p) x += rng.normal(0.0, n.position);
  if (n.velocity > 0)
    for (double& x : m.v) x += rng.normal(0.0, n.velocity);
  if (n.angular_velocity > 0)
    for (double& x : m.w) x += rng.normal(0.0, n.angular_velocity);
  if (n.attitude > 0) {
    const Vec3d d{rng.normal(0.0, n.attitude), rng.normal(0.0, n.attitude), rng.normal(0.0, n.attitude)};
    m.q = geo::normalized(geo::multiply(s.q, Quatd{1.0, 0.5 * d[0], 0.5 * d[1], 0.5 * d[2]}));
  }
  return m;
}

Observation assemble_observation(const QuadState& m, const Vec3d& goal, const Action& u_last,
                                 const TrackingErrorSummary& errors, const PhysicalParams& params) {
  Observation o{};
  auto put = [&o](std::size_t at, const Vec3d& v) {
    for (int i = 0; i < 3; ++i) o[at + i] = v[i];
  };
  put(kObsRelPos, geo::sub(m.p, goal));
  o[kObsQuat] = m.q.w;
  o[kObsQuat + 1] = m.q.x;
  o[kObsQuat + 2] = m.q.y;
  o[kObsQuat + 3] = m.q.z;
  put(kObsRpy, geo::rpy_from_quat(m.q));
  put(kObsVel, m.v);
  put(kObsOmega, m.w);
  for (int i = 0; i < 4; ++i) o[kObsLastAction + i] = u_last[i];
  put(kObsIntPos, errors.int_pos);
  put(kObsDiffPos, errors.diff_pos);
  put(kObsIntAtt, errors.int_att);
  put(kObsDiffAtt, errors.diff_att);
  put(kObsIntRate, errors.int_rate);
  put(kObsDiffRate, errors.diff_rate);
  for (int i = 0; i < 4; ++i) o[kObsMotor + i] = m.motor[i] / params.max_motor_force;
  return o;
}

Observation observe(const QuadState& s, const Vec3d& goal, const Action& u_last, const TrackingErrorSummary& errors,
                    const PhysicalParams& params, numkit::Rng& rng, QuadState* measured) {
  const QuadState m = measure(s, params, rng);
  if (measured) *measured = m;
  return assemble_observation(m, goal, u_last, errors, params);
}

bool is_finite(const QuadState& s) {
  auto ok = [](double x) { return std::isfinite(x); };
  for (int i = 0; i < 3; ++i)
    if (!ok(s.p[i]) || !ok(s.v[i]) || !ok(s.w[i])) return false;
  for (double f : s.motor)
    if (!ok(f)) return false;
  return ok(s.q.w) && ok(s.q.x) && ok(s.q.y) && ok(s.q.z);
}

double quat_norm(const QuadState& s) {
  return std::sqrt(s.q.w * s.q.w + s.q.x * s.q.x + s.q.y * s.q.y + s.q.z * s.q.z);
}

}  // namespace skillab::quadsim
