#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>

#include "skillab/numkit/random.hpp"
#include "skillab/quadsim/geometry.hpp"

namespace skillab::quadsim {

using geo::Quatd;
using geo::Vec3d;

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rigid-body state. Motor entries hold the thrust each propeller currently produces (N).
template <class T>
struct QuadStateT {
  geo::Vec3<T> p;  // world position, m
  geo::Quat<T> q;  // body-to-world attitude, (w, x, y, z)
  geo::Vec3<T> v;  // world velocity, m/s
  geo::Vec3<T> w;  // body angular velocity, rad/s
  std::array<T, 4> motor;
};

using QuadState = QuadStateT<double>;

/// Normalized [F_z, F_r, F_p, F_y]. One unit of F_z is one propeller's share of nominal hover thrust.
template <class T>
using ActionT = std::array<T, 4>;
using Action = ActionT<double>;

struct ActionBounds {
  Action lo{0.0, -1.0, -1.0, -0.5};
  Action hi{2.0833333333333335, 1.0, 1.0, 0.5};

  Action center() const;
  Action half_width() const;
  Action clip(const Action& a) const;
};

/// Standard deviations applied to the measured state before it is observed.
struct ObservationNoise {
  double position = 0.0;          // m
  double attitude = 0.0;          // rad, small-angle perturbation
  double velocity = 0.0;          // m/s
  double angular_velocity = 0.0;  // rad/s
};

struct PhysicalParams {
  double mass = 0.027;                                        // kg
  double arm_length = 0.0397;                                 // m, center to rotor
  std::array<double, 3> inertia{1.4e-5, 1.4e-5, 2.17e-5};     // kg m^2, body diagonal
  std::array<double, 4> efficiency{1.0, 1.0, 1.0, 1.0};       // produced / commanded thrust
  double gravity = 9.81;                                      // m/s^2
  double motor_time_constant = 0.15;                          // s
  double torque_coefficient = 0.0251;                         // m, yaw torque per newton of thrust
  double force_scale = 0.0662175;                             // N per normalized force unit
  double max_motor_force = 0.137953125;                       // N per propeller
  double control_period = 1.0 / 240.0;                        // s
  ObservationNoise noise{};
  int delay_steps = 0;

  /// Per-propeller ceiling in normalized units.
  double max_normalized_force() const { return max_motor_force / force_scale; }
  void validate() const;
};

struct GapSpec {
  double added_mass = 0.0;                                  // kg
  std::array<double, 4> efficiency_multiplier{1.0, 1.0, 1.0, 1.0};
  double observation_noise = 0.0;                           // std applied to every measured channel
  int delay_steps = 0;

  void validate() const;
};

// Observation layout (width 42). Frozen; the config records the same table.
inline constexpr std::size_t kObsRelPos = 0;       // p - p_goal
inline constexpr std::size_t kObsQuat = 3;         // w, x, y, z
inline constexpr std::size_t kObsRpy = 7;          // roll, pitch, yaw
inline constexpr std::size_t kObsVel = 10;         // world velocity
inline constexpr std::size_t kObsOmega = 13;       // body rates
inline constexpr std::size_t kObsLastAction = 16;  // previous normalized action
inline constexpr std::size_t kObsIntPos = 20;
inline constexpr std::size_t kObsDiffPos = 23;
inline constexpr std::size_t kObsIntAtt = 26;
inline constexpr std::size_t kObsDiffAtt = 29;
inline constexpr std::size_t kObsIntRate = 32;
inline constexpr std::size_t kObsDiffRate = 35;
inline constexpr std::size_t kObsMotor = 38;  // motor thrust / max_motor_force
inline constexpr std::size_t kObsWidth = 42;
inline constexpr std::size_t kActionWidth = 4;

using Observation = std::array<double, kObsWidth>;

/// Integral and one-step difference of the controller's tracking errors.
struct TrackingErrorSummary {
  Vec3d int_pos{}, diff_pos{};
  Vec3d int_att{}, diff_att{};
  Vec3d int_rate{}, diff_rate{};
};

/// Power distribution from [F_z, F_r, F_p, F_y] to per-propeller normalized forces,
/// each clipped to [0, f_max].
template <class T>
std::array<T, 4> motor_mix(const ActionT<T>& a, double f_max) {
  using numkit::clamp;
  const T half_r = a[1] * 0.5;
  const T half_p = a[2] * 0.5;
  return {clamp(a[0] - half_r + half_p + a[3], 0.0, f_max), clamp(a[0] - half_r - half_p - a[3], 0.0, f_max),
          clamp(a[0] + half_r - half_p + a[3], 0.0, f_max), clamp(a[0] + half_r + half_p - a[3], 0.0, f_max)};
}

/// One control period: first-order motor lag toward the commanded thrust, X-frame
/// force/torque mapping, Newton-Euler with semi-implicit Euler, quaternion renormalized.
template <class T>
QuadStateT<T> integrate(const QuadStateT<T>& s, const ActionT<T>& a, const PhysicalParams& prm) {
  using numkit::clamp;
  using std::exp;
  const double dt = prm.control_period;
  const double alpha = 1.0 - std::exp(-dt / prm.motor_time_constant);
  const auto cmd = motor_mix(a, prm.max_normalized_force());

  QuadStateT<T> n = s;
  for (int i = 0; i < 4; ++i) {
    const T target = clamp(cmd[i] * (prm.efficiency[i] * prm.force_scale), 0.0, prm.max_motor_force);
    n.motor[i] = s.motor[i] + (target - s.motor[i]) * alpha;
  }
  const auto& f = n.motor;
  const T thrust = f[0] + f[1] + f[2] + f[3];
  const double lever = prm.arm_length / std::sqrt(2.0);
  const geo::Vec3<T> torque{(f[2] + f[3] - f[0] - f[1]) * lever, (f[0] + f[3] - f[1] - f[2]) * lever,
                            (f[0] + f[2] - f[1] - f[3]) * prm.torque_coefficient};

  const auto R = geo::rotation(s.q);
  const geo::Vec3<T> body_z = geo::column(R, 2);
  geo::Vec3<T> acc = geo::scale(body_z, thrust * (1.0 / prm.mass));
  acc[2] = acc[2] - prm.gravity;
  n.v = geo::add(s.v, geo::scale(acc, dt));
  n.p = geo::add(s.p, geo::scale(n.v, dt));

  const auto& J = prm.inertia;
  const geo::Vec3<T> Jw{s.w[0] * J[0], s.w[1] * J[1], s.w[2] * J[2]};
  const geo::Vec3<T> gyro = geo::cross(s.w, Jw);
  const geo::Vec3<T> wdot{(torque[0] - gyro[0]) * (1.0 / J[0]), (torque[1] - gyro[1]) * (1.0 / J[1]),
                          (torque[2] - gyro[2]) * (1.0 / J[2])};
  n.w = geo::add(s.w, geo::scale(wdot, dt));

  const geo::Quat<T> omega{n.w[0] * 0.0, n.w[0], n.w[1], n.w[2]};
  const geo::Quat<T> qdot = geo::multiply(s.q, omega);
  const double h = 0.5 * dt;
  n.q = geo::normalized(geo::Quat<T>{s.q.w + qdot.w * h, s.q.x + qdot.x * h, s.q.y + qdot.y * h, s.q.z + qdot.z * h});
  return n;
}

struct StepResult {
  QuadState state;
  bool fault = false;  // non-finite state after integration
};

StepResult step(const QuadState& s, const Action& a, const PhysicalParams& params);

/// r = 2 - 2.5|p - goal| - 1.5|[roll, pitch]| - 0.05|v| - 0.05|w| - 0.1|u|
double reward(const QuadState& s, const Action& a, const Vec3d& goal);

/// Initial state: position ~ N(mean, 0.02 I), roll/pitch/yaw ~ N(0, 5 deg), at rest, motors off.
QuadState reset(const PhysicalParams& params, numkit::Rng& rng, const Vec3d& mean = {0.0, 0.0, 1.0});

/// Level hover state with motors already producing the hover thrust.
QuadState hover_state(const PhysicalParams& params, const Vec3d& position);

PhysicalParams apply_gap(const PhysicalParams& params, const GapSpec& gap);

/// The state as a sensor would report it (noise from params.noise).
QuadState measure(const QuadState& s, const PhysicalParams& params, numkit::Rng& rng);

/// Assembles the observation from an already measured state.
Observation assemble_observation(const QuadState& measured, const Vec3d& goal, const Action& u_last,
                                 const TrackingErrorSummary& errors, const PhysicalParams& params);

/// measure() followed by assemble_observation(); the measured state is returned through `measured`.
Observation observe(const QuadState& s, const Vec3d& goal, const Action& u_last, const TrackingErrorSummary& errors,
                    const PhysicalParams& params, numkit::Rng& rng, QuadState* measured = nullptr);

bool is_finite(const QuadState& s);
double quat_norm(const QuadState& s);

}  // namespace skillab::quadsim
