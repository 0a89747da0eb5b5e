#pragma once

// Scalar-generic Mellinger law with PID-expanded feedback families. T is
// double for rollouts or numkit::Var (n x 1 columns) for batched training.

#include <array>
#include <cstddef>
#include <type_traits>

#include "skillab/numkit/autodiff.hpp"
#include "skillab/quadsim/geometry.hpp"
#include "skillab/quadsim/quadsim.hpp"

namespace skillab::mellinger {

inline constexpr std::size_t kNumGains = 24;

enum class Family : std::size_t { kPosition = 0, kVelocity = 1, kAttitude = 2, kRate = 3 };
enum class Term : std::size_t { kP = 0, kI = 1, kD = 2 };
enum class Axis : std::size_t { kXY = 0, kZ = 1 };

/// Layout: family-major, then term, then axis group.
constexpr std::size_t gain_index(Family f, Term t, Axis a) {
  return static_cast<std::size_t>(f) * 6 + static_cast<std::size_t>(t) * 2 + static_cast<std::size_t>(a);
}

struct ControllerConfig {
  double mass = 0.027;  // controller's belief, not the plant's
  double gravity = 9.81;
  double force_scale = 0.0662175;  // N per normalized force unit
  double dt = 1.0 / 240.0;
  double integral_limit = 2.0;  // anti-windup clamp on every accumulator component
  quadsim::ActionBounds bounds{};

  static ControllerConfig from_params(const quadsim::PhysicalParams& p);
};

template <class T>
struct ControlInputsT {
  geo::Vec3<T> p, v, w;
  geo::Quat<T> q;
  geo::Vec3<T> ref_pos, ref_vel, ref_acc;
  T ref_yaw;
  geo::Vec3<T> ref_rates;
  // memory before this step
  geo::Vec3<T> int_pos, int_vel, int_att, int_rate;
  geo::Vec3<T> prev_pos, prev_vel, prev_att, prev_rate;
  const geo::Mat3<T>* hold_r_des = nullptr;  // returned when the attitude is fully undetermined
};

template <class T>
struct ControlOutputT {
  geo::Vec3<T> f_des;   // N, world frame
  T thrust;             // u1 = F_des . z_B, N
  geo::Mat3<T> r_des;
  geo::Vec3<T> e_att;   // e_R
  geo::Vec3<T> e_rate;  // e_omega
  geo::Vec3<T> moments; // [u2, u3, u4], normalized rotational force
  quadsim::ActionT<T> raw;  // pre-squash action
  // memory after this step
  geo::Vec3<T> int_pos, int_vel, int_att, int_rate;
  geo::Vec3<T> err_pos, err_vel;  // become prev_* next step
  geo::Vec3<T> diff_pos, diff_vel, diff_att, diff_rate;
};

/**
 * Desired attitude from the desired force and the reference yaw. The candidate
 * (x_B, y_B) and its negation both honor z_B,des and the yaw; the one closer in
 * Frobenius norm to the current attitude wins. If z_B,des is parallel to the
 * heading direction, the current body x-axis stands in for it.
 */
template <class T>
geo::Mat3<T> desired_rotation_generic(const geo::Vec3<T>& f_des, const T& yaw, const geo::Mat3<T>& r_current,
                                      const geo::Mat3<T>* hold = nullptr) {
  using numkit::less;
  using numkit::select;
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T fn = geo::norm(f_des);
  const geo::Vec3<T> z = geo::scale(f_des, 1.0 / fn);
  const geo::Vec3<T> x_c{cos(yaw), sin(yaw), yaw * 0.0};
  geo::Vec3<T> y_raw = geo::cross(z, x_c);
  T ny = geo::norm(y_raw);
  // Fallback heading when z is (nearly) parallel to x_c.
  const geo::Vec3<T> y_alt = geo::cross(z, geo::column(r_current, 0));
  const auto degenerate = less(ny, ny * 0.0 + 1e-8);
  if constexpr (std::is_same_v<T, double>) {
    if (hold && degenerate && geo::norm(y_alt) < 1e-8) return *hold;
  }
  for (int i = 0; i < 3; ++i) y_raw[i] = select(degenerate, y_alt[i], y_raw[i]);
  ny = sqrt(geo::dot(y_raw, y_raw) + 1e-300);
  geo::Vec3<T> y = geo::scale(y_raw, 1.0 / ny);
  geo::Vec3<T> x = geo::cross(y, z);
  // tr(A^T R) - tr(B^T R) = 2 (x . Rx + y . Ry); flip when negative.
  const T align = geo::dot(x, geo::column(r_current, 0)) + geo::dot(y, geo::column(r_current, 1));
  const auto flip = less(align, align * 0.0);
  for (int i = 0; i < 3; ++i) {
    x[i] = select(flip, -x[i], x[i]);
    y[i] = select(flip, -y[i], y[i]);
  }
  return geo::from_columns(x, y, z);
}

/// e_R = 1/2 (R_des^T R - R^T R_des)^vee
template <class T>
geo::Vec3<T> rotation_error_generic(const geo::Mat3<T>& r_des, const geo::Mat3<T>& r) {
  const auto a = geo::mul(geo::transpose(r_des), r);
  const auto b = geo::mul(geo::transpose(r), r_des);
  geo::Mat3<T> d = a;
  for (int i = 0; i < 9; ++i) d[i] = (a[i] - b[i]) * 0.5;
  return geo::vee(d);
}

/// tanh squash into [lo, hi], slope 1 at the center.
template <class T>
T squash(const T& raw, double center, double half_width) {
  using std::tanh;
  return tanh((raw - center) * (1.0 / half_width)) * half_width + center;
}

template <class T, class G>
ControlOutputT<T> control_law(const ControlInputsT<T>& in, const G& gains, const ControllerConfig& cfg) {
  using numkit::clamp;
  auto g = [&gains](Family f, Term t, Axis a) -> const auto& { return gains[gain_index(f, t, a)]; };
  auto axis = [](int i) { return i < 2 ? Axis::kXY : Axis::kZ; };
  const double lim = cfg.integral_limit;

  ControlOutputT<T> out;
  out.err_pos = geo::sub(in.p, in.ref_pos);
  out.err_vel = geo::sub(in.v, in.ref_vel);
  for (int i = 0; i < 3; ++i) {
    out.int_pos[i] = clamp(in.int_pos[i] + out.err_pos[i] * cfg.dt, -lim, lim);
    out.int_vel[i] = clamp(in.int_vel[i] + out.err_vel[i] * cfg.dt, -lim, lim);
    out.diff_pos[i] = out.err_pos[i] - in.prev_pos[i];
    out.diff_vel[i] = out.err_vel[i] - in.prev_vel[i];
  }
  for (int i = 0; i < 3; ++i) {
    const Axis a = axis(i);
    const T pos_fb = g(Family::kPosition, Term::kP, a) * out.err_pos[i] +
                     g(Family::kPosition, Term::kI, a) * out.int_pos[i] +
                     g(Family::kPosition, Term::kD, a) * out.diff_pos[i];
    const T vel_fb = g(Family::kVelocity, Term::kP, a) * out.err_vel[i] +
                     g(Family::kVelocity, Term::kI, a) * out.int_vel[i] +
                     g(Family::kVelocity, Term::kD, a) * out.diff_vel[i];
    out.f_des[i] = in.ref_acc[i] * cfg.mass - pos_fb - vel_fb;
  }
  out.f_des[2] = out.f_des[2] + cfg.mass * cfg.gravity;

  const auto r = geo::rotation(in.q);
  out.thrust = geo::dot(out.f_des, geo::column(r, 2));
  out.r_des = desired_rotation_generic(out.f_des, in.ref_yaw, r, in.hold_r_des);
  out.e_att = rotation_error_generic(out.r_des, r);
  out.e_rate = geo::sub(in.w, in.ref_rates);
  for (int i = 0; i < 3; ++i) {
    out.int_att[i] = clamp(in.int_att[i] + out.e_att[i] * cfg.dt, -lim, lim);
    out.int_rate[i] = clamp(in.int_rate[i] + out.e_rate[i] * cfg.dt, -lim, lim);
    out.diff_att[i] = out.e_att[i] - in.prev_att[i];
    out.diff_rate[i] = out.e_rate[i] - in.prev_rate[i];
  }
  for (int i = 0; i < 3; ++i) {
    const Axis a = axis(i);
    const T att_fb = g(Family::kAttitude, Term::kP, a) * out.e_att[i] +
                     g(Family::kAttitude, Term::kI, a) * out.int_att[i] +
                     g(Family::kAttitude, Term::kD, a) * out.diff_att[i];
    const T rate_fb = g(Family::kRate, Term::kP, a) * out.e_rate[i] +
                      g(Family::kRate, Term::kI, a) * out.int_rate[i] +
                      g(Family::kRate, Term::kD, a) * out.diff_rate[i];
    out.moments[i] = -att_fb - rate_fb;
  }
  out.raw = {out.thrust * (1.0 / (4.0 * cfg.force_scale)), out.moments[0], out.moments[1], out.moments[2]};
  return out;
}

}  // namespace skillab::mellinger
