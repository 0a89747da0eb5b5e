#pragma once

// Independent scalar transcription of the Mellinger law plus random case generators.

#include <cmath>

#include "skillab/mellinger/mellinger.hpp"

namespace skillab::testing {

using mellinger::ControllerConfig;
using mellinger::ControllerMemory;
using mellinger::MellingerGains;
using mellinger::Reference;
using quadsim::QuadState;
using geo::Vec3d;

// Independent scalar transcription of the control law: explicit loops, no shared helpers.
struct OracleOut {
  double raw[4];
  double f[3];
};

inline OracleOut oracle_control(const QuadState& s, const Reference& ref, const MellingerGains& gn,
                         const ControllerMemory& mem, const ControllerConfig& cfg) {
  const double* G = gn.values.data();
  auto k = [&](int fam, int term, int axis) { return G[fam * 6 + term * 2 + (axis < 2 ? 0 : 1)]; };
  auto clampv = [&](double x) { return std::fmin(std::fmax(x, -cfg.integral_limit), cfg.integral_limit); };
  double f[3];
  for (int i = 0; i < 3; ++i) {
    const double ep = s.p[i] - ref.pos[i];
    const double ev = s.v[i] - ref.vel[i];
    const double ip = clampv(mem.int_pos[i] + ep * cfg.dt);
    const double iv = clampv(mem.int_vel[i] + ev * cfg.dt);
    const double dp = ep - mem.prev_pos[i];
    const double dv = ev - mem.prev_vel[i];
    f[i] = -(k(0, 0, i) * ep + k(0, 1, i) * ip + k(0, 2, i) * dp) - (k(1, 0, i) * ev + k(1, 1, i) * iv + k(1, 2, i) * dv) +
           cfg.mass * ref.acc[i] + (i == 2 ? cfg.mass * cfg.gravity : 0.0);
  }
  const double w = s.q.w, x = s.q.x, y = s.q.y, z = s.q.z;
  double R[3][3] = {{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                    {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                    {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
  const double u1 = f[0] * R[0][2] + f[1] * R[1][2] + f[2] * R[2][2];
  const double fn = std::sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
  const double zb[3] = {f[0] / fn, f[1] / fn, f[2] / fn};
  const double xc[3] = {std::cos(ref.yaw), std::sin(ref.yaw), 0.0};
  double yb[3] = {zb[1] * xc[2] - zb[2] * xc[1], zb[2] * xc[0] - zb[0] * xc[2], zb[0] * xc[1] - zb[1] * xc[0]};
  const double yn = std::sqrt(yb[0] * yb[0] + yb[1] * yb[1] + yb[2] * yb[2]);
  for (double& v : yb) v /= yn;
  double xb[3] = {yb[1] * zb[2] - yb[2] * zb[1], yb[2] * zb[0] - yb[0] * zb[2], yb[0] * zb[1] - yb[1] * zb[0]};
  // Frobenius distance of both sign choices to R.
  double da = 0.0, db = 0.0;
  for (int r = 0; r < 3; ++r) {
    da += std::pow(xb[r] - R[r][0], 2) + std::pow(yb[r] - R[r][1], 2);
    db += std::pow(-xb[r] - R[r][0], 2) + std::pow(-yb[r] - R[r][1], 2);
  }
  if (db < da)
    for (int r = 0; r < 3; ++r) {
      xb[r] = -xb[r];
      yb[r] = -yb[r];
    }
  const double Rd[3][3] = {{xb[0], yb[0], zb[0]}, {xb[1], yb[1], zb[1]}, {xb[2], yb[2], zb[2]}};
  double M[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double a = 0.0, b = 0.0;
      for (int l = 0; l < 3; ++l) {
        a += Rd[l][i] * R[l][j];
        b += R[l][i] * Rd[l][j];
      }
      M[i][j] = 0.5 * (a - b);
    }
  const double eR[3] = {M[2][1], M[0][2], M[1][0]};
  OracleOut out{};
  out.raw[0] = u1 / (4.0 * cfg.force_scale);
  for (int i = 0; i < 3; ++i) {
    const double ew = s.w[i] - ref.rates[i];
    const double ia = clampv(mem.int_att[i] + eR[i] * cfg.dt);
    const double iw = clampv(mem.int_rate[i] + ew * cfg.dt);
    const double da2 = eR[i] - mem.prev_att[i];
    const double dw = ew - mem.prev_rate[i];
    out.raw[i + 1] = -(k(2, 0, i) * eR[i] + k(2, 1, i) * ia + k(2, 2, i) * da2) -
                     (k(3, 0, i) * ew + k(3, 1, i) * iw + k(3, 2, i) * dw);
  }
  for (int i = 0; i < 3; ++i) out.f[i] = f[i];
  return out;
}

inline MellingerGains random_gains(numkit::Rng& rng) {
  MellingerGains g;
  for (double& v : g.values) v = rng.uniform(0.0, 2.0);
  return g;
}

inline QuadState random_state(numkit::Rng& rng) {
  QuadState s{};
  for (int i = 0; i < 3; ++i) {
    s.p[i] = rng.uniform(-1, 1);
    s.v[i] = rng.uniform(-1, 1);
    s.w[i] = rng.uniform(-2, 2);
  }
  s.q = geo::quat_from_rpy(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-3, 3));
  return s;
}

inline Reference random_reference(numkit::Rng& rng) {
  Reference r;
  for (int i = 0; i < 3; ++i) {
    r.pos[i] = rng.uniform(-1, 1);
    r.vel[i] = rng.uniform(-1, 1);
    r.acc[i] = rng.uniform(-2, 2);
    r.rates[i] = rng.uniform(-0.5, 0.5);
  }
  r.yaw = rng.uniform(-3, 3);
  return r;
}

inline ControllerMemory random_memory(numkit::Rng& rng) {
  ControllerMemory m;
  for (Vec3d* v : {&m.int_pos, &m.int_vel, &m.int_att, &m.int_rate, &m.prev_pos, &m.prev_vel, &m.prev_att,
                   &m.prev_rate})
    for (double& x : *v) x = rng.uniform(-1, 1);
  return m;
}

}  // namespace skillab::testing
