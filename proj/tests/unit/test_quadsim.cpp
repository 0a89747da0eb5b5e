#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "doctest.h"
#include "skillab/quadsim/quadsim.hpp"
#include "skillab/quadsim/trajectory_log.hpp"

using namespace skillab;
using namespace skillab::quadsim;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

bool same_params(const PhysicalParams& a, const PhysicalParams& b) {
  return a.mass == b.mass && a.arm_length == b.arm_length && a.inertia == b.inertia && a.efficiency == b.efficiency &&
         a.gravity == b.gravity && a.motor_time_constant == b.motor_time_constant &&
         a.torque_coefficient == b.torque_coefficient && a.force_scale == b.force_scale &&
         a.max_motor_force == b.max_motor_force && a.control_period == b.control_period &&
         a.noise.position == b.noise.position && a.noise.attitude == b.noise.attitude &&
         a.noise.velocity == b.noise.velocity && a.noise.angular_velocity == b.noise.angular_velocity &&
         a.delay_steps == b.delay_steps;
}

}  // namespace

TEST_CASE("motor_mix power distribution") {
  const double fmax = PhysicalParams{}.max_normalized_force();
  const auto unit = motor_mix<double>({1.0, 0.0, 0.0, 0.0}, fmax);
  for (double f : unit) CHECK(f == 1.0);

  const auto roll = motor_mix<double>({1.0, 0.2, 0.0, 0.0}, fmax);
  CHECK(roll[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(roll[1] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(roll[2] == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(roll[3] == doctest::Approx(1.1).epsilon(1e-15));

  numkit::Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const Action a{rng.uniform(0.8, 1.2), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2)};
    const auto f = motor_mix(a, fmax);
    CHECK(f[0] + f[1] + f[2] + f[3] == doctest::Approx(4.0 * a[0]).epsilon(1e-14));
  }

  const auto clipped = motor_mix<double>({2.5, 0.0, 0.0, 3.0}, fmax);
  CHECK(clipped[0] == fmax);
  CHECK(clipped[1] == 0.0);
}

TEST_CASE("step: free fall with motors off") {
  PhysicalParams prm;
  QuadState s{};
  s.p = {0.0, 0.0, 5.0};
  s.q = {1.0, 0.0, 0.0, 0.0};
  for (int k = 1; k <= 10; ++k) {
    const double vz = s.v[2];
    s = step(s, {0.0, 0.0, 0.0, 0.0}, prm).state;
    CHECK(s.v[2] - vz == doctest::Approx(-prm.gravity * prm.control_period).epsilon(1e-12));
  }
}

TEST_CASE("step: hover equilibrium") {
  PhysicalParams prm;
  QuadState s = hover_state(prm, {0.2, -0.1, 1.0});
  const QuadState start = s;
  for (int k = 0; k < 480; ++k) s = step(s, {1.0, 0.0, 0.0, 0.0}, prm).state;
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(s.p[i] - start.p[i]) < 1e-9);
    CHECK(std::abs(s.v[i]) < 1e-9);
    CHECK(std::abs(s.w[i]) < 1e-12);
  }
}

TEST_CASE("step: coarse and fine integration agree") {
  PhysicalParams coarse;
  PhysicalParams fine = coarse;
  fine.control_period = coarse.control_period / 10.0;
  QuadState a = hover_state(coarse, {0.0, 0.0, 1.0});
  a.v = {0.3, -0.2, 0.1};
  QuadState b = a;
  const Action u{1.05, 0.005, -0.004, 0.002};
  for (int k = 0; k < 100; ++k) a = step(a, u, coarse).state;
  for (int k = 0; k < 1000; ++k) b = step(b, u, fine).state;
  CHECK(geo::norm(geo::sub(a.p, b.p)) < 1e-3);
}

TEST_CASE("step: quaternion norm and motor bounds hold along a tumbling rollout") {
  PhysicalParams prm;
  numkit::Rng rng(11);
  QuadState s = reset(prm, rng);
  for (int k = 0; k < 480; ++k) {
    const Action u{rng.uniform(0.0, 2.0), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5)};
    const auto r = step(s, u, prm);
    REQUIRE_FALSE(r.fault);
    s = r.state;
    CHECK(std::abs(quat_norm(s) - 1.0) < 1e-9);
    for (double f : s.motor) {
      CHECK(f >= 0.0);
      CHECK(f <= prm.max_motor_force);
    }
  }
}

TEST_CASE("step: non-finite input raises the fault flag") {
  PhysicalParams prm;
  QuadState s = hover_state(prm, {0, 0, 1});
  s.v[0] = std::nan("");
  CHECK(step(s, {1, 0, 0, 0}, prm).fault);
}

TEST_CASE("reward examples") {
  QuadState s{};
  s.p = {0.0, 0.0, 1.0};
  s.q = {1.0, 0.0, 0.0, 0.0};
  const Vec3d goal{0.0, 0.0, 1.0};
  CHECK(reward(s, {0, 0, 0, 0}, goal) == doctest::Approx(2.0).epsilon(1e-15));

  QuadState off = s;
  off.p = {0.0, 0.4, 1.0};
  CHECK(reward(off, {0, 0, 0, 0}, goal) == doctest::Approx(1.0).epsilon(1e-14));

  QuadState tilted = s;
  tilted.q = geo::quat_from_rpy(0.2, 0.2, 0.0);
  CHECK(reward(tilted, {0, 0, 0, 0}, goal) == doctest::Approx(2.0 - 1.5 * std::sqrt(0.08)).epsilon(1e-12));
  CHECK(reward(tilted, {0, 0, 0, 0}, goal) == doctest::Approx(1.5757).epsilon(1e-4));
}

TEST_CASE("reset distribution") {
  PhysicalParams prm;
  numkit::Rng a(5), b(5);
  const QuadState s1 = reset(prm, a);
  const QuadState s2 = reset(prm, b);
  CHECK(s1.p == s2.p);
  CHECK(s1.q.w == s2.q.w);
  CHECK(s1.q.x == s2.q.x);

  numkit::Rng rng(17);
  constexpr int n = 100000;
  Vec3d mean{};
  double sq_roll = 0.0, sq_pitch = 0.0;
  for (int k = 0; k < n; ++k) {
    const QuadState s = reset(prm, rng);
    for (int i = 0; i < 3; ++i) mean[i] += s.p[i] / n;
    const Vec3d rpy = geo::rpy_from_quat(s.q);
    sq_roll += rpy[0] * rpy[0] / n;
    sq_pitch += rpy[1] * rpy[1] / n;
    CHECK(s.v == Vec3d{});
  }
  const double se = std::sqrt(0.02 / n);
  CHECK(std::abs(mean[0]) < 3 * se);
  CHECK(std::abs(mean[1]) < 3 * se);
  CHECK(std::abs(mean[2] - 1.0) < 3 * se);
  CHECK(std::sqrt(sq_roll) == doctest::Approx(5.0 * kDeg).epsilon(0.05));
  CHECK(std::sqrt(sq_pitch) == doctest::Approx(5.0 * kDeg).epsilon(0.05));
}

TEST_CASE("apply_gap") {
  PhysicalParams prm;
  CHECK(same_params(apply_gap(prm, GapSpec{}), prm));

  GapSpec decks;
  decks.added_mass = 0.006;
  CHECK(apply_gap(prm, decks).mass == doctest::Approx(0.033).epsilon(1e-14));

  GapSpec motor;
  motor.efficiency_multiplier[2] = 0.85;
  const PhysicalParams m = apply_gap(prm, motor);
  CHECK(m.efficiency[2] == doctest::Approx(0.85));
  CHECK(m.efficiency[0] == 1.0);
  CHECK(m.efficiency[1] == 1.0);
  CHECK(m.efficiency[3] == 1.0);

  GapSpec full{0.006, {1.0, 1.0, 0.85, 1.0}, 0.005, 2};
  CHECK(same_params(apply_gap(prm, full), apply_gap(prm, full)));
  CHECK(apply_gap(prm, full).delay_steps == 2);

  GapSpec crush;
  crush.added_mass = -0.03;
  CHECK_THROWS_AS(apply_gap(prm, crush), ParameterError);
}

TEST_CASE("observe: layout, determinism and noise level") {
  PhysicalParams prm;
  const Vec3d goal{0.0, 0.0, 1.0};
  QuadState s = hover_state(prm, goal);
  numkit::Rng rng(2);
  const Observation o = observe(s, goal, {0, 0, 0, 0}, TrackingErrorSummary{}, prm, rng);
  for (int i = 0; i < 3; ++i) CHECK(o[kObsRelPos + i] == 0.0);
  CHECK(o[kObsQuat] == 1.0);
  CHECK(o[kObsQuat + 1] == 0.0);
  for (int i = 0; i < 3; ++i) CHECK(o[kObsRpy + i] == 0.0);
  CHECK(o[kObsMotor] == doctest::Approx(prm.mass * prm.gravity / 4 / prm.max_motor_force));
  CHECK(o[kObsMotor] == doctest::Approx(0.48).epsilon(1e-6));

  numkit::Rng r1(9), r2(9);
  CHECK(observe(s, goal, {1, 0, 0, 0}, {}, prm, r1) == observe(s, goal, {1, 0, 0, 0}, {}, prm, r2));

  PhysicalParams noisy = prm;
  noisy.noise.position = 0.01;
  constexpr int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = observe(s, goal, {}, {}, noisy, rng)[kObsRelPos];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.01).epsilon(0.05));
}

TEST_CASE("trajectory log format") {
  const auto path = std::filesystem::temp_directory_path() / "skillab_traj_test.csv";
  {
    TrajectoryLog log(path);
    QuadState s = hover_state(PhysicalParams{}, {1.0 / 3.0, 0.0, 1.0});
    log.append(0.0, s, {1.0, 0.0, 0.0, 0.0}, 1.9);
  }
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,u1,u2,u3,u4,reward");
  CHECK(row.rfind("0,0.333333333,0,1,1,0,0,0,", 0) == 0);
  CHECK(row.substr(row.size() - 4) == ",1.9");
  std::filesystem::remove(path);
}
