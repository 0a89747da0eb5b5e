#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "doctest.h"
#include "gradcheck.hpp"
#include "mellinger_oracle.hpp"
#include "rollout.hpp"
#include "skillab/mellinger/mellinger.hpp"

using namespace skillab;
using namespace skillab::mellinger;
using skillab::testing::check_param_gradients;
using skillab::testing::oracle_control;
using skillab::testing::OracleOut;
using skillab::testing::random_gains;
using skillab::testing::random_memory;
using skillab::testing::random_reference;
using skillab::testing::random_state;

namespace {

double frob_orthogonality(const Mat3d& r) {
  const Mat3d rtr = geo::mul(geo::transpose(r), r);
  double s = 0.0;
  for (int i = 0; i < 9; ++i) s += (rtr[i] - geo::kIdentity[i]) * (rtr[i] - geo::kIdentity[i]);
  return std::sqrt(s);
}

Mat3d random_rotation(numkit::Rng& rng) {
  geo::Quatd q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  return geo::rotation(geo::normalized(q));
}

}  // namespace

TEST_CASE("gain layout and names") {
  std::set<std::string_view> names(kGainNames.begin(), kGainNames.end());
  CHECK(names.size() == kNumGains);
  CHECK(gain_index(Family::kRate, Term::kD, Axis::kZ) == 23);
  CHECK(kGainNames[gain_index(Family::kPosition, Term::kP, Axis::kXY)] == "kp_xy");
  CHECK(kGainNames[gain_index(Family::kAttitude, Term::kP, Axis::kZ)] == "kR_z");
  for (double v : MellingerGains::defaults().values) CHECK(v >= 0.0);
}

TEST_CASE("gains JSON round trip") {
  numkit::Rng rng(4);
  const MellingerGains g = random_gains(rng);
  CHECK(MellingerGains::from_json(g.to_json()).values == g.values);
  CHECK_THROWS(MellingerGains::from_json(R"({"kp_xy": 1.0})"));
  std::string bad = g.to_json();
  bad.insert(bad.find('{') + 1, "\"bogus\": 1.0,");
  CHECK_THROWS(MellingerGains::from_json(bad));
}

TEST_CASE("compute_control: hover case") {
  const ControllerConfig cfg;
  ControllerMemory mem;
  QuadState s = quadsim::hover_state(quadsim::PhysicalParams{}, {0, 0, 1});
  Reference ref;
  ref.pos = {0, 0, 1};
  const auto d = compute_control_detail(s, ref, MellingerGains::defaults(), mem, cfg);
  CHECK(d.f_des[0] == 0.0);
  CHECK(d.f_des[1] == 0.0);
  CHECK(d.f_des[2] == cfg.mass * cfg.gravity);
  CHECK(d.thrust == cfg.mass * cfg.gravity);
  CHECK(d.raw[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("compute_control: zero attitude error gives zero moments") {
  const ControllerConfig cfg;
  numkit::Rng rng(8);
  ControllerMemory mem;
  QuadState s = quadsim::hover_state(quadsim::PhysicalParams{}, {0, 0, 1});
  Reference ref;
  ref.pos = {0, 0, 1};
  ref.yaw = 0.0;
  const auto d = compute_control_detail(s, ref, random_gains(rng), mem, cfg);
  CHECK(d.raw[1] == 0.0);
  CHECK(d.raw[2] == 0.0);
  CHECK(d.raw[3] == 0.0);
}

TEST_CASE("compute_control matches the hand-unrolled oracle") {
  ControllerConfig cfg;
  numkit::Rng rng(21);
  for (int k = 0; k < 200; ++k) {
    const MellingerGains g = random_gains(rng);
    const QuadState s = random_state(rng);
    const Reference ref = random_reference(rng);
    ControllerMemory mem = random_memory(rng);
    const OracleOut expect = oracle_control(s, ref, g, mem, cfg);
    const auto d = compute_control_detail(s, ref, g, mem, cfg);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(d.raw[i] - expect.raw[i]) < 1e-9);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(d.f_des[i] - expect.f[i]) < 1e-12);
    const Action squashed = squash_action(d.raw, cfg.bounds);
    CHECK(d.action == squashed);
  }
}

TEST_CASE("compute_control updates memory and clamps integrals") {
  ControllerConfig cfg;
  cfg.integral_limit = 0.01;
  ControllerMemory mem;
  QuadState s = quadsim::hover_state(quadsim::PhysicalParams{}, {3, 0, 1});
  Reference ref;
  ref.pos = {0, 0, 1};
  for (int k = 0; k < 100; ++k) compute_control(s, ref, MellingerGains::defaults(), mem, cfg);
  CHECK(mem.int_pos[0] == 0.01);
  CHECK(mem.prev_pos[0] == 3.0);
  CHECK(mem.diff_pos[0] == 0.0);
  mem.reset();
  CHECK(mem.int_pos[0] == 0.0);
}

TEST_CASE("compute_control: vanishing desired force is an error") {
  ControllerConfig cfg;
  ControllerMemory mem;
  QuadState s = quadsim::hover_state(quadsim::PhysicalParams{}, {0, 0, 1});
  Reference ref;
  ref.pos = {0, 0, 1};
  ref.acc = {0, 0, -cfg.gravity};
  CHECK_THROWS_AS(compute_control(s, ref, MellingerGains::defaults(), mem, cfg), SingularThrustError);
}

TEST_CASE("desired_rotation examples and properties") {
  const Mat3d up = desired_rotation({0, 0, 1}, 0.0, geo::kIdentity);
  CHECK(geo::frobenius_distance(up, geo::kIdentity) < 1e-15);
  const Mat3d yawed = desired_rotation({0, 0, 1}, std::numbers::pi / 2, geo::rot_z(std::numbers::pi / 2));
  CHECK(geo::frobenius_distance(yawed, geo::rot_z(std::numbers::pi / 2)) < 1e-15);

  numkit::Rng rng(31);
  for (int k = 0; k < 500; ++k) {
    const Vec3d f{rng.normal(), rng.normal(), rng.normal()};
    const Mat3d r = desired_rotation(f, rng.uniform(-4, 4), random_rotation(rng));
    CHECK(frob_orthogonality(r) < 1e-9);
    CHECK(std::abs(geo::determinant(r) - 1.0) < 1e-9);
    const Vec3d z = geo::scale(f, 1.0 / geo::norm(f));
    CHECK(geo::norm(geo::sub(geo::column(r, 2), z)) < 1e-12);
  }
}

TEST_CASE("desired_rotation picks the sign closer to the current attitude") {
  numkit::Rng rng(12);
  for (int k = 0; k < 200; ++k) {
    const Vec3d f{rng.normal(), rng.normal(), rng.normal()};
    const double yaw = rng.uniform(-3, 3);
    const Mat3d current = random_rotation(rng);
    const Mat3d r = desired_rotation(f, yaw, current);
    Mat3d flipped = r;
    for (int row = 0; row < 3; ++row) {
      flipped[3 * row] = -r[3 * row];
      flipped[3 * row + 1] = -r[3 * row + 1];
    }
    CHECK(geo::frobenius_distance(r, current) <= geo::frobenius_distance(flipped, current));
  }
}

TEST_CASE("desired_rotation fallbacks at the singularity") {
  const Mat3d prev = geo::rot_z(0.3);
  // Heading and body x both parallel to the force: nothing determines the frame.
  CHECK(desired_rotation({1, 0, 0}, 0.0, geo::kIdentity, prev) == prev);
  // Heading parallel, body x usable.
  const Mat3d r = desired_rotation({1, 0, 0}, 0.0, geo::rot_z(std::numbers::pi / 2), prev);
  CHECK(frob_orthogonality(r) < 1e-12);
  CHECK(geo::norm(geo::sub(geo::column(r, 2), Vec3d{1, 0, 0})) < 1e-15);
}

TEST_CASE("desired_rotation is continuous near the singularity") {
  // Force sweeps across the heading direction; the current attitude follows the output.
  for (double offset : {1e-3, 1e-5, 0.0}) {
    Mat3d current = geo::rot_y(std::numbers::pi / 2 - 0.2);
    Mat3d last = desired_rotation({1, -1e-3, offset}, 0.0, current, current);
    current = last;
    double worst = 0.0;
    constexpr int n = 20000;
    for (int k = 1; k <= n; ++k) {
      const double t = -1e-3 + 2e-3 * k / n;
      const Mat3d r = desired_rotation({1, t, offset}, 0.0, current, last);
      worst = std::max(worst, geo::frobenius_distance(r, last));
      last = current = r;
    }
    CHECK(worst < 0.1);
  }
}

TEST_CASE("rotation_error examples") {
  const Mat3d r = geo::rot_z(0.7);
  CHECK(geo::norm(rotation_error(r, r)) < 1e-16);
  for (double th : {0.1, -0.5, 1.3}) {
    const Vec3d e = rotation_error(geo::kIdentity, geo::rot_x(th));
    CHECK(e[0] == doctest::Approx(std::sin(th)).epsilon(1e-14));
    CHECK(std::abs(e[1]) < 1e-16);
    CHECK(std::abs(e[2]) < 1e-16);
  }
}

TEST_CASE("rotation_error matches the quaternion oracle") {
  // With q_e = q_des^-1 q = (c, s n), the vee of the skew part is sin(theta) n = 2 c s n.
  numkit::Rng rng(41);
  for (int k = 0; k < 500; ++k) {
    const geo::Quatd qd = geo::normalized(geo::Quatd{rng.normal(), rng.normal(), rng.normal(), rng.normal()});
    const geo::Quatd q = geo::normalized(geo::Quatd{rng.normal(), rng.normal(), rng.normal(), rng.normal()});
    const geo::Quatd qe = geo::multiply(geo::Quatd{qd.w, -qd.x, -qd.y, -qd.z}, q);
    const Vec3d expect{2 * qe.w * qe.x, 2 * qe.w * qe.y, 2 * qe.w * qe.z};
    const Vec3d e = rotation_error(geo::rotation(qd), geo::rotation(q));
    CHECK(geo::norm(geo::sub(e, expect)) < 1e-9);
  }
}

TEST_CASE("closed-loop hover with default gains") {
  quadsim::PhysicalParams prm;
  const ControllerConfig cfg = ControllerConfig::from_params(prm);
  double after_transient = 0.0;
  int samples = 0;
  for (int seed = 0; seed < 10; ++seed) {
    numkit::Rng rng(seed);
    QuadState s = quadsim::reset(prm, rng);
    ControllerMemory mem;
    Reference ref;
    ref.pos = {0, 0, 1};
    std::vector<double> window_max(8, 0.0);  // one-second windows
    for (int k = 0; k < 1920; ++k) {
      s = quadsim::step(s, compute_control(s, ref, MellingerGains::defaults(), mem, cfg), prm).state;
      const double e = geo::norm(geo::sub(s.p, ref.pos));
      window_max[k / 240] = std::max(window_max[k / 240], e);
      if (k >= 240 && k < 480) {
        after_transient += e;
        ++samples;
      }
    }
    // Envelope of the error shrinks window to window once the transient has passed.
    for (std::size_t w = 2; w < window_max.size(); ++w) CHECK(window_max[w] <= window_max[w - 1] + 1e-3);
  }
  CHECK(after_transient / samples < 0.05);
}

TEST_CASE("squashed Gaussian: zero std and closed-form log-prob") {
  const quadsim::ActionBounds b;
  numkit::Rng rng(1);
  const Action mean{1.1, 0.3, -0.2, 0.05};
  const Draw d = draw_squashed(mean, {0, 0, 0, 0}, b, rng);
  CHECK(d.action == squash_action(mean, b));

  const Action sd{0.1, 0.2, 0.05, 0.3};
  const double lp = squashed_log_prob(mean, mean, sd, b);
  const Action c = b.center(), h = b.half_width();
  double expect = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double t = std::tanh((mean[i] - c[i]) / h[i]);
    expect += -std::log(sd[i]) - 0.5 * std::log(2 * std::numbers::pi) - std::log(1 - t * t);
  }
  CHECK(lp == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sample_action: Monte Carlo mean matches the controller") {
  numkit::Rng init(5);
  StochasticActor actor(MellingerGains::defaults(), ControllerConfig{}, ActorConfig{}, init);
  QuadState s = quadsim::hover_state(quadsim::PhysicalParams{}, {0.1, 0, 1});
  Reference ref;
  ref.pos = {0, 0, 1};
  const Observation obs = quadsim::assemble_observation(s, ref.pos, {}, {}, quadsim::PhysicalParams{});
  ControllerMemory mem0;
  const Action mean = compute_control_detail(s, ref, actor.gains(), mem0, actor.controller()).raw;
  const Action ls = actor.log_std(obs);
  numkit::Rng rng(6);
  constexpr int n = 100000;
  Action sum{};
  for (int k = 0; k < n; ++k) {
    ControllerMemory mem;
    const Draw d = actor.sample_action(obs, s, ref, mem, rng);
    for (int i = 0; i < 4; ++i) sum[i] += d.pre_squash[i];
  }
  for (int i = 0; i < 4; ++i) {
    const double se = std::exp(ls[i]) / std::sqrt(double(n));
    CHECK(std::abs(sum[i] / n - mean[i]) < 3 * se);
  }
}

TEST_CASE("actor: log-std stays in bounds and starts at the configured value") {
  numkit::Rng rng(2);
  ActorConfig cfg;
  StochasticActor actor(MellingerGains::defaults(), ControllerConfig{}, cfg, rng);
  Observation obs{};
  const Action ls = actor.log_std(obs);
  for (double v : ls) CHECK(v == doctest::Approx(cfg.init_log_std).epsilon(1e-12));
  for (auto& x : obs) x = 1e6;
  for (double v : actor.log_std(obs)) {
    CHECK(v >= cfg.log_std_min);
    CHECK(v <= cfg.log_std_max);
  }
  const MellingerGains back = actor.gains();
  for (std::size_t i = 0; i < kNumGains; ++i)
    CHECK(back.values[i] == doctest::Approx(std::max(MellingerGains::defaults().values[i], kGainFloor)).epsilon(1e-12));
}

TEST_CASE("batched replay agrees with the single-step path") {
  numkit::Rng rng(14);
  StochasticActor actor(MellingerGains::defaults(), ControllerConfig{}, ActorConfig{}, rng);
  constexpr std::size_t n = 16;
  Tensor ctx({n, kCtxWidth}), obs({n, quadsim::kObsWidth}), eps({n, 4});
  std::vector<Action> means(n);
  std::vector<Observation> observations(n);
  for (std::size_t r = 0; r < n; ++r) {
    const QuadState s = random_state(rng);
    const Reference ref = random_reference(rng);
    ControllerMemory mem = random_memory(rng);
    const Context c = make_context(s, ref, mem);
    observations[r] = quadsim::assemble_observation(s, ref.pos, {}, mem.summary(), quadsim::PhysicalParams{});
    means[r] = compute_control_detail(s, ref, actor.gains(), mem, actor.controller()).raw;
    for (std::size_t j = 0; j < kCtxWidth; ++j) ctx(r, j) = c[j];
    for (std::size_t j = 0; j < quadsim::kObsWidth; ++j) obs(r, j) = observations[r][j];
    for (std::size_t j = 0; j < 4; ++j) eps(r, j) = rng.normal();
  }
  const auto b = actor.sample_batch(obs, ctx, eps, ParamMode::kConstant);
  for (std::size_t r = 0; r < n; ++r) {
    const Action ls = actor.log_std(observations[r]);
    Action z{}, sd{};
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(b.mean.value()(r, i) - means[r][i]) < 1e-12);
      sd[i] = std::exp(ls[i]);
      z[i] = means[r][i] + sd[i] * eps(r, i);
      CHECK(std::abs(b.action.value()(r, i) - squash_action(z, actor.controller().bounds)[i]) < 1e-12);
    }
    CHECK(b.log_prob.value()(r, 0) ==
          doctest::Approx(squashed_log_prob(z, means[r], sd, actor.controller().bounds)).epsilon(1e-10));
  }
}

TEST_CASE("actor batch gradients match finite differences") {
  numkit::Rng rng(15);
  ActorConfig cfg;
  cfg.hidden = {8};
  StochasticActor actor(MellingerGains::defaults(), ControllerConfig{}, cfg, rng);
  constexpr std::size_t n = 6;
  Tensor ctx({n, kCtxWidth}), obs({n, quadsim::kObsWidth}), eps({n, 4});
  for (std::size_t r = 0; r < n; ++r) {
    const Context c = make_context(random_state(rng), random_reference(rng), random_memory(rng));
    for (std::size_t j = 0; j < kCtxWidth; ++j) ctx(r, j) = c[j];
    for (std::size_t j = 0; j < quadsim::kObsWidth; ++j) obs(r, j) = rng.uniform(-1, 1);
    for (std::size_t j = 0; j < 4; ++j) eps(r, j) = rng.normal();
  }
  auto objective = [&] {
    const auto b = actor.sample_batch(obs, ctx, eps, ParamMode::kTrack);
    return numkit::mean(numkit::row_sums(numkit::square(b.action)) - b.log_prob * 0.1);
  };
  for (auto* p : actor.parameters()) p->zero_grad();
  numkit::backward(objective());
  const auto res = check_param_gradients(actor.parameters(), [&] { return objective().item(); });
  CHECK(res.worst_relative < 1e-4);
}

TEST_CASE("gain gradients through a 10-step rollout match finite differences") {
  quadsim::PhysicalParams prm;
  numkit::Rng rng(19);
  StochasticActor actor(MellingerGains::defaults(), ControllerConfig::from_params(prm), ActorConfig{}, rng);
  const QuadState start = quadsim::reset(prm, rng);
  Reference ref;
  ref.pos = {0, 0, 1};
  std::vector<Action> eps(10);
  for (auto& e : eps)
    for (double& x : e) x = rng.normal();
  auto cost = [&] {
    return skillab::testing::taped_rollout_cost(actor.gains_var(ParamMode::kTrack), start, ref, prm,
                                                actor.controller(), eps, 0.05);
  };
  actor.raw_gains().zero_grad();
  numkit::backward(cost());
  const auto res = check_param_gradients({&actor.raw_gains()}, [&] { return cost().item(); }, 1e-6, 1e-9);
  CHECK(res.checked == kNumGains);
  CHECK(res.worst_relative < 1e-3);
}

TEST_CASE("gaussian_kl closed form") {
  const Tensor ma = Tensor::from_rows({{0.1, -0.2}}), mb = Tensor::from_rows({{0.3, 0.0}});
  const Tensor la = Tensor::from_rows({{-1.0, 0.5}}), lb = Tensor::from_rows({{-0.5, 0.2}});
  const double kl = gaussian_kl(numkit::constant(ma), numkit::constant(la), numkit::constant(mb), numkit::constant(lb))
                        .item();
  double expect = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double sa = std::exp(la[i]), sb = std::exp(lb[i]);
    expect += std::log(sb / sa) + (sa * sa + (ma[i] - mb[i]) * (ma[i] - mb[i])) / (2 * sb * sb) - 0.5;
  }
  CHECK(kl == doctest::Approx(expect).epsilon(1e-14));
  CHECK(gaussian_kl(numkit::constant(ma), numkit::constant(la), numkit::constant(ma), numkit::constant(la)).item() ==
        doctest::Approx(0.0));
}
