#include "skillab/pipeline/environment.hpp"

#include <cmath>
#include <numbers>

namespace skillab::pipeline {

namespace {

constexpr double kClimb = 2.5;
constexpr double kHold = 7.0;
constexpr double kAltitude = 1.0;

// Minimum-jerk blend from 0 to 1 over [0, T]: value, first and second derivative.
std::array<double, 3> min_jerk(double t, double T) {
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  if (t >= T) return {1.0, 0.0, 0.0};
  const double x = t / T;
  const double x2 = x * x, x3 = x2 * x;
  return {10 * x3 - 15 * x3 * x + 6 * x3 * x2, (30 * x2 - 60 * x3 + 30 * x3 * x) / T,
          (60 * x - 180 * x2 + 120 * x3) / (T * T)};
}

double norm3(const Vec3d& a, const Vec3d& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

}  // namespace

Reference task_reference(Task task, double t) {
  Reference r;
  switch (task) {
    case Task::kHover:
      r.pos = {0.0, 0.0, kAltitude};
      break;
    case Task::kFigure8:
      r.pos = {std::sin(t), 0.5 * std::sin(2 * t), kAltitude};
      r.vel = {std::cos(t), std::cos(2 * t), 0.0};
      r.acc = {-std::sin(t), -2 * std::sin(2 * t), 0.0};
      break;
    case Task::kTakeoffHoverLand: {
      const auto up = min_jerk(t, kClimb);
      const auto down = min_jerk(t - kClimb - kHold, kClimb);
      r.pos = {0.0, 0.0, kAltitude * (up[0] - down[0])};
      r.vel = {0.0, 0.0, kAltitude * (up[1] - down[1])};
      r.acc = {0.0, 0.0, kAltitude * (up[2] - down[2])};
      break;
    }
  }
  return r;
}

std::size_t task_steps(Task task, const ExperimentConfig& cfg) {
  const double dt = cfg.env.control_period;
  switch (task) {
    case Task::kHover: return cfg.episode_steps;
    case Task::kFigure8: return static_cast<std::size_t>(std::lround(2 * std::numbers::pi / dt));
    case Task::kTakeoffHoverLand: return static_cast<std::size_t>(std::lround((2 * kClimb + kHold) / dt));
  }
  return 0;
}

QuadState task_initial_state(Task task, const PhysicalParams& params, numkit::Rng& rng) {
  if (task == Task::kTakeoffHoverLand) {
    QuadState s{};
    s.q = {1.0, 0.0, 0.0, 0.0};
    return s;
  }
  return quadsim::reset(params, rng);
}

Environment::Environment(PhysicalParams params, Task task, std::size_t steps, numkit::Rng rng)
    : params_(std::move(params)), task_(task), steps_(steps), rng_(std::move(rng)) {
  params_.validate();
  reset();
}

void Environment::reset() {
  state_ = task_initial_state(task_, params_, rng_);
  delay_.assign(static_cast<std::size_t>(params_.delay_steps), Action{});
  k_ = 0;
  ref_ = task_reference(task_, 0.0);
}

quadsim::Observation Environment::observe(const Action& u_last, const quadsim::TrackingErrorSummary& errors,
                                          QuadState* measured) {
  return quadsim::observe(state_, ref_.pos, u_last, errors, params_, rng_, measured);
}

Environment::Outcome Environment::step(const Action& commanded) {
  Action applied = commanded;
  if (!delay_.empty()) {
    delay_.push_back(commanded);
    applied = delay_.front();
    delay_.pop_front();
  }
  auto res = quadsim::step(state_, applied, params_);
  Outcome out;
  ++k_;
  out.last = k_ >= steps_;
  if (res.fault) {
    out.fault = true;
    return out;
  }
  // Ground plane: no penetration, no downward velocity at contact.
  if (res.state.p[2] < 0.0) {
    res.state.p[2] = 0.0;
    res.state.v[2] = std::max(res.state.v[2], 0.0);
  }
  state_ = res.state;
  ref_ = task_reference(task_, time());
  out.reward = quadsim::reward(state_, commanded, ref_.pos);
  out.tracking_error = norm3(state_.p, ref_.pos);
  return out;
}

EpisodeResult run_episode(Environment& env, const mellinger::StochasticActor& actor, numkit::Rng& noise_rng,
                          const EpisodeOptions& opt) {
  env.reset();
  EpisodeResult res;
  mellinger::ControllerMemory mem;
  Action u_last{};
  QuadState measured;
  auto obs = env.observe(u_last, mem.summary(), &measured);
  auto ctx = mellinger::make_context(measured, env.reference(), mem);
  double err_sum = 0.0;
  std::size_t flown = 0;
  if (opt.keep_transitions) res.transitions.reserve(env.steps());
  while (true) {
    Action u{};
    if (opt.mode == ActionMode::kSample) {
      u = actor.sample_action(obs, measured, env.reference(), mem, noise_rng).action;
    } else {
      u = actor.act(measured, env.reference(), mem);
    }
    const auto step = env.step(u);
    if (step.fault) {
      res.fault = true;
      break;
    }
    ++flown;
    res.ret += step.reward;
    err_sum += step.tracking_error;
    u_last = u;
    auto next_obs = env.observe(u_last, mem.summary(), &measured);
    auto next_ctx = mellinger::make_context(measured, env.reference(), mem);
    if (opt.keep_transitions) {
      spectral::Transition t;
      t.obs.assign(obs.begin(), obs.end());
      t.action.assign(u.begin(), u.end());
      t.reward = step.reward;
      t.next_obs.assign(next_obs.begin(), next_obs.end());
      t.done = false;
      t.ctx.assign(ctx.begin(), ctx.end());
      t.next_ctx.assign(next_ctx.begin(), next_ctx.end());
      res.transitions.push_back(std::move(t));
    }
    if (opt.keep_trace) res.trace.push_back({env.time(), env.state(), env.reference().pos, u, step.reward});
    obs = next_obs;
    ctx = next_ctx;
    if (step.last) break;
  }
  res.tracking_error = flown > 0 ? err_sum / static_cast<double>(flown) : 0.0;
  return res;
}

}  // namespace skillab::pipeline
