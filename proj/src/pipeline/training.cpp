#include "skillab/pipeline/training.hpp"

#include <cmath>
#include <fstream>

#include "skillab/numkit/adam.hpp"
#include "skillab/quadsim/trajectory_log.hpp"

namespace skillab::pipeline {

namespace {

using numkit::Adam;
using numkit::Rng;
using numkit::Tensor;
using numkit::Var;

Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& x : t.data()) x = rng.normal();
  return t;
}

double checked(const Var& loss, const char* what, std::uint64_t step) {
  const double v = loss.item();
  if (!std::isfinite(v))
    throw NonFiniteError(std::string(what) + " became non-finite at gradient step " + std::to_string(step));
  return v;
}

void minimize(Adam& opt, const Var& loss) {
  opt.zero_grad();
  numkit::backward(loss);
  opt.step();
}

struct Running {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

void emit(const RunHooks& hooks, const EpisodeMetrics& m) {
  if (hooks.on_episode) hooks.on_episode(m);
}

void log_fault(const RunHooks& hooks, std::uint64_t episode) {
  if (hooks.log) *hooks.log << "episode " << episode << " discarded: simulation fault\n";
}

}  // namespace

std::string format_metrics(const EpisodeMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", m.episode, m.ret, m.tracking_error,
                m.td_loss, m.disc_loss, m.constraint_violation, m.kl);
  return buf;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : file_(std::fopen(path.c_str(), "w")) {
  if (file_ == nullptr) throw std::runtime_error("cannot write metrics file " + path.string());
  std::fprintf(file_, "%s\n", kMetricsHeader);
  std::fflush(file_);
}

MetricsWriter::~MetricsWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void MetricsWriter::write(const EpisodeMetrics& m) {
  std::fprintf(file_, "%s\n", format_metrics(m).c_str());
  std::fflush(file_);
}

Checkpoint speder_train(const ExperimentConfig& cfg, const RunHooks& hooks) {
  Agent agent(cfg);
  const Rng root(cfg.seed);
  Environment env(cfg.env, Task::kHover, task_steps(Task::kHover, cfg), root.derive("env"));
  Rng noise = root.derive("actor_noise");
  Rng sampling = root.derive("batch");
  spectral::ReplayBuffer buffer(cfg.buffer_capacity);

  Adam features(agent.sim.parameters(), {.lr = cfg.feature_lr});
  Adam critic(agent.q.parameters(), {.lr = cfg.critic_lr});
  Adam actor(agent.actor.parameters(), {.lr = cfg.actor_lr});

  std::size_t attempted = 0;
  while (attempted < cfg.sim_transitions) {
    auto ep = run_episode(env, agent.actor, noise, {});
    attempted += env.steps();
    ++agent.counters.episodes;
    if (ep.fault) {
      log_fault(hooks, agent.counters.episodes);
      continue;
    }
    for (auto& t : ep.transitions) buffer.push(std::move(t));
    agent.counters.transitions += ep.transitions.size();

    Running td, feat;
    if (buffer.size() >= cfg.batch_size) {
      for (std::size_t k = 0; k < cfg.sim_updates_per_episode; ++k) {
        const auto s = spectral::sample_batch(buffer, cfg.batch_size, sampling);
        const auto step = agent.counters.gradient_steps;

        const Var fl = spectral::feature_loss(agent.sim, s->batch, s->negatives);
        feat.add(checked(fl, "feature loss", step));
        minimize(features, fl);

        const Tensor eps_next = standard_normal(cfg.batch_size, quadsim::kActionWidth, sampling);
        const Var tl = planner::policy_evaluation(agent.q, agent.target, agent.actor, s->batch, eps_next, cfg.gamma, cfg.tau);
        td.add(checked(tl, "TD loss", step));
        minimize(critic, tl);

        const Tensor eps = standard_normal(cfg.batch_size, quadsim::kActionWidth, sampling);
        const Var objective = planner::policy_improvement(agent.actor, agent.q, s->batch, eps, cfg.tau);
        checked(objective, "policy objective", step);
        minimize(actor, -objective);

        planner::soft_update(agent.target, agent.q, cfg.tau_target);
        ++agent.counters.gradient_steps;
      }
    }
    emit(hooks, {agent.counters.episodes, ep.ret, ep.tracking_error, td.mean(), feat.mean(), 0.0, 0.0});
  }
  return capture(agent);
}

Checkpoint steady_transfer(const ExperimentConfig& cfg, const Checkpoint& sim, const RunHooks& hooks) {
  if (sim.stage != Stage::kSimulator)
    throw UsageError("transfer needs a simulator-stage checkpoint (got stage '" + std::string(stage_name(sim.stage)) +
                     "')");
  cfg.validate();
  const ExperimentConfig stored = sim.config();
  if (stored.dim != cfg.dim || stored.feature_hidden != cfg.feature_hidden || stored.actor_hidden != cfg.actor_hidden)
    throw UsageError("transfer config network shapes differ from the simulator checkpoint");

  auto agent = restore(sim);
  agent->cfg = cfg;
  agent->counters = {};
  agent->begin_real_stage();

  const Rng root = Rng(cfg.seed).derive("real");
  Environment env(cfg.gapped_env(), cfg.real_task, task_steps(cfg.real_task, cfg), root.derive("env"));
  Rng noise = root.derive("actor_noise");
  Rng sampling = root.derive("batch");
  spectral::ReplayBuffer buffer(cfg.buffer_capacity);

  std::optional<Adam> residual;
  if (agent->res) residual.emplace(agent->res->parameters(), numkit::AdamConfig{.lr = cfg.feature_lr});
  Adam critic(agent->q.parameters(), {.lr = cfg.critic_lr});
  Adam actor(agent->actor.parameters(), {.lr = cfg.transfer_actor_lr});

  for (std::size_t k = 0; k < cfg.real_episodes; ++k) {
    auto ep = run_episode(env, agent->actor, noise, {});
    ++agent->counters.episodes;
    if (ep.fault) {
      log_fault(hooks, agent->counters.episodes);
      continue;
    }
    for (auto& t : ep.transitions) buffer.push(std::move(t));
    agent->counters.transitions += ep.transitions.size();

    EpisodeMetrics m{agent->counters.episodes, ep.ret, ep.tracking_error, 0.0, 0.0, 0.0, 0.0};
    if (buffer.size() >= cfg.batch_size) {
      if (residual) {
        Running disc;
        for (std::size_t i = 0; i < cfg.discovery_steps; ++i) {
          const auto s = spectral::sample_batch(buffer, cfg.batch_size, sampling);
          const auto terms = spectral::discovery_loss(agent->sim, *agent->res, s->batch, s->negatives, cfg.lambda);
          disc.add(checked(terms.loss, "discovery loss", agent->counters.gradient_steps));
          minimize(*residual, terms.loss);
          m.constraint_violation = spectral::constraint_violation(terms.gram);
          if (hooks.on_discovery_step) hooks.on_discovery_step(m.constraint_violation);
          ++agent->counters.gradient_steps;
        }
        m.disc_loss = disc.mean();
      }
      Running td;
      for (std::size_t i = 0; i < cfg.evaluation_steps; ++i) {
        const auto s = spectral::sample_batch(buffer, cfg.batch_size, sampling);
        const Tensor eps = standard_normal(cfg.batch_size, quadsim::kActionWidth, sampling);
        const Var tl = planner::policy_evaluation(agent->q, agent->target, agent->actor, s->batch, eps, cfg.gamma, cfg.tau);
        td.add(checked(tl, "TD loss", agent->counters.gradient_steps));
        minimize(critic, tl);
        planner::soft_update(agent->target, agent->q, cfg.tau_target);
        ++agent->counters.gradient_steps;
      }
      m.td_loss = td.mean();
      Running kl;
      for (std::size_t i = 0; i < cfg.improvement_steps; ++i) {
        const auto s = spectral::sample_batch(buffer, cfg.batch_size, sampling);
        const Tensor eps = standard_normal(cfg.batch_size, quadsim::kActionWidth, sampling);
        const auto obj = planner::policy_improvement_kl(agent->actor, *agent->anchor, agent->q, s->batch, eps, cfg.tau_pi);
        checked(obj.objective, "policy objective", agent->counters.gradient_steps);
        kl.add(obj.kl.item());
        minimize(actor, -obj.objective);
        ++agent->counters.gradient_steps;
      }
      m.kl = kl.mean();
    }
    emit(hooks, m);
  }
  return capture(*agent);
}

EvalResult evaluate(const mellinger::StochasticActor& actor, const PhysicalParams& plant, Task task,
                    const ExperimentConfig& cfg, std::size_t episodes, std::uint64_t seed, bool keep_trace) {
  const Rng root = Rng(seed).derive("eval");
  EvalResult out;
  Running ret, err;
  for (std::size_t k = 0; k < episodes; ++k) {
    Environment env(plant, task, task_steps(task, cfg), root.derive(k));
    Rng unused = root.derive("unused");
    const auto ep = run_episode(env, actor, unused,
                                {ActionMode::kMean, false, keep_trace && k == 0});
    if (ep.fault) {
      ++out.faults;
      continue;
    }
    ret.add(ep.ret);
    err.add(ep.tracking_error);
    out.episodes.push_back({k + 1, ep.ret, ep.tracking_error, 0.0, 0.0, 0.0, 0.0});
    if (keep_trace && k == 0) out.trace = ep.trace;
  }
  out.mean_return = ret.mean();
  out.mean_tracking_error = err.mean();
  return out;
}

EvalResult evaluate(const Checkpoint& ckpt, const PhysicalParams& plant, Task task, std::size_t episodes,
                    std::uint64_t seed, bool keep_trace) {
  const auto agent = restore(ckpt);
  return evaluate(agent->actor, plant, task, agent->cfg, episodes, seed, keep_trace);
}

double average_tracking_error(const std::vector<TraceRow>& trace) {
  if (trace.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : trace) {
    double sq = 0.0;
    for (int i = 0; i < 3; ++i) sq += (r.state.p[i] - r.ref[i]) * (r.state.p[i] - r.ref[i]);
    sum += std::sqrt(sq);
  }
  return sum / static_cast<double>(trace.size());
}

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  quadsim::TrajectoryLog log(path);
  for (const auto& r : trace) log.append(r.t, r.state, r.action, r.reward);
  log.flush();
}

}  // namespace skillab::pipeline
