#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "oracle_suite.hpp"
#include "skillab/pipeline/training.hpp"

namespace fs = std::filesystem;
using namespace skillab;
using namespace skillab::pipeline;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFault = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config file (defaults when omitted)");
  app->add_option("--seed", c.seed, "overrides run.seed");
  app->add_option("--out", c.out, "output directory")->capture_default_str();
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const Common& c) {
  const fs::path out(c.out);
  fs::create_directories(out);
  return out;
}

Checkpoint load_checkpoint(const std::string& path) {
  if (path.empty()) throw UsageError("--checkpoint is required");
  return Checkpoint::load(path);
}

int run_train_sim(const Common& c) {
  const auto cfg = load_config(c);
  const auto out = prepare_out(c);
  cfg.save(out / "config.ini");
  MetricsWriter metrics(out / "metrics.csv");
  std::ofstream log(out / "run.log");
  RunHooks hooks;
  hooks.on_episode = [&](const EpisodeMetrics& m) { metrics.write(m); };
  hooks.log = &log;
  const auto ckpt = speder_train(cfg, hooks);
  ckpt.save(out / "checkpoint.bin");
  std::cout << "simulator stage: " << ckpt.counters.episodes << " episodes, " << ckpt.counters.transitions
            << " transitions, " << ckpt.counters.gradient_steps << " gradient steps -> " << (out / "checkpoint.bin")
            << "\n";
  return kOk;
}

int run_transfer(const Common& c, const std::string& checkpoint, bool skill_transfer_only) {
  auto cfg = load_config(c);
  if (skill_transfer_only) cfg.skill_transfer_only = true;
  const auto sim = load_checkpoint(checkpoint);
  if (sim.stage != Stage::kSimulator)
    throw UsageError("transfer expects a checkpoint written by train-sim; " + checkpoint + " is a " +
                     std::string(stage_name(sim.stage)) + "-stage checkpoint");
  const auto out = prepare_out(c);
  cfg.save(out / "config.ini");
  MetricsWriter metrics(out / "metrics.csv");
  std::ofstream log(out / "run.log");
  RunHooks hooks;
  hooks.on_episode = [&](const EpisodeMetrics& m) { metrics.write(m); };
  hooks.log = &log;
  const auto ckpt = steady_transfer(cfg, sim, hooks);
  ckpt.save(out / "checkpoint.bin");
  std::cout << "real stage: " << ckpt.counters.episodes << " episodes"
            << (cfg.skill_transfer_only ? " (skill transfer only)" : "") << " -> " << (out / "checkpoint.bin") << "\n";
  return kOk;
}

int run_eval(const Common& c, const std::string& checkpoint, const std::string& task, std::size_t episodes,
             const std::string& plant) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto cfg = ckpt.config();
  const Task t = task.empty() ? cfg.eval_task : parse_task(task);
  const std::size_t n = episodes ? episodes : cfg.eval_episodes;
  PhysicalParams params;
  if (plant == "gapped") {
    params = cfg.gapped_env();
  } else if (plant == "nominal") {
    params = cfg.env;
  } else {
    throw UsageError("--plant must be nominal or gapped");
  }
  const std::uint64_t seed = c.seed ? *c.seed : cfg.seed;
  const auto out = prepare_out(c);
  const auto res = evaluate(ckpt, params, t, n, seed, true);
  MetricsWriter metrics(out / "metrics.csv");
  for (const auto& m : res.episodes) metrics.write(m);
  write_trajectory_csv(out / "trajectory.csv", res.trace);
  std::cout << "task " << task_name(t) << " on " << plant << " plant, " << res.episodes.size() << " episodes"
            << (res.faults ? " (" + std::to_string(res.faults) + " faulted)" : "") << "\n"
            << "mean return " << res.mean_return << "\nmean tracking error " << res.mean_tracking_error << " m\n";
  return kOk;
}

int run_oracle_check(const Common& c, const std::string& fixtures) {
  testing::SuiteOptions opt;
  opt.fixtures = fixtures;
  if (c.seed) opt.seed = *c.seed;
  bool all = true;
  for (const auto& r : testing::run_oracle_suite(opt)) {
    std::cout << testing::format_line(r) << "\n" << std::flush;
    all = all && r.pass;
  }
  return all ? kOk : kFault;
}

int run_export_gains(const Common& c, const std::string& checkpoint) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto agent = restore(ckpt);
  const auto gains = agent->actor.gains();
  if (c.out == ".") {
    std::cout << gains.to_json() << "\n";
  } else {
    const auto out = prepare_out(c);
    gains.save(out / "gains.json");
    std::cout << "wrote " << (out / "gains.json") << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral skill learning for quadrotor control: simulator training, transfer and evaluation"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, task, plant = "gapped", fixtures = SKILLAB_FIXTURE_DIR;
  std::size_t episodes = 0;
  bool skill_transfer_only = false;

  auto* train = app.add_subcommand("train-sim", "simulator stage: learn features, critic and policy");
  add_common(train, common);

  auto* transfer = app.add_subcommand("transfer", "real stage on the gapped plant from a train-sim checkpoint");
  add_common(transfer, common);
  transfer->add_option("--checkpoint", checkpoint, "simulator-stage checkpoint")->required();
  transfer->add_flag("--skill-transfer-only", skill_transfer_only, "ablation: no skill discovery");

  auto* eval = app.add_subcommand("eval", "deterministic rollouts of a checkpoint's policy");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required();
  eval->add_option("--task", task, "hover, takeoff-hover-land or figure8 (default: eval.task)");
  eval->add_option("--episodes", episodes, "rollouts (default: eval.episodes)");
  eval->add_option("--plant", plant, "nominal or gapped")->capture_default_str();

  auto* check = app.add_subcommand("oracle-check", "run the oracle acceptance checks");
  add_common(check, common);
  check->add_option("--fixtures", fixtures, "directory of tabular MDP fixtures")->capture_default_str();

  auto* gains = app.add_subcommand("export-gains", "print or write the policy's Mellinger gains as JSON");
  add_common(gains, common);
  gains->add_option("--checkpoint", checkpoint, "checkpoint to read")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return run_train_sim(common);
    if (*transfer) return run_transfer(common, checkpoint, skill_transfer_only);
    if (*eval) return run_eval(common, checkpoint, task, episodes, plant);
    if (*check) return run_oracle_check(common, fixtures);
    if (*gains) return run_export_gains(common, checkpoint);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "fault: " << e.what() << "\n";
    return kFault;
  }
  return kUsage;
}
