#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "skillab/mellinger/mellinger.hpp"
#include "skillab/quadsim/quadsim.hpp"

namespace skillab::pipeline {

/// Bad command line, bad config file, unknown task, wrong checkpoint stage.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { kHover, kTakeoffHoverLand, kFigure8 };

Task parse_task(std::string_view name);
std::string_view task_name(Task t);

struct ExperimentConfig {
  // [env]
  quadsim::PhysicalParams env{};
  std::size_t episode_steps = 480;
  double integral_limit = 2.0;
  // [gap]
  quadsim::GapSpec gap{0.006, {1.0, 0.85, 1.0, 1.0}, 0.005, 0};
  // [features]
  std::size_t dim = 64;
  std::size_t residual_dim = 16;
  std::vector<std::size_t> feature_hidden{64, 64};
  double lambda = 1.0;
  double feature_lr = 1e-3;
  // [actor]
  std::vector<std::size_t> actor_hidden{64, 64};
  double init_log_std = -3.5;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  double actor_lr = 1e-4;
  double transfer_actor_lr = 5e-4;
  // [planner]
  double gamma = 0.99;
  double tau = 0.05;
  double tau_pi = 1.0;
  double tau_target = 0.005;
  double critic_lr = 1e-3;
  // [train]
  std::size_t batch_size = 256;
  std::size_t buffer_capacity = 1000000;
  std::size_t sim_transitions = 200000;
  std::size_t sim_updates_per_episode = 64;
  std::size_t real_episodes = 20;
  Task real_task = Task::kTakeoffHoverLand;
  std::size_t discovery_steps = 64;
  std::size_t evaluation_steps = 64;
  std::size_t improvement_steps = 64;
  bool skill_transfer_only = false;
  // [eval]
  Task eval_task = Task::kFigure8;
  std::size_t eval_episodes = 10;
  // [run]
  std::uint64_t seed = 0;

  /// Throws UsageError naming the first offending key.
  void validate() const;

  /// Every key, grouped by section, each preceded by its description.
  std::string to_text() const;
  /// Unknown sections or keys, duplicates and malformed values are errors.
  static ExperimentConfig from_text(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// FNV-1a over to_text().
  std::uint64_t hash() const;

  quadsim::PhysicalParams gapped_env() const { return quadsim::apply_gap(env, gap); }
  mellinger::ControllerConfig controller() const;
  mellinger::ActorConfig actor() const;
};

struct ConfigKey {
  std::string section;
  std::string key;
  std::string description;
};

/// The documented key table in file order.
std::vector<ConfigKey> config_keys();

}  // namespace skillab::pipeline
