#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "skillab/pipeline/config.hpp"
#include "skillab/planner/planner.hpp"

namespace skillab::pipeline {

enum class Stage : std::uint8_t { kSimulator = 1, kReal = 2 };

std::string_view stage_name(Stage s);

struct Counters {
  std::uint64_t transitions = 0;
  std::uint64_t episodes = 0;
  std::uint64_t gradient_steps = 0;
};

/// Everything both stages train. Holds self-pointers (q borrows sim and res), so it never moves.
class Agent {
 public:
  explicit Agent(const ExperimentConfig& cfg);
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  /// pi0 = pi_sim, anchor = pi_sim, fresh residual features unless the config asks for skill transfer only.
  void begin_real_stage();

  ExperimentConfig cfg;
  Stage stage = Stage::kSimulator;
  Counters counters;
  spectral::FeaturePair sim;
  std::optional<spectral::ResidualFeaturePair> res;
  planner::LinearQ q;
  planner::TargetQ target;
  mellinger::StochasticActor actor;
  std::optional<mellinger::StochasticActor> anchor;  // frozen pi_sim, real stage only
};

struct NamedTensor {
  std::string name;
  numkit::Tensor value;
};

/**
 * Binary layout, little-endian throughout:
 *   "SKCP", u32 version, u8 stage, 3 zero bytes, u64 config hash,
 *   u64 transitions, u64 episodes, u64 gradient steps,
 *   u32 config length + config text,
 *   u32 block count, then per block: u32 name length + name, u32 rows, u32 cols, rows*cols f64.
 */
struct Checkpoint {
  Stage stage = Stage::kSimulator;
  std::string config_text;
  std::uint64_t config_hash = 0;
  Counters counters;
  std::vector<NamedTensor> blocks;

  ExperimentConfig config() const { return ExperimentConfig::from_text(config_text); }
  const numkit::Tensor* find(std::string_view name) const;

  void save(const std::filesystem::path& path) const;
  /// Missing file or foreign content raise UsageError; truncation raises runtime_error.
  static Checkpoint load(const std::filesystem::path& path);
};

Checkpoint capture(const Agent& agent);
/// Rebuilds the networks from the stored config and copies every block in.
std::unique_ptr<Agent> restore(const Checkpoint& ckpt);

}  // namespace skillab::pipeline
