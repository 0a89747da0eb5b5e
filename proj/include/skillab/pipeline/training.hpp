#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>
#include <vector>

#include "skillab/pipeline/agent.hpp"
#include "skillab/pipeline/environment.hpp"

namespace skillab::pipeline {

/// A loss or state turned NaN or infinite; the run stops.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpisodeMetrics {
  std::size_t episode = 0;
  double ret = 0.0;
  double tracking_error = 0.0;
  double td_loss = 0.0;
  double disc_loss = 0.0;
  double constraint_violation = 0.0;
  double kl = 0.0;
};

inline constexpr const char* kMetricsHeader = "episode,return,tracking_error,td_loss,disc_loss,constraint_violation,kl";

std::string format_metrics(const EpisodeMetrics& m);

/// Single-owner CSV sink, flushed after every row.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write(const EpisodeMetrics& m);

 private:
  std::FILE* file_ = nullptr;
};

struct RunHooks {
  std::function<void(const EpisodeMetrics&)> on_episode;
  std::ostream* log = nullptr;
  /// Called after each real-stage discovery step with Sum |<phi_sim_i, phi_j>| on that step's batch.
  std::function<void(double)> on_discovery_step;
};

/// Simulator stage: hover episodes on the nominal plant until the transition budget is spent,
/// each followed by feature, critic and actor updates.
Checkpoint speder_train(const ExperimentConfig& cfg, const RunHooks& hooks = {});

/// Real stage on the gapped plant, starting from a simulator checkpoint. Uses `cfg` for everything
/// except the network shapes, which must match the checkpoint.
Checkpoint steady_transfer(const ExperimentConfig& cfg, const Checkpoint& sim, const RunHooks& hooks = {});

struct EvalResult {
  std::vector<EpisodeMetrics> episodes;
  double mean_return = 0.0;
  double mean_tracking_error = 0.0;
  std::size_t faults = 0;
  std::vector<TraceRow> trace;  // first episode
};

/// Deterministic-mean rollouts. Episode k draws its plant noise and start state from seed-derived stream k.
EvalResult evaluate(const mellinger::StochasticActor& actor, const PhysicalParams& plant, Task task,
                    const ExperimentConfig& cfg, std::size_t episodes, std::uint64_t seed, bool keep_trace = false);
EvalResult evaluate(const Checkpoint& ckpt, const PhysicalParams& plant, Task task, std::size_t episodes,
                    std::uint64_t seed, bool keep_trace = false);

/// Mean |p - p_ref| over a trajectory.
double average_tracking_error(const std::vector<TraceRow>& trace);

/// Same format as quadsim::TrajectoryLog.
void write_trajectory_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

}  // namespace skillab::pipeline
