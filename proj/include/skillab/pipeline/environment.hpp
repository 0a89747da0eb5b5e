#pragma once

#include <deque>
#include <vector>

#include "skillab/mellinger/mellinger.hpp"
#include "skillab/pipeline/config.hpp"
#include "skillab/spectral/replay_buffer.hpp"

namespace skillab::pipeline {

using mellinger::Reference;
using quadsim::Action;
using quadsim::PhysicalParams;
using quadsim::QuadState;
using quadsim::Vec3d;

/// Reference at time t (s). Figure-8: (sin t, sin(2t)/2, 1). Takeoff-hover-land: a 2.5 s
/// minimum-jerk climb from the ground to 1 m, 7 s hover, then a 2.5 s descent.
Reference task_reference(Task task, double t);
/// Hover uses the configured episode length; the other tasks have fixed durations.
std::size_t task_steps(Task task, const ExperimentConfig& cfg);
/// Hover and figure-8 start from the reset distribution; takeoff starts at rest on the ground.
QuadState task_initial_state(Task task, const PhysicalParams& params, numkit::Rng& rng);

/// Plant plus the pieces around it: actuation delay line, ground plane and task clock.
class Environment {
 public:
  Environment(PhysicalParams params, Task task, std::size_t steps, numkit::Rng rng);

  void reset();
  /// Measurement of the current state against the current reference.
  quadsim::Observation observe(const Action& u_last, const quadsim::TrackingErrorSummary& errors,
                               QuadState* measured);

  struct Outcome {
    double reward = 0.0;
    double tracking_error = 0.0;  // |p - p_ref| after the step
    bool fault = false;
    bool last = false;
  };
  Outcome step(const Action& commanded);

  const QuadState& state() const { return state_; }
  const Reference& reference() const { return ref_; }
  double time() const { return static_cast<double>(k_) * params_.control_period; }
  std::size_t steps() const { return steps_; }
  const PhysicalParams& params() const { return params_; }

 private:
  PhysicalParams params_;
  Task task_;
  std::size_t steps_;
  numkit::Rng rng_;
  QuadState state_{};
  Reference ref_{};
  std::deque<Action> delay_;
  std::size_t k_ = 0;
};

/// One row of a flown trajectory.
struct TraceRow {
  double t = 0.0;
  QuadState state{};
  Vec3d ref{};
  Action action{};
  double reward = 0.0;
};

struct EpisodeResult {
  double ret = 0.0;
  double tracking_error = 0.0;  // mean over the flown steps
  bool fault = false;
  std::vector<spectral::Transition> transitions;
  std::vector<TraceRow> trace;
};

enum class ActionMode { kSample, kMean };

struct EpisodeOptions {
  ActionMode mode = ActionMode::kSample;
  bool keep_transitions = true;
  bool keep_trace = false;
};

/// Flies one episode with the actor. Sampling noise comes from `noise_rng`.
EpisodeResult run_episode(Environment& env, const mellinger::StochasticActor& actor, numkit::Rng& noise_rng,
                          const EpisodeOptions& opt);

}  // namespace skillab::pipeline
