#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <vector>

#include "skillab/numkit/random.hpp"
#include "skillab/numkit/tensor.hpp"

namespace skillab::spectral {

using numkit::Tensor;

/// One environment step. `ctx`/`next_ctx` carry the controller context the actor needs to
/// re-evaluate its action; tabular data leaves them empty.
struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
  std::vector<double> ctx;
  std::vector<double> next_ctx;
};

/// Row-stacked transitions. `weight` is n x 1 when set, empty otherwise.
struct Batch {
  Tensor obs;
  Tensor action;
  Tensor reward;  // n x 1
  Tensor next_obs;
  Tensor done;  // n x 1, 1 for terminal
  Tensor ctx;
  Tensor next_ctx;
  Tensor weight;

  std::size_t size() const { return reward.rows(); }
};

Batch stack(const std::vector<const Transition*>& rows);

struct Sample {
  Batch batch;
  Tensor negatives;  // next observations of an independent draw
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  ReplayBuffer(const ReplayBuffer& other);
  ReplayBuffer& operator=(const ReplayBuffer& other);

  void push(Transition t);
  void clear();

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const;
  /// Slot `i` in insertion order among the occupied slots (0 = oldest).
  Transition at(std::size_t i) const;

  /// Uniform draw of `n` occupied slots. Without replacement the draw is a partial permutation.
  std::vector<std::size_t> draw_indices(std::size_t n, numkit::Rng& rng, bool replace = true) const;
  Batch gather(const std::vector<std::size_t>& indices) const;

  /// Binary snapshot: magic "SKRB", u32 version, u64 capacity, u64 inserted, u64 count, then
  /// per record a u64 byte length followed by the record body (see README).
  void save(const std::filesystem::path& path) const;
  static ReplayBuffer load(const std::filesystem::path& path);

 private:
  std::size_t capacity_;
  std::uint64_t inserted_ = 0;
  std::vector<Transition> slots_;
  mutable std::mutex mutex_;
};

/// Two independent uniform draws: the batch, and a second batch whose next observations are
/// the negatives. Returns nothing when the buffer holds fewer than `n` transitions.
std::optional<Sample> sample_batch(const ReplayBuffer& buffer, std::size_t n, numkit::Rng& rng, bool replace = true);

}  // namespace skillab::spectral
