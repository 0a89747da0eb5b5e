#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace skillab::numkit {

/// Seeded generator. Sub-streams are derived by name so that every consumer
/// (environment, actor noise, batch sampling, initialization) draws from its
/// own reproducible sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  Rng derive(std::string_view name) const;
  Rng derive(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double stddev) { return mean + stddev * normal_(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace skillab::numkit
