#pragma once

#include <cstdint>
#include <vector>

#include "skillab/numkit/autodiff.hpp"

namespace skillab::numkit {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept per registered Parameter;
/// the caller owns gradient zeroing.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamConfig config);

  void step();
  void zero_grad();

  std::uint64_t step_count() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  const std::vector<Parameter*>& params() const noexcept { return params_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig config_;
  std::uint64_t steps_ = 0;
};

}  // namespace skillab::numkit
