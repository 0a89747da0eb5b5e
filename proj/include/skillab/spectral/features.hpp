#pragma once

#include <vector>

#include "skillab/numkit/mlp.hpp"
#include "skillab/spectral/replay_buffer.hpp"

namespace skillab::spectral {

using numkit::ParamMode;
using numkit::Var;

/// phi maps [obs, action] to R^d, mu maps a next observation to R^d.
class FeaturePair {
 public:
  FeaturePair() = default;
  FeaturePair(std::size_t obs_width, std::size_t action_width, std::size_t dim, const std::vector<std::size_t>& hidden,
              numkit::Rng& rng);

  std::size_t dim() const { return dim_; }
  std::size_t obs_width() const { return mu_.in_width(); }
  std::size_t action_width() const { return phi_.in_width() - mu_.in_width(); }

  Var phi(const Tensor& obs, const Tensor& action, ParamMode mode = ParamMode::kTrack);
  /// Taped action, for gradients of Q through phi with respect to the action.
  Var phi(const Tensor& obs, const Var& action, ParamMode mode = ParamMode::kTrack);
  Var mu(const Tensor& next_obs, ParamMode mode = ParamMode::kTrack);
  Tensor phi_eval(const Tensor& obs, const Tensor& action) const;
  Tensor mu_eval(const Tensor& next_obs) const;

  numkit::Mlp& phi_net() { return phi_; }
  numkit::Mlp& mu_net() { return mu_; }
  const numkit::Mlp& phi_net() const { return phi_; }
  const numkit::Mlp& mu_net() const { return mu_; }
  std::vector<numkit::Parameter*> parameters();
  std::vector<const numkit::Parameter*> parameters() const;

 private:
  std::size_t dim_ = 0;
  numkit::Mlp phi_;
  numkit::Mlp mu_;
};

/// Same shape contract as FeaturePair; mu outputs are signed.
class ResidualFeaturePair : public FeaturePair {
 public:
  using FeaturePair::FeaturePair;
};

/// phi and mu are passed in already evaluated.
/// -2 mean_i w_i phi_i.mu(s'_i) + mean_{i,k} w_i v_k (phi_i.mu(~s'_k))^2, with w, v = 1 when empty.
Var feature_loss(const Var& phi, const Var& mu_next, const Var& mu_negatives, const Tensor& weights = {},
                 const Tensor& negative_weights = {});
Var feature_loss(FeaturePair& pair, const Batch& batch, const Tensor& negatives, const Tensor& negative_weights = {});

/// Entry (i, j) = mean_n w_n a(n, i) b(n, j).
Var gram_inner(const Var& a, const Var& b, const Tensor& weights = {});
Tensor gram_inner(const Tensor& a, const Tensor& b, const Tensor& weights = {});
double constraint_violation(const Tensor& gram);

struct DiscoveryTerms {
  Var loss;
  Var stacked;  // feature_loss of the stacked pair
  Tensor gram;  // sim x residual
};

/// Stacked feature_loss with the sim pair entering as constants, plus lambda * sum |gram(phi_sim, phi)|.
DiscoveryTerms discovery_loss(FeaturePair& sim, ResidualFeaturePair& res, const Batch& batch, const Tensor& negatives,
                              double lambda, const Tensor& negative_weights = {});

}  // namespace skillab::spectral
