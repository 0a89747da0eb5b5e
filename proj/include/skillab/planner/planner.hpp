#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "skillab/mellinger/mellinger.hpp"
#include "skillab/spectral/features.hpp"

namespace skillab::planner {

using numkit::Parameter;
using numkit::ParamMode;
using numkit::Tensor;
using numkit::Var;
using spectral::Batch;
using spectral::FeaturePair;
using spectral::ResidualFeaturePair;

/// Q(s, a) = w1^T phi_sim(s, a) + w2^T phi_res(s, a). Features are borrowed, never trained here.
class LinearQ {
 public:
  LinearQ() = default;
  LinearQ(FeaturePair* sim, ResidualFeaturePair* res = nullptr);

  bool has_residual() const { return res_ != nullptr; }
  void attach_residual(ResidualFeaturePair* res);
  void detach_residual();

  Parameter& w1() { return w1_; }
  Parameter& w2() { return w2_; }
  const Parameter& w1() const { return w1_; }
  const Parameter& w2() const { return w2_; }
  std::vector<Parameter*> parameters();

  FeaturePair* sim() const { return sim_; }
  ResidualFeaturePair* res() const { return res_; }

  /// Stacked features as constants, n x (d + s).
  Tensor features(const Tensor& obs, const Tensor& action) const;
  /// Weights tracked, features constant, n x 1.
  Var value(const Tensor& obs, const Tensor& action, ParamMode weights = ParamMode::kTrack);
  /// Gradient flows to `action` only.
  Var value(const Tensor& obs, const Var& action);
  Tensor eval(const Tensor& obs, const Tensor& action) const;

 private:
  FeaturePair* sim_ = nullptr;
  ResidualFeaturePair* res_ = nullptr;
  Parameter w1_;
  Parameter w2_;
};

/// Frozen copy of weights and features, moved only by soft_update.
class TargetQ {
 public:
  TargetQ() = default;
  explicit TargetQ(const LinearQ& live);

  Tensor eval(const Tensor& obs, const Tensor& action) const;
  const Tensor& w1() const { return w1_; }
  const Tensor& w2() const { return w2_; }
  const FeaturePair& sim() const { return sim_; }
  const std::optional<FeaturePair>& res() const { return res_; }
  FeaturePair& sim() { return sim_; }
  std::optional<FeaturePair>& res() { return res_; }
  Tensor& w1() { return w1_; }
  Tensor& w2() { return w2_; }

 private:
  friend void soft_update(TargetQ& target, const LinearQ& live, double rate);
  FeaturePair sim_;
  std::optional<FeaturePair> res_;
  Tensor w1_;
  Tensor w2_;
};

/// target <- (1 - rate) target + rate live, over weights and feature parameters.
void soft_update(TargetQ& target, const LinearQ& live, double rate);

struct Temperatures {
  double tau = 0.05;    // entropy weight
  double tau_pi = 0.0;  // KL weight
};

/// Next-state actions a' ~ pi(.|s') and their log-densities, both n x 1 / n x k values.
struct NextActions {
  Tensor action;
  Tensor log_prob;
};

/// mean (r + gamma (1 - done) (Qbar(s', a') - tau log pi(a'|s')) - Q(s, a))^2, weighted by batch.weight when set.
Var policy_evaluation(LinearQ& q, const TargetQ& target, const Batch& batch, const NextActions& next, double gamma,
                      double tau);
/// Draws a' from the actor with caller-supplied standard normal noise (n x 4).
Var policy_evaluation(LinearQ& q, const TargetQ& target, mellinger::StochasticActor& actor, const Batch& batch,
                      const Tensor& eps, double gamma, double tau);

/// softmax(q / tau)
std::vector<double> max_entropy_policy(const std::vector<double>& q, double tau);

using QFunction = std::function<Var(const Tensor& obs, const Var& action)>;

/// mean [Q(s, a~) - tau log pi(a~|s)] with a~ reparameterized. Maximize.
Var policy_improvement(mellinger::StochasticActor& actor, const QFunction& q, const Batch& batch, const Tensor& eps,
                       double tau);
Var policy_improvement(mellinger::StochasticActor& actor, LinearQ& q, const Batch& batch, const Tensor& eps,
                       double tau);

struct KlObjective {
  Var objective;  // maximize
  Var q_term;
  Var kl;  // mean KL(pi || pi_sim)
};
/// mean Q(s, a~) - tau_pi mean KL(pi(.|s) || pi_sim(.|s)), KL over the pre-squash Gaussians.
KlObjective policy_improvement_kl(mellinger::StochasticActor& actor, mellinger::StochasticActor& sim_actor,
                                  const QFunction& q, const Batch& batch, const Tensor& eps, double tau_pi);
KlObjective policy_improvement_kl(mellinger::StochasticActor& actor, mellinger::StochasticActor& sim_actor, LinearQ& q,
                                  const Batch& batch, const Tensor& eps, double tau_pi);

}  // namespace skillab::planner
