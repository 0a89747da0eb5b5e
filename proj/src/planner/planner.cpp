#include "skillab/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skillab::planner {

namespace {

void blend(Tensor& target, const Tensor& live, double rate) {
  if (!target.same_shape(live)) throw numkit::DimensionError("soft_update: shape mismatch");
  auto t = target.data();
  const auto l = live.data();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - rate) * t[i] + rate * l[i];
}

void blend(FeaturePair& target, const FeaturePair& live, double rate) {
  auto tp = target.parameters();
  const auto lp = live.parameters();
  if (tp.size() != lp.size()) throw numkit::DimensionError("soft_update: feature layouts differ");
  for (std::size_t i = 0; i < tp.size(); ++i) blend(tp[i]->value, lp[i]->value, rate);
}

}  // namespace

LinearQ::LinearQ(FeaturePair* sim, ResidualFeaturePair* res)
    : sim_(sim), w1_(Tensor::zeros(sim->dim(), 1)), w2_(Tensor::zeros(0, 1)) {
  if (res != nullptr) attach_residual(res);
}

void LinearQ::attach_residual(ResidualFeaturePair* res) {
  res_ = res;
  w2_ = Parameter(Tensor::zeros(res->dim(), 1));
}

void LinearQ::detach_residual() {
  res_ = nullptr;
  w2_ = Parameter(Tensor::zeros(0, 1));
}

std::vector<Parameter*> LinearQ::parameters() {
  std::vector<Parameter*> out{&w1_};
  if (res_ != nullptr) out.push_back(&w2_);
  return out;
}

Tensor LinearQ::features(const Tensor& obs, const Tensor& action) const {
  const Tensor f = sim_->phi_eval(obs, action);
  return res_ == nullptr ? f : numkit::hcat(f, res_->phi_eval(obs, action));
}

Var LinearQ::value(const Tensor& obs, const Tensor& action, ParamMode weights) {
  auto w = [&](Parameter& p) { return weights == ParamMode::kTrack ? numkit::leaf(p) : numkit::constant(p.value); };
  Var q = numkit::matmul(numkit::constant(sim_->phi_eval(obs, action)), w(w1_));
  if (res_ != nullptr) q = q + numkit::matmul(numkit::constant(res_->phi_eval(obs, action)), w(w2_));
  return q;
}

Var LinearQ::value(const Tensor& obs, const Var& action) {
  Var q = numkit::matmul(sim_->phi(obs, action, ParamMode::kConstant), numkit::constant(w1_.value));
  if (res_ != nullptr) q = q + numkit::matmul(res_->phi(obs, action, ParamMode::kConstant), numkit::constant(w2_.value));
  return q;
}

Tensor LinearQ::eval(const Tensor& obs, const Tensor& action) const {
  Tensor q = numkit::matmul(sim_->phi_eval(obs, action), w1_.value);
  if (res_ != nullptr) q = q + numkit::matmul(res_->phi_eval(obs, action), w2_.value);
  return q;
}

TargetQ::TargetQ(const LinearQ& live) : sim_(*live.sim()), w1_(live.w1().value), w2_(live.w2().value) {
  if (live.has_residual()) res_ = *live.res();
}

Tensor TargetQ::eval(const Tensor& obs, const Tensor& action) const {
  Tensor q = numkit::matmul(sim_.phi_eval(obs, action), w1_);
  if (res_) q = q + numkit::matmul(res_->phi_eval(obs, action), w2_);
  return q;
}

void soft_update(TargetQ& target, const LinearQ& live, double rate) {
  if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("soft_update: rate must lie in [0, 1]");
  if (live.has_residual() != target.res_.has_value()) {
    // Residual features appeared or vanished on the live side: start the target from a hard copy.
    target = TargetQ(live);
    return;
  }
  blend(target.w1_, live.w1().value, rate);
  blend(target.sim_, *live.sim(), rate);
  if (target.res_) {
    blend(target.w2_, live.w2().value, rate);
    blend(*target.res_, *live.res(), rate);
  }
}

Var policy_evaluation(LinearQ& q, const TargetQ& target, const Batch& batch, const NextActions& next, double gamma,
                      double tau) {
  const Tensor q_next = target.eval(batch.next_obs, next.action);
  Tensor y = batch.reward;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const double cont = batch.done.size() > 0 ? 1.0 - batch.done(i, 0) : 1.0;
    const double lp = next.log_prob.size() > 0 ? next.log_prob(i, 0) : 0.0;
    y(i, 0) += gamma * cont * (q_next(i, 0) - tau * lp);
  }
  Var err = numkit::square(numkit::constant(y) - q.value(batch.obs, batch.action));
  if (batch.weight.size() > 0) err = err * numkit::constant(batch.weight);
  return numkit::mean(err);
}

Var policy_evaluation(LinearQ& q, const TargetQ& target, mellinger::StochasticActor& actor, const Batch& batch,
                      const Tensor& eps, double gamma, double tau) {
  const auto draw = actor.sample_batch(batch.next_obs, batch.next_ctx, eps, ParamMode::kConstant);
  return policy_evaluation(q, target, batch, {draw.action.value(), draw.log_prob.value()}, gamma, tau);
}

std::vector<double> max_entropy_policy(const std::vector<double>& q, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("max_entropy_policy: tau must be positive");
  if (q.empty()) throw std::invalid_argument("max_entropy_policy: empty action set");
  const double top = *std::max_element(q.begin(), q.end());
  std::vector<double> p(q.size());
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) total += (p[i] = std::exp((q[i] - top) / tau));
  for (double& e : p) e /= total;
  return p;
}

Var policy_improvement(mellinger::StochasticActor& actor, const QFunction& q, const Batch& batch, const Tensor& eps,
                       double tau) {
  const auto draw = actor.sample_batch(batch.obs, batch.ctx, eps, ParamMode::kTrack);
  return numkit::mean(q(batch.obs, draw.action) - tau * draw.log_prob);
}

Var policy_improvement(mellinger::StochasticActor& actor, LinearQ& q, const Batch& batch, const Tensor& eps,
                       double tau) {
  return policy_improvement(
      actor, [&q](const Tensor& obs, const Var& a) { return q.value(obs, a); }, batch, eps, tau);
}

KlObjective policy_improvement_kl(mellinger::StochasticActor& actor, mellinger::StochasticActor& sim_actor,
                                  const QFunction& q, const Batch& batch, const Tensor& eps, double tau_pi) {
  if (tau_pi < 0.0) throw std::invalid_argument("policy_improvement_kl: tau_pi must be nonnegative");
  const auto draw = actor.sample_batch(batch.obs, batch.ctx, eps, ParamMode::kTrack);
  const Var anchor_mean = sim_actor.mean_raw(batch.ctx, ParamMode::kConstant);
  const Var anchor_log_std = sim_actor.log_std(batch.obs, ParamMode::kConstant);
  KlObjective out;
  out.q_term = numkit::mean(q(batch.obs, draw.action));
  out.kl = numkit::mean(mellinger::gaussian_kl(draw.mean, draw.log_std, anchor_mean, anchor_log_std));
  out.objective = tau_pi == 0.0 ? out.q_term : out.q_term - tau_pi * out.kl;
  return out;
}

KlObjective policy_improvement_kl(mellinger::StochasticActor& actor, mellinger::StochasticActor& sim_actor, LinearQ& q,
                                  const Batch& batch, const Tensor& eps, double tau_pi) {
  return policy_improvement_kl(
      actor, sim_actor, [&q](const Tensor& obs, const Var& a) { return q.value(obs, a); }, batch, eps, tau_pi);
}

}  // namespace skillab::planner
