#include "skillab/spectral/features.hpp"

#include <cmath>

namespace skillab::spectral {

namespace {

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

FeaturePair::FeaturePair(std::size_t obs_width, std::size_t action_width, std::size_t dim,
                         const std::vector<std::size_t>& hidden, numkit::Rng& rng)
    : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("FeaturePair: dimension must be positive");
  numkit::Rng phi_rng = rng.derive("phi");
  numkit::Rng mu_rng = rng.derive("mu");
  phi_ = numkit::Mlp(widths(obs_width + action_width, hidden, dim), phi_rng);
  mu_ = numkit::Mlp(widths(obs_width, hidden, dim), mu_rng);
}

Var FeaturePair::phi(const Tensor& obs, const Tensor& action, ParamMode mode) {
  const Tensor input = action.cols() == 0 ? obs : numkit::hcat(obs, action);
  return phi_.forward(numkit::constant(input), mode);
}

Var FeaturePair::phi(const Tensor& obs, const Var& action, ParamMode mode) {
  return phi_.forward(numkit::hcat(numkit::constant(obs), action), mode);
}

Var FeaturePair::mu(const Tensor& next_obs, ParamMode mode) { return mu_.forward(numkit::constant(next_obs), mode); }

Tensor FeaturePair::phi_eval(const Tensor& obs, const Tensor& action) const {
  return phi_.eval(action.cols() == 0 ? obs : numkit::hcat(obs, action));
}

Tensor FeaturePair::mu_eval(const Tensor& next_obs) const { return mu_.eval(next_obs); }

std::vector<numkit::Parameter*> FeaturePair::parameters() {
  auto out = phi_.parameters();
  for (auto* p : mu_.parameters()) out.push_back(p);
  return out;
}

std::vector<const numkit::Parameter*> FeaturePair::parameters() const {
  auto out = phi_.parameters();
  for (const auto* p : mu_.parameters()) out.push_back(p);
  return out;
}

Var feature_loss(const Var& phi, const Var& mu_next, const Var& mu_negatives, const Tensor& weights,
                 const Tensor& negative_weights) {
  Var positive = numkit::row_sums(phi * mu_next);
  if (weights.size() > 0) positive = positive * numkit::constant(weights);
  Var cross = numkit::square(numkit::matmul(phi, numkit::transpose(mu_negatives)));
  if (weights.size() > 0) cross = cross * numkit::constant(weights);
  if (negative_weights.size() > 0) cross = cross * numkit::constant(negative_weights.transpose());
  return -2.0 * numkit::mean(positive) + numkit::mean(cross);
}

Var feature_loss(FeaturePair& pair, const Batch& batch, const Tensor& negatives, const Tensor& negative_weights) {
  return feature_loss(pair.phi(batch.obs, batch.action), pair.mu(batch.next_obs), pair.mu(negatives), batch.weight,
                      negative_weights);
}

Var gram_inner(const Var& a, const Var& b, const Tensor& weights) {
  const Var wb = weights.size() > 0 ? b * numkit::constant(weights) : b;
  return numkit::matmul(numkit::transpose(a), wb) / static_cast<double>(a.rows());
}

Tensor gram_inner(const Tensor& a, const Tensor& b, const Tensor& weights) {
  if (a.rows() != b.rows()) throw numkit::DimensionError("gram_inner: row mismatch");
  Tensor wb = b;
  if (weights.size() > 0)
    for (std::size_t i = 0; i < wb.rows(); ++i)
      for (std::size_t j = 0; j < wb.cols(); ++j) wb(i, j) *= weights(i, 0);
  return numkit::matmul(a.transpose(), wb) * (1.0 / static_cast<double>(a.rows()));
}

double constraint_violation(const Tensor& gram) {
  double s = 0.0;
  for (double e : gram.data()) s += std::abs(e);
  return s;
}

DiscoveryTerms discovery_loss(FeaturePair& sim, ResidualFeaturePair& res, const Batch& batch, const Tensor& negatives,
                              double lambda, const Tensor& negative_weights) {
  if (lambda < 0.0) throw std::invalid_argument("discovery_loss: lambda must be nonnegative");
  const Var sim_phi = sim.phi(batch.obs, batch.action, ParamMode::kConstant);
  const Var res_phi = res.phi(batch.obs, batch.action);
  const Var phi = numkit::hcat(sim_phi, res_phi);
  const Var mu_next = numkit::hcat(sim.mu(batch.next_obs, ParamMode::kConstant), res.mu(batch.next_obs));
  const Var mu_neg = numkit::hcat(sim.mu(negatives, ParamMode::kConstant), res.mu(negatives));
  DiscoveryTerms out;
  out.stacked = feature_loss(phi, mu_next, mu_neg, batch.weight, negative_weights);
  const Var gram = gram_inner(sim_phi, res_phi, batch.weight);
  out.gram = gram.value();
  out.loss = lambda == 0.0 ? out.stacked : out.stacked + lambda * numkit::sum(numkit::abs(gram));
  return out;
}

}  // namespace skillab::spectral
