#include "skillab/spectral/tabular.hpp"

namespace skillab::spectral {

namespace {

Tensor all_obs(const oracle::TabularMDP& mdp) {
  Tensor out = Tensor::zeros(mdp.pairs(), mdp.num_states);
  for (std::size_t s = 0; s < mdp.num_states; ++s)
    for (std::size_t a = 0; a < mdp.num_actions; ++a) out(mdp.index(s, a), s) = 1.0;
  return out;
}

}  // namespace

Tensor tabular_obs(const oracle::TabularMDP& mdp, std::size_t s) {
  Tensor t = Tensor::zeros(1, mdp.num_states);
  t(0, s) = 1.0;
  return t;
}

Tensor tabular_action(const oracle::TabularMDP& mdp, std::size_t s, std::size_t a) {
  Tensor t = Tensor::zeros(1, mdp.pairs());
  t(0, mdp.index(s, a)) = 1.0;
  return t;
}

Transition tabular_transition(const oracle::TabularMDP& mdp, std::size_t s, std::size_t a, std::size_t next,
                              double reward) {
  Transition t;
  const Tensor o = tabular_obs(mdp, s), u = tabular_action(mdp, s, a), n = tabular_obs(mdp, next);
  t.obs.assign(o.data().begin(), o.data().end());
  t.action.assign(u.data().begin(), u.data().end());
  t.next_obs.assign(n.data().begin(), n.data().end());
  t.reward = reward;
  return t;
}

Enumeration enumerate_tabular(const oracle::TabularMDP& mdp, const std::vector<double>& weighting) {
  if (weighting.size() != mdp.pairs()) throw numkit::DimensionError("enumerate_tabular: weighting length");
  std::vector<Transition> rows;
  std::vector<double> mass;
  for (std::size_t s = 0; s < mdp.num_states; ++s)
    for (std::size_t a = 0; a < mdp.num_actions; ++a)
      for (std::size_t k = 0; k < mdp.num_states; ++k) {
        const double p = mdp.prob(s, a, k);
        if (p <= 0.0) continue;
        rows.push_back(tabular_transition(mdp, s, a, k, mdp.r(s, a)));
        mass.push_back(weighting[mdp.index(s, a)] * p);
      }
  std::vector<const Transition*> ptrs;
  for (const auto& t : rows) ptrs.push_back(&t);
  Enumeration e;
  e.batch = stack(ptrs);
  const double n = static_cast<double>(rows.size());
  e.batch.weight = Tensor::zeros(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) e.batch.weight(i, 0) = n * mass[i];
  e.negatives = Tensor::identity(mdp.num_states);
  e.negative_weights = Tensor::filled(mdp.num_states, 1, static_cast<double>(mdp.num_states));
  return e;
}

Var tabular_phi(FeaturePair& pair, const oracle::TabularMDP& mdp, ParamMode mode) {
  return pair.phi(all_obs(mdp), Tensor::identity(mdp.pairs()), mode);
}

Var tabular_mu(FeaturePair& pair, const oracle::TabularMDP& mdp, ParamMode mode) {
  return pair.mu(Tensor::identity(mdp.num_states), mode);
}

}  // namespace skillab::spectral
