#pragma once

#include "skillab/oracle/oracle.hpp"
#include "skillab/spectral/features.hpp"

namespace skillab::spectral {

/// Finite MDPs are fed to feature networks as obs = e_s (width S) and action = e_{s*A+a} (width S*A),
/// so an affine phi is fully tabular.
Tensor tabular_obs(const oracle::TabularMDP& mdp, std::size_t s);
Tensor tabular_action(const oracle::TabularMDP& mdp, std::size_t s, std::size_t a);
Transition tabular_transition(const oracle::TabularMDP& mdp, std::size_t s, std::size_t a, std::size_t next,
                              double reward);

/// Every (s, a, s') with P > 0 as one row weighted so that feature_loss equals the enumerated explicit
/// loss under `weighting` up to a constant. Negatives are all states with matching weights.
struct Enumeration {
  Batch batch;
  Tensor negatives;
  Tensor negative_weights;
};
Enumeration enumerate_tabular(const oracle::TabularMDP& mdp, const std::vector<double>& weighting);

/// phi over all (s, a) rows, (S*A) x d.
Var tabular_phi(FeaturePair& pair, const oracle::TabularMDP& mdp, ParamMode mode = ParamMode::kTrack);
/// mu over all states, S x d.
Var tabular_mu(FeaturePair& pair, const oracle::TabularMDP& mdp, ParamMode mode = ParamMode::kTrack);

}  // namespace skillab::spectral
