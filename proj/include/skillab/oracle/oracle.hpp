#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "skillab/numkit/autodiff.hpp"
#include "skillab/numkit/random.hpp"
#include "skillab/oracle/linalg.hpp"

namespace skillab::oracle {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite MDP. Transition rows are flattened with row index s * num_actions + a.
struct TabularMDP {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  Tensor p;  // (S*A) x S
  Tensor r;  // S x A
  double gamma = 0.9;
  std::vector<double> rho;

  std::size_t pairs() const { return num_states * num_actions; }
  std::size_t index(std::size_t s, std::size_t a) const { return s * num_actions + a; }
  double prob(std::size_t s, std::size_t a, std::size_t next) const { return p(index(s, a), next); }

  /// Throws ParameterError unless every transition row and rho are distributions within 1e-12.
  void validate() const;

  nlohmann::json to_json() const;
  static TabularMDP from_json(const nlohmann::json& j);
  static TabularMDP load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

TabularMDP random_mdp(std::size_t states, std::size_t actions, double gamma, numkit::Rng& rng);

/// P = A N with rows of A and N drawn from Dirichlet(1); rank <= `rank`.
TabularMDP low_rank_mdp(std::size_t states, std::size_t actions, std::size_t rank, double gamma, numkit::Rng& rng,
                        double floor = 0.0);

/// Two states, two actions; action 0 stays with probability `stay`, action 1 switches with probability `stay`.
TabularMDP symmetric_chain(double stay, double gamma);

/// Adds amplitude * u v^T with v summing to zero and u orthogonal (uniform weighting) to `avoid`'s columns.
/// The result is a valid MDP; amplitude is shrunk until every entry stays nonnegative.
TabularMDP plant_rank_one(const TabularMDP& base, double amplitude, numkit::Rng& rng, const Tensor* avoid = nullptr);

struct ExactDecomposition {
  Tensor phi;  // (S*A) x d
  Tensor mu;   // d x S
  std::vector<double> singular_values;

  std::size_t rank() const { return phi.cols(); }
  Tensor reconstruct() const { return numkit::matmul(phi, mu); }
};

/// Best rank-d factorization of `matrix` by truncated SVD, phi = U_d diag(s_d), mu = V_d^T.
ExactDecomposition svd_decomposition(const Tensor& matrix, std::size_t d);
ExactDecomposition exact_decomposition(const TabularMDP& mdp, std::size_t d);
/// Phi = I, M = P.
ExactDecomposition one_hot_decomposition(const TabularMDP& mdp);
/// Best rank-s factorization of P_real - P_sim.
ExactDecomposition residual_decomposition(const TabularMDP& real, const TabularMDP& sim, std::size_t s);

std::vector<double> uniform_weighting(const TabularMDP& mdp);

/// sum_{sa} w(sa) sum_{s'} (target - phi mu)^2. Empty weighting means uniform.
double explicit_density_loss(const Tensor& phi, const Tensor& mu, const Tensor& target,
                             std::vector<double> weighting = {});
double explicit_density_loss(const ExactDecomposition& d, const TabularMDP& mdp, std::vector<double> weighting = {});
/// Taped form; `mu_rows` holds one row per next state (S x d), as produced by a feature network.
numkit::Var explicit_density_loss(const numkit::Var& phi, const numkit::Var& mu_rows, const Tensor& target,
                                  std::vector<double> weighting = {});

Tensor value_iteration(const TabularMDP& mdp, double tol = 1e-12, int max_iters = 100000);
double bellman_residual(const TabularMDP& mdp, const Tensor& q);

/// Solves (I - gamma P Pi) q = r. Throws ParameterError when gamma >= 1 or the policy is invalid.
Tensor exact_policy_q(const TabularMDP& mdp, const Tensor& policy);
Tensor state_values(const Tensor& q, const Tensor& policy);
Tensor greedy_policy(const Tensor& q);
/// Normalized discounted state-action occupancy (1 - gamma) rho^T (I - gamma P Pi)^-1 as an (S*A) vector.
std::vector<double> occupancy(const TabularMDP& mdp, const Tensor& policy);
Tensor random_policy(std::size_t states, std::size_t actions, numkit::Rng& rng);

/// Full-rank decomposition augmented with the reward direction outside span(P's left singular vectors),
/// so that r = Phi theta_r holds exactly. The extra column has a zero row in M.
struct LinearModel {
  ExactDecomposition decomp;
  Tensor theta_r;  // d x 1
};
LinearModel linear_model(const TabularMDP& mdp);
/// w = theta_r + gamma M V^pi
Tensor linear_q_weights(const LinearModel& model, const TabularMDP& mdp, const Tensor& policy);
/// Phi w reshaped to S x A.
Tensor linear_q(const LinearModel& model, const TabularMDP& mdp, const Tensor& w);

struct StackComparison {
  ExactDecomposition unprojected;  // [Phi_sim, U_s S_s], [M_sim; V_s^T]
  ExactDecomposition projected;    // [Phi_sim, proj(U_s)], M refit jointly by weighted least squares
  double unprojected_loss = 0.0;
  double projected_loss = 0.0;
  double max_cross_gram = 0.0;  // max |<phi_sim_i, phi_res_j>_w| of the projected stack
};
/// The residual is taken against the sim model's reconstruction.
StackComparison orthogonal_residual_stack(const ExactDecomposition& sim, const TabularMDP& real, std::size_t s,
                                          std::vector<double> weighting = {});

/// Weighted inner products <a_i, b_j> = sum_k w_k a(k,i) b(k,j).
Tensor weighted_gram(const Tensor& a, const Tensor& b, const std::vector<double>& weighting);

}  // namespace skillab::oracle
