#include "skillab/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace skillab::oracle {

namespace {

std::vector<double> dirichlet(std::size_t n, numkit::Rng& rng) {
  std::vector<double> x(n);
  double total = 0.0;
  for (double& e : x) {
    e = -std::log(1.0 - rng.uniform());
    total += e;
  }
  for (double& e : x) e /= total;
  return x;
}

std::vector<double> resolve(std::vector<double> w, std::size_t n) {
  if (w.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  if (w.size() != n) throw numkit::DimensionError("weighting length does not match the number of rows");
  return w;
}

Tensor scale_rows(const Tensor& a, const std::vector<double>& w) {
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) *= w[i];
  return out;
}

std::vector<double> sqrt_of(const std::vector<double>& w) {
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = std::sqrt(std::max(w[i], 0.0));
  return out;
}

void fill_uniform_rho(TabularMDP& m) { m.rho.assign(m.num_states, 1.0 / static_cast<double>(m.num_states)); }

}  // namespace

void TabularMDP::validate() const {
  if (num_states == 0 || num_actions == 0) throw ParameterError("TabularMDP: empty state or action space");
  if (p.rows() != pairs() || p.cols() != num_states) throw ParameterError("TabularMDP: P has the wrong shape");
  if (r.rows() != num_states || r.cols() != num_actions) throw ParameterError("TabularMDP: R has the wrong shape");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("TabularMDP: gamma must lie in [0, 1)");
  for (std::size_t i = 0; i < pairs(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < num_states; ++j) {
      if (p(i, j) < -1e-12) throw ParameterError("TabularMDP: negative transition probability");
      total += p(i, j);
    }
    if (std::abs(total - 1.0) > 1e-12) throw ParameterError("TabularMDP: transition row does not sum to 1");
  }
  if (rho.size() != num_states) throw ParameterError("TabularMDP: rho has the wrong length");
  double total = 0.0;
  for (double e : rho) {
    if (e < 0.0) throw ParameterError("TabularMDP: negative initial probability");
    total += e;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ParameterError("TabularMDP: rho does not sum to 1");
}

nlohmann::json TabularMDP::to_json() const {
  nlohmann::json P = nlohmann::json::array();
  nlohmann::json R = nlohmann::json::array();
  for (std::size_t s = 0; s < num_states; ++s) {
    nlohmann::json ps = nlohmann::json::array();
    nlohmann::json rs = nlohmann::json::array();
    for (std::size_t a = 0; a < num_actions; ++a) {
      const auto row = p.row_span(index(s, a));
      ps.push_back(std::vector<double>(row.begin(), row.end()));
      rs.push_back(r(s, a));
    }
    P.push_back(ps);
    R.push_back(rs);
  }
  return {{"num_states", num_states}, {"num_actions", num_actions}, {"P", P}, {"R", R}, {"gamma", gamma}, {"rho", rho}};
}

TabularMDP TabularMDP::from_json(const nlohmann::json& j) {
  TabularMDP m;
  try {
    m.num_states = j.at("num_states").get<std::size_t>();
    m.num_actions = j.at("num_actions").get<std::size_t>();
    m.gamma = j.at("gamma").get<double>();
    m.rho = j.at("rho").get<std::vector<double>>();
    m.p = Tensor::zeros(m.pairs(), m.num_states);
    m.r = Tensor::zeros(m.num_states, m.num_actions);
    const auto& P = j.at("P");
    const auto& R = j.at("R");
    if (P.size() != m.num_states || R.size() != m.num_states) throw ParameterError("TabularMDP: P/R outer size");
    for (std::size_t s = 0; s < m.num_states; ++s) {
      if (P[s].size() != m.num_actions || R[s].size() != m.num_actions)
        throw ParameterError("TabularMDP: P/R action size");
      for (std::size_t a = 0; a < m.num_actions; ++a) {
        const auto row = P[s][a].get<std::vector<double>>();
        if (row.size() != m.num_states) throw ParameterError("TabularMDP: P row length");
        for (std::size_t k = 0; k < m.num_states; ++k) m.p(m.index(s, a), k) = row[k];
        m.r(s, a) = R[s][a].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("TabularMDP: malformed fixture: ") + e.what());
  }
  m.validate();
  return m;
}

TabularMDP TabularMDP::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("TabularMDP: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("TabularMDP: " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void TabularMDP::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ParameterError("TabularMDP: cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

TabularMDP random_mdp(std::size_t states, std::size_t actions, double gamma, numkit::Rng& rng) {
  TabularMDP m;
  m.num_states = states;
  m.num_actions = actions;
  m.gamma = gamma;
  m.p = Tensor::zeros(states * actions, states);
  m.r = Tensor::zeros(states, actions);
  for (std::size_t i = 0; i < m.pairs(); ++i) {
    const auto row = dirichlet(states, rng);
    std::copy(row.begin(), row.end(), m.p.row_span(i).begin());
  }
  for (double& e : m.r.data()) e = rng.uniform(-1.0, 1.0);
  m.rho = dirichlet(states, rng);
  return m;
}

TabularMDP low_rank_mdp(std::size_t states, std::size_t actions, std::size_t rank, double gamma, numkit::Rng& rng,
                        double floor) {
  TabularMDP m = random_mdp(states, actions, gamma, rng);
  Tensor mix = Tensor::zeros(m.pairs(), rank);
  Tensor basis = Tensor::zeros(rank, states);
  for (std::size_t i = 0; i < m.pairs(); ++i) {
    const auto row = dirichlet(rank, rng);
    std::copy(row.begin(), row.end(), mix.row_span(i).begin());
  }
  for (std::size_t k = 0; k < rank; ++k) {
    auto row = dirichlet(states, rng);
    for (double& e : row) e = (e + floor) / (1.0 + floor * static_cast<double>(states));
    std::copy(row.begin(), row.end(), basis.row_span(k).begin());
  }
  m.p = numkit::matmul(mix, basis);
  return m;
}

TabularMDP symmetric_chain(double stay, double gamma) {
  TabularMDP m;
  m.num_states = 2;
  m.num_actions = 2;
  m.gamma = gamma;
  m.p = Tensor::from_rows({{stay, 1.0 - stay}, {1.0 - stay, stay}, {1.0 - stay, stay}, {stay, 1.0 - stay}});
  m.r = Tensor::from_rows({{1.0, 0.0}, {1.0, 0.0}});
  fill_uniform_rho(m);
  return m;
}

TabularMDP plant_rank_one(const TabularMDP& base, double amplitude, numkit::Rng& rng, const Tensor* avoid) {
  const std::size_t n = base.pairs(), S = base.num_states;
  Tensor u = Tensor::zeros(n, 1);
  for (double& e : u.data()) e = rng.normal();
  if (avoid != nullptr && avoid->cols() > 0) {
    const Tensor coef = lstsq(*avoid, u);
    u = u - numkit::matmul(*avoid, coef);
  }
  std::vector<double> v(S);
  double mean = 0.0;
  for (double& e : v) {
    e = rng.normal();
    mean += e / static_cast<double>(S);
  }
  for (double& e : v) e -= mean;
  auto normalize = [](auto& range) {
    double m = 0.0;
    for (double e : range) m = std::max(m, std::abs(e));
    if (m == 0.0) throw ParameterError("plant_rank_one: degenerate direction");
    for (double& e : range) e /= m;
  };
  auto ud = u.data();
  normalize(ud);
  normalize(v);

  double limit = amplitude;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < S; ++j) {
      const double delta = u[i] * v[j];
      if (delta < 0.0) limit = std::min(limit, 0.9 * base.p(i, j) / -delta);
    }
  TabularMDP out = base;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < S; ++j) out.p(i, j) += limit * u[i] * v[j];
  // Re-center each row so it sums to one to machine precision.
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < S; ++j) total += out.p(i, j);
    for (std::size_t j = 0; j < S; ++j) out.p(i, j) /= total;
  }
  return out;
}

ExactDecomposition svd_decomposition(const Tensor& matrix, std::size_t d) {
  const Svd svd = jacobi_svd(matrix);
  ExactDecomposition out;
  out.singular_values = svd.s;
  out.phi = Tensor::zeros(matrix.rows(), d);
  out.mu = Tensor::zeros(d, matrix.cols());
  const std::size_t k = std::min(d, svd.s.size());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < matrix.rows(); ++i) out.phi(i, c) = svd.u(i, c) * svd.s[c];
    for (std::size_t j = 0; j < matrix.cols(); ++j) out.mu(c, j) = svd.v(j, c);
  }
  return out;
}

ExactDecomposition exact_decomposition(const TabularMDP& mdp, std::size_t d) { return svd_decomposition(mdp.p, d); }

ExactDecomposition one_hot_decomposition(const TabularMDP& mdp) {
  return {Tensor::identity(mdp.pairs()), mdp.p, {}};
}

ExactDecomposition residual_decomposition(const TabularMDP& real, const TabularMDP& sim, std::size_t s) {
  if (real.num_states != sim.num_states || real.num_actions != sim.num_actions)
    throw ParameterError("residual_decomposition: state/action spaces differ");
  return svd_decomposition(real.p - sim.p, s);
}

std::vector<double> uniform_weighting(const TabularMDP& mdp) {
  return std::vector<double>(mdp.pairs(), 1.0 / static_cast<double>(mdp.pairs()));
}

double explicit_density_loss(const Tensor& phi, const Tensor& mu, const Tensor& target, std::vector<double> weighting) {
  const auto w = resolve(std::move(weighting), target.rows());
  const Tensor model = numkit::matmul(phi, mu);
  if (!model.same_shape(target)) throw numkit::DimensionError("explicit_density_loss: model/target shape mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < target.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < target.cols(); ++j) {
      const double e = target(i, j) - model(i, j);
      row += e * e;
    }
    loss += w[i] * row;
  }
  return loss;
}

double explicit_density_loss(const ExactDecomposition& d, const TabularMDP& mdp, std::vector<double> weighting) {
  return explicit_density_loss(d.phi, d.mu, mdp.p, std::move(weighting));
}

numkit::Var explicit_density_loss(const numkit::Var& phi, const numkit::Var& mu_rows, const Tensor& target,
                                  std::vector<double> weighting) {
  const auto w = resolve(std::move(weighting), target.rows());
  const numkit::Var model = numkit::matmul(phi, numkit::transpose(mu_rows));
  const numkit::Var err = numkit::square(numkit::constant(target) - model);
  return numkit::sum(numkit::constant(Tensor::column(w)) * err);
}

namespace {

Tensor bellman_backup(const TabularMDP& mdp, const Tensor& q) {
  std::vector<double> v(mdp.num_states);
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    const auto row = q.row_span(s);
    v[s] = *std::max_element(row.begin(), row.end());
  }
  Tensor out = mdp.r;
  for (std::size_t s = 0; s < mdp.num_states; ++s)
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      double ev = 0.0;
      for (std::size_t k = 0; k < mdp.num_states; ++k) ev += mdp.prob(s, a, k) * v[k];
      out(s, a) += mdp.gamma * ev;
    }
  return out;
}

void check_policy(const TabularMDP& mdp, const Tensor& policy) {
  if (policy.rows() != mdp.num_states || policy.cols() != mdp.num_actions)
    throw ParameterError("policy has the wrong shape");
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    double total = 0.0;
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      if (policy(s, a) < 0.0) throw ParameterError("policy has a negative probability");
      total += policy(s, a);
    }
    if (std::abs(total - 1.0) > 1e-12) throw ParameterError("policy row does not sum to 1");
  }
}

}  // namespace

Tensor value_iteration(const TabularMDP& mdp, double tol, int max_iters) {
  if (!(mdp.gamma < 1.0)) throw ParameterError("value_iteration: gamma must be below 1");
  Tensor q = mdp.r;
  for (int it = 0; it < max_iters; ++it) {
    Tensor next = bellman_backup(mdp, q);
    const double change = numkit::max_abs_diff(next, q);
    q = std::move(next);
    if (change <= tol) break;
  }
  return q;
}

double bellman_residual(const TabularMDP& mdp, const Tensor& q) { return numkit::max_abs_diff(bellman_backup(mdp, q), q); }

Tensor exact_policy_q(const TabularMDP& mdp, const Tensor& policy) {
  if (!(mdp.gamma < 1.0)) throw ParameterError("exact_policy_q: gamma = 1 makes the evaluation system singular");
  check_policy(mdp, policy);
  const std::size_t n = mdp.pairs();
  Tensor system = Tensor::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s2 = 0; s2 < mdp.num_states; ++s2)
      for (std::size_t a2 = 0; a2 < mdp.num_actions; ++a2)
        system(i, mdp.index(s2, a2)) -= mdp.gamma * mdp.p(i, s2) * policy(s2, a2);
  const Tensor q = lu_solve(system, mdp.r.reshaped({n, 1}));
  return q.reshaped({mdp.num_states, mdp.num_actions});
}

Tensor state_values(const Tensor& q, const Tensor& policy) {
  Tensor v = Tensor::zeros(q.rows(), 1);
  for (std::size_t s = 0; s < q.rows(); ++s)
    for (std::size_t a = 0; a < q.cols(); ++a) v(s, 0) += policy(s, a) * q(s, a);
  return v;
}

std::vector<double> occupancy(const TabularMDP& mdp, const Tensor& policy) {
  if (!(mdp.gamma < 1.0)) throw ParameterError("occupancy: gamma must be below 1");
  check_policy(mdp, policy);
  // State occupancy solves (I - gamma P_pi^T) d = (1 - gamma) rho.
  const std::size_t S = mdp.num_states;
  Tensor sys = Tensor::identity(S);
  Tensor rhs = Tensor::zeros(S, 1);
  for (std::size_t s = 0; s < S; ++s) {
    rhs(s, 0) = (1.0 - mdp.gamma) * mdp.rho[s];
    for (std::size_t a = 0; a < mdp.num_actions; ++a)
      for (std::size_t k = 0; k < S; ++k) sys(k, s) -= mdp.gamma * policy(s, a) * mdp.prob(s, a, k);
  }
  const Tensor d = lu_solve(sys, rhs);
  std::vector<double> out(mdp.pairs());
  double total = 0.0;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < mdp.num_actions; ++a) total += (out[mdp.index(s, a)] = d(s, 0) * policy(s, a));
  for (double& e : out) e /= total;
  return out;
}

Tensor greedy_policy(const Tensor& q) {
  Tensor pi = Tensor::zeros(q.rows(), q.cols());
  for (std::size_t s = 0; s < q.rows(); ++s) {
    const auto row = q.row_span(s);
    pi(s, static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())) = 1.0;
  }
  return pi;
}

Tensor random_policy(std::size_t states, std::size_t actions, numkit::Rng& rng) {
  Tensor pi = Tensor::zeros(states, actions);
  for (std::size_t s = 0; s < states; ++s) {
    const auto row = dirichlet(actions, rng);
    std::copy(row.begin(), row.end(), pi.row_span(s).begin());
  }
  return pi;
}

LinearModel linear_model(const TabularMDP& mdp) {
  const std::size_t n = mdp.pairs();
  const Svd svd = jacobi_svd(mdp.p);
  const double cutoff = 1e-12 * (svd.s.empty() ? 0.0 : svd.s.front());
  std::size_t rank = 0;
  while (rank < svd.s.size() && svd.s[rank] > cutoff) ++rank;

  ExactDecomposition d = svd_decomposition(mdp.p, rank);
  const Tensor r = mdp.r.reshaped({n, 1});
  Tensor completion = r;
  for (std::size_t c = 0; c < rank; ++c) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += svd.u(i, c) * r(i, 0);
    for (std::size_t i = 0; i < n; ++i) completion(i, 0) -= dot * svd.u(i, c);
  }
  const double norm = numkit::frobenius_norm(completion);
  if (norm > 1e-12 * std::max(1.0, numkit::frobenius_norm(r))) {
    d.phi = numkit::hcat(d.phi, completion * (1.0 / norm));
    Tensor mu = Tensor::zeros(rank + 1, mdp.num_states);
    for (std::size_t c = 0; c < rank; ++c)
      for (std::size_t j = 0; j < mdp.num_states; ++j) mu(c, j) = d.mu(c, j);
    d.mu = mu;
  }
  LinearModel out{d, lstsq(d.phi, r)};
  return out;
}

Tensor linear_q_weights(const LinearModel& model, const TabularMDP& mdp, const Tensor& policy) {
  const Tensor v = state_values(exact_policy_q(mdp, policy), policy);
  return model.theta_r + mdp.gamma * numkit::matmul(model.decomp.mu, v);
}

Tensor linear_q(const LinearModel& model, const TabularMDP& mdp, const Tensor& w) {
  return numkit::matmul(model.decomp.phi, w).reshaped({mdp.num_states, mdp.num_actions});
}

Tensor weighted_gram(const Tensor& a, const Tensor& b, const std::vector<double>& weighting) {
  if (a.rows() != b.rows() || weighting.size() != a.rows()) throw numkit::DimensionError("weighted_gram: row mismatch");
  return numkit::matmul(a.transpose(), scale_rows(b, weighting));
}

StackComparison orthogonal_residual_stack(const ExactDecomposition& sim, const TabularMDP& real, std::size_t s,
                                          std::vector<double> weighting) {
  const auto w = resolve(std::move(weighting), real.pairs());
  const auto root = sqrt_of(w);
  const Tensor residual = real.p - sim.reconstruct();
  const Svd svd = jacobi_svd(residual);
  const std::size_t k = std::min(s, svd.s.size());

  StackComparison out;
  Tensor res_phi = Tensor::zeros(real.pairs(), k);
  Tensor res_dir = Tensor::zeros(real.pairs(), k);
  Tensor res_mu = Tensor::zeros(k, real.num_states);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < real.pairs(); ++i) {
      res_phi(i, c) = svd.u(i, c) * svd.s[c];
      res_dir(i, c) = svd.u(i, c);
    }
    for (std::size_t j = 0; j < real.num_states; ++j) res_mu(c, j) = svd.v(j, c);
  }
  Tensor stacked_mu = Tensor::zeros(sim.mu.rows() + k, real.num_states);
  for (std::size_t c = 0; c < sim.mu.rows(); ++c)
    for (std::size_t j = 0; j < real.num_states; ++j) stacked_mu(c, j) = sim.mu(c, j);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < real.num_states; ++j) stacked_mu(sim.mu.rows() + c, j) = res_mu(c, j);
  out.unprojected = {numkit::hcat(sim.phi, res_phi), stacked_mu, {}};

  // Remove the w-weighted projection of each residual direction onto span(sim.phi).
  const Tensor coef = lstsq(scale_rows(sim.phi, root), scale_rows(res_dir, root));
  const Tensor orth = res_dir - numkit::matmul(sim.phi, coef);
  const Tensor joint_phi = numkit::hcat(sim.phi, orth);
  const Tensor joint_mu = lstsq(scale_rows(joint_phi, root), scale_rows(real.p, root));
  out.projected = {joint_phi, joint_mu, {}};

  out.unprojected_loss = explicit_density_loss(out.unprojected.phi, out.unprojected.mu, real.p, w);
  out.projected_loss = explicit_density_loss(out.projected.phi, out.projected.mu, real.p, w);
  const Tensor g = weighted_gram(sim.phi, orth, w);
  for (double e : g.data()) out.max_cross_gram = std::max(out.max_cross_gram, std::abs(e));
  return out;
}

}  // namespace skillab::oracle
