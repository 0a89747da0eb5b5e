#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "skillab/numkit/adam.hpp"
#include "skillab/spectral/tabular.hpp"

using namespace skillab;
using namespace skillab::spectral;
using numkit::Rng;

namespace {

Transition numbered(double k) {
  Transition t;
  t.obs = {k, -k};
  t.action = {2 * k};
  t.reward = k / 10;
  t.next_obs = {k + 1, -k - 1};
  t.done = static_cast<int>(k) % 3 == 0;
  t.ctx = {k, k, k};
  t.next_ctx = {k + 1, k + 1, k + 1};
  return t;
}

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (double& x : t.data()) x = rng.uniform(-1.0, 1.0);
  return t;
}

std::vector<double> snapshot(const FeaturePair& p) {
  std::vector<double> out;
  for (const auto* q : p.parameters()) out.insert(out.end(), q->value.data().begin(), q->value.data().end());
  return out;
}

void zero_out(numkit::Mlp& net) {
  for (auto* p : net.parameters()) p->value.fill(0.0);
}

}  // namespace

TEST_CASE("replay buffer ring semantics") {
  ReplayBuffer buf(4);
  for (int k = 0; k < 6; ++k) buf.push(numbered(k));
  CHECK(buf.size() == 4);
  CHECK(buf.inserted() == 6);
  for (std::size_t i = 0; i < 4; ++i) CHECK(buf.at(i).obs[0] == static_cast<double>(i + 2));
  CHECK_THROWS(buf.at(4));
  CHECK_THROWS(ReplayBuffer(0));
}

TEST_CASE("sample_batch contracts") {
  ReplayBuffer buf(16);
  for (int k = 0; k < 10; ++k) buf.push(numbered(k));
  Rng rng(1);
  CHECK_FALSE(sample_batch(buf, 11, rng).has_value());

  const auto perm = sample_batch(buf, 10, rng, false);
  REQUIRE(perm.has_value());
  std::vector<double> seen;
  for (std::size_t i = 0; i < 10; ++i) seen.push_back(perm->batch.obs(i, 0));
  std::sort(seen.begin(), seen.end());
  for (int k = 0; k < 10; ++k) CHECK(seen[k] == k);

  Rng a(7), b(7);
  const auto s1 = sample_batch(buf, 5, a);
  const auto s2 = sample_batch(buf, 5, b);
  CHECK(numkit::max_abs_diff(s1->batch.obs, s2->batch.obs) == 0.0);
  CHECK(numkit::max_abs_diff(s1->negatives, s2->negatives) == 0.0);

  const Batch& batch = s1->batch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double k = batch.obs(i, 0);
    CHECK(batch.next_obs(i, 0) == k + 1);
    CHECK(batch.action(i, 0) == 2 * k);
    CHECK(batch.ctx(i, 2) == k);
    CHECK(batch.done(i, 0) == (static_cast<int>(k) % 3 == 0 ? 1.0 : 0.0));
  }
}

TEST_CASE("sampling is uniform over occupied slots (chi-square)") {
  ReplayBuffer buf(32);
  for (int k = 0; k < 10; ++k) buf.push(numbered(k));
  Rng rng(11);
  constexpr int n = 100000;
  std::vector<double> counts(10, 0.0);
  for (std::size_t i : buf.draw_indices(n, rng)) counts[i] += 1.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - n / 10.0) * (c - n / 10.0) / (n / 10.0);
  // 0.99 quantile of chi-square with 9 degrees of freedom.
  CHECK(chi2 < 21.666);
}

TEST_CASE("replay snapshot round trip") {
  const auto path = std::filesystem::temp_directory_path() / "skillab_replay_test.bin";
  ReplayBuffer buf(5);
  for (int k = 0; k < 7; ++k) buf.push(numbered(k));
  buf.save(path);
  const ReplayBuffer back = ReplayBuffer::load(path);
  CHECK(back.size() == buf.size());
  CHECK(back.inserted() == buf.inserted());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const Transition x = buf.at(i), y = back.at(i);
    CHECK(x.obs == y.obs);
    CHECK(x.next_ctx == y.next_ctx);
    CHECK(x.reward == y.reward);
    CHECK(x.done == y.done);
  }
  {
    std::ofstream corrupt(path, std::ios::binary | std::ios::in | std::ios::out);
    corrupt.write("XXXX", 4);
  }
  CHECK_THROWS(ReplayBuffer::load(path));
  std::filesystem::remove(path);
}

TEST_CASE("feature_loss vanishes with mu = 0") {
  Rng rng(2);
  FeaturePair pair(3, 2, 4, {8}, rng);
  zero_out(pair.mu_net());
  Batch b;
  b.obs = random_tensor(6, 3, rng);
  b.action = random_tensor(6, 2, rng);
  b.next_obs = random_tensor(6, 3, rng);
  b.reward = Tensor::zeros(6, 1);
  CHECK(feature_loss(pair, b, random_tensor(5, 3, rng)).item() == 0.0);
}

TEST_CASE("feature_loss is stationary at the exact tabular decomposition") {
  Rng rng(3);
  const oracle::TabularMDP m = oracle::random_mdp(4, 2, 0.9, rng);
  const auto w = oracle::uniform_weighting(m);
  // Negatives drawn from a marginal nu: minimizer is phi.mu(s') = P(s'|s,a) / nu(s').
  std::vector<double> nu = {0.1, 0.2, 0.3, 0.4};
  auto e = enumerate_tabular(m, w);
  for (std::size_t k = 0; k < 4; ++k) e.negative_weights(k, 0) = 4.0 * nu[k];

  // Affine phi over the tabular encoding: phi(s, a) = e_{sa}.
  FeaturePair pair(4, 8, 8, {}, rng);
  auto& pw = pair.phi_net().weight(0).value;
  pw.fill(0.0);
  pair.phi_net().bias(0).value.fill(0.0);
  for (std::size_t i = 0; i < 8; ++i) pw(4 + i, i) = 1.0;
  auto& mw = pair.mu_net().weight(0).value;
  pair.mu_net().bias(0).value.fill(0.0);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < 8; ++i) mw(k, i) = m.p(i, k) / nu[k];

  for (auto* p : pair.parameters()) p->zero_grad();
  numkit::backward(feature_loss(pair, e.batch, e.negatives, e.negative_weights));
  double worst = 0.0;
  for (auto* p : pair.parameters())
    for (double g : p->grad.data()) worst = std::max(worst, std::abs(g));
  CHECK(worst < 1e-12);
}

TEST_CASE("feature_loss gradient equals the enumerated explicit loss gradient") {
  Rng rng(4);
  const oracle::TabularMDP m = oracle::random_mdp(4, 2, 0.9, rng);
  const auto w = oracle::occupancy(m, Tensor::filled(4, 2, 0.5));
  const auto e = enumerate_tabular(m, w);
  FeaturePair pair(4, 8, 5, {16}, rng);

  for (auto* p : pair.parameters()) p->zero_grad();
  const numkit::Var surrogate = feature_loss(pair, e.batch, e.negatives, e.negative_weights);
  numkit::backward(surrogate);
  std::vector<Tensor> g_sur;
  for (auto* p : pair.parameters()) g_sur.push_back(p->grad);

  for (auto* p : pair.parameters()) p->zero_grad();
  const numkit::Var exact = oracle::explicit_density_loss(tabular_phi(pair, m), tabular_mu(pair, m), m.p, w);
  numkit::backward(exact);

  double constant = 0.0;
  for (std::size_t i = 0; i < m.pairs(); ++i)
    for (std::size_t k = 0; k < 4; ++k) constant += w[i] * m.p(i, k) * m.p(i, k);
  CHECK(exact.item() - surrogate.item() == doctest::Approx(constant).epsilon(1e-12));

  const auto params = pair.parameters();
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < g_sur[k].size(); ++i)
      CHECK(testing::relative_error(g_sur[k][i], params[k]->grad[i], 1e-12) < 1e-9);
}

TEST_CASE("gram_inner") {
  Rng rng(5);
  const Tensor a = random_tensor(64, 3, rng);
  const Tensor b = random_tensor(64, 4, rng);
  CHECK(numkit::max_abs_diff(gram_inner(a, Tensor::zeros(64, 4)), Tensor::zeros(3, 4)) == 0.0);

  const Tensor g = gram_inner(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t n = 0; n < 64; ++n) s += a(n, i) * b(n, j);
      CHECK(g(i, j) == doctest::Approx(s / 64).epsilon(1e-13));
    }

  // Disjoint one-hot supports.
  Tensor x = Tensor::zeros(6, 2), y = Tensor::zeros(6, 2);
  x(0, 0) = x(1, 1) = 1.0;
  y(2, 0) = y(3, 1) = 1.0;
  const Tensor disjoint = gram_inner(x, y);
  for (double e : disjoint.data()) CHECK(e == 0.0);

  const numkit::Var taped = gram_inner(numkit::constant(a), numkit::constant(b));
  CHECK(numkit::max_abs_diff(taped.value(), g) < 1e-15);
}

TEST_CASE("discovery_loss terms") {
  Rng rng(6);
  FeaturePair sim(3, 2, 4, {8}, rng);
  ResidualFeaturePair res(3, 2, 2, {8}, rng);
  Batch b;
  b.obs = random_tensor(32, 3, rng);
  b.action = random_tensor(32, 2, rng);
  b.next_obs = random_tensor(32, 3, rng);
  b.reward = Tensor::zeros(32, 1);
  const Tensor neg = random_tensor(32, 3, rng);

  const auto zero = discovery_loss(sim, res, b, neg, 0.0);
  const numkit::Var phi = numkit::hcat(sim.phi(b.obs, b.action), res.phi(b.obs, b.action));
  const numkit::Var mu_n = numkit::hcat(sim.mu(b.next_obs), res.mu(b.next_obs));
  const numkit::Var mu_k = numkit::hcat(sim.mu(neg), res.mu(neg));
  CHECK(zero.loss.item() == feature_loss(phi, mu_n, mu_k).item());

  double previous = -INFINITY;
  for (double lambda : {0.0, 0.1, 1.0, 10.0, 100.0}) {
    const double v = discovery_loss(sim, res, b, neg, lambda).loss.item();
    CHECK(v >= previous);
    previous = v;
  }

  ResidualFeaturePair flat(3, 2, 2, {8}, rng);
  zero_out(flat.phi_net());
  const auto a = discovery_loss(sim, flat, b, neg, 0.0);
  const auto c = discovery_loss(sim, flat, b, neg, 50.0);
  CHECK(c.loss.item() == a.loss.item());
  CHECK(constraint_violation(c.gram) == 0.0);
}

TEST_CASE("discovery leaves the simulator pair bit-identical") {
  Rng rng(7);
  FeaturePair sim(3, 2, 4, {8}, rng);
  ResidualFeaturePair res(3, 2, 2, {8}, rng);
  const auto before = snapshot(sim);
  numkit::Adam opt(res.parameters(), {.lr = 1e-2});
  for (int it = 0; it < 20; ++it) {
    Batch b;
    b.obs = random_tensor(16, 3, rng);
    b.action = random_tensor(16, 2, rng);
    b.next_obs = random_tensor(16, 3, rng);
    b.reward = Tensor::zeros(16, 1);
    opt.zero_grad();
    numkit::backward(discovery_loss(sim, res, b, random_tensor(16, 3, rng), 1.0).loss);
    opt.step();
  }
  CHECK(snapshot(sim) == before);
  for (const auto* p : sim.parameters())
    for (double g : p->grad.data()) CHECK(g == 0.0);
}

TEST_CASE("discovery recovers a planted orthogonal rank-one gap") {
  Rng rng(8);
  const auto sim_mdp = oracle::low_rank_mdp(5, 2, 2, 0.9, rng, 0.2);
  const auto exact = oracle::exact_decomposition(sim_mdp, 2);
  const auto real = oracle::plant_rank_one(sim_mdp, 0.1, rng, &exact.phi);
  const auto w = oracle::uniform_weighting(sim_mdp);
  const auto es = enumerate_tabular(sim_mdp, w);
  const auto er = enumerate_tabular(real, w);

  FeaturePair sim(5, 10, 2, {}, rng);
  numkit::Adam opt(sim.parameters(), {.lr = 1e-2});
  for (int it = 0; it < 8000; ++it) {
    if (it == 4000) opt.set_lr(1e-3);
    opt.zero_grad();
    numkit::backward(feature_loss(sim, es.batch, es.negatives, es.negative_weights));
    opt.step();
  }
  ResidualFeaturePair res(5, 10, 1, {}, rng);
  numkit::Adam ropt(res.parameters(), {.lr = 1e-2});
  for (int it = 0; it < 15000; ++it) {
    if (it == 5000) ropt.set_lr(3e-3);
    if (it == 10000) ropt.set_lr(3e-4);
    ropt.zero_grad();
    numkit::backward(discovery_loss(sim, res, er.batch, er.negatives, 1.0, er.negative_weights).loss);
    ropt.step();
  }
  const Tensor model = numkit::matmul(tabular_phi(sim, real).value(), tabular_mu(sim, real).value().transpose()) +
                       numkit::matmul(tabular_phi(res, real).value(), tabular_mu(res, real).value().transpose());
  for (std::size_t i = 0; i < real.pairs(); ++i) {
    double tv = 0.0;
    for (std::size_t k = 0; k < real.num_states; ++k) tv += 0.5 * std::abs(model(i, k) - real.p(i, k));
    CHECK(tv < 1e-2);
  }
}
