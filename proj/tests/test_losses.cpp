// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "simg/losses.hpp"

using namespace simg;

namespace {

double brute_force_min_cost(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0;
    for (int i = 0; i < n; ++i) c += cost[i][perm[i]];
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double assignment_cost(const std::vector<std::vector<double>>& cost,
                       const std::vector<int>& sigma) {
  double c = 0;
  for (size_t i = 0; i < sigma.size(); ++i) c += cost[i][sigma[i]];
  return c;
}

Molecule water() {
  Molecule m;
  m.atoms = {{4, {0.0, 0.0, 0.0}}, {0, {0.9572, 0.0, 0.0}}, {0, {-0.2399, 0.9266, 0.0}}};
  m.bonds = {{0, 1, 1}, {0, 2, 1}};
  return m;
}

// Water extended graph with oxygen lone pairs (one type 0, one type 1) and a
// fully populated synthetic target.
struct Fixture {
  ExtendedGraph eg;
  SimgGraph target;
  GraphInputs in;

  explicit Fixture(double lp_swap = false) {
    std::vector<LpCounts> counts = {{2, 0}, {0, 0}, {0, 0}};
    eg = build_extended_graph(build_molecular_graph(water()), counts);
    target.graph = eg;
    target.atom_targets = {{-0.9, 2.0, 6.8, 8.8}, {0.45, 0.0, 0.55, 0.55},
                           {0.45, 0.0, 0.55, 0.55}};
    std::array<double, 5> lp_a = {40.0, 59.0, 0.8, 0.2, 1.99};
    std::array<double, 5> lp_b = {5.0, 94.0, 0.8, 0.2, 1.92};
    if (lp_swap)
      target.lp_targets = {lp_b, lp_a};
    else
      target.lp_targets = {lp_a, lp_b};
    for (size_t b = 0; b < eg.bond_nodes.size(); ++b) {
      target.bond_occupancies.push_back({1.99, 0.02});
      std::array<double, 24> side{};
      for (int s = 0; s < 2; ++s)
        for (int e = 0; e < 2; ++e) {
          int off = s * 12 + e * 6;
          side[off + 0] = 25.0;
          side[off + 1] = 74.0;
          side[off + 2] = 0.8;
          side[off + 3] = 0.2;
          side[off + 4] = e == 0 ? 70.0 : 30.0;
          side[off + 5] = e == 0 ? 0.84 : 0.55;
        }
      target.bond_side_targets.push_back(side);
    }
    // One lp -> sigma* interaction; lp index refers to the (possibly
    // swapped) target row order.
    InteractionEdge e;
    e.donor = {NodeKind::LonePair, lp_swap ? 1 : 0};
    e.acceptor = {NodeKind::BondPair, 1};
    e.e2 = 6.2;
    e.energy_gap = 0.95;
    e.fock_element = 0.07;
    target.interactions.push_back(e);
    in = prepare_graph_inputs(eg);
  }
};

MultitaskModelConfig tiny_config() {
  MultitaskModelConfig c;
  c.blocks = 1;
  c.heads = 2;
  c.width = 8;
  c.d_e = 6;
  c.d_h = 4;
  c.evolver_blocks = 1;
  c.head_hidden = 8;
  return c;
}

}  // namespace

TEST_CASE("hungarian matches brute force on random matrices") {
  Rng rng(101);
  for (int trial = 0; trial < 500; ++trial) {
    int n = 1 + static_cast<int>(trial % 5);
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (auto& row : cost)
      for (double& c : row) c = 20.0 * rng.uniform() - 10.0;
    std::vector<int> sigma = hungarian(cost);
    // sigma must be a permutation
    std::vector<char> seen(n, 0);
    for (int s : sigma) {
      REQUIRE(s >= 0);
      REQUIRE(s < n);
      REQUIRE(!seen[s]);
      seen[s] = 1;
    }
    CHECK(assignment_cost(cost, sigma) == doctest::Approx(brute_force_min_cost(cost)).epsilon(1e-12));
  }
}

TEST_CASE("hungarian handles degenerate inputs") {
  CHECK(hungarian({}).empty());
  CHECK(hungarian({{3.0}}) == std::vector<int>{0});
  CHECK_THROWS_AS(hungarian({{1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("lone-pair matching never crosses groups") {
  // Two oxygens each with two same-type lone pairs: matching may permute
  // within an owner's group but must map each group onto itself.
  Molecule m;
  m.atoms = {{4, {0, 0, 0}}, {4, {1.48, 0, 0}}, {0, {-0.9, 0.3, 0}}, {0, {2.4, 0.3, 0}}};
  m.bonds = {{0, 1, 1}, {0, 2, 1}, {1, 3, 1}};
  std::vector<LpCounts> counts = {{2, 0}, {2, 0}, {0, 0}, {0, 0}};
  ExtendedGraph eg = build_extended_graph(build_molecular_graph(m), counts);
  REQUIRE(eg.lp_nodes.size() == 4);
  GraphInputs in = prepare_graph_inputs(eg);
  Rng rng(5);
  MultitaskModel model(tiny_config(), rng);
  PredictionBundle preds = model.forward(in, 3);
  SimgGraph target;
  target.graph = eg;
  for (int i = 0; i < 4; ++i)
    target.lp_targets.push_back({30.0 + i, 69.0 - i, 0.7, 0.3, 1.9});
  std::vector<int> sigma = match_lone_pairs(preds, target);
  REQUIRE(sigma.size() == 4);
  for (int i = 0; i < 4; ++i) {
    int group = eg.lp_nodes[i].owner_atom;
    CHECK(eg.lp_nodes[sigma[i]].owner_atom == group);
  }
}

TEST_CASE("matched loss is invariant to target lone-pair row order") {
  Fixture a(false), b(true);
  Rng rng(9);
  MultitaskModel model(tiny_config(), rng);
  PredictionBundle pa = model.forward(a.in, 4);
  PredictionBundle pb = model.forward(b.in, 4);
  LossWeights w;
  LossParts la = total_loss(pa, a.in, a.target, w, 77);
  LossParts lb = total_loss(pb, b.in, b.target, w, 77);
  CHECK(std::abs(la.total.item() - lb.total.item()) < 1e-12);
  CHECK(std::abs(la.l_alpha.item() - lb.l_alpha.item()) < 1e-12);
  CHECK(std::abs(la.l_gamma.item() - lb.l_gamma.item()) < 1e-12);
  CHECK(std::abs(la.l_delta.item() - lb.l_delta.item()) < 1e-12);
  CHECK(la.n_link_positive == 1);
}

TEST_CASE("loss decomposes and empty interactions zero the link terms") {
  Fixture f;
  f.target.interactions.clear();
  Rng rng(13);
  MultitaskModel model(tiny_config(), rng);
  PredictionBundle p = model.forward(f.in, 8);
  LossWeights w;
  LossParts l = total_loss(p, f.in, f.target, w, 3);
  CHECK(l.l_gamma.item() == 0.0);
  CHECK(l.l_delta.item() == 0.0);
  CHECK(l.n_link_positive == 0);
  CHECK(l.total.item() ==
        doctest::Approx(l.l_alpha.item() + l.l_beta.item()).epsilon(1e-12));
  // weights rescale the parts
  LossWeights w2{2.0, 0.5, 1.0, 1.0};
  LossParts l2 = total_loss(p, f.in, f.target, w2, 3);
  CHECK(l2.total.item() ==
        doctest::Approx(2.0 * l.l_alpha.item() + 0.5 * l.l_beta.item()).epsilon(1e-12));
}

TEST_CASE("negative sampling is deterministic in the seed") {
  Fixture f;
  Rng rng(21);
  MultitaskModel model(tiny_config(), rng);
  PredictionBundle p = model.forward(f.in, 2);
  LossWeights w;
  double g1 = total_loss(p, f.in, f.target, w, 5).l_gamma.item();
  double g2 = total_loss(p, f.in, f.target, w, 5).l_gamma.item();
  CHECK(g1 == g2);
  CHECK(total_loss(p, f.in, f.target, w, 5).n_link_negative == 1);
}

TEST_CASE("gradients flow through the full loss with frozen matching") {
  Fixture f;
  Rng rng(31);
  MultitaskModel model(tiny_config(), rng);
  LossWeights w;
  auto params = model.parameters();
  PredictionBundle p0 = model.forward(f.in, 6);
  std::vector<int> sigma = match_lone_pairs(p0, f.target);

  auto loss_value = [&] {
    PredictionBundle p = model.forward(f.in, 6);
    return total_loss(p, f.in, f.target, w, 11, &sigma).total;
  };

  Tensor loss = loss_value();
  for (auto& t : params) t.zero_grad();
  backward(loss);

  // spot-check a handful of coordinates against central differences
  double worst = 0.0;
  const double eps = 1e-5;
  Rng pick(77);
  int checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    Tensor& t = params[pick.uniform_int(0, static_cast<int>(params.size()) - 1)];
    int idx = pick.uniform_int(0, t.size() - 1);
    double saved = t.raw()[idx];
    t.raw()[idx] = saved + eps;
    double up = loss_value().item();
    t.raw()[idx] = saved - eps;
    double dn = loss_value().item();
    t.raw()[idx] = saved;
    double fd = (up - dn) / (2 * eps);
    double an = t.grad()[idx];
    double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
    worst = std::max(worst, std::abs(fd - an) / denom);
    ++checked;
  }
  CHECK(checked == 12);
  CHECK(worst < 1e-4);
}
