// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "simg/eval_metrics.hpp"
#include "simg/train.hpp"

using namespace simg;

TEST_CASE("regression metrics on hand-computed examples") {
  RegressionMetrics perfect = regression_metrics({1, 2, 3}, {1, 2, 3});
  CHECK(perfect.mae == 0.0);
  CHECK(perfect.rmse == 0.0);
  REQUIRE(perfect.r2_defined);
  CHECK(perfect.r2 == 1.0);

  // Predicting the mean of the truth gives R^2 = 0.
  RegressionMetrics at_mean = regression_metrics({1, 1, 1}, {0, 1, 2});
  REQUIRE(at_mean.r2_defined);
  CHECK(at_mean.r2 == doctest::Approx(0.0));

  // SSE = 1, SST = 2 by hand.
  RegressionMetrics hand = regression_metrics({0, 0, 2}, {0, 1, 2});
  CHECK(hand.mae == doctest::Approx(1.0 / 3));
  CHECK(hand.rmse == doctest::Approx(std::sqrt(1.0 / 3)));
  REQUIRE(hand.r2_defined);
  CHECK(hand.r2 == doctest::Approx(0.5));

  // Constant truth has no variance to explain.
  CHECK_FALSE(regression_metrics({1, 2}, {3, 3}).r2_defined);

  CHECK_THROWS(regression_metrics({1}, {1}));
  CHECK_THROWS(regression_metrics({1, 2}, {1, 2, 3}));
}

TEST_CASE("classification metrics count the confusion matrix") {
  ClassificationMetrics m =
      classification_metrics({1, 1, 0, 0, 1, 0}, {1, 0, 0, 1, 1, 0});
  CHECK(m.tp == 2);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(m.tn == 2);
  CHECK(m.tp + m.fp + m.fn + m.tn == 6);
  CHECK(m.accuracy == doctest::Approx(4.0 / 6));
  CHECK(m.precision == doctest::Approx(2.0 / 3));
  CHECK(m.recall == doctest::Approx(2.0 / 3));
  CHECK(m.f1 == doctest::Approx(2.0 / 3));
}

TEST_CASE("auroc: separation, ties, hand-counted pairs, monotone invariance") {
  CHECK(auroc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == 1.0);
  CHECK(auroc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5);
  // Of the 2 (pos, neg) pairs exactly 1 is concordant.
  CHECK(auroc({0.9, 0.8, 0.3}, {1, 0, 1}) == doctest::Approx(0.5));

  // Invariant under a strictly monotone transform of scores.
  std::vector<double> scores = {0.1, 0.7, 0.3, 0.9, 0.4, 0.4};
  std::vector<int> labels = {0, 1, 0, 1, 1, 0};
  std::vector<double> warped;
  for (double s : scores) warped.push_back(std::exp(3 * s) - 5);
  CHECK(auroc(scores, labels) == doctest::Approx(auroc(warped, labels)).epsilon(1e-12));

  CHECK_THROWS(auroc({0.1, 0.2}, {1, 1}));
  CHECK_THROWS(auroc({0.1, 0.2}, {0, 0}));
}

TEST_CASE("mean auroc skips single-class groups") {
  std::vector<std::pair<std::vector<double>, std::vector<int>>> groups = {
      {{0.9, 0.1}, {1, 0}},       // auroc 1
      {{0.2, 0.8}, {1, 0}},       // auroc 0
      {{0.5, 0.6}, {1, 1}},       // skipped
  };
  MeanAurocResult r = mean_auroc(groups);
  CHECK(r.groups_used == 2);
  CHECK(r.groups_skipped == 1);
  CHECK(r.value == doctest::Approx(0.5));
  CHECK_THROWS(mean_auroc({{{0.5}, {1}}}));
}

TEST_CASE("pr curve endpoints and monotone recall") {
  auto pts = pr_curve({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
  REQUIRE(!pts.empty());
  CHECK(pts.front().first == doctest::Approx(0.5));   // recall after best score
  CHECK(pts.front().second == doctest::Approx(1.0));  // precision 1 at the top
  CHECK(pts.back().first == doctest::Approx(1.0));    // full recall at the end
  for (size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].first >= pts[i - 1].first);
}

TEST_CASE("binned f1 on a hand-built 6-candidate fixture") {
  // Two spatial bins [0,2), [2,4]; one graph bin [0,8].
  std::vector<LabeledCandidate> cands = {
      {1.0, 1, true, true},    // near: tp
      {1.5, 2, true, false},   // near: fp
      {0.5, 1, false, true},   // near: fn
      {3.0, 4, true, true},    // far: tp
      {3.5, 5, false, false},  // far: tn
      {4.0, 6, true, true},    // far: tp (right edge of the last bin)
  };
  BinnedF1Table t = binned_f1(cands, {0, 2, 4}, {0, 8});
  REQUIRE(t.cells.size() == 2);
  REQUIRE(t.cells[0].size() == 1);
  const BinnedF1Cell& near = t.cells[0][0];
  CHECK(near.support == 3);
  REQUIRE(near.defined);
  CHECK(near.f1 == doctest::Approx(2.0 * 1 / (2 * 1 + 1 + 1)));  // tp=1 fp=1 fn=1
  const BinnedF1Cell& far = t.cells[1][0];
  CHECK(far.support == 3);
  REQUIRE(far.defined);
  CHECK(far.f1 == doctest::Approx(1.0));
  // Micro-counts across cells sum to the global confusion counts.
  CHECK(near.tp + far.tp == 3);
  CHECK(near.support + far.support == (int)cands.size());

  // Perfect predictions give F1 = 1 everywhere non-empty; a cell with true
  // positives but no predicted ones gives 0.
  std::vector<LabeledCandidate> perfect = cands;
  for (LabeledCandidate& c : perfect) c.predicted = c.actual;
  BinnedF1Table tp = binned_f1(perfect, {0, 2, 4}, {0, 8});
  CHECK(tp.cells[0][0].f1 == 1.0);
  CHECK(tp.cells[1][0].f1 == 1.0);
  std::vector<LabeledCandidate> none = cands;
  for (LabeledCandidate& c : none) c.predicted = false;
  CHECK(binned_f1(none, {0, 2, 4}, {0, 8}).cells[0][0].f1 == 0.0);

  // Empty cells carry support 0 and the undefined sentinel.
  BinnedF1Table wide = binned_f1(cands, {0, 2, 5, 8}, {0, 8});
  CHECK(wide.cells[2][0].support == 0);
  CHECK_FALSE(wide.cells[2][0].defined);

  CHECK_THROWS(binned_f1(cands, {4, 2, 0}, {0, 8}));   // non-monotone
  CHECK_THROWS(binned_f1(cands, {0, 2, 4}, {0, 2}));   // candidate outside range
}

TEST_CASE("signed dihedrals: trans, cis, constructed twist, mirror negation") {
  std::array<double, 3> a{0, 1, 0}, b{0, 0, 0}, c{1, 0, 0};
  CHECK(signed_dihedral(a, b, c, {1, -1, 0}) == doctest::Approx(180.0));
  CHECK(signed_dihedral(a, b, c, {1, 1, 0}) == doctest::Approx(0.0));

  // d built by rotating the cis position 60 degrees about the b-c axis.
  double t = 60.0 * M_PI / 180.0;
  std::array<double, 3> d{1, std::cos(t), std::sin(t)};
  double angle = signed_dihedral(a, b, c, d);
  CHECK(std::fabs(std::fabs(angle) - 60.0) < 1e-6);

  // Mirroring through the z = 0 plane negates the dihedral.
  auto mirror = [](std::array<double, 3> p) {
    p[2] = -p[2];
    return p;
  };
  CHECK(signed_dihedral(mirror(a), mirror(b), mirror(c), mirror(d)) ==
        doctest::Approx(-angle).epsilon(1e-9));

  CHECK(angle > -180.0);
  CHECK(angle <= 180.0);
}

TEST_CASE("backbone dihedrals omit undefined terminal angles") {
  // Three-residue toy backbone: 9 atoms along a twisted chain.
  Molecule m;
  Rng rng(4);
  for (int i = 0; i < 9; ++i) {
    double z = 0.4 * std::sin(i * 1.1);
    m.atoms.push_back({2, {1.2 * i, 0.7 * std::cos(i * 0.9), z}});
  }
  for (int i = 0; i + 1 < 9; ++i) m.bonds.push_back({i, i + 1, 1});
  std::vector<BackboneResidue> bb = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
  std::vector<BackboneDihedral> ds = backbone_dihedrals(m, bb);
  REQUIRE(ds.size() == 3);
  CHECK_FALSE(ds[0].phi.has_value());
  CHECK(ds[0].psi.has_value());
  CHECK(ds[1].phi.has_value());
  CHECK(ds[1].psi.has_value());
  CHECK(ds[2].phi.has_value());
  CHECK_FALSE(ds[2].psi.has_value());
  CHECK(*ds[1].phi ==
        doctest::Approx(signed_dihedral(m.atoms[2].position, m.atoms[3].position,
                                        m.atoms[4].position, m.atoms[5].position)));
  CHECK_THROWS(backbone_dihedrals(m, {{0, 1, 2}, {3, 4, 99}}));
}

TEST_CASE("interaction matrix is canonical and lossless") {
  // Two-lp, two-bond fixture with one n->sigma* edge.
  SimgGraph g;
  g.graph.atoms = {{4, {0, 0, 0}}, {2, {1.4, 0, 0}}, {0, {2.0, 0.9, 0}}};
  g.graph.lp_nodes = {{0, 0}, {0, 0}};
  g.graph.bond_nodes = {{0, 1, BondKind::Sigma, 0}, {1, 2, BondKind::Sigma, 0}};
  CHECK(interaction_matrix(g) ==
        std::vector<std::vector<int>>(4, std::vector<int>(4, 0)));

  g.interactions.push_back({{NodeKind::LonePair, 1}, {NodeKind::BondPair, 1}, 5, 1, 0.1});
  auto m = interaction_matrix(g);
  int nonzero = 0;
  for (const auto& row : m)
    for (int v : row) nonzero += v;
  CHECK(nonzero == 1);
  CHECK(m[3][1] == 1);  // acceptor bond 1 -> row 2+1, donor lp 1 -> col 1

  // Lone-pair rows (acceptor side) are structurally all-zero.
  for (int j = 0; j < 4; ++j) {
    CHECK(m[0][j] == 0);
    CHECK(m[1][j] == 0);
  }

  auto edges = interactions_from_matrix(m, 2);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].first == NodeRef{NodeKind::LonePair, 1});
  CHECK(edges[0].second == NodeRef{NodeKind::BondPair, 1});

  // Random round trips through oracle-labeled molecules.
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    Molecule mol = random_molecule(rng);
    NboRecord r = synth_label(mol);
    SimgGraph sg = build_simg(
        build_extended_graph(build_molecular_graph(mol), counts_from_record(mol, r)), r);
    auto mat = interaction_matrix(sg);
    auto back = interactions_from_matrix(mat, (int)sg.graph.lp_nodes.size());
    REQUIRE(back.size() == sg.interactions.size());
    std::vector<std::pair<NodeRef, NodeRef>> expect;
    for (const InteractionEdge& e : sg.interactions) expect.push_back({e.donor, e.acceptor});
    std::sort(expect.begin(), expect.end());
    std::sort(back.begin(), back.end());
    CHECK(back == expect);
  }
}

TEST_CASE("downstream benchmark: learnable-by-all control and determinism") {
  // Target: heavy-atom count, an exact function of plain-graph features.
  Rng rng(13);
  GeneratorConfig gen;
  gen.min_heavy = 3;
  gen.max_heavy = 6;
  std::vector<BenchmarkSample> data;
  for (int i = 0; i < 40; ++i) {
    Molecule m = random_molecule(rng, gen);
    double heavy = 0;
    for (const Atom& a : m.atoms)
      if (a.element != 0) heavy += 1;
    data.push_back({m, synth_label(m), heavy});
  }
  DownstreamConfig cfg;
  cfg.epochs = 30;
  cfg.hidden = 16;
  cfg.seed = 21;
  cfg.chemical_accuracy = 0.5;
  std::vector<GraphVariant> variants = {GraphVariant::MolGraph, GraphVariant::FullSimg};
  std::vector<BenchmarkRow> rows = downstream_benchmark(data, variants, cfg);
  REQUIRE(rows.size() == 2);
  for (const BenchmarkRow& r : rows) {
    CHECK(r.test_mae < 1.0);  // sanity floor: every variant can learn this
    CHECK(r.normalized_mae == doctest::Approx(r.test_mae / cfg.chemical_accuracy));
  }

  std::vector<BenchmarkRow> again = downstream_benchmark(data, variants, cfg);
  for (size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].test_mae == again[i].test_mae);

  CHECK(variant_name(GraphVariant::SimgStar) == "simg-star");
  CHECK_THROWS(downstream_benchmark({}, variants, cfg));
}
