// SPDX-License-Identifier: Apache-2.0
#include "simg/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "simg/train.hpp"

namespace simg {

// --- regression ------------------------------------------------------------

RegressionMetrics regression_metrics(const std::vector<double>& pred,
                                     const std::vector<double>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("regression_metrics: length mismatch");
  if (pred.size() < 2) throw std::invalid_argument("regression_metrics: need >= 2 samples");
  const size_t n = pred.size();
  double abs_sum = 0, sq_sum = 0, mean = 0;
  for (size_t i = 0; i < n; ++i) {
    abs_sum += std::fabs(pred[i] - truth[i]);
    sq_sum += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    mean += truth[i];
  }
  mean /= static_cast<double>(n);
  double sst = 0;
  for (double t : truth) sst += (t - mean) * (t - mean);
  RegressionMetrics out;
  out.mae = abs_sum / static_cast<double>(n);
  out.rmse = std::sqrt(sq_sum / static_cast<double>(n));
  if (sst > 0) {
    out.r2 = 1.0 - sq_sum / sst;
    out.r2_defined = true;
  }
  return out;
}

// --- classification ----------------------------------------------------------

ClassificationMetrics classification_metrics(const std::vector<int>& pred,
                                             const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("classification_metrics: length mismatch");
  ClassificationMetrics m;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) ++m.tp;
    else if (pred[i] && !truth[i]) ++m.fp;
    else if (!pred[i] && truth[i]) ++m.fn;
    else ++m.tn;
  }
  long n = m.tp + m.fp + m.fn + m.tn;
  m.accuracy = n ? static_cast<double>(m.tp + m.tn) / n : 0.0;
  m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0)
             ? 2 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: length mismatch");
  long n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auroc: both classes must be present");

  // Midranks: tied scores share the average of the ranks they span.
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(scores.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double pos_rank_sum = 0;
  for (size_t k = 0; k < labels.size(); ++k)
    if (labels[k]) pos_rank_sum += rank[k];
  return (pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MeanAurocResult mean_auroc(
    const std::vector<std::pair<std::vector<double>, std::vector<int>>>& groups) {
  MeanAurocResult out;
  double sum = 0;
  for (const auto& [scores, labels] : groups) {
    bool has_pos = false, has_neg = false;
    for (int l : labels) (l ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) {
      ++out.groups_skipped;
      continue;
    }
    sum += auroc(scores, labels);
    ++out.groups_used;
  }
  if (out.groups_used == 0) throw std::invalid_argument("mean_auroc: no two-class groups");
  out.value = sum / out.groups_used;
  return out;
}

std::vector<std::pair<double, double>> pr_curve(const std::vector<double>& scores,
                                                const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("pr_curve: length mismatch");
  long n_pos = 0;
  for (int l : labels) n_pos += l ? 1 : 0;
  if (n_pos == 0) throw std::invalid_argument("pr_curve: no positives");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  std::vector<std::pair<double, double>> points;
  long tp = 0, fp = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    (labels[order[k]] ? tp : fp)++;
    bool boundary = k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
    if (boundary)
      points.push_back({static_cast<double>(tp) / n_pos,
                        static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return points;
}

// --- distance-binned F1 -------------------------------------------------------

namespace {

template <typename T>
int find_bin(const std::vector<T>& edges, T v) {
  // [e_i, e_{i+1}) with the final bin closed on the right.
  if (v < edges.front() || v > edges.back()) return -1;
  if (v == edges.back()) return static_cast<int>(edges.size()) - 2;
  auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return static_cast<int>(it - edges.begin()) - 1;
}

template <typename T>
void check_edges(const std::vector<T>& edges, const char* what) {
  if (edges.size() < 2) throw std::invalid_argument(std::string("binned_f1: need >= 2 ") + what);
  for (size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i - 1] < edges[i]))
      throw std::invalid_argument(std::string("binned_f1: non-monotone ") + what);
}

}  // namespace

BinnedF1Table binned_f1(const std::vector<LabeledCandidate>& candidates,
                        const std::vector<double>& spatial_edges,
                        const std::vector<int>& graph_edges) {
  check_edges(spatial_edges, "spatial edges");
  check_edges(graph_edges, "graph-distance edges");
  BinnedF1Table table;
  table.spatial_edges = spatial_edges;
  table.graph_edges = graph_edges;
  table.cells.assign(spatial_edges.size() - 1,
                     std::vector<BinnedF1Cell>(graph_edges.size() - 1));
  for (const LabeledCandidate& c : candidates) {
    int si = find_bin(spatial_edges, c.spatial_distance);
    int gi = find_bin(graph_edges, c.graph_distance);
    if (si < 0 || gi < 0)
      throw std::invalid_argument("binned_f1: candidate outside the bin range");
    BinnedF1Cell& cell = table.cells[si][gi];
    ++cell.support;
    if (c.predicted && c.actual) ++cell.tp;
    else if (c.predicted && !c.actual) ++cell.fp;
    else if (!c.predicted && c.actual) ++cell.fn;
    else ++cell.tn;
  }
  for (auto& row : table.cells)
    for (BinnedF1Cell& cell : row) {
      if (cell.tp + cell.fp + cell.fn == 0) continue;  // undefined: no positives
      cell.defined = true;
      cell.f1 = 2.0 * cell.tp / static_cast<double>(2 * cell.tp + cell.fp + cell.fn);
    }
  return table;
}

// --- dihedrals ----------------------------------------------------------------

namespace {

std::array<double, 3> vsub(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
std::array<double, 3> vcross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double vdot(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
double vnorm(const std::array<double, 3>& a) { return std::sqrt(vdot(a, a)); }

}  // namespace

double signed_dihedral(const std::array<double, 3>& a, const std::array<double, 3>& b,
                       const std::array<double, 3>& c, const std::array<double, 3>& d) {
  auto b1 = vsub(b, a), b2 = vsub(c, b), b3 = vsub(d, c);
  auto n1 = vcross(b1, b2), n2 = vcross(b2, b3);
  double y = vnorm(b2) * vdot(b1, n2);
  double x = vdot(n1, n2);
  double deg = std::atan2(y, x) * 180.0 / M_PI;
  if (deg <= -180.0) deg += 360.0;
  return deg;
}

std::vector<BackboneDihedral> backbone_dihedrals(
    const Molecule& m, const std::vector<BackboneResidue>& backbone) {
  auto pos = [&](int atom) -> const std::array<double, 3>& {
    if (atom < 0 || atom >= static_cast<int>(m.atoms.size()))
      throw std::invalid_argument("backbone_dihedrals: atom index out of range");
    return m.atoms[atom].position;
  };
  std::vector<BackboneDihedral> out;
  for (size_t i = 0; i < backbone.size(); ++i) {
    BackboneDihedral d;
    d.residue = static_cast<int>(i);
    const BackboneResidue& r = backbone[i];
    if (i > 0)
      d.phi = signed_dihedral(pos(backbone[i - 1].c), pos(r.n), pos(r.ca), pos(r.c));
    if (i + 1 < backbone.size())
      d.psi = signed_dihedral(pos(r.n), pos(r.ca), pos(r.c), pos(backbone[i + 1].n));
    out.push_back(d);
  }
  return out;
}

// --- interaction matrix ---------------------------------------------------------

namespace {

int hidden_index(const NodeRef& n, int n_lp) {
  if (n.kind == NodeKind::LonePair) return n.index;
  if (n.kind == NodeKind::BondPair) return n_lp + n.index;
  throw std::invalid_argument("interaction_matrix: atom node in an interaction");
}

}  // namespace

std::vector<std::vector<int>> interaction_matrix(const SimgGraph& g) {
  int n_lp = static_cast<int>(g.graph.lp_nodes.size());
  int n = n_lp + static_cast<int>(g.graph.bond_nodes.size());
  std::vector<std::vector<int>> m(n, std::vector<int>(n, 0));
  for (const InteractionEdge& e : g.interactions)
    m[hidden_index(e.acceptor, n_lp)][hidden_index(e.donor, n_lp)] = 1;
  return m;
}

std::vector<std::pair<NodeRef, NodeRef>> interactions_from_matrix(
    const std::vector<std::vector<int>>& matrix, int n_lp) {
  std::vector<std::pair<NodeRef, NodeRef>> out;
  for (size_t i = 0; i < matrix.size(); ++i)
    for (size_t j = 0; j < matrix[i].size(); ++j) {
      if (!matrix[i][j]) continue;
      if (static_cast<int>(i) < n_lp)
        throw std::invalid_argument("interactions_from_matrix: lone-pair acceptor row");
      NodeRef donor = static_cast<int>(j) < n_lp
                          ? NodeRef{NodeKind::LonePair, static_cast<int>(j)}
                          : NodeRef{NodeKind::BondPair, static_cast<int>(j) - n_lp};
      NodeRef acceptor{NodeKind::BondPair, static_cast<int>(i) - n_lp};
      out.push_back({donor, acceptor});
    }
  return out;
}

// --- downstream benchmark --------------------------------------------------------

std::string variant_name(GraphVariant v) {
  switch (v) {
    case GraphVariant::MolGraph: return "mol-graph";
    case GraphVariant::SimgFeaturesOnly: return "simg-features-only";
    case GraphVariant::SimgTopologyOnly: return "simg-topology-only";
    case GraphVariant::FullSimg: return "full-simg";
    case GraphVariant::SimgStar: return "simg-star";
  }
  throw std::invalid_argument("variant_name: unknown variant");
}

namespace {

constexpr int kBenchFeatures = 21;  // kind(3) + element(12) + extra(6)

struct BenchGraph {
  Tensor x;  // n x kBenchFeatures
  std::vector<int> src, dst;
  int n_nodes = 0;
  double target = 0.0;
};

void push_edge(BenchGraph& g, int a, int b) {
  g.src.push_back(a);
  g.dst.push_back(b);
  g.src.push_back(b);
  g.dst.push_back(a);
}

BenchGraph build_bench_graph(const BenchmarkSample& s, GraphVariant v) {
  const bool extended_topology = v == GraphVariant::SimgTopologyOnly ||
                                 v == GraphVariant::FullSimg || v == GraphVariant::SimgStar;
  const bool label_features = v == GraphVariant::SimgFeaturesOnly ||
                              v == GraphVariant::FullSimg || v == GraphVariant::SimgStar;
  const bool interaction_edges =
      v == GraphVariant::FullSimg || v == GraphVariant::SimgStar;

  const NboRecord* rec = &s.record;
  if (v == GraphVariant::SimgStar) {
    if (!s.predicted_record)
      throw std::invalid_argument("downstream_benchmark: simg-star needs predicted records");
    rec = &*s.predicted_record;
  }

  ExtendedGraph mg = build_molecular_graph(s.molecule);
  std::vector<LpCounts> counts = counts_from_record(s.molecule, *rec);
  ExtendedGraph eg = build_extended_graph(mg, counts);
  SimgGraph sg = build_simg(eg, *rec);

  const int n_atoms = static_cast<int>(eg.atoms.size());
  const int n_lp = static_cast<int>(eg.lp_nodes.size());
  const int n_bond = static_cast<int>(eg.bond_nodes.size());

  BenchGraph g;
  g.target = s.target;
  g.n_nodes = extended_topology ? n_atoms + n_lp + n_bond : n_atoms;
  std::vector<double> x(static_cast<size_t>(g.n_nodes) * kBenchFeatures, 0.0);
  auto feat = [&](int node, int f) -> double& {
    return x[static_cast<size_t>(node) * kBenchFeatures + f];
  };

  for (int a = 0; a < n_atoms; ++a) {
    feat(a, 0) = 1.0;  // kind: atom
    feat(a, 3 + eg.atoms[a].element) = 1.0;
    if (label_features) {
      feat(a, 15) = sg.atom_targets[a][0];  // natural charge
      feat(a, 16) = counts[a].total;
      feat(a, 17) = counts[a].type1;
    }
  }
  for (const AtomAtomEdge& e : eg.edges_atom_atom) push_edge(g, e.i, e.j);

  if (extended_topology) {
    const int lp_base = n_atoms, bond_base = n_atoms + n_lp;
    for (int l = 0; l < n_lp; ++l) {
      int node = lp_base + l;
      feat(node, 1) = 1.0;  // kind: lone pair
      feat(node, 15) = eg.lp_nodes[l].lp_type;
      if (label_features) {
        feat(node, 16) = sg.lp_targets[l][4];         // occupancy
        feat(node, 17) = sg.lp_targets[l][0] / 100.0;  // s character
        feat(node, 18) = sg.lp_targets[l][1] / 100.0;  // p character
      }
    }
    for (int b = 0; b < n_bond; ++b) {
      int node = bond_base + b;
      const BondPairNode& bn = eg.bond_nodes[b];
      feat(node, 2) = 1.0;  // kind: bond pair
      feat(node, 15) = bn.kind == BondKind::Pi ? 1.0 : 0.0;
      if (label_features) {
        feat(node, 16) = sg.bond_occupancies[b][0];
        feat(node, 17) = sg.bond_occupancies[b][1];
      }
    }
    for (const auto& [a, l] : eg.edges_atom_lp) push_edge(g, a, lp_base + l);
    for (const auto& [a, b] : eg.edges_atom_bond) push_edge(g, a, bond_base + b);
    if (interaction_edges) {
      auto node_of = [&](const NodeRef& n) {
        return n.kind == NodeKind::LonePair ? lp_base + n.index : bond_base + n.index;
      };
      for (const InteractionEdge& e : sg.interactions) {
        push_edge(g, node_of(e.donor), node_of(e.acceptor));
        // Donated/accepted E(2) totals, kept O(1) by the oracle amplitude.
        feat(node_of(e.donor), 19) += e.e2 / 25.0;
        feat(node_of(e.acceptor), 20) += e.e2 / 25.0;
      }
    }
  }

  g.x = Tensor::from(g.n_nodes, kBenchFeatures, std::move(x));
  return g;
}

// Shared readout architecture: L rounds of neighbor-sum message passing,
// mean pool, two-layer MLP to a scalar.
struct BenchModel {
  std::vector<Tensor> w_self, w_nei, b;
  Tensor w1, b1, w2, b2;

  BenchModel(const DownstreamConfig& cfg, Rng& rng) {
    int in = kBenchFeatures;
    for (int l = 0; l < cfg.layers; ++l) {
      double s = std::sqrt(2.0 / in);
      w_self.push_back(Tensor::randn(in, cfg.hidden, rng, s, true));
      w_nei.push_back(Tensor::randn(in, cfg.hidden, rng, s, true));
      b.push_back(Tensor::zeros(1, cfg.hidden, true));
      in = cfg.hidden;
    }
    double s = std::sqrt(2.0 / in);
    w1 = Tensor::randn(in, cfg.hidden, rng, s, true);
    b1 = Tensor::zeros(1, cfg.hidden, true);
    w2 = Tensor::randn(cfg.hidden, 1, rng, s, true);
    b2 = Tensor::zeros(1, 1, true);
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (size_t l = 0; l < w_self.size(); ++l) {
      out.push_back(w_self[l]);
      out.push_back(w_nei[l]);
      out.push_back(b[l]);
    }
    out.push_back(w1);
    out.push_back(b1);
    out.push_back(w2);
    out.push_back(b2);
    return out;
  }

  Tensor forward(const BenchGraph& g) const {
    Tensor h = g.x;
    for (size_t l = 0; l < w_self.size(); ++l) {
      Tensor msg = segment_sum(gather_rows(h, g.src), g.dst, g.n_nodes);
      h = relu(add(add(matmul(h, w_self[l]), matmul(msg, w_nei[l])), b[l]));
    }
    Tensor pooled = mean_rows(h);
    return add(matmul(relu(add(matmul(pooled, w1), b1)), w2), b2);
  }
};

}  // namespace

std::vector<BenchmarkRow> downstream_benchmark(const std::vector<BenchmarkSample>& data,
                                               const std::vector<GraphVariant>& variants,
                                               const DownstreamConfig& cfg) {
  if (data.size() < 5) throw std::invalid_argument("downstream_benchmark: dataset too small");
  if (cfg.chemical_accuracy <= 0)
    throw std::invalid_argument("downstream_benchmark: chemical accuracy must be positive");

  // Hash-disjoint splits, shared across variants.
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::string> hashes;
  for (const BenchmarkSample& s : data) hashes.push_back(molecule_hash(s.molecule));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return hashes[a] < hashes[b]; });
  size_t n_train = static_cast<size_t>(data.size() * cfg.train_fraction);
  size_t n_val = static_cast<size_t>(data.size() * cfg.val_fraction);
  n_train = std::max<size_t>(n_train, 1);
  if (n_train + n_val + 1 > data.size())
    throw std::invalid_argument("downstream_benchmark: split fractions leave no test set");
  std::vector<size_t> train(order.begin(), order.begin() + n_train);
  std::vector<size_t> test(order.begin() + n_train + n_val, order.end());

  std::vector<BenchmarkRow> rows;
  for (GraphVariant v : variants) {
    std::vector<BenchGraph> train_graphs, test_graphs;
    for (size_t i : train) train_graphs.push_back(build_bench_graph(data[i], v));
    for (size_t i : test) test_graphs.push_back(build_bench_graph(data[i], v));

    Rng rng(cfg.seed);
    BenchModel model(cfg, rng);
    Adam opt(model.parameters(), {cfg.learning_rate});
    std::vector<size_t> idx(train_graphs.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (size_t t = idx.size(); t > 1; --t)
        std::swap(idx[t - 1], idx[rng.uniform_int(0, static_cast<int>(t) - 1)]);
      for (size_t i : idx) {
        Tensor out = model.forward(train_graphs[i]);
        Tensor loss = square(sub(out, Tensor::scalar(train_graphs[i].target)));
        opt.zero_grad();
        backward(loss);
        opt.step();
      }
    }

    double abs_sum = 0;
    for (const BenchGraph& g : test_graphs)
      abs_sum += std::fabs(model.forward(g).item() - g.target);
    BenchmarkRow row;
    row.variant = v;
    row.test_mae = abs_sum / static_cast<double>(test_graphs.size());
    row.normalized_mae = row.test_mae / cfg.chemical_accuracy;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace simg
