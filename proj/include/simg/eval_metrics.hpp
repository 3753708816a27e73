// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simg/graph.hpp"
#include "simg/oracle.hpp"
#include "simg/tensor.hpp"

namespace simg {

// --- regression ------------------------------------------------------------

struct RegressionMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;       // valid iff r2_defined
  bool r2_defined = false;  // false when the truth has zero variance
};

// Standard MAE / RMSE / R^2 = 1 - SSE/SST. Lengths must match and be >= 2.
RegressionMetrics regression_metrics(const std::vector<double>& pred,
                                     const std::vector<double>& truth);

// --- classification ----------------------------------------------------------

struct ClassificationMetrics {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when no predicted positives
  double recall = 0.0;     // 0 when no actual positives
  double f1 = 0.0;         // 0 when precision + recall == 0
};

ClassificationMetrics classification_metrics(const std::vector<int>& pred,
                                             const std::vector<int>& truth);

// Rank-based (Mann-Whitney) AUROC with half-credit for ties. Throws when a
// class is missing.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MeanAurocResult {
  double value = 0.0;
  int groups_used = 0;
  int groups_skipped = 0;  // single-class groups
};

// Mean of per-group AUROCs; single-class groups are skipped and counted.
MeanAurocResult mean_auroc(
    const std::vector<std::pair<std::vector<double>, std::vector<int>>>& groups);

// Precision-recall points, one per distinct score threshold (descending),
// as (recall, precision).
std::vector<std::pair<double, double>> pr_curve(const std::vector<double>& scores,
                                                const std::vector<int>& labels);

// --- distance-binned F1 -------------------------------------------------------

struct LabeledCandidate {
  double spatial_distance = 0.0;  // Angstrom
  int graph_distance = 0;
  bool predicted = false;
  bool actual = false;
};

struct BinnedF1Cell {
  double f1 = 0.0;        // valid iff defined
  bool defined = false;   // false when the cell has no positives on either side
  int support = 0;
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

struct BinnedF1Table {
  std::vector<double> spatial_edges;
  std::vector<int> graph_edges;
  // cells[si][gi]: spatial bin si x graph-distance bin gi
  std::vector<std::vector<BinnedF1Cell>> cells;
};

// Bins are [e_i, e_{i+1}) with the final bin closed on the right; every
// candidate must land in some cell. Edges must be strictly increasing.
BinnedF1Table binned_f1(const std::vector<LabeledCandidate>& candidates,
                        const std::vector<double>& spatial_edges,
                        const std::vector<int>& graph_edges);

// --- dihedrals ----------------------------------------------------------------

// Signed dihedral about the b-c axis via the two-plane convention, degrees
// in (-180, 180].
double signed_dihedral(const std::array<double, 3>& a, const std::array<double, 3>& b,
                       const std::array<double, 3>& c, const std::array<double, 3>& d);

struct BackboneResidue {
  int n = 0;   // amide nitrogen
  int ca = 0;  // alpha carbon
  int c = 0;   // carbonyl carbon
};

struct BackboneDihedral {
  int residue = 0;
  std::optional<double> phi;  // C'(i-1)-N(i)-CA(i)-C'(i); absent for residue 0
  std::optional<double> psi;  // N(i)-CA(i)-C'(i)-N(i+1); absent for the last
};

std::vector<BackboneDihedral> backbone_dihedrals(
    const Molecule& m, const std::vector<BackboneResidue>& backbone);

// --- interaction matrix ---------------------------------------------------------

// Dense 0/1 matrix over hidden nodes in canonical order, lone pairs first.
// M[i][j] = 1 iff an interaction edge donates from node j into node i.
std::vector<std::vector<int>> interaction_matrix(const SimgGraph& g);

// Inverse of interaction_matrix up to the per-edge scalars.
std::vector<std::pair<NodeRef, NodeRef>> interactions_from_matrix(
    const std::vector<std::vector<int>>& matrix, int n_lp);

// --- downstream benchmark --------------------------------------------------------

enum class GraphVariant {
  MolGraph,           // atoms + bonds only
  SimgFeaturesOnly,   // molecular topology, label-derived atom features
  SimgTopologyOnly,   // extended topology, structural features only
  FullSimg,           // complete SIMG: extended topology, label features,
                      // and donor->acceptor interaction edges
  SimgStar,           // the FullSimg construction on a model-predicted record
};

std::string variant_name(GraphVariant v);

struct BenchmarkSample {
  Molecule molecule;
  NboRecord record;
  double target = 0.0;  // graph-level scalar
  // Required by the simg-star variant; produced by the trained pipeline.
  std::optional<NboRecord> predicted_record;
};

struct DownstreamConfig {
  int layers = 2;
  int hidden = 32;
  int epochs = 20;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
  double chemical_accuracy = 1.0;  // epsilon_chem for the given target
  double train_fraction = 0.7;
  double val_fraction = 0.15;  // remainder is test
};

struct BenchmarkRow {
  GraphVariant variant = GraphVariant::MolGraph;
  double test_mae = 0.0;
  double normalized_mae = 0.0;  // test_mae / chemical_accuracy
};

// Trains one shared-architecture model (message passing + mean pool + MLP)
// per variant with an identical budget and seed; splits are disjoint by
// content hash and shared across variants.
std::vector<BenchmarkRow> downstream_benchmark(const std::vector<BenchmarkSample>& data,
                                               const std::vector<GraphVariant>& variants,
                                               const DownstreamConfig& cfg);

}  // namespace simg
