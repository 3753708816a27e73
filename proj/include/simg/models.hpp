// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "simg/graph.hpp"
#include "simg/tensor.hpp"

namespace simg {

// --- configs ---------------------------------------------------------------

struct LonePairModelConfig {
  int layers = 3;
  int hidden = 64;
  bool agg_sum = true;
  bool agg_mean = true;
  bool agg_max = true;
  int k_count = 5;  // lone-pair count classes 0..4
  int k_type = 5;   // type-1 count classes 0..4
};

struct MultitaskModelConfig {
  int blocks = 3;        // encoder GAT blocks
  int heads = 2;         // attention heads per block
  int width = 64;        // per-block output width (divided across heads)
  int d_e = 64;          // node embedding width
  int d_h = 32;          // evolver hidden-state width
  int evolver_blocks = 5;
  int head_hidden = 64;  // hidden width of the output MLPs
  double link_threshold = 0.5;
  // Ablation: start hidden states at zero instead of random draws
  // (feature-identical nodes then stay identical).
  bool zero_hidden_init = false;
};

std::string lp_config_to_json(const LonePairModelConfig& cfg);
LonePairModelConfig lp_config_from_json(const std::string& text);
std::string mt_config_to_json(const MultitaskModelConfig& cfg);
MultitaskModelConfig mt_config_from_json(const std::string& text);

// Fixed scales applied to interaction-head outputs so the regression targets
// are O(1) during training; predictions are reported in natural units.
inline constexpr double kE2Scale = 10.0;     // kcal/mol
inline constexpr double kGapScale = 1.0;     // hartree
inline constexpr double kFockScale = 0.1;    // hartree
// Atom-target normalization used inside the training loss (charge, core,
// valence, total electrons).
inline constexpr std::array<double, 4> kAtomTargetScale = {1.0, 46.0, 7.0, 50.0};

// --- prepared graph tensors ----------------------------------------------

// Atoms-only graph, inputs for the lone-pair model.
struct MolGraphInputs {
  Tensor x;               // n_atoms x (elements + charge)
  std::vector<int> src;   // directed edges, both directions
  std::vector<int> dst;
  Tensor edge_feat;       // E x 2 (order, length)
  int n_atoms = 0;
};

MolGraphInputs prepare_mol_inputs(const ExtendedGraph& molecular);

// Candidate donor->acceptor pair for link prediction.
struct CandidatePair {
  NodeRef donor;
  NodeRef acceptor;
  double spatial_distance = 0.0;  // between orbital anchors, Angstrom
  int graph_dist = 0;             // capped at 8
};

// Extended graph prepared for the multitask model. Global node ids are laid
// out atoms first, then lp nodes, then bond nodes.
struct GraphInputs {
  Tensor x;  // N x 18 unified node features
  std::vector<int> src, dst;
  Tensor edge_feat;  // E x 6: order, length, one-hot(aa, ab, alp, self)
  int n_atoms = 0, n_lp = 0, n_bond = 0;
  std::vector<int> hidden_nodes;  // global ids of lp then bond nodes
  std::vector<CandidatePair> candidates;
  Tensor pair_feat;  // |cand| x 7
  std::vector<int> cand_donor_hidden;    // row into hidden-node table
  std::vector<int> cand_acceptor_hidden;
  // Atom index per atom-wise bond target row; 4 rows per bond node in order
  // (bonding, atom_i), (bonding, atom_j), (anti, atom_i), (anti, atom_j).
  std::vector<int> ab_atom_rows;
};

// Candidate gate: donor != acceptor, graph distance <= 6 or anchor distance
// <= 4 Angstrom.
GraphInputs prepare_graph_inputs(const ExtendedGraph& g);

// --- lone-pair model -----------------------------------------------------

class LonePairModel {
 public:
  LonePairModel(LonePairModelConfig cfg, Rng& rng);

  // (count logits n x k_count, type-1-count logits n x k_type)
  std::pair<Tensor, Tensor> forward(const MolGraphInputs& in) const;

  // Argmax per atom with type1 clamped to total; clamp events append a
  // warning per atom index when `warnings` is non-null.
  std::vector<LpCounts> predict_counts(const MolGraphInputs& in,
                                       std::vector<std::string>* warnings = nullptr) const;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void load(const Checkpoint& ckpt);
  const LonePairModelConfig& config() const { return cfg_; }

 private:
  LonePairModelConfig cfg_;
  // per layer: message transform, update transform
  std::vector<Tensor> w_msg_, b_msg_, w_upd_, b_upd_;
  Tensor w_embed_, b_embed_;
  Tensor w_mlp1_, b_mlp1_, w_mlp2_, b_mlp2_;
  Tensor w_count_, b_count_, w_type_, b_type_;
};

// --- multitask model -------------------------------------------------------

// Multitask model output on one graph. Atom-bond rows are laid out per bond
// node as 4 consecutive rows: (bonding, atom_i), (bonding, atom_j),
// (anti, atom_i), (anti, atom_j).
struct PredictionBundle {
  Tensor atom_preds;        // n_atoms x 4, natural units
  Tensor lp_char_logits;    // n_lp x 4
  Tensor lp_char_probs;     // n_lp x 4, rows on the simplex
  Tensor lp_occ;            // n_lp x 1
  Tensor bond_occ;          // n_bond x 2
  Tensor ab_char_logits;    // 4*n_bond x 4
  Tensor ab_char_probs;     // 4*n_bond x 4
  Tensor ab_polcoef;        // 4*n_bond x 2 (polarization percent, coefficient)
  Tensor link_logits;       // |cand| x 1
  Tensor interaction_preds; // |cand| x 3, natural units (e2, gap, fock)
  std::vector<std::vector<double>> hidden_trajectory;  // per step, flattened n_h x d_h
};

class MultitaskModel {
 public:
  MultitaskModel(MultitaskModelConfig cfg, Rng& rng);

  // Deterministic given (params, graph, seed); hidden states are drawn from
  // `seed` at the start of every call and never persisted.
  PredictionBundle forward(const GraphInputs& in, uint64_t seed,
                           bool record_trajectory = false) const;

  // Per-node embeddings from the encoder alone (one row per node).
  Tensor encode(const GraphInputs& in) const;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void load(const Checkpoint& ckpt);
  const MultitaskModelConfig& config() const { return cfg_; }

 private:
  struct Mlp {
    Tensor w1, b1, w2, b2;
    Tensor run(const Tensor& x) const;
  };
  Mlp make_mlp(int in, int hidden, int out, Rng& rng);

  MultitaskModelConfig cfg_;
  // encoder: per block per head, W (in x head_width) and attention vector a.
  std::vector<std::vector<Tensor>> gat_w_;
  std::vector<std::vector<Tensor>> gat_a_;
  Tensor w_embed_out_, b_embed_out_;
  // evolver networks
  Mlp net_a_, net_b_, net_c_;
  // heads
  Mlp head_atom_, head_lp_, head_bond_, head_ab_, head_link_, head_inter_;
};

// --- full pipeline ---------------------------------------------------------

struct PredictOutput {
  SimgGraph simg;
  std::vector<std::string> warnings;
};

// molecule -> lp counts -> extended graph -> multitask forward -> SIMG*.
// Interaction edges are candidates with sigmoid(link logit) > tau.
PredictOutput predict_simg(const Molecule& m, const LonePairModel& lp_model,
                           const MultitaskModel& mt_model, uint64_t seed, double tau);

// SIMG* targets given a fixed extended graph (skips the lp model).
SimgGraph predict_on_extended(const ExtendedGraph& eg, const MultitaskModel& mt_model,
                              uint64_t seed, double tau);

}  // namespace simg
