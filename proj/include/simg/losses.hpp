// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "simg/models.hpp"

namespace simg {

// Minimum-cost perfect assignment on a square cost matrix (O(m^3)).
// Returns sigma with sigma[row] = assigned column.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

// Permutation-invariant lone-pair correspondence: within every
// (owner atom, lp_type) group, predicted nodes are assigned to target rows
// by minimum total matching cost (character cross-entropy plus squared
// occupancy error), the same per-node terms the loss charges.
// Returns sigma over all lp nodes with sigma[pred_node] = target_row.
// Assignments never cross group boundaries.
std::vector<int> match_lone_pairs(const PredictionBundle& preds, const SimgGraph& target);

struct LossWeights {
  double alpha = 1.0;  // node-level targets
  double beta = 1.0;   // atom-wise bond targets
  double gamma = 1.0;  // link existence
  double delta = 1.0;  // interaction values
};

struct LossParts {
  Tensor total;
  Tensor l_alpha, l_beta, l_gamma, l_delta;
  std::vector<int> lp_matching;  // sigma actually used
  int n_link_positive = 0;
  int n_link_negative = 0;
};

// Full training loss. `in` must be prepared from target.graph. The lone-pair
// matching is recomputed from the current predictions unless
// `fixed_matching` is given; either way it is held constant (not
// differentiated through). Link negatives are sampled 1:1 against the
// positives from the remaining candidates using `neg_seed`.
LossParts total_loss(const PredictionBundle& preds, const GraphInputs& in,
                     const SimgGraph& target, const LossWeights& w, uint64_t neg_seed,
                     const std::vector<int>* fixed_matching = nullptr);

}  // namespace simg
