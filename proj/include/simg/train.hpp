// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "simg/losses.hpp"
#include "simg/models.hpp"

namespace simg {

struct TrainOptions {
  int epochs = 10;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
  LossWeights weights;
};

/// One row of a training curve: epoch index plus the mean loss terms.
struct LossCurveRow {
  int epoch = 0;
  double l_alpha = 0, l_beta = 0, l_gamma = 0, l_delta = 0, total = 0;
};

/// Supervised lone-pair counts: cross-entropy on both heads over all atoms.
// `counts` is parallel to `molecules`.
LonePairModel train_lp_model(const std::vector<Molecule>& molecules,
                             const std::vector<std::vector<LpCounts>>& counts,
                             const LonePairModelConfig& cfg, const TrainOptions& opts,
                             std::vector<LossCurveRow>* curve = nullptr);

// Multitask training over fully labeled graphs; one optimizer step per graph,
// lone-pair matching recomputed every step.
MultitaskModel train_multitask(const std::vector<SimgGraph>& data,
                               const MultitaskModelConfig& cfg, const TrainOptions& opts,
                               std::vector<LossCurveRow>* curve = nullptr);

// Derives per-atom lone-pair counts from a label record.
std::vector<LpCounts> counts_from_record(const Molecule& m, const NboRecord& r);

}  // namespace simg
