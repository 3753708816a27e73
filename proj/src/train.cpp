// SPDX-License-Identifier: Apache-2.0

#include "simg/train.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace simg {

namespace {

Tensor one_hot(const std::vector<int>& labels, int classes) {
  std::vector<double> data(labels.size() * classes, 0.0);
  for (size_t r = 0; r < labels.size(); ++r) {
    int c = std::clamp(labels[r], 0, classes - 1);
    data[r * classes + c] = 1.0;
  }
  return Tensor::from(static_cast<int>(labels.size()), classes, std::move(data));
}

Tensor ce_mean(const Tensor& logits, const Tensor& onehot) {
  Tensor nll = scale(sum_all(mul(onehot, log_softmax_rows(logits))), -1.0);
  return scale(nll, 1.0 / logits.rows());
}

}  // namespace

std::vector<LpCounts> counts_from_record(const Molecule& m, const NboRecord& r) {
  std::vector<LpCounts> counts(m.atoms.size());
  for (const LonePairRecord& lp : r.lone_pairs) {
    if (lp.owner_atom < 0 || lp.owner_atom >= static_cast<int>(m.atoms.size()))
      throw std::invalid_argument("lone pair owner out of range");
    counts[lp.owner_atom].total++;
    if (lp_type(lp.s, lp.p) == 1) counts[lp.owner_atom].type1++;
  }
  return counts;
}

LonePairModel train_lp_model(const std::vector<Molecule>& molecules,
                             const std::vector<std::vector<LpCounts>>& counts,
                             const LonePairModelConfig& cfg, const TrainOptions& opts,
                             std::vector<LossCurveRow>* curve) {
  if (molecules.size() != counts.size())
    throw std::invalid_argument("molecules and counts must be parallel");
  Rng rng(opts.seed);
  LonePairModel model(cfg, rng);
  Adam opt(model.parameters(), {opts.learning_rate});

  struct Prepared {
    MolGraphInputs in;
    Tensor count_onehot, type_onehot;
  };
  std::vector<Prepared> prepared;
  for (size_t k = 0; k < molecules.size(); ++k) {
    Prepared p;
    p.in = prepare_mol_inputs(build_molecular_graph(molecules[k]));
    std::vector<int> total, type1;
    for (const LpCounts& c : counts[k]) {
      total.push_back(c.total);
      type1.push_back(c.type1);
    }
    p.count_onehot = one_hot(total, cfg.k_count);
    p.type_onehot = one_hot(type1, cfg.k_type);
    prepared.push_back(std::move(p));
  }

  std::vector<size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0;
    for (size_t k : order) {
      const Prepared& p = prepared[k];
      auto [count_logits, type_logits] = model.forward(p.in);
      Tensor loss = add(ce_mean(count_logits, p.count_onehot),
                        ce_mean(type_logits, p.type_onehot));
      opt.zero_grad();
      backward(loss);
      opt.step();
      total += loss.item();
    }
    if (curve) {
      LossCurveRow row;
      row.epoch = epoch;
      row.total = prepared.empty() ? 0 : total / prepared.size();
      curve->push_back(row);
    }
  }
  return model;
}

MultitaskModel train_multitask(const std::vector<SimgGraph>& data,
                               const MultitaskModelConfig& cfg, const TrainOptions& opts,
                               std::vector<LossCurveRow>* curve) {
  Rng rng(opts.seed);
  MultitaskModel model(cfg, rng);
  Adam opt(model.parameters(), {opts.learning_rate});

  std::vector<GraphInputs> inputs;
  for (const SimgGraph& g : data) inputs.push_back(prepare_graph_inputs(g.graph));

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  uint64_t step = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    LossCurveRow row;
    row.epoch = epoch;
    for (size_t k : order) {
      PredictionBundle preds = model.forward(inputs[k], opts.seed * 1315423911ull + step);
      LossParts parts =
          total_loss(preds, inputs[k], data[k], opts.weights, opts.seed + step);
      opt.zero_grad();
      backward(parts.total);
      opt.step();
      row.l_alpha += parts.l_alpha.item();
      row.l_beta += parts.l_beta.item();
      row.l_gamma += parts.l_gamma.item();
      row.l_delta += parts.l_delta.item();
      row.total += parts.total.item();
      ++step;
    }
    if (curve) {
      double n = data.empty() ? 1.0 : static_cast<double>(data.size());
      row.l_alpha /= n;
      row.l_beta /= n;
      row.l_gamma /= n;
      row.l_delta /= n;
      row.total /= n;
      curve->push_back(row);
    }
  }
  return model;
}

}  // namespace simg
