// SPDX-License-Identifier: Apache-2.0

#include "simg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace simg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Tensor mse(const Tensor& pred, const Tensor& target) {
  return mean_all(square(sub(pred, target)));
}

// Mean cross-entropy of target distributions against predicted logits.
Tensor cross_entropy(const Tensor& logits, const Tensor& target_dist) {
  Tensor nll = scale(sum_all(mul(target_dist, log_softmax_rows(logits))), -1.0);
  return scale(nll, 1.0 / logits.rows());
}

Tensor scalar_zero() { return Tensor::scalar(0.0); }

}  // namespace

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  for (const auto& row : cost)
    if (static_cast<int>(row.size()) != n) throw std::invalid_argument("cost must be square");
  // Potentials formulation, 1-based internally.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> sigma(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) sigma[p[j] - 1] = j - 1;
  return sigma;
}

std::vector<int> match_lone_pairs(const PredictionBundle& preds, const SimgGraph& target) {
  const auto& lps = target.graph.lp_nodes;
  const int n = static_cast<int>(lps.size());
  std::vector<int> sigma(n);
  // Canonical order keeps each (owner, type) group contiguous.
  int start = 0;
  while (start < n) {
    int end = start + 1;
    while (end < n && lps[end].owner_atom == lps[start].owner_atom &&
           lps[end].lp_type == lps[start].lp_type)
      ++end;
    const int m = end - start;
    // Per-pair cost: character cross-entropy plus occupancy squared error —
    // the same per-node terms the training loss uses, so the matched loss
    // is never larger than the unmatched one.
    std::vector<std::vector<double>> cost(m, std::vector<double>(m, 0.0));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double c = 0.0;
        for (int k = 0; k < 4; ++k) {
          double p = std::max(preds.lp_char_probs.at(start + i, k), 1e-300);
          c -= target.lp_targets[start + j][k] / 100.0 * std::log(p);
        }
        double d = preds.lp_occ.at(start + i, 0) - target.lp_targets[start + j][4];
        c += d * d;
        cost[i][j] = c;
      }
    std::vector<int> local = hungarian(cost);
    for (int i = 0; i < m; ++i) sigma[start + i] = start + local[i];
    start = end;
  }
  return sigma;
}

LossParts total_loss(const PredictionBundle& preds, const GraphInputs& in,
                     const SimgGraph& target, const LossWeights& w, uint64_t neg_seed,
                     const std::vector<int>* fixed_matching) {
  LossParts out;
  const int n_atoms = in.n_atoms, n_lp = in.n_lp, n_bond = in.n_bond;
  if (static_cast<int>(target.graph.lp_nodes.size()) != n_lp ||
      static_cast<int>(target.graph.bond_nodes.size()) != n_bond ||
      static_cast<int>(target.graph.atoms.size()) != n_atoms)
    throw std::invalid_argument("inputs and target built from different graphs");

  out.lp_matching = fixed_matching ? *fixed_matching : match_lone_pairs(preds, target);
  if (static_cast<int>(out.lp_matching.size()) != n_lp)
    throw std::invalid_argument("matching size mismatch");
  const std::vector<int>& sigma = out.lp_matching;
  // inverse: target row r was assigned to prediction node inv[r]
  std::vector<int> inv(n_lp, -1);
  for (int i = 0; i < n_lp; ++i) inv[sigma[i]] = i;

  // --- L_alpha: node-level targets -------------------------------------
  std::vector<Tensor> alpha_terms;
  if (n_atoms > 0) {
    std::vector<double> t, s;
    for (int a = 0; a < n_atoms; ++a)
      for (int c = 0; c < 4; ++c) {
        t.push_back(target.atom_targets[a][c] / kAtomTargetScale[c]);
        s.push_back(1.0 / kAtomTargetScale[c]);
      }
    Tensor scaled_pred = mul(preds.atom_preds, Tensor::from(n_atoms, 4, std::move(s)));
    alpha_terms.push_back(mse(scaled_pred, Tensor::from(n_atoms, 4, std::move(t))));
  }
  if (n_lp > 0) {
    std::vector<double> chars, occ;
    for (int i = 0; i < n_lp; ++i) {
      const auto& row = target.lp_targets[sigma[i]];
      for (int k = 0; k < 4; ++k) chars.push_back(row[k] / 100.0);
      occ.push_back(row[4]);
    }
    alpha_terms.push_back(
        cross_entropy(preds.lp_char_logits, Tensor::from(n_lp, 4, std::move(chars))));
    alpha_terms.push_back(mse(preds.lp_occ, Tensor::from(n_lp, 1, std::move(occ))));
  }
  if (n_bond > 0) {
    std::vector<double> occ;
    for (int b = 0; b < n_bond; ++b) {
      occ.push_back(target.bond_occupancies[b][0]);
      occ.push_back(target.bond_occupancies[b][1]);
    }
    alpha_terms.push_back(mse(preds.bond_occ, Tensor::from(n_bond, 2, std::move(occ))));
  }
  out.l_alpha = scalar_zero();
  for (const Tensor& t : alpha_terms) out.l_alpha = add(out.l_alpha, t);

  // --- L_beta: atom-wise bond targets -----------------------------------
  if (n_bond > 0) {
    // rows: 4 per bond in (bonding,i),(bonding,j),(anti,i),(anti,j) order
    std::vector<double> chars, polcoef;
    for (int b = 0; b < n_bond; ++b)
      for (int side = 0; side < 2; ++side)
        for (int end = 0; end < 2; ++end) {
          int off = side * 12 + end * 6;
          const auto& st = target.bond_side_targets[b];
          for (int k = 0; k < 4; ++k) chars.push_back(st[off + k] / 100.0);
          polcoef.push_back(st[off + 4] / 100.0);
          polcoef.push_back(st[off + 5]);
        }
    Tensor ce =
        cross_entropy(preds.ab_char_logits, Tensor::from(4 * n_bond, 4, std::move(chars)));
    std::vector<double> sc;
    for (int r = 0; r < 4 * n_bond; ++r) {
      sc.push_back(0.01);
      sc.push_back(1.0);
    }
    Tensor scaled = mul(preds.ab_polcoef, Tensor::from(4 * n_bond, 2, std::move(sc)));
    Tensor m = mse(scaled, Tensor::from(4 * n_bond, 2, std::move(polcoef)));
    out.l_beta = add(ce, m);
  } else {
    out.l_beta = scalar_zero();
  }

  // --- L_gamma / L_delta: links and interaction values -------------------
  // Map target interactions onto candidate indices, remapping lone-pair
  // donors through the matching (target lp row r belongs to pred node inv[r]).
  std::map<std::pair<NodeRef, NodeRef>, int> cand_index;
  for (size_t k = 0; k < in.candidates.size(); ++k)
    cand_index[{in.candidates[k].donor, in.candidates[k].acceptor}] = static_cast<int>(k);
  std::vector<int> pos;
  std::vector<std::array<double, 3>> pos_vals;
  for (const InteractionEdge& e : target.interactions) {
    NodeRef donor = e.donor;
    if (donor.kind == NodeKind::LonePair) donor.index = inv[donor.index];
    auto it = cand_index.find({donor, e.acceptor});
    if (it == cand_index.end()) continue;  // outside the candidate gate
    pos.push_back(it->second);
    pos_vals.push_back({e.e2, e.energy_gap, e.fock_element});
  }
  out.n_link_positive = static_cast<int>(pos.size());

  if (!pos.empty()) {
    std::vector<char> is_pos(in.candidates.size(), 0);
    for (int k : pos) is_pos[k] = 1;
    std::vector<int> neg_candidates;
    for (size_t k = 0; k < in.candidates.size(); ++k)
      if (!is_pos[k]) neg_candidates.push_back(static_cast<int>(k));
    Rng rng(neg_seed);
    std::vector<int> neg;
    int want = std::min(static_cast<int>(pos.size()), static_cast<int>(neg_candidates.size()));
    for (int t = 0; t < want; ++t) {
      int pick = rng.uniform_int(0, static_cast<int>(neg_candidates.size()) - 1 - t);
      neg.push_back(neg_candidates[pick]);
      std::swap(neg_candidates[pick], neg_candidates[neg_candidates.size() - 1 - t]);
    }
    out.n_link_negative = static_cast<int>(neg.size());

    std::vector<int> rows = pos;
    rows.insert(rows.end(), neg.begin(), neg.end());
    std::vector<double> labels(rows.size(), 0.0);
    std::fill(labels.begin(), labels.begin() + pos.size(), 1.0);
    Tensor logits = gather_rows(preds.link_logits, rows);
    out.l_gamma = mean_all(bce_with_logits(
        logits, Tensor::from(static_cast<int>(rows.size()), 1, std::move(labels))));

    std::vector<double> vals;
    for (const auto& v : pos_vals) {
      vals.push_back(v[0] / kE2Scale);
      vals.push_back(v[1] / kGapScale);
      vals.push_back(v[2] / kFockScale);
    }
    std::vector<double> sc;
    for (size_t r = 0; r < pos.size(); ++r)
      sc.insert(sc.end(), {1.0 / kE2Scale, 1.0 / kGapScale, 1.0 / kFockScale});
    Tensor ipred = mul(gather_rows(preds.interaction_preds, pos),
                       Tensor::from(static_cast<int>(pos.size()), 3, std::move(sc)));
    out.l_delta =
        mse(ipred, Tensor::from(static_cast<int>(pos.size()), 3, std::move(vals)));
  } else {
    out.l_gamma = scalar_zero();
    out.l_delta = scalar_zero();
  }

  out.total = add(add(scale(out.l_alpha, w.alpha), scale(out.l_beta, w.beta)),
                  add(scale(out.l_gamma, w.gamma), scale(out.l_delta, w.delta)));
  return out;
}

}  // namespace simg
