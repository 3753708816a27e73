// SPDX-License-Identifier: Apache-2.0

#include "simg/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace simg {

using nlohmann::json;

namespace {

// Kaiming-style init for a linear layer.
Tensor make_weight(int in, int out, Rng& rng) {
  return Tensor::randn(in, out, rng, std::sqrt(2.0 / in), true);
}

Tensor make_bias(int out) { return Tensor::zeros(1, out, true); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

double vec_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

// --- config serialization --------------------------------------------------

std::string lp_config_to_json(const LonePairModelConfig& c) {
  json j = {{"layers", c.layers},   {"hidden", c.hidden},  {"agg_sum", c.agg_sum},
            {"agg_mean", c.agg_mean}, {"agg_max", c.agg_max}, {"k_count", c.k_count},
            {"k_type", c.k_type}};
  return j.dump(2) + "\n";
}

LonePairModelConfig lp_config_from_json(const std::string& text) {
  json j = json::parse(text);
  LonePairModelConfig c;
  c.layers = j.value("layers", c.layers);
  c.hidden = j.value("hidden", c.hidden);
  c.agg_sum = j.value("agg_sum", c.agg_sum);
  c.agg_mean = j.value("agg_mean", c.agg_mean);
  c.agg_max = j.value("agg_max", c.agg_max);
  c.k_count = j.value("k_count", c.k_count);
  c.k_type = j.value("k_type", c.k_type);
  return c;
}

std::string mt_config_to_json(const MultitaskModelConfig& c) {
  json j = {{"blocks", c.blocks},
            {"heads", c.heads},
            {"width", c.width},
            {"d_e", c.d_e},
            {"d_h", c.d_h},
            {"evolver_blocks", c.evolver_blocks},
            {"head_hidden", c.head_hidden},
            {"link_threshold", c.link_threshold},
            {"zero_hidden_init", c.zero_hidden_init}};
  return j.dump(2) + "\n";
}

MultitaskModelConfig mt_config_from_json(const std::string& text) {
  json j = json::parse(text);
  MultitaskModelConfig c;
  c.blocks = j.value("blocks", c.blocks);
  c.heads = j.value("heads", c.heads);
  c.width = j.value("width", c.width);
  c.d_e = j.value("d_e", c.d_e);
  c.d_h = j.value("d_h", c.d_h);
  c.evolver_blocks = j.value("evolver_blocks", c.evolver_blocks);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.link_threshold = j.value("link_threshold", c.link_threshold);
  c.zero_hidden_init = j.value("zero_hidden_init", c.zero_hidden_init);
  return c;
}

// --- graph preparation -------------------------------------------------

MolGraphInputs prepare_mol_inputs(const ExtendedGraph& g) {
  MolGraphInputs in;
  in.n_atoms = static_cast<int>(g.atoms.size());
  const int feat = kNumElements + 1;
  std::vector<double> x(static_cast<size_t>(in.n_atoms) * feat, 0.0);
  for (int a = 0; a < in.n_atoms; ++a) {
    x[static_cast<size_t>(a) * feat + g.atoms[a].element] = 1.0;
    x[static_cast<size_t>(a) * feat + kNumElements] = g.charge;
  }
  in.x = Tensor::from(in.n_atoms, feat, std::move(x));
  std::vector<double> ef;
  for (const AtomAtomEdge& e : g.edges_atom_atom) {
    in.src.push_back(e.i);
    in.dst.push_back(e.j);
    ef.push_back(e.order);
    ef.push_back(e.length);
    in.src.push_back(e.j);
    in.dst.push_back(e.i);
    ef.push_back(e.order);
    ef.push_back(e.length);
  }
  in.edge_feat = Tensor::from(static_cast<int>(in.src.size()), 2, std::move(ef));
  return in;
}

GraphInputs prepare_graph_inputs(const ExtendedGraph& g) {
  GraphInputs in;
  in.n_atoms = static_cast<int>(g.atoms.size());
  in.n_lp = static_cast<int>(g.lp_nodes.size());
  in.n_bond = static_cast<int>(g.bond_nodes.size());
  const int n = in.n_atoms + in.n_lp + in.n_bond;
  // Node features: kind one-hot(3) | element one-hot | charge | lp_type | is_pi
  const int feat = 3 + kNumElements + 3;
  std::vector<double> x(static_cast<size_t>(n) * feat, 0.0);
  auto row = [&](int node) { return x.begin() + static_cast<size_t>(node) * feat; };
  for (int a = 0; a < in.n_atoms; ++a) {
    auto r = row(a);
    r[0] = 1.0;
    r[3 + g.atoms[a].element] = 1.0;
    r[3 + kNumElements] = g.charge;
  }
  for (int l = 0; l < in.n_lp; ++l) {
    auto r = row(in.n_atoms + l);
    r[1] = 1.0;
    r[3 + kNumElements + 1] = g.lp_nodes[l].lp_type;
  }
  for (int b = 0; b < in.n_bond; ++b) {
    auto r = row(in.n_atoms + in.n_lp + b);
    r[2] = 1.0;
    r[3 + kNumElements + 2] = g.bond_nodes[b].kind == BondKind::Pi ? 1.0 : 0.0;
  }
  in.x = Tensor::from(n, feat, std::move(x));

  // Edge features: order | length | one-hot(aa, ab, alp, self).
  std::vector<double> ef;
  auto push_edge = [&](int s, int d, double order, double length, int type) {
    in.src.push_back(s);
    in.dst.push_back(d);
    double tf[4] = {0, 0, 0, 0};
    tf[type] = 1.0;
    ef.insert(ef.end(), {order, length, tf[0], tf[1], tf[2], tf[3]});
  };
  for (const AtomAtomEdge& e : g.edges_atom_atom) {
    push_edge(e.i, e.j, e.order, e.length, 0);
    push_edge(e.j, e.i, e.order, e.length, 0);
  }
  for (const auto& [a, b] : g.edges_atom_bond) {
    push_edge(a, in.n_atoms + in.n_lp + b, 0, 0, 1);
    push_edge(in.n_atoms + in.n_lp + b, a, 0, 0, 1);
  }
  for (const auto& [a, l] : g.edges_atom_lp) {
    push_edge(a, in.n_atoms + l, 0, 0, 2);
    push_edge(in.n_atoms + l, a, 0, 0, 2);
  }
  for (int v = 0; v < n; ++v) push_edge(v, v, 0, 0, 3);
  in.edge_feat = Tensor::from(static_cast<int>(in.src.size()), 6, std::move(ef));

  for (int l = 0; l < in.n_lp; ++l) in.hidden_nodes.push_back(in.n_atoms + l);
  for (int b = 0; b < in.n_bond; ++b) in.hidden_nodes.push_back(in.n_atoms + in.n_lp + b);

  for (int b = 0; b < in.n_bond; ++b) {
    const BondPairNode& bn = g.bond_nodes[b];
    in.ab_atom_rows.insert(in.ab_atom_rows.end(),
                           {bn.atom_i, bn.atom_j, bn.atom_i, bn.atom_j});
  }

  // Candidate link pairs.
  auto dmat = atom_distance_matrix(g);
  auto node_graph_dist = [&](NodeRef p, NodeRef q) {
    auto proj = [&](NodeRef r) -> std::vector<int> {
      if (r.kind == NodeKind::BondPair)
        return {g.bond_nodes[r.index].atom_i, g.bond_nodes[r.index].atom_j};
      return {anchor_atom(g, r)};
    };
    int best = kInfiniteDistance;
    for (int u : proj(p))
      for (int v : proj(q))
        if (dmat[u][v] < best) best = dmat[u][v];
    return best;
  };
  std::vector<NodeRef> donors;
  for (int l = 0; l < in.n_lp; ++l) donors.push_back({NodeKind::LonePair, l});
  for (int b = 0; b < in.n_bond; ++b) donors.push_back({NodeKind::BondPair, b});
  std::vector<double> pf;
  for (const NodeRef& donor : donors) {
    auto dpos = anchor_position(g, donor);
    for (int b = 0; b < in.n_bond; ++b) {
      NodeRef acceptor{NodeKind::BondPair, b};
      if (donor == acceptor) continue;
      double spatial = vec_distance(dpos, anchor_position(g, acceptor));
      int gd = node_graph_dist(donor, acceptor);
      if (gd > 6 && spatial > 4.0) continue;
      CandidatePair cp;
      cp.donor = donor;
      cp.acceptor = acceptor;
      cp.spatial_distance = spatial;
      cp.graph_dist = std::min(gd, 8);
      in.candidates.push_back(cp);
      // features: spatial | graph dist | donor kind one-hot(lp, sigma, pi) |
      // acceptor pi flag one-hot(sigma*, pi*)
      double dk[3] = {0, 0, 0};
      if (donor.kind == NodeKind::LonePair) dk[0] = 1;
      else if (g.bond_nodes[donor.index].kind == BondKind::Sigma) dk[1] = 1;
      else dk[2] = 1;
      double ak[2] = {0, 0};
      ak[g.bond_nodes[b].kind == BondKind::Pi ? 1 : 0] = 1;
      pf.insert(pf.end(), {spatial, static_cast<double>(cp.graph_dist), dk[0], dk[1], dk[2],
                           ak[0], ak[1]});
      in.cand_donor_hidden.push_back(donor.kind == NodeKind::LonePair ? donor.index
                                                                      : in.n_lp + donor.index);
      in.cand_acceptor_hidden.push_back(in.n_lp + b);
    }
  }
  in.pair_feat = Tensor::from(static_cast<int>(in.candidates.size()), 7, std::move(pf));
  return in;
}

// --- lone-pair model -------------------------------------------------------

LonePairModel::LonePairModel(LonePairModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  if (cfg_.hidden <= 0 || cfg_.layers <= 0) throw std::invalid_argument("bad lp model config");
  if (!cfg_.agg_sum && !cfg_.agg_mean && !cfg_.agg_max)
    throw std::invalid_argument("lp model needs at least one aggregator");
  const int feat = kNumElements + 1;
  const int h = cfg_.hidden;
  int n_agg = (cfg_.agg_sum ? 1 : 0) + (cfg_.agg_mean ? 1 : 0) + (cfg_.agg_max ? 1 : 0);
  w_embed_ = make_weight(feat, h, rng);
  b_embed_ = make_bias(h);
  for (int l = 0; l < cfg_.layers; ++l) {
    w_msg_.push_back(make_weight(h + 2, h, rng));
    b_msg_.push_back(make_bias(h));
    w_upd_.push_back(make_weight(h + n_agg * h, h, rng));
    b_upd_.push_back(make_bias(h));
  }
  w_mlp1_ = make_weight(h + feat, h, rng);
  b_mlp1_ = make_bias(h);
  w_mlp2_ = make_weight(h, h, rng);
  b_mlp2_ = make_bias(h);
  w_count_ = make_weight(h, cfg_.k_count, rng);
  b_count_ = make_bias(cfg_.k_count);
  w_type_ = make_weight(h, cfg_.k_type, rng);
  b_type_ = make_bias(cfg_.k_type);
}

std::pair<Tensor, Tensor> LonePairModel::forward(const MolGraphInputs& in) const {
  Tensor h = relu(linear(in.x, w_embed_, b_embed_));
  for (int l = 0; l < cfg_.layers; ++l) {
    Tensor msg;
    std::vector<Tensor> aggs;
    if (!in.src.empty()) {
      Tensor hsrc = gather_rows(h, in.src);
      msg = linear(concat_cols({hsrc, in.edge_feat}), w_msg_[l], b_msg_[l]);
      if (cfg_.agg_sum) aggs.push_back(segment_sum(msg, in.dst, in.n_atoms));
      if (cfg_.agg_mean) aggs.push_back(segment_mean(msg, in.dst, in.n_atoms));
      if (cfg_.agg_max) aggs.push_back(segment_max(msg, in.dst, in.n_atoms));
    } else {
      int n_agg = (cfg_.agg_sum ? 1 : 0) + (cfg_.agg_mean ? 1 : 0) + (cfg_.agg_max ? 1 : 0);
      for (int k = 0; k < n_agg; ++k) aggs.push_back(Tensor::zeros(in.n_atoms, cfg_.hidden));
    }
    std::vector<Tensor> parts = {h};
    for (auto& a : aggs) parts.push_back(a);
    Tensor upd = relu(linear(concat_cols(parts), w_upd_[l], b_upd_[l]));
    h = add(h, upd);  // residual
  }
  Tensor z = relu(linear(concat_cols({h, in.x}), w_mlp1_, b_mlp1_));
  z = relu(linear(z, w_mlp2_, b_mlp2_));
  return {linear(z, w_count_, b_count_), linear(z, w_type_, b_type_)};
}

std::vector<LpCounts> LonePairModel::predict_counts(const MolGraphInputs& in,
                                                    std::vector<std::string>* warnings) const {
  auto [count_logits, type_logits] = forward(in);
  std::vector<LpCounts> out(in.n_atoms);
  for (int a = 0; a < in.n_atoms; ++a) {
    auto argmax = [&](const Tensor& t, int k) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (t.at(a, c) > t.at(a, best)) best = c;
      return best;
    };
    out[a].total = argmax(count_logits, cfg_.k_count);
    out[a].type1 = argmax(type_logits, cfg_.k_type);
    if (out[a].type1 > out[a].total) {
      if (warnings)
        warnings->push_back("atom " + std::to_string(a) + ": type-1 count " +
                            std::to_string(out[a].type1) + " clamped to total " +
                            std::to_string(out[a].total));
      out[a].type1 = out[a].total;
    }
  }
  return out;
}

std::vector<Tensor> LonePairModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> LonePairModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out = {
      {"embed.w", w_embed_}, {"embed.b", b_embed_}, {"mlp1.w", w_mlp1_}, {"mlp1.b", b_mlp1_},
      {"mlp2.w", w_mlp2_},   {"mlp2.b", b_mlp2_},   {"count.w", w_count_},
      {"count.b", b_count_}, {"type.w", w_type_},   {"type.b", b_type_}};
  for (int l = 0; l < cfg_.layers; ++l) {
    std::string p = "layer." + std::to_string(l) + ".";
    out.emplace_back(p + "msg.w", w_msg_[l]);
    out.emplace_back(p + "msg.b", b_msg_[l]);
    out.emplace_back(p + "upd.w", w_upd_[l]);
    out.emplace_back(p + "upd.b", b_upd_[l]);
  }
  return out;
}

namespace {

void load_named(const std::vector<std::pair<std::string, Tensor>>& named,
                const Checkpoint& ckpt) {
  for (const auto& [name, t] : named) {
    const Tensor* src = ckpt.find(name);
    if (!src) throw std::runtime_error("checkpoint missing tensor '" + name + "'");
    if (src->rows() != t.rows() || src->cols() != t.cols())
      throw std::runtime_error("checkpoint shape mismatch for '" + name + "'");
    const_cast<Tensor&>(t).raw() = src->values();
  }
}

}  // namespace

void LonePairModel::load(const Checkpoint& ckpt) { load_named(named_parameters(), ckpt); }

// --- multitask model -------------------------------------------------------

Tensor MultitaskModel::Mlp::run(const Tensor& x) const {
  return add(matmul(relu(add(matmul(x, w1), b1)), w2), b2);
}

MultitaskModel::Mlp MultitaskModel::make_mlp(int in, int hidden, int out, Rng& rng) {
  Mlp m;
  m.w1 = make_weight(in, hidden, rng);
  m.b1 = make_bias(hidden);
  m.w2 = make_weight(hidden, out, rng);
  m.b2 = make_bias(out);
  return m;
}

MultitaskModel::MultitaskModel(MultitaskModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  if (cfg_.width % cfg_.heads != 0)
    throw std::invalid_argument("width must be divisible by heads");
  if (cfg_.link_threshold <= 0.0 || cfg_.link_threshold >= 1.0)
    throw std::invalid_argument("link threshold must be in (0,1)");
  if (cfg_.evolver_blocks < 0) throw std::invalid_argument("evolver block count must be >= 0");
  const int feat = 3 + kNumElements + 3;
  const int hw = cfg_.width / cfg_.heads;
  int block_in = feat;
  for (int b = 0; b < cfg_.blocks; ++b) {
    std::vector<Tensor> ws, as;
    for (int h = 0; h < cfg_.heads; ++h) {
      ws.push_back(make_weight(block_in, hw, rng));
      as.push_back(make_weight(2 * hw + 6, 1, rng));
    }
    gat_w_.push_back(std::move(ws));
    gat_a_.push_back(std::move(as));
    block_in = cfg_.width;
  }
  const int concat_width = feat + cfg_.blocks * cfg_.width;
  w_embed_out_ = make_weight(concat_width, cfg_.d_e, rng);
  b_embed_out_ = make_bias(cfg_.d_e);

  const int d_e = cfg_.d_e, d_h = cfg_.d_h, hh = cfg_.head_hidden;
  const int pred_width = 5;  // lp: 4 char logits + occ; bond rows zero-padded
  net_a_ = make_mlp(pred_width + d_h, hh, d_h, rng);
  net_b_ = make_mlp(d_h, hh, d_h, rng);
  net_c_ = make_mlp(2 * d_h, hh, d_h, rng);
  head_atom_ = make_mlp(d_e, hh, 4, rng);
  head_lp_ = make_mlp(d_e + d_h, hh, 5, rng);
  head_bond_ = make_mlp(d_e + d_h, hh, 2, rng);
  head_ab_ = make_mlp(d_e + (d_e + d_h) + 4, hh, 6, rng);
  head_link_ = make_mlp(2 * (d_e + d_h) + 7, hh, 1, rng);
  head_inter_ = make_mlp(2 * (d_e + d_h) + 7, hh, 3, rng);
}

Tensor MultitaskModel::encode(const GraphInputs& in) const {
  const int n = in.x.rows();
  Tensor h = in.x;
  std::vector<Tensor> collected = {in.x};
  for (int b = 0; b < cfg_.blocks; ++b) {
    std::vector<Tensor> head_outs;
    for (int hd = 0; hd < cfg_.heads; ++hd) {
      Tensor wh = matmul(h, gat_w_[b][hd]);
      Tensor wh_src = gather_rows(wh, in.src);
      Tensor wh_dst = gather_rows(wh, in.dst);
      Tensor score = leaky_relu(
          matmul(concat_cols({wh_src, wh_dst, in.edge_feat}), gat_a_[b][hd]));
      Tensor alpha = segment_softmax(score, in.dst);
      Tensor weighted = mul(wh_src, alpha);
      head_outs.push_back(segment_sum(weighted, in.dst, n));
    }
    h = relu(concat_cols(head_outs));
    collected.push_back(h);
  }
  return linear(concat_cols(collected), w_embed_out_, b_embed_out_);
}

PredictionBundle MultitaskModel::forward(const GraphInputs& in, uint64_t seed,
                                         bool record_trajectory) const {
  PredictionBundle out;
  Tensor emb = encode(in);
  const int n_h = in.n_lp + in.n_bond;

  Tensor z;  // final per-hidden-node representation [emb | h]
  if (n_h > 0) {
    Rng rng(seed);
    Tensor h = cfg_.zero_hidden_init ? Tensor::zeros(n_h, cfg_.d_h)
                                     : Tensor::randn(n_h, cfg_.d_h, rng, 1.0);
    Tensor emb_h = gather_rows(emb, in.hidden_nodes);
    // Intermediate per-node predictions given zs = [emb_h | h], padded to a
    // unified 5-wide layout (lp: 4 char logits + occ; bond: 2 occ + zeros).
    auto intermediate_preds = [&](const Tensor& zs) {
      std::vector<Tensor> parts;
      if (in.n_lp > 0) parts.push_back(head_lp_.run(slice_rows(zs, 0, in.n_lp)));
      if (in.n_bond > 0) {
        Tensor pb = head_bond_.run(slice_rows(zs, in.n_lp, in.n_bond));
        parts.push_back(concat_cols({pb, Tensor::zeros(in.n_bond, 3)}));
      }
      return concat_rows(parts);
    };
    if (record_trajectory) out.hidden_trajectory.push_back(h.values());
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg_.d_h));
    for (int step = 0; step < cfg_.evolver_blocks; ++step) {
      Tensor zs = concat_cols({emb_h, h});
      Tensor pred = intermediate_preds(zs);
      Tensor q = net_a_.run(concat_cols({pred, h}));
      Tensor kv = net_b_.run(h);
      Tensor w = softmax_rows(scale(matmul(q, transpose(kv)), inv_sqrt_dh));
      Tensor ctx_vec = matmul(w, kv);
      h = add(h, net_c_.run(concat_cols({ctx_vec, h})));
      if (record_trajectory) out.hidden_trajectory.push_back(h.values());
    }
    z = concat_cols({emb_h, h});
  } else {
    z = Tensor::zeros(0, cfg_.d_e + cfg_.d_h);
  }

  // Node-level outputs from the final hidden states.
  if (in.n_atoms > 0) {
    Tensor ap = head_atom_.run(slice_rows(emb, 0, in.n_atoms));
    std::vector<double> sc(4);
    for (int c = 0; c < 4; ++c) sc[c] = kAtomTargetScale[c];
    out.atom_preds = mul(ap, Tensor::from(1, 4, std::move(sc)));
  }
  if (in.n_lp > 0) {
    Tensor plp = head_lp_.run(slice_rows(z, 0, in.n_lp));
    out.lp_char_logits = slice_cols(plp, 0, 4);
    out.lp_char_probs = softmax_rows(out.lp_char_logits);
    out.lp_occ = slice_cols(plp, 4, 1);
  } else {
    out.lp_char_logits = Tensor::zeros(0, 4);
    out.lp_char_probs = Tensor::zeros(0, 4);
    out.lp_occ = Tensor::zeros(0, 1);
  }
  if (in.n_bond > 0) {
    out.bond_occ = head_bond_.run(slice_rows(z, in.n_lp, in.n_bond));
  } else {
    out.bond_occ = Tensor::zeros(0, 2);
  }

  // Atom-wise bond targets: 4 rows per bond node,
  // (side: bonding, anti) x (end: atom_i, atom_j).
  if (in.n_bond > 0) {
    std::vector<int> bond_rows;
    std::vector<double> flags;
    for (int b = 0; b < in.n_bond; ++b)
      for (int side = 0; side < 2; ++side)
        for (int end = 0; end < 2; ++end) {
          bond_rows.push_back(in.n_lp + b);
          flags.insert(flags.end(), {side == 0 ? 1.0 : 0.0, side == 1 ? 1.0 : 0.0,
                                     end == 0 ? 1.0 : 0.0, end == 1 ? 1.0 : 0.0});
        }
    Tensor atom_emb = gather_rows(emb, in.ab_atom_rows);
    Tensor bond_z = gather_rows(z, bond_rows);
    Tensor fl = Tensor::from(4 * in.n_bond, 4, std::move(flags));
    Tensor abp = head_ab_.run(concat_cols({atom_emb, bond_z, fl}));
    out.ab_char_logits = slice_cols(abp, 0, 4);
    out.ab_char_probs = softmax_rows(out.ab_char_logits);
    Tensor polcoef = slice_cols(abp, 4, 2);
    out.ab_polcoef = mul(polcoef, Tensor::from(1, 2, {100.0, 1.0}));
  } else {
    out.ab_char_logits = Tensor::zeros(0, 4);
    out.ab_char_probs = Tensor::zeros(0, 4);
    out.ab_polcoef = Tensor::zeros(0, 2);
  }

  // Link and interaction heads.
  const int n_cand = static_cast<int>(in.candidates.size());
  if (n_cand > 0) {
    Tensor zd = gather_rows(z, in.cand_donor_hidden);
    Tensor za = gather_rows(z, in.cand_acceptor_hidden);
    Tensor pin = concat_cols({zd, za, in.pair_feat});
    out.link_logits = head_link_.run(pin);
    Tensor ip = head_inter_.run(pin);
    out.interaction_preds = mul(ip, Tensor::from(1, 3, {kE2Scale, kGapScale, kFockScale}));
  } else {
    out.link_logits = Tensor::zeros(0, 1);
    out.interaction_preds = Tensor::zeros(0, 3);
  }
  return out;
}

std::vector<Tensor> MultitaskModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> MultitaskModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (int b = 0; b < cfg_.blocks; ++b)
    for (int h = 0; h < cfg_.heads; ++h) {
      std::string p = "gat." + std::to_string(b) + "." + std::to_string(h) + ".";
      out.emplace_back(p + "w", gat_w_[b][h]);
      out.emplace_back(p + "a", gat_a_[b][h]);
    }
  out.emplace_back("embed_out.w", w_embed_out_);
  out.emplace_back("embed_out.b", b_embed_out_);
  auto add_mlp = [&out](const char* name, const Mlp& m) {
    std::string p = std::string(name) + ".";
    out.emplace_back(p + "w1", m.w1);
    out.emplace_back(p + "b1", m.b1);
    out.emplace_back(p + "w2", m.w2);
    out.emplace_back(p + "b2", m.b2);
  };
  add_mlp("net_a", net_a_);
  add_mlp("net_b", net_b_);
  add_mlp("net_c", net_c_);
  add_mlp("head_atom", head_atom_);
  add_mlp("head_lp", head_lp_);
  add_mlp("head_bond", head_bond_);
  add_mlp("head_ab", head_ab_);
  add_mlp("head_link", head_link_);
  add_mlp("head_inter", head_inter_);
  return out;
}

void MultitaskModel::load(const Checkpoint& ckpt) { load_named(named_parameters(), ckpt); }

// --- pipeline -------------------------------------------------------------

SimgGraph predict_on_extended(const ExtendedGraph& eg, const MultitaskModel& mt_model,
                              uint64_t seed, double tau) {
  GraphInputs gi = prepare_graph_inputs(eg);
  PredictionBundle b = mt_model.forward(gi, seed);
  SimgGraph g;
  g.graph = eg;
  for (int a = 0; a < gi.n_atoms; ++a)
    g.atom_targets.push_back(
        {b.atom_preds.at(a, 0), b.atom_preds.at(a, 1), b.atom_preds.at(a, 2),
         b.atom_preds.at(a, 3)});
  for (int l = 0; l < gi.n_lp; ++l) {
    double occ = std::clamp(b.lp_occ.at(l, 0), 1e-6, 2.0);
    g.lp_targets.push_back({b.lp_char_probs.at(l, 0) * 100.0, b.lp_char_probs.at(l, 1) * 100.0,
                            b.lp_char_probs.at(l, 2) * 100.0, b.lp_char_probs.at(l, 3) * 100.0,
                            occ});
  }
  for (int bn = 0; bn < gi.n_bond; ++bn) {
    g.bond_occupancies.push_back({b.bond_occ.at(bn, 0), b.bond_occ.at(bn, 1)});
    std::array<double, 24> side{};
    for (int s = 0; s < 2; ++s)
      for (int e = 0; e < 2; ++e) {
        int row = bn * 4 + s * 2 + e;
        int off = s * 12 + e * 6;
        for (int c = 0; c < 4; ++c) side[off + c] = b.ab_char_probs.at(row, c) * 100.0;
        side[off + 4] = b.ab_polcoef.at(row, 0);
        side[off + 5] = b.ab_polcoef.at(row, 1);
      }
    g.bond_side_targets.push_back(side);
  }
  for (size_t k = 0; k < gi.candidates.size(); ++k) {
    double logit = b.link_logits.at(static_cast<int>(k), 0);
    double p = 1.0 / (1.0 + std::exp(-logit));
    if (p > tau) {
      InteractionEdge e;
      e.donor = gi.candidates[k].donor;
      e.acceptor = gi.candidates[k].acceptor;
      e.e2 = std::max(0.0, b.interaction_preds.at(static_cast<int>(k), 0));
      e.energy_gap = b.interaction_preds.at(static_cast<int>(k), 1);
      e.fock_element = b.interaction_preds.at(static_cast<int>(k), 2);
      g.interactions.push_back(e);
    }
  }
  return g;
}

PredictOutput predict_simg(const Molecule& m, const LonePairModel& lp_model,
                           const MultitaskModel& mt_model, uint64_t seed, double tau) {
  PredictOutput out;
  ExtendedGraph molecular = build_molecular_graph(m);
  MolGraphInputs mi = prepare_mol_inputs(molecular);
  std::vector<LpCounts> counts = lp_model.predict_counts(mi, &out.warnings);
  ExtendedGraph eg = build_extended_graph(molecular, counts);
  out.simg = predict_on_extended(eg, mt_model, seed, tau);
  return out;
}

}  // namespace simg
