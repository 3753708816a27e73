// SPDX-License-Identifier: Apache-2.0

#include "simg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <tuple>

namespace simg {

namespace {

double distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

int lp_type(double s_char, double p_char) { return p_char - s_char > 80.0 ? 1 : 0; }

ExtendedGraph build_molecular_graph(const Molecule& m) {
  ExtendedGraph g;
  g.atoms = m.atoms;
  g.charge = m.charge;
  for (const Bond& b : m.bonds) {
    AtomAtomEdge e;
    e.i = b.i;
    e.j = b.j;
    e.order = b.order;
    e.length = distance(m.atoms[b.i].position, m.atoms[b.j].position);
    g.edges_atom_atom.push_back(e);
  }
  std::sort(g.edges_atom_atom.begin(), g.edges_atom_atom.end(),
            [](const AtomAtomEdge& a, const AtomAtomEdge& b) {
              return std::tie(a.i, a.j) < std::tie(b.i, b.j);
            });
  return g;
}

ExtendedGraph build_extended_graph(const ExtendedGraph& molecular,
                                   const std::vector<LpCounts>& lp_counts) {
  if (lp_counts.size() != molecular.atoms.size())
    throw GraphError("lp_counts size does not match atom count");
  ExtendedGraph g = molecular;
  g.lp_nodes.clear();
  g.bond_nodes.clear();
  g.edges_atom_bond.clear();
  g.edges_atom_lp.clear();

  for (size_t a = 0; a < lp_counts.size(); ++a) {
    const LpCounts& c = lp_counts[a];
    if (c.type1 < 0 || c.type1 > c.total || c.total > 4)
      throw GraphError("lone pair counts out of range for atom " + std::to_string(a));
  }
  // Canonical lp order: (owner_atom, lp_type, insertion rank). Type-0 first.
  for (size_t a = 0; a < lp_counts.size(); ++a) {
    const LpCounts& c = lp_counts[a];
    for (int k = 0; k < c.total - c.type1; ++k)
      g.lp_nodes.push_back({static_cast<int>(a), 0});
    for (int k = 0; k < c.type1; ++k) g.lp_nodes.push_back({static_cast<int>(a), 1});
  }
  for (size_t n = 0; n < g.lp_nodes.size(); ++n)
    g.edges_atom_lp.emplace_back(g.lp_nodes[n].owner_atom, static_cast<int>(n));

  // One sigma node per bond plus (order - 1) pi nodes with pi_rank 0..order-2,
  // sorted by (i, j, sigma < pi, pi_rank). edges_atom_atom are already sorted
  // by (i, j).
  for (const AtomAtomEdge& e : g.edges_atom_atom) {
    g.bond_nodes.push_back({e.i, e.j, BondKind::Sigma, 0});
    for (int r = 0; r < e.order - 1; ++r) g.bond_nodes.push_back({e.i, e.j, BondKind::Pi, r});
  }
  for (size_t n = 0; n < g.bond_nodes.size(); ++n) {
    g.edges_atom_bond.emplace_back(g.bond_nodes[n].atom_i, static_cast<int>(n));
    g.edges_atom_bond.emplace_back(g.bond_nodes[n].atom_j, static_cast<int>(n));
  }
  return g;
}

namespace {

// Locates the bond node matching an orbital reference.
int resolve_bond_node(const ExtendedGraph& g, const OrbitalRef& ref) {
  int i = std::min(ref.atom_i, ref.atom_j);
  int j = std::max(ref.atom_i, ref.atom_j);
  BondKind kind = ref.kind == OrbKind::Sigma ? BondKind::Sigma : BondKind::Pi;
  int rank = ref.kind == OrbKind::Sigma ? 0 : ref.ordinal;
  for (size_t n = 0; n < g.bond_nodes.size(); ++n) {
    const BondPairNode& b = g.bond_nodes[n];
    if (b.atom_i == i && b.atom_j == j && b.kind == kind && b.pi_rank == rank)
      return static_cast<int>(n);
  }
  throw GraphError("unresolvable bond orbital reference " + std::to_string(i) + "-" +
                   std::to_string(j));
}

// Locates the lp node for (owner atom, ordinal) where the ordinal counts the
// atom's lone pairs in record order (canonical: sorted by type then
// descending occupancy within type).
int resolve_lp_node(const ExtendedGraph& g, int owner, int ordinal) {
  int seen = 0;
  for (size_t n = 0; n < g.lp_nodes.size(); ++n) {
    if (g.lp_nodes[n].owner_atom != owner) continue;
    if (seen == ordinal) return static_cast<int>(n);
    ++seen;
  }
  throw GraphError("unresolvable lone pair reference atom " + std::to_string(owner) +
                   " ordinal " + std::to_string(ordinal));
}

}  // namespace

SimgGraph build_simg(const ExtendedGraph& eg, const NboRecord& record) {
  if (record.atom_npa.size() != eg.atoms.size())
    throw GraphError("NPA entries do not match atom count");

  SimgGraph g;
  g.graph = eg;
  for (const AtomNpa& a : record.atom_npa)
    g.atom_targets.push_back(
        {a.natural_charge, a.core_electrons, a.valence_electrons, a.total_electrons});

  // Group lone pair records per (owner, lp_type), sort each group by
  // descending occupancy, then assign to that owner's nodes in canonical
  // order.
  std::map<std::pair<int, int>, std::vector<const LonePairRecord*>> groups;
  for (const LonePairRecord& lp : record.lone_pairs)
    groups[{lp.owner_atom, lp_type(lp.s, lp.p)}].push_back(&lp);
  for (auto& [key, vec] : groups)
    std::stable_sort(vec.begin(), vec.end(), [](const LonePairRecord* a, const LonePairRecord* b) {
      return a->occupancy > b->occupancy;
    });

  // Per-lp-node ordinal within the record, used to resolve lone pair
  // interaction references afterwards.
  std::vector<int> lp_record_index(eg.lp_nodes.size(), -1);
  std::map<std::pair<int, int>, size_t> cursor;
  for (size_t n = 0; n < eg.lp_nodes.size(); ++n) {
    const LpNode& node = eg.lp_nodes[n];
    auto key = std::make_pair(node.owner_atom, node.lp_type);
    auto it = groups.find(key);
    size_t& c = cursor[key];
    if (it == groups.end() || c >= it->second.size())
      throw GraphError("record lone pairs do not match graph for atom " +
                       std::to_string(node.owner_atom));
    const LonePairRecord* lp = it->second[c++];
    g.lp_targets.push_back({lp->s, lp->p, lp->d, lp->f, lp->occupancy});
    lp_record_index[n] = static_cast<int>(lp - record.lone_pairs.data());
  }
  for (const auto& [key, vec] : groups) {
    if (cursor[key] != vec.size())
      throw GraphError("record has extra lone pairs for atom " + std::to_string(key.first));
  }

  // Bond orbital records must cover the bond-node multiset exactly.
  std::vector<char> used(record.bond_orbitals.size(), 0);
  for (const BondPairNode& node : eg.bond_nodes) {
    int found = -1;
    int rank = 0;
    for (size_t k = 0; k < record.bond_orbitals.size(); ++k) {
      const BondOrbitalRecord& bo = record.bond_orbitals[k];
      int i = std::min(bo.atom_i, bo.atom_j), j = std::max(bo.atom_i, bo.atom_j);
      if (i != node.atom_i || j != node.atom_j || bo.kind != node.kind) continue;
      if (used[k]) {
        ++rank;
        continue;
      }
      if (node.kind == BondKind::Pi && rank != node.pi_rank) {
        ++rank;
        continue;
      }
      found = static_cast<int>(k);
      break;
    }
    if (found < 0)
      throw GraphError("record bond orbitals do not match graph for bond " +
                       std::to_string(node.atom_i) + "-" + std::to_string(node.atom_j));
    used[found] = 1;
    const BondOrbitalRecord& bo = record.bond_orbitals[found];
    g.bond_occupancies.push_back({bo.bonding.occupancy, bo.antibonding.occupancy});
    std::array<double, 24> side{};
    int c = 0;
    for (const BondOrbitalSide* s : {&bo.bonding, &bo.antibonding}) {
      side[c++] = s->s1;
      side[c++] = s->p1;
      side[c++] = s->d1;
      side[c++] = s->f1;
      side[c++] = s->pol1;
      side[c++] = s->coef1;
      side[c++] = s->s2;
      side[c++] = s->p2;
      side[c++] = s->d2;
      side[c++] = s->f2;
      side[c++] = s->pol2;
      side[c++] = s->coef2;
    }
    g.bond_side_targets.push_back(side);
  }
  if (std::count(used.begin(), used.end(), 1) != static_cast<long>(record.bond_orbitals.size()))
    throw GraphError("record has extra bond orbitals");

  for (const InteractionRecord& ix : record.interactions) {
    InteractionEdge e;
    if (ix.donor.kind == OrbKind::LonePair) {
      e.donor = {NodeKind::LonePair, resolve_lp_node(eg, ix.donor.atom_i, ix.donor.ordinal)};
    } else {
      e.donor = {NodeKind::BondPair, resolve_bond_node(eg, ix.donor)};
    }
    if (ix.acceptor.kind == OrbKind::LonePair)
      throw GraphError("interaction acceptor must be a bond orbital");
    e.acceptor = {NodeKind::BondPair, resolve_bond_node(eg, ix.acceptor)};
    if (e.donor == e.acceptor) throw GraphError("interaction donor equals acceptor");
    e.e2 = ix.e2;
    e.energy_gap = ix.energy_gap;
    e.fock_element = ix.fock_element;
    g.interactions.push_back(e);
  }
  return g;
}

NboRecord extract_record(const SimgGraph& g) {
  NboRecord r;
  const ExtendedGraph& eg = g.graph;
  for (const auto& t : g.atom_targets) r.atom_npa.push_back({t[0], t[1], t[2], t[3]});
  for (size_t n = 0; n < eg.lp_nodes.size(); ++n) {
    const auto& t = g.lp_targets[n];
    r.lone_pairs.push_back({eg.lp_nodes[n].owner_atom, t[0], t[1], t[2], t[3], t[4]});
  }
  for (size_t n = 0; n < eg.bond_nodes.size(); ++n) {
    const BondPairNode& node = eg.bond_nodes[n];
    BondOrbitalRecord bo;
    bo.atom_i = node.atom_i;
    bo.atom_j = node.atom_j;
    bo.kind = node.kind;
    const auto& s = g.bond_side_targets[n];
    BondOrbitalSide* sides[2] = {&bo.bonding, &bo.antibonding};
    for (int h = 0; h < 2; ++h) {
      double* p = &sides[h]->s1;
      for (int k = 0; k < 12; ++k) p[k] = s[h * 12 + k];
    }
    bo.bonding.occupancy = g.bond_occupancies[n][0];
    bo.antibonding.occupancy = g.bond_occupancies[n][1];
    r.bond_orbitals.push_back(bo);
  }
  // Ordinal of each lp node among its owner's lone pairs (canonical order).
  std::vector<int> lp_ordinal(eg.lp_nodes.size(), 0);
  {
    std::map<int, int> count;
    for (size_t n = 0; n < eg.lp_nodes.size(); ++n)
      lp_ordinal[n] = count[eg.lp_nodes[n].owner_atom]++;
  }
  for (const InteractionEdge& e : g.interactions) {
    InteractionRecord ix;
    auto to_ref = [&](const NodeRef& n, bool donor) {
      OrbitalRef ref;
      if (n.kind == NodeKind::LonePair) {
        ref.kind = OrbKind::LonePair;
        ref.atom_i = eg.lp_nodes[n.index].owner_atom;
        ref.ordinal = lp_ordinal[n.index];
      } else {
        const BondPairNode& b = eg.bond_nodes[n.index];
        ref.kind = b.kind == BondKind::Sigma ? OrbKind::Sigma : OrbKind::Pi;
        ref.atom_i = b.atom_i;
        ref.atom_j = b.atom_j;
        ref.ordinal = b.pi_rank;
      }
      (void)donor;
      return ref;
    };
    ix.donor = to_ref(e.donor, true);
    ix.acceptor = to_ref(e.acceptor, false);
    ix.e2 = e.e2;
    ix.energy_gap = e.energy_gap;
    ix.fock_element = e.fock_element;
    r.interactions.push_back(ix);
  }
  return r;
}

int anchor_atom(const ExtendedGraph& g, NodeRef n) {
  switch (n.kind) {
    case NodeKind::Atom:
      if (n.index < 0 || n.index >= static_cast<int>(g.atoms.size()))
        throw GraphError("atom index out of range");
      return n.index;
    case NodeKind::LonePair:
      if (n.index < 0 || n.index >= static_cast<int>(g.lp_nodes.size()))
        throw GraphError("lp index out of range");
      return g.lp_nodes[n.index].owner_atom;
    case NodeKind::BondPair: {
      if (n.index < 0 || n.index >= static_cast<int>(g.bond_nodes.size()))
        throw GraphError("bond index out of range");
      // Nearer endpoint is ambiguous without a query point; the projection
      // used for distances is the smaller atom index (documented tie rule).
      return g.bond_nodes[n.index].atom_i;
    }
  }
  throw GraphError("bad node kind");
}

std::array<double, 3> anchor_position(const ExtendedGraph& g, NodeRef n) {
  switch (n.kind) {
    case NodeKind::Atom:
      return g.atoms.at(n.index).position;
    case NodeKind::LonePair:
      return g.atoms.at(g.lp_nodes.at(n.index).owner_atom).position;
    case NodeKind::BondPair: {
      const BondPairNode& b = g.bond_nodes.at(n.index);
      const auto& p = g.atoms.at(b.atom_i).position;
      const auto& q = g.atoms.at(b.atom_j).position;
      return {(p[0] + q[0]) / 2, (p[1] + q[1]) / 2, (p[2] + q[2]) / 2};
    }
  }
  throw GraphError("bad node kind");
}

namespace {

std::vector<std::vector<int>> adjacency(const ExtendedGraph& g) {
  std::vector<std::vector<int>> adj(g.atoms.size());
  for (const AtomAtomEdge& e : g.edges_atom_atom) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  return adj;
}

// Unit-weight Dijkstra from one source over the atom skeleton.
std::vector<int> dijkstra_from(const std::vector<std::vector<int>>& adj, int src) {
  std::vector<int> dist(adj.size(), kInfiniteDistance);
  using Item = std::pair<int, int>;  // (distance, atom)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[src] = 0;
  heap.emplace(0, src);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (int v : adj[u]) {
      if (d + 1 < dist[v]) {
        dist[v] = d + 1;
        heap.emplace(d + 1, v);
      }
    }
  }
  return dist;
}

}  // namespace

namespace {

// Candidate projection atoms: both endpoints for a bond node, so that
// "nearer endpoint" can be resolved against the other query node.
std::vector<int> projection_atoms(const ExtendedGraph& g, NodeRef n) {
  if (n.kind == NodeKind::BondPair) {
    const BondPairNode& b = g.bond_nodes.at(n.index);
    return {b.atom_i, b.atom_j};
  }
  return {anchor_atom(g, n)};
}

}  // namespace

int graph_distance(const ExtendedGraph& g, NodeRef a, NodeRef b) {
  auto sa = projection_atoms(g, a);
  auto sb = projection_atoms(g, b);
  auto adj = adjacency(g);
  int best = kInfiniteDistance;
  for (int u : sa) {
    auto dist = dijkstra_from(adj, u);
    for (int v : sb) best = std::min(best, dist[v]);
  }
  return best;
}

std::vector<std::vector<int>> atom_distance_matrix(const ExtendedGraph& g) {
  auto adj = adjacency(g);
  std::vector<std::vector<int>> out(g.atoms.size());
  for (size_t a = 0; a < g.atoms.size(); ++a) out[a] = dijkstra_from(adj, static_cast<int>(a));
  return out;
}

}  // namespace simg
