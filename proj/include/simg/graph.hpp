// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simg/chem.hpp"

namespace simg {

enum class NodeKind { Atom, LonePair, BondPair };

struct NodeRef {
  NodeKind kind = NodeKind::Atom;
  int index = 0;

  friend bool operator==(const NodeRef&, const NodeRef&) = default;
  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

struct LpNode {
  int owner_atom = 0;
  int lp_type = 0;  // 0: s-rich, 1: p-rich (conjugation-likely)
};

struct BondPairNode {
  int atom_i = 0;  // atom_i < atom_j
  int atom_j = 0;
  BondKind kind = BondKind::Sigma;
  int pi_rank = 0;  // 0 for sigma; 0..order-2 for pi
};

struct AtomAtomEdge {
  int i = 0;
  int j = 0;
  int order = 1;
  double length = 0.0;  // Angstrom, Euclidean distance of the endpoints
};

// Molecular graph augmented with lone-pair and bond-orbital-pair nodes.
// Topology and input features only; no NBO targets.
struct ExtendedGraph {
  std::vector<Atom> atoms;
  int charge = 0;
  std::vector<LpNode> lp_nodes;
  std::vector<BondPairNode> bond_nodes;
  std::vector<AtomAtomEdge> edges_atom_atom;
  std::vector<std::pair<int, int>> edges_atom_bond;  // (atom, bond node)
  std::vector<std::pair<int, int>> edges_atom_lp;    // (atom, lp node)

  friend bool operator==(const ExtendedGraph&, const ExtendedGraph&) = default;
};

struct InteractionEdge {
  NodeRef donor;     // LonePair or BondPair (bonding side)
  NodeRef acceptor;  // BondPair (antibonding side)
  double e2 = 0.0;
  double energy_gap = 0.0;
  double fock_element = 0.0;
};

// ExtendedGraph plus every NBO target and the donor->acceptor interaction
// edges.
struct SimgGraph {
  ExtendedGraph graph;
  std::vector<std::array<double, 4>> atom_targets;  // q, core, valence, total
  std::vector<std::array<double, 5>> lp_targets;    // s, p, d, f, occupancy
  // Per bond node: occupancy of the bonding and antibonding orbitals.
  std::vector<std::array<double, 2>> bond_occupancies;
  // Per bond node, 24 atom-wise scalars laid out as
  // [side: bonding, antibonding] x [end: atom_i, atom_j] x [s, p, d, f, pol, coef].
  std::vector<std::array<double, 24>> bond_side_targets;
  std::vector<InteractionEdge> interactions;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Classifies a lone pair from its character percents: 1 iff p - s > 80.
int lp_type(double s_char, double p_char);

// Atoms and atom-atom edges only; lp/bond tables left empty.
ExtendedGraph build_molecular_graph(const Molecule& m);

struct LpCounts {
  int total = 0;
  int type1 = 0;
};

// Adds lone-pair and bond-pair nodes in canonical order. lp_counts has one
// entry per atom.
ExtendedGraph build_extended_graph(const ExtendedGraph& molecular,
                                   const std::vector<LpCounts>& lp_counts);

// Populates every target table from the label record. Within each
// (owner atom, lp_type) group, records sorted by descending occupancy are
// assigned to nodes in canonical order.
SimgGraph build_simg(const ExtendedGraph& eg, const NboRecord& record);

// Re-extracts the label record from a SimgGraph (inverse of build_simg up
// to the within-group assignment rule).
NboRecord extract_record(const SimgGraph& g);

inline constexpr int kInfiniteDistance = std::numeric_limits<int>::max();

// Hop count over the atom-atom skeleton (unit weights, Dijkstra). Lone-pair
// nodes project to their owner atom; bond nodes to the nearer endpoint
// (ties to the smaller index). Returns kInfiniteDistance when disconnected.
int graph_distance(const ExtendedGraph& g, NodeRef a, NodeRef b);

// All-source hop counts between atoms; d[i][j] = kInfiniteDistance when
// disconnected. Used to batch candidate-pair enumeration.
std::vector<std::vector<int>> atom_distance_matrix(const ExtendedGraph& g);

// Projection of any node onto the atom skeleton (see graph_distance).
int anchor_atom(const ExtendedGraph& g, NodeRef n);

// Spatial anchor of a node: atom/lp -> owning atom position, bond -> bond
// midpoint.
std::array<double, 3> anchor_position(const ExtendedGraph& g, NodeRef n);

}  // namespace simg
