// SPDX-License-Identifier: Apache-2.0

#include "simg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "simg/chem_io.hpp"

namespace simg {

namespace {

double bond_length(const Molecule& m, const Bond& b) {
  const auto& p = m.atoms[b.i].position;
  const auto& q = m.atoms[b.j].position;
  double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Total bond order incident to an atom.
std::vector<int> total_orders(const Molecule& m) {
  std::vector<int> t(m.atoms.size(), 0);
  for (const Bond& b : m.bonds) {
    t[b.i] += b.order;
    t[b.j] += b.order;
  }
  return t;
}

std::vector<int> degrees(const Molecule& m) {
  std::vector<int> d(m.atoms.size(), 0);
  for (const Bond& b : m.bonds) {
    ++d[b.i];
    ++d[b.j];
  }
  return d;
}

// An atom is conjugation-adjacent when it or one of its neighbors sits on a
// multiple bond.
std::vector<bool> conjugated_atoms(const Molecule& m) {
  std::vector<bool> on_multiple(m.atoms.size(), false);
  for (const Bond& b : m.bonds)
    if (b.order >= 2) on_multiple[b.i] = on_multiple[b.j] = true;
  std::vector<bool> out = on_multiple;
  for (const Bond& b : m.bonds) {
    if (on_multiple[b.i]) out[b.j] = true;
    if (on_multiple[b.j]) out[b.i] = true;
  }
  return out;
}

// Hybrid character split for one end of a sigma orbital.
void sigma_end_chars(const Molecule& m, const std::vector<int>& torder, int atom, double* s,
                     double* p, double* d, double* f) {
  if (m.atoms[atom].element == 0) {  // hydrogen: pure s
    *s = 99.2;
    *p = 0.5;
    *d = 0.2;
    *f = 0.1;
    return;
  }
  *s = 100.0 / (1.0 + torder[atom]);
  *d = 0.5;
  *f = 0.2;
  *p = 100.0 - *s - *d - *f;
}

double kind_factor(OrbKind donor, bool acceptor_pi) {
  switch (donor) {
    case OrbKind::LonePair: return acceptor_pi ? 1.3 : 1.0;
    case OrbKind::Sigma: return acceptor_pi ? 0.7 : 0.5;
    case OrbKind::Pi: return acceptor_pi ? 1.1 : 0.8;
  }
  return 1.0;
}

}  // namespace

LpCounts oracle_lp_counts(const Molecule& m, int atom) {
  LpCounts c;
  c.total = kElementInfo[m.atoms[atom].element].lone_pairs;
  if (c.total > 0 && conjugated_atoms(m)[atom]) c.type1 = 1;
  return c;
}

NboRecord synth_label(const Molecule& m, const OracleRules& rules) {
  if (m.atoms.empty()) throw OracleError("empty molecule");
  for (const Atom& a : m.atoms)
    if (a.element < 0 || a.element >= kNumElements)
      throw OracleError("unsupported element index " + std::to_string(a.element));

  NboRecord r;
  const auto torder = total_orders(m);
  const auto deg = degrees(m);

  // --- NPA: electronegativity-driven charge flow ------------------------
  for (size_t a = 0; a < m.atoms.size(); ++a) {
    double q = 0.0;
    for (const Bond& b : m.bonds) {
      if (b.i != static_cast<int>(a) && b.j != static_cast<int>(a)) continue;
      int other = b.i == static_cast<int>(a) ? b.j : b.i;
      double den = kElementInfo[m.atoms[other].element].electronegativity -
                   kElementInfo[m.atoms[a].element].electronegativity;
      q += 0.16 * den * b.order * std::exp(-(bond_length(m, b) - 1.5));
    }
    const ElementInfo& el = kElementInfo[m.atoms[a].element];
    AtomNpa npa;
    npa.natural_charge = q;
    npa.core_electrons = el.core_electrons;
    npa.valence_electrons = el.valence_electrons - q;
    npa.total_electrons = npa.core_electrons + npa.valence_electrons;
    r.atom_npa.push_back(npa);
  }

  // --- lone pairs: type-0 slots first, then the conjugated type-1 slot ---
  std::vector<LpCounts> counts(m.atoms.size());
  for (size_t a = 0; a < m.atoms.size(); ++a) {
    counts[a] = oracle_lp_counts(m, static_cast<int>(a));
    int n0 = counts[a].total - counts[a].type1;
    for (int k = 0; k < n0; ++k) {
      LonePairRecord lp;
      lp.owner_atom = static_cast<int>(a);
      lp.s = 20.0 + 30.0 / (1.0 + deg[a]);
      lp.d = 0.4;
      lp.f = 0.1;
      lp.p = 100.0 - lp.s - lp.d - lp.f;
      lp.occupancy = 1.999 - 0.004 * deg[a] - 0.002 * k;
      r.lone_pairs.push_back(lp);
    }
    for (int k = 0; k < counts[a].type1; ++k) {
      LonePairRecord lp;
      lp.owner_atom = static_cast<int>(a);
      lp.s = 0.4;
      lp.p = 99.1;
      lp.d = 0.4;
      lp.f = 0.1;
      lp.occupancy = 1.92 - 0.006 * deg[a];
      r.lone_pairs.push_back(lp);
    }
  }

  // --- bond orbitals ------------------------------------------------------
  std::vector<Bond> bonds = m.bonds;
  std::sort(bonds.begin(), bonds.end(), [](const Bond& a, const Bond& b) {
    return std::tie(a.i, a.j) < std::tie(b.i, b.j);
  });
  for (const Bond& b : bonds) {
    double len = bond_length(m, b);
    double en_i = kElementInfo[m.atoms[b.i].element].electronegativity;
    double en_j = kElementInfo[m.atoms[b.j].element].electronegativity;
    double r0 = kElementInfo[m.atoms[b.i].element].covalent_radius +
                kElementInfo[m.atoms[b.j].element].covalent_radius;
    double pol_i = 100.0 * en_i * en_i / (en_i * en_i + en_j * en_j);
    for (int rank = 0; rank < b.order; ++rank) {
      BondOrbitalRecord rec;
      rec.atom_i = b.i;
      rec.atom_j = b.j;
      rec.kind = rank == 0 ? BondKind::Sigma : BondKind::Pi;
      BondOrbitalSide bs;
      if (rec.kind == BondKind::Sigma) {
        sigma_end_chars(m, torder, b.i, &bs.s1, &bs.p1, &bs.d1, &bs.f1);
        sigma_end_chars(m, torder, b.j, &bs.s2, &bs.p2, &bs.d2, &bs.f2);
      } else {
        bs.s1 = bs.s2 = 0.3;
        bs.p1 = bs.p2 = 99.0;
        bs.d1 = bs.d2 = 0.5;
        bs.f1 = bs.f2 = 0.2;
      }
      bs.pol1 = pol_i;
      bs.pol2 = 100.0 - pol_i;
      bs.coef1 = std::sqrt(bs.pol1 / 100.0);
      bs.coef2 = std::sqrt(bs.pol2 / 100.0);
      bs.occupancy = 1.93 + 0.06 * std::exp(-(len - r0) * (len - r0) / 0.02) -
                     0.01 * (b.order - 1);
      BondOrbitalSide as = bs;
      std::swap(as.pol1, as.pol2);
      std::swap(as.coef1, as.coef2);
      as.occupancy =
          0.005 + 0.02 * (b.order - 1) + 0.015 * std::fabs(en_i - en_j);
      rec.bonding = bs;
      rec.antibonding = as;
      r.bond_orbitals.push_back(rec);
    }
  }

  // --- interactions: distance-gated donor -> acceptor rule ---------------
  ExtendedGraph eg = build_extended_graph(build_molecular_graph(m), counts);
  auto dmat = atom_distance_matrix(eg);
  auto node_dist = [&](NodeRef a, NodeRef b) {
    auto proj = [&](NodeRef n) -> std::vector<int> {
      if (n.kind == NodeKind::BondPair)
        return {eg.bond_nodes[n.index].atom_i, eg.bond_nodes[n.index].atom_j};
      return {anchor_atom(eg, n)};
    };
    int best = kInfiniteDistance;
    for (int u : proj(a))
      for (int v : proj(b))
        if (dmat[u][v] < best) best = dmat[u][v];
    return best;
  };
  auto spatial = [&](NodeRef a, NodeRef b) {
    auto p = anchor_position(eg, a);
    auto q = anchor_position(eg, b);
    double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  };
  // Orbital reference for a donor/acceptor node in canonical order.
  auto lp_ref = [&](int lp_node) {
    OrbitalRef ref;
    ref.kind = OrbKind::LonePair;
    ref.atom_i = eg.lp_nodes[lp_node].owner_atom;
    int ord = 0;
    for (int k = 0; k < lp_node; ++k)
      if (eg.lp_nodes[k].owner_atom == ref.atom_i) ++ord;
    ref.ordinal = ord;
    return ref;
  };
  auto bond_ref = [&](int bond_node) {
    const BondPairNode& n = eg.bond_nodes[bond_node];
    OrbitalRef ref;
    ref.kind = n.kind == BondKind::Sigma ? OrbKind::Sigma : OrbKind::Pi;
    ref.atom_i = n.atom_i;
    ref.atom_j = n.atom_j;
    ref.ordinal = n.pi_rank;
    return ref;
  };

  std::vector<NodeRef> donors;
  for (size_t l = 0; l < eg.lp_nodes.size(); ++l)
    donors.push_back({NodeKind::LonePair, static_cast<int>(l)});
  for (size_t b = 0; b < eg.bond_nodes.size(); ++b)
    donors.push_back({NodeKind::BondPair, static_cast<int>(b)});
  for (const NodeRef& donor : donors) {
    for (size_t b = 0; b < eg.bond_nodes.size(); ++b) {
      NodeRef acceptor{NodeKind::BondPair, static_cast<int>(b)};
      if (donor == acceptor) continue;
      int gd = node_dist(donor, acceptor);
      if (gd < 1 || gd > rules.max_graph_distance) continue;
      double rdist = spatial(donor, acceptor);
      if (rdist >= rules.max_anchor_distance) continue;
      bool acceptor_pi = eg.bond_nodes[b].kind == BondKind::Pi;
      OrbKind dk = donor.kind == NodeKind::LonePair
                       ? OrbKind::LonePair
                       : (eg.bond_nodes[donor.index].kind == BondKind::Sigma ? OrbKind::Sigma
                                                                             : OrbKind::Pi);
      InteractionRecord ix;
      ix.donor = donor.kind == NodeKind::LonePair ? lp_ref(donor.index) : bond_ref(donor.index);
      ix.acceptor = bond_ref(static_cast<int>(b));
      ix.e2 = rules.e2_amplitude * std::exp(-rdist / rules.e2_decay) *
              kind_factor(dk, acceptor_pi);
      ix.energy_gap = 0.5 + 0.3 * rdist / rules.max_anchor_distance +
                      (acceptor_pi ? -0.1 : 0.0) +
                      (dk == OrbKind::LonePair ? -0.05 : 0.0);
      ix.fock_element = std::sqrt(ix.e2 / 627.509 * ix.energy_gap / 2.0);
      r.interactions.push_back(ix);
    }
  }
  return r;
}

// --- generators ------------------------------------------------------------

namespace {

std::array<double, 3> random_direction(Rng& rng) {
  while (true) {
    std::array<double, 3> v = {rng.normal(), rng.normal(), rng.normal()};
    double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-6) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

void place_bonded(Molecule& m, int parent, int element, Rng& rng) {
  double len = kElementInfo[m.atoms[parent].element].covalent_radius +
               kElementInfo[element].covalent_radius;
  auto dir = random_direction(rng);
  Atom a;
  a.element = element;
  for (int k = 0; k < 3; ++k) a.position[k] = m.atoms[parent].position[k] + len * dir[k];
  m.atoms.push_back(a);
}

void fill_hydrogens(Molecule& m, Rng& rng) {
  const auto torder = total_orders(m);
  const int n_heavy = static_cast<int>(m.atoms.size());
  for (int a = 0; a < n_heavy; ++a) {
    int free = kElementInfo[m.atoms[a].element].max_valence - torder[a];
    for (int h = 0; h < free; ++h) {
      int idx = static_cast<int>(m.atoms.size());
      place_bonded(m, a, 0, rng);
      m.bonds.push_back({a, idx, 1});
    }
  }
  std::sort(m.bonds.begin(), m.bonds.end(), [](const Bond& a, const Bond& b) {
    return std::tie(a.i, a.j) < std::tie(b.i, b.j);
  });
}

}  // namespace

Molecule random_molecule(Rng& rng, const GeneratorConfig& cfg) {
  Molecule m;
  const int n_heavy = rng.uniform_int(cfg.min_heavy, cfg.max_heavy);
  auto pick_element = [&] {
    return cfg.elements[rng.uniform_int(0, static_cast<int>(cfg.elements.size()) - 1)];
  };
  m.atoms.push_back({pick_element(), {0, 0, 0}});
  for (int i = 1; i < n_heavy; ++i) {
    const auto torder = total_orders(m);
    // attachment points with free valence
    std::vector<int> open;
    for (size_t a = 0; a < m.atoms.size(); ++a)
      if (kElementInfo[m.atoms[a].element].max_valence - torder[a] >= 1)
        open.push_back(static_cast<int>(a));
    if (open.empty()) break;
    int parent = open[rng.uniform_int(0, static_cast<int>(open.size()) - 1)];
    int el = pick_element();
    int parent_free =
        kElementInfo[m.atoms[parent].element].max_valence - torder[parent];
    int order = 1;
    if (parent_free >= 2 && kElementInfo[el].max_valence >= 2 &&
        rng.uniform() < cfg.multiple_bond_prob) {
      order = 2;
      if (parent_free >= 3 && kElementInfo[el].max_valence >= 3 && rng.uniform() < 0.25)
        order = 3;
    }
    // Keep at least one free valence until the target size is reached;
    // otherwise a run of monovalent picks can dead-end the tree early.
    if (i < n_heavy - 1) {
      while (open.size() == 1 && parent_free - order == 0 &&
             kElementInfo[el].max_valence - order == 0) {
        el = pick_element();
        order = 1;
      }
    }
    int idx = static_cast<int>(m.atoms.size());
    place_bonded(m, parent, el, rng);
    m.bonds.push_back({parent, idx, order});
  }
  fill_hydrogens(m, rng);
  return m;
}

Molecule chain_molecule(Rng& rng, int n_heavy) {
  Molecule m;
  // two-valent elements can sit inside the chain; start with carbon
  m.atoms.push_back({2, {0, 0, 0}});
  for (int i = 1; i < n_heavy; ++i) {
    double roll = rng.uniform();
    int el = 2;
    if (roll < 0.12) el = 4;       // O
    else if (roll < 0.22) el = 3;  // N
    else if (roll < 0.27) el = 8;  // S
    int prev = i - 1;
    int order = 1;
    if (el == 2 && m.atoms[prev].element == 2 && rng.uniform() < 0.15) order = 2;
    int idx = static_cast<int>(m.atoms.size());
    place_bonded(m, prev, el, rng);
    m.bonds.push_back({prev, idx, order});
  }
  fill_hydrogens(m, rng);
  return m;
}

std::string molecule_hash(const Molecule& m) {
  std::string text = serialize_molecule(m);
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace simg
