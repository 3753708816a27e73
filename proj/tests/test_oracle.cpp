// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "simg/chem_io.hpp"
#include "simg/graph.hpp"
#include "simg/oracle.hpp"

using namespace simg;

namespace {

Molecule water() {
  Molecule m;
  m.atoms = {{4, {0.0, 0.0, 0.0}}, {0, {0.96, 0.0, 0.0}}, {0, {-0.24, 0.93, 0.0}}};
  m.bonds = {{0, 1, 1}, {0, 2, 1}};
  return m;
}

Molecule h2() {
  Molecule m;
  m.atoms = {{0, {0.0, 0.0, 0.0}}, {0, {0.74, 0.0, 0.0}}};
  m.bonds = {{0, 1, 1}};
  return m;
}

Molecule formaldehyde() {
  Molecule m;
  m.atoms = {{2, {0.0, 0.0, 0.0}},
             {4, {1.21, 0.0, 0.0}},
             {0, {-0.55, 0.94, 0.0}},
             {0, {-0.55, -0.94, 0.0}}};
  m.bonds = {{0, 1, 2}, {0, 2, 1}, {0, 3, 1}};
  return m;
}

}  // namespace

TEST_CASE("lone-pair counts follow the element table and conjugation") {
  Molecule w = water();
  CHECK(oracle_lp_counts(w, 0).total == 2);
  CHECK(oracle_lp_counts(w, 0).type1 == 0);  // no multiple bond anywhere
  CHECK(oracle_lp_counts(w, 1).total == 0);
  CHECK(oracle_lp_counts(w, 2).total == 0);

  Molecule f = formaldehyde();
  CHECK(oracle_lp_counts(f, 1).total == 2);
  CHECK(oracle_lp_counts(f, 1).type1 == 1);  // oxygen on a double bond
  CHECK(oracle_lp_counts(f, 0).total == 0);
}

TEST_CASE("water label has the expected record shape") {
  NboRecord r = synth_label(water());
  REQUIRE(r.atom_npa.size() == 3);
  REQUIRE(r.lone_pairs.size() == 2);
  REQUIRE(r.bond_orbitals.size() == 2);

  // Oxygen pulls charge from both hydrogens; totals conserve electrons.
  CHECK(r.atom_npa[0].natural_charge < 0.0);
  CHECK(r.atom_npa[1].natural_charge > 0.0);
  double qsum = 0, esum = 0;
  for (const AtomNpa& a : r.atom_npa) {
    qsum += a.natural_charge;
    esum += a.total_electrons;
    CHECK(a.total_electrons == doctest::Approx(a.core_electrons + a.valence_electrons));
  }
  CHECK(qsum == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(esum == doctest::Approx(10.0).epsilon(1e-9));

  for (const LonePairRecord& lp : r.lone_pairs) {
    CHECK(lp.owner_atom == 0);
    CHECK(lp.s + lp.p + lp.d + lp.f == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(lp.occupancy > 1.8);
    CHECK(lp.occupancy <= 2.0);
  }

  for (const BondOrbitalRecord& b : r.bond_orbitals) {
    CHECK(b.kind == BondKind::Sigma);
    CHECK(b.bonding.pol1 + b.bonding.pol2 == doctest::Approx(100.0).epsilon(1e-9));
    // Oxygen end holds more of the bonding orbital than hydrogen.
    CHECK(b.bonding.pol1 > b.bonding.pol2);
    CHECK(b.bonding.occupancy > b.antibonding.occupancy);
    // Antibonding polarization is the bonding one reversed.
    CHECK(b.antibonding.pol1 == doctest::Approx(b.bonding.pol2));
  }

  // Every donor/acceptor pair in water projects onto a shared atom
  // (graph distance 0), so the gate leaves nothing.
  CHECK(r.interactions.empty());
}

TEST_CASE("methanol label has lone-pair donations into C-H sigma*") {
  // C(0)-O(1), hydrogens on both; O lone pairs sit one hop from each C-H bond.
  Molecule m;
  m.atoms = {{2, {0.0, 0.0, 0.0}},   {4, {1.43, 0.0, 0.0}},
             {0, {-0.51, 0.89, 0.0}}, {0, {-0.51, -0.44, 0.77}},
             {0, {-0.51, -0.44, -0.77}}, {0, {1.75, -0.87, 0.0}}};
  m.bonds = {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {0, 4, 1}, {1, 5, 1}};
  NboRecord r = synth_label(m);
  REQUIRE(r.lone_pairs.size() == 2);
  int lp_to_ch = 0;
  for (const InteractionRecord& e : r.interactions) {
    CHECK(e.e2 > 0.0);
    CHECK(e.energy_gap > 0.0);
    CHECK(e.fock_element > 0.0);
    if (e.donor.kind == OrbKind::LonePair && e.acceptor.kind == OrbKind::Sigma &&
        e.acceptor.atom_i == 0 && e.acceptor.atom_j != 1)
      ++lp_to_ch;
  }
  CHECK(lp_to_ch == 6);  // 2 lone pairs x 3 C-H antibonds
}

TEST_CASE("H2 label: no lone pairs, one sigma bond, no interactions") {
  NboRecord r = synth_label(h2());
  CHECK(r.lone_pairs.empty());
  REQUIRE(r.bond_orbitals.size() == 1);
  CHECK(r.bond_orbitals[0].bonding.pol1 == doctest::Approx(50.0));
  CHECK(r.interactions.empty());
}

TEST_CASE("labels are strict-mode parseable and build valid graphs") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    Molecule m = random_molecule(rng);
    NboRecord r = synth_label(m);
    std::string text = serialize_nbo_record(r);
    auto back = parse_nbo_record(text, ParseMode::Strict);
    REQUIRE(std::holds_alternative<NboRecord>(back));
    CHECK(records_equal(r, std::get<NboRecord>(back)));
    // The record must be consistent with the graph builder.
    std::vector<LpCounts> counts;
    for (int a = 0; a < (int)m.atoms.size(); ++a) counts.push_back(oracle_lp_counts(m, a));
    SimgGraph g = build_simg(build_extended_graph(build_molecular_graph(m), counts), r);
    CHECK(g.graph.lp_nodes.size() == r.lone_pairs.size());
  }
}

TEST_CASE("oracle is deterministic") {
  Rng rng(11);
  Molecule m = random_molecule(rng);
  CHECK(serialize_nbo_record(synth_label(m)) == serialize_nbo_record(synth_label(m)));
}

TEST_CASE("interaction gate respects both distance rules") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    Molecule m = random_molecule(rng);
    OracleRules rules;
    NboRecord r = synth_label(m, rules);
    std::vector<LpCounts> counts;
    for (int a = 0; a < (int)m.atoms.size(); ++a) counts.push_back(oracle_lp_counts(m, a));
    ExtendedGraph eg = build_extended_graph(build_molecular_graph(m), counts);
    SimgGraph g = build_simg(eg, r);
    for (const InteractionEdge& e : g.interactions) {
      auto pa = anchor_position(eg, e.donor);
      auto pb = anchor_position(eg, e.acceptor);
      double dx = pa[0] - pb[0], dy = pa[1] - pb[1], dz = pa[2] - pb[2];
      CHECK(std::sqrt(dx * dx + dy * dy + dz * dz) < rules.max_anchor_distance);
      CHECK(graph_distance(eg, e.donor, e.acceptor) <= rules.max_graph_distance);
      CHECK(graph_distance(eg, e.donor, e.acceptor) >= 1);
    }
  }
}

TEST_CASE("generators emit valid geometry and valences") {
  Rng rng(42);
  for (int t = 0; t < 100; ++t) {
    Molecule m = random_molecule(rng);
    int heavy = 0;
    std::vector<int> used(m.atoms.size(), 0);
    for (const Bond& b : m.bonds) {
      REQUIRE(b.i < b.j);
      used[b.i] += b.order;
      used[b.j] += b.order;
    }
    for (size_t a = 0; a < m.atoms.size(); ++a) {
      const ElementInfo& info = kElementInfo[m.atoms[a].element];
      if (m.atoms[a].element != 0) ++heavy;
      CHECK(used[a] <= info.max_valence);
      CHECK(used[a] >= 1);  // connected
    }
    CHECK(heavy >= 5);
    CHECK(heavy <= 12);
    // Connectivity: every atom reachable from atom 0.
    ExtendedGraph mg = build_molecular_graph(m);
    CHECK(mg.edges_atom_atom.size() == m.bonds.size());
    auto dist = atom_distance_matrix(mg);
    for (size_t a = 0; a < m.atoms.size(); ++a) CHECK(dist[0][a] < kInfiniteDistance);
  }

  Molecule chain = chain_molecule(rng, 60);
  int heavy = 0;
  for (const Atom& a : chain.atoms)
    if (a.element != 0) ++heavy;
  CHECK(heavy == 60);
  synth_label(chain);  // must not throw at chain scale
}

TEST_CASE("molecule hashes are stable and collision-free on a seeded pool") {
  Rng rng(5);
  std::set<std::string> hashes;
  for (int t = 0; t < 200; ++t) {
    Molecule m = random_molecule(rng);
    std::string h = molecule_hash(m);
    CHECK(h == molecule_hash(m));
    CHECK(h.size() == 16);
    hashes.insert(h);
  }
  CHECK(hashes.size() > 190);  // near-unique; duplicates only if structures repeat
}
