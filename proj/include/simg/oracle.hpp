// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "simg/chem.hpp"
#include "simg/graph.hpp"
#include "simg/tensor.hpp"

namespace simg {

// Deterministic rule-based labeler standing in for a quantum-chemistry
// pipeline: every NboRecord field is a smooth function of the local
// structure, so the learning problem is non-trivial but learnable.
struct OracleRules {
  // donor/acceptor gate
  double max_anchor_distance = 2.8;  // Angstrom
  int max_graph_distance = 4;
  // e2 = amplitude * exp(-r / decay) * kind factor
  double e2_amplitude = 25.0;
  double e2_decay = 0.9;
};

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-element lone-pair count from the element table; the single p-rich
// (type 1) slot goes to atoms conjugated with a multiple bond.
LpCounts oracle_lp_counts(const Molecule& m, int atom);

// Full deterministic labeling. Throws OracleError for unsupported input.
NboRecord synth_label(const Molecule& m, const OracleRules& rules = {});

// --- synthetic structure generators ---------------------------------------

struct GeneratorConfig {
  int min_heavy = 5;
  int max_heavy = 12;
  // elements drawn for heavy atoms, with weights
  std::vector<int> elements = {2, 2, 2, 2, 3, 4, 4, 5, 8, 9};  // C-rich mix
  double multiple_bond_prob = 0.25;
};

// Random valence-respecting tree of heavy atoms, hydrogens filled in, with
// a random-walk 3D embedding at covalent-radius bond lengths.
Molecule random_molecule(Rng& rng, const GeneratorConfig& cfg = {});

// Long linear backbone (n_heavy in the 50-200 range) with the same local
// chemistry as random_molecule: side elements and occasional double bonds.
Molecule chain_molecule(Rng& rng, int n_heavy);

// FNV-1a hash of the canonical serialized molecule, as fixed-width hex.
std::string molecule_hash(const Molecule& m);

}  // namespace simg
