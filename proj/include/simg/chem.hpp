// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace simg {

// Supported element set. Indices into this table are used everywhere a
// one-hot element encoding appears.
inline constexpr std::array<std::string_view, 12> kElements = {
    "H", "B", "C", "N", "O", "F", "Si", "P", "S", "Cl", "Br", "I"};

inline constexpr int kNumElements = static_cast<int>(kElements.size());

struct ElementInfo {
  double electronegativity;  // Pauling scale
  double covalent_radius;    // Angstrom
  int core_electrons;
  int valence_electrons;
  int max_valence;           // covalent bonding capacity used by generators
  int lone_pairs;            // oracle lone-pair count for the neutral atom
};

// Indexed parallel to kElements.
inline constexpr std::array<ElementInfo, 12> kElementInfo = {{
    {2.20, 0.31, 0, 1, 1, 0},   // H
    {2.04, 0.84, 2, 3, 3, 0},   // B
    {2.55, 0.76, 2, 4, 4, 0},   // C
    {3.04, 0.71, 2, 5, 3, 1},   // N
    {3.44, 0.66, 2, 6, 2, 2},   // O
    {3.98, 0.57, 2, 7, 1, 3},   // F
    {1.90, 1.11, 10, 4, 4, 0},  // Si
    {2.19, 1.07, 10, 5, 3, 1},  // P
    {2.58, 1.05, 10, 6, 2, 2},  // S
    {3.16, 1.02, 10, 7, 1, 3},  // Cl
    {2.96, 1.20, 28, 7, 1, 3},  // Br
    {2.66, 1.39, 46, 7, 1, 3},  // I
}};

// Returns the index into kElements, or nullopt for an unsupported symbol.
std::optional<int> element_index(std::string_view symbol);

struct Bond {
  int i = 0;  // stored with i < j
  int j = 0;
  int order = 1;  // 1..3
};

struct Atom {
  int element = 0;  // index into kElements
  std::array<double, 3> position{};
};

struct Molecule {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  int charge = 0;
};

enum class BondKind { Sigma, Pi };

// --- NBO-style label records -------------------------------------------

struct AtomNpa {
  double natural_charge = 0.0;
  double core_electrons = 0.0;
  double valence_electrons = 0.0;
  double total_electrons = 0.0;
};

struct LonePairRecord {
  int owner_atom = 0;
  double s = 0.0, p = 0.0, d = 0.0, f = 0.0;  // percent, sum ~ 100
  double occupancy = 0.0;                     // electrons in (0, 2]
};

// One side (bonding or antibonding) of a bond-orbital pair: per-atom
// character percents, polarization percent, polarization coefficient,
// plus the side's occupancy. 13 scalars.
struct BondOrbitalSide {
  double s1 = 0, p1 = 0, d1 = 0, f1 = 0, pol1 = 0, coef1 = 0;
  double s2 = 0, p2 = 0, d2 = 0, f2 = 0, pol2 = 0, coef2 = 0;
  double occupancy = 0;
};

struct BondOrbitalRecord {
  int atom_i = 0;
  int atom_j = 0;
  BondKind kind = BondKind::Sigma;
  BondOrbitalSide bonding;
  BondOrbitalSide antibonding;  // together: 26 scalars
};

enum class OrbKind { LonePair, Sigma, Pi };

// Reference to a localized orbital inside one NboRecord. For lone pairs
// `ordinal` counts that atom's lone pairs; for pi bonds it is the pi rank.
struct OrbitalRef {
  OrbKind kind = OrbKind::LonePair;
  int atom_i = 0;
  int atom_j = 0;  // unused for lone pairs
  int ordinal = 0;

  friend bool operator==(const OrbitalRef&, const OrbitalRef&) = default;
};

struct InteractionRecord {
  OrbitalRef donor;     // lone pair or bonding orbital
  OrbitalRef acceptor;  // antibonding orbital (sigma or pi)
  double e2 = 0.0;          // kcal/mol
  double energy_gap = 0.0;  // hartree
  double fock_element = 0.0;  // hartree
};

struct NboRecord {
  std::vector<AtomNpa> atom_npa;
  std::vector<LonePairRecord> lone_pairs;
  std::vector<BondOrbitalRecord> bond_orbitals;
  std::vector<InteractionRecord> interactions;
};

}  // namespace simg
