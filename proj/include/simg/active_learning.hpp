// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simg/oracle.hpp"
#include "simg/train.hpp"

namespace simg {

// Content-addressed molecule store with a labeled/unlabeled split.
class Pool {
 public:
  struct Entry {
    Molecule molecule;
    std::string hash;
    bool labeled = false;
    NboRecord record;       // valid iff labeled
    int round_acquired = -1;  // -1: initial labeled set or never acquired
  };

  // Returns false when the molecule (by content hash) is already present.
  bool add(const Molecule& m);
  bool add_labeled(const Molecule& m, const NboRecord& r, int round = -1);

  // Oracle-labels the given hash and moves it to the labeled set.
  void label(const std::string& hash, const NboRecord& r, int round);

  const Entry* find(const std::string& hash) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<const Entry*> labeled() const;
  std::vector<const Entry*> unlabeled() const;

  // Directory of <hash>.molj (+ <hash>.nboj for labeled entries) plus a
  // manifest.tsv of (hash, status, round).
  void save(const std::string& dir) const;
  static Pool load(const std::string& dir);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
};

struct AcquisitionConfig {
  int ensemble_size = 3;   // E >= 2
  int per_target_k = 50;   // k >= 1
  int partitions = 1;      // P
  int per_part_sample = 0;  // n; 0 = use every molecule in the part
  std::vector<std::string> targets = {"atom_q", "lp_occ", "bond_occ", "e2"};
};

// hash -> target -> node-mean population variance across ensemble members.
using VarianceTable = std::map<std::string, std::map<std::string, double>>;

// Ensemble disagreement on lp-model-extended graphs. All members must share
// one config; every member sees identical evolver seeds so the variance
// isolates weight disagreement.
VarianceTable ensemble_variance(const std::vector<const MultitaskModel*>& members,
                                const LonePairModel& lp_model,
                                const std::vector<const Pool::Entry*>& molecules,
                                const std::vector<std::string>& targets);

// Top-k per target by variance (ties broken by hash ascending), union with
// duplicates removed, sorted by hash.
std::vector<std::string> acquire(const VarianceTable& variances,
                                 const AcquisitionConfig& cfg);

struct AlConfig {
  AcquisitionConfig acquisition;
  LonePairModelConfig lp_config;
  MultitaskModelConfig mt_config;
  TrainOptions lp_train;
  TrainOptions mt_train;
  OracleRules oracle;
  int rounds = 3;
  uint64_t seed = 0;
  int jobs = 1;  // ensemble members train concurrently when > 1
};

struct AlRound {
  int round = 0;  // 0 = initial training only
  std::vector<std::string> selected;
  // element index -> frequency among selected molecules' heavy atoms
  std::map<int, double> selection_element_freq;
  // element index -> frequency among the unlabeled pool's heavy atoms
  std::map<int, double> pool_element_freq;
  int labeled_size = 0;
};

// Train -> infer variance on the unlabeled pool -> acquire -> oracle-label,
// `rounds` times; models retrained from scratch each round with fresh seeds.
std::vector<AlRound> al_loop(Pool& pool, const AlConfig& cfg);

}  // namespace simg
