// SPDX-License-Identifier: Apache-2.0
#include "simg/active_learning.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "simg/chem_io.hpp"
#include "simg/graph.hpp"

namespace simg {

namespace fs = std::filesystem;

// --- Pool ------------------------------------------------------------------

bool Pool::add(const Molecule& m) {
  std::string h = molecule_hash(m);
  if (index_.count(h)) return false;
  index_[h] = entries_.size();
  entries_.push_back(Entry{m, h, false, {}, -1});
  return true;
}

bool Pool::add_labeled(const Molecule& m, const NboRecord& r, int round) {
  std::string h = molecule_hash(m);
  if (index_.count(h)) return false;
  index_[h] = entries_.size();
  entries_.push_back(Entry{m, h, true, r, round});
  return true;
}

void Pool::label(const std::string& hash, const NboRecord& r, int round) {
  auto it = index_.find(hash);
  if (it == index_.end()) throw std::runtime_error("pool: unknown hash " + hash);
  Entry& e = entries_[it->second];
  if (e.labeled) throw std::runtime_error("pool: hash already labeled " + hash);
  e.labeled = true;
  e.record = r;
  e.round_acquired = round;
}

const Pool::Entry* Pool::find(const std::string& hash) const {
  auto it = index_.find(hash);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::vector<const Pool::Entry*> Pool::labeled() const {
  std::vector<const Entry*> out;
  for (const Entry& e : entries_)
    if (e.labeled) out.push_back(&e);
  return out;
}

std::vector<const Pool::Entry*> Pool::unlabeled() const {
  std::vector<const Entry*> out;
  for (const Entry& e : entries_)
    if (!e.labeled) out.push_back(&e);
  return out;
}

void Pool::save(const std::string& dir) const {
  fs::create_directories(dir);
  std::ostringstream manifest;
  // Manifest rows in hash order so the output is content-determined.
  std::vector<const Entry*> sorted;
  for (const Entry& e : entries_) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const Entry* a, const Entry* b) { return a->hash < b->hash; });
  for (const Entry* e : sorted) {
    {
      std::ofstream f(fs::path(dir) / (e->hash + ".molj"));
      f << serialize_molecule(e->molecule);
    }
    if (e->labeled) {
      std::ofstream f(fs::path(dir) / (e->hash + ".nboj"));
      f << serialize_nbo_record(e->record);
    }
    manifest << e->hash << '\t' << (e->labeled ? "labeled" : "unlabeled") << '\t'
             << e->round_acquired << '\n';
  }
  std::ofstream f(fs::path(dir) / "manifest.tsv");
  f << manifest.str();
}

static std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("pool: cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Pool Pool::load(const std::string& dir) {
  Pool pool;
  std::ifstream manifest(fs::path(dir) / "manifest.tsv");
  if (!manifest) throw std::runtime_error("pool: missing manifest in " + dir);
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string hash, status;
    int round = -1;
    if (!(ss >> hash >> status >> round))
      throw std::runtime_error("pool: malformed manifest line: " + line);
    auto mol = parse_molecule(read_file(fs::path(dir) / (hash + ".molj")));
    if (std::holds_alternative<ParseError>(mol))
      throw std::runtime_error("pool: " + std::get<ParseError>(mol).to_string());
    const Molecule& m = std::get<Molecule>(mol);
    if (molecule_hash(m) != hash)
      throw std::runtime_error("pool: content hash mismatch for " + hash);
    if (status == "labeled") {
      auto rec = parse_nboj(read_file(fs::path(dir) / (hash + ".nboj")));
      if (std::holds_alternative<ParseError>(rec))
        throw std::runtime_error("pool: " + std::get<ParseError>(rec).to_string());
      pool.add_labeled(m, std::get<NboRecord>(rec), round);
    } else if (status == "unlabeled") {
      pool.add(m);
    } else {
      throw std::runtime_error("pool: unknown status " + status);
    }
  }
  return pool;
}

// --- ensemble variance -------------------------------------------------------

namespace {

// Stable per-molecule forward seed so every ensemble member and every rerun
// evolves hidden states identically.
uint64_t hash_seed(const std::string& hash) {
  uint64_t h = 1469598103934665603ull;
  for (char c : hash) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  return h;
}

// Mean over rows of the population variance across members of column `col`.
double mean_population_variance(const std::vector<const Tensor*>& member_tensors,
                                int col) {
  int rows = member_tensors.front()->rows();
  int e = static_cast<int>(member_tensors.size());
  if (rows == 0) return 0.0;
  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (const Tensor* t : member_tensors) mean += t->at(r, col);
    mean /= e;
    double var = 0.0;
    for (const Tensor* t : member_tensors) {
      double d = t->at(r, col) - mean;
      var += d * d;
    }
    total += var / e;
  }
  return total / rows;
}

}  // namespace

VarianceTable ensemble_variance(const std::vector<const MultitaskModel*>& members,
                                const LonePairModel& lp_model,
                                const std::vector<const Pool::Entry*>& molecules,
                                const std::vector<std::string>& targets) {
  if (members.size() < 2) throw std::invalid_argument("ensemble_variance: need E >= 2");
  VarianceTable table;
  for (const Pool::Entry* e : molecules) {
    ExtendedGraph mol = build_molecular_graph(e->molecule);
    std::vector<LpCounts> counts = lp_model.predict_counts(prepare_mol_inputs(mol));
    ExtendedGraph eg = build_extended_graph(mol, counts);
    GraphInputs in = prepare_graph_inputs(eg);
    uint64_t seed = hash_seed(e->hash);
    std::vector<PredictionBundle> bundles;
    bundles.reserve(members.size());
    for (const MultitaskModel* m : members) bundles.push_back(m->forward(in, seed));
    std::map<std::string, double>& row = table[e->hash];
    for (const std::string& t : targets) {
      std::vector<const Tensor*> ts;
      int col = 0;
      for (const PredictionBundle& b : bundles) {
        if (t == "atom_q") {
          ts.push_back(&b.atom_preds);
        } else if (t == "lp_occ") {
          ts.push_back(&b.lp_occ);
        } else if (t == "bond_occ") {
          ts.push_back(&b.bond_occ);
        } else if (t == "e2") {
          ts.push_back(&b.interaction_preds);
        } else {
          throw std::invalid_argument("ensemble_variance: unknown target " + t);
        }
      }
      row[t] = mean_population_variance(ts, col);
    }
  }
  return table;
}

std::vector<std::string> acquire(const VarianceTable& variances,
                                 const AcquisitionConfig& cfg) {
  if (cfg.per_target_k < 1) throw std::invalid_argument("acquire: k must be >= 1");
  std::set<std::string> selected;
  for (const std::string& target : cfg.targets) {
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [hash, row] : variances) {
      auto it = row.find(target);
      if (it != row.end()) ranked.push_back({it->second, hash});
    }
    // Variance descending, hash ascending on ties; VarianceTable iteration is
    // already hash-ordered so stable_sort keeps the tie-break.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    int k = std::min<int>(cfg.per_target_k, static_cast<int>(ranked.size()));
    for (int i = 0; i < k; ++i) selected.insert(ranked[i].second);
  }
  return {selected.begin(), selected.end()};
}

// --- AL loop -----------------------------------------------------------------

namespace {

std::map<int, double> heavy_element_frequency(const std::vector<const Pool::Entry*>& mols) {
  std::map<int, double> counts;
  double total = 0;
  for (const Pool::Entry* e : mols)
    for (const Atom& a : e->molecule.atoms)
      if (a.element != 0) {  // skip hydrogen
        counts[a.element] += 1;
        total += 1;
      }
  if (total > 0)
    for (auto& [k, v] : counts) v /= total;
  return counts;
}

}  // namespace

std::vector<AlRound> al_loop(Pool& pool, const AlConfig& cfg) {
  if (cfg.acquisition.ensemble_size < 2)
    throw std::invalid_argument("al_loop: ensemble size must be >= 2");
  std::vector<AlRound> history;
  for (int round = 0; round <= cfg.rounds; ++round) {
    // Retrain everything from scratch on the current labeled set.
    std::vector<const Pool::Entry*> labeled = pool.labeled();
    if (labeled.empty()) throw std::runtime_error("al_loop: empty labeled set");
    std::vector<Molecule> mols;
    std::vector<std::vector<LpCounts>> counts;
    std::vector<SimgGraph> graphs;
    for (const Pool::Entry* e : labeled) {
      mols.push_back(e->molecule);
      counts.push_back(counts_from_record(e->molecule, e->record));
      ExtendedGraph eg = build_extended_graph(build_molecular_graph(e->molecule), counts.back());
      graphs.push_back(build_simg(eg, e->record));
    }
    TrainOptions lp_opts = cfg.lp_train;
    lp_opts.seed = cfg.seed * 1000003ull + static_cast<uint64_t>(round);
    LonePairModel lp_model =
        train_lp_model(mols, counts, cfg.lp_config, lp_opts);

    std::vector<std::optional<MultitaskModel>> members(
        static_cast<size_t>(cfg.acquisition.ensemble_size));
    auto train_member = [&](int i) {
      TrainOptions mt_opts = cfg.mt_train;
      mt_opts.seed = cfg.seed * 1000003ull + static_cast<uint64_t>(round) * 131ull +
                     static_cast<uint64_t>(i) + 1ull;
      members[i] = train_multitask(graphs, cfg.mt_config, mt_opts);
    };
    if (cfg.jobs > 1) {
      std::vector<std::thread> threads;
      for (int i = 0; i < cfg.acquisition.ensemble_size; ++i)
        threads.emplace_back(train_member, i);
      for (auto& t : threads) t.join();
    } else {
      for (int i = 0; i < cfg.acquisition.ensemble_size; ++i) train_member(i);
    }

    AlRound row;
    row.round = round;
    row.labeled_size = static_cast<int>(labeled.size());
    if (round == cfg.rounds) {  // final round trains only, nothing to acquire
      history.push_back(std::move(row));
      break;
    }

    // Partition the unlabeled pool by hash order and subsample each part.
    std::vector<const Pool::Entry*> unlabeled = pool.unlabeled();
    std::sort(unlabeled.begin(), unlabeled.end(),
              [](const Pool::Entry* a, const Pool::Entry* b) { return a->hash < b->hash; });
    row.pool_element_freq = heavy_element_frequency(unlabeled);
    int parts = std::max(1, cfg.acquisition.partitions);
    std::vector<const Pool::Entry*> scored;
    Rng sample_rng(cfg.seed * 7919ull + static_cast<uint64_t>(round));
    for (int p = 0; p < parts; ++p) {
      size_t lo = unlabeled.size() * p / parts;
      size_t hi = unlabeled.size() * (p + 1) / parts;
      std::vector<const Pool::Entry*> part(unlabeled.begin() + lo, unlabeled.begin() + hi);
      int n = cfg.acquisition.per_part_sample;
      if (n <= 0 || n >= static_cast<int>(part.size())) {
        scored.insert(scored.end(), part.begin(), part.end());
        continue;
      }
      for (int t = 0; t < n; ++t) {  // partial Fisher-Yates
        int pick = sample_rng.uniform_int(0, static_cast<int>(part.size()) - 1 - t);
        scored.push_back(part[pick]);
        std::swap(part[pick], part[part.size() - 1 - t]);
      }
    }

    std::vector<const MultitaskModel*> member_ptrs;
    for (auto& m : members) member_ptrs.push_back(&*m);
    VarianceTable variances =
        ensemble_variance(member_ptrs, lp_model, scored, cfg.acquisition.targets);
    row.selected = acquire(variances, cfg.acquisition);

    std::vector<const Pool::Entry*> picked;
    for (const std::string& h : row.selected) {
      const Pool::Entry* e = pool.find(h);
      pool.label(h, synth_label(e->molecule, cfg.oracle), round + 1);
      picked.push_back(pool.find(h));
    }
    row.selection_element_freq = heavy_element_frequency(picked);
    history.push_back(std::move(row));
  }
  return history;
}

}  // namespace simg
