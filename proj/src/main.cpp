// SPDX-License-Identifier: Apache-2.0
//
// simg: end-to-end pipeline driver. Subcommands cover parsing, oracle
// labeling, graph building, training, prediction, active learning,
// evaluation, the downstream benchmark, and trajectory export. Exit codes:
// 0 success, 1 validation error, 2 runtime failure.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "simg/active_learning.hpp"
#include "simg/chem_io.hpp"
#include "simg/eval_metrics.hpp"
#include "simg/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simg;

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit-code-1 failures (bad input, bad config); everything else exits 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int log_level() {
  const char* v = std::getenv("SIMG_LOG");
  return v ? std::atoi(v) : 0;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[simg] " << msg << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Options shared across subcommands plus the parsed config document.
struct RunContext {
  uint64_t seed = 0;
  std::string config_path;
  json config = json::object();
  ParseMode mode = ParseMode::Strict;
  double threshold = 0.5;
  int jobs = 1;
  std::vector<std::string> outputs;  // removed if the command fails

  std::string config_text() const {
    return config_path.empty() ? std::string("{}") : config.dump();
  }
};

std::string fnv_hex(const std::string& text) {
  uint64_t h = 1469598103934665603ull;
  for (char c : text) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file(RunContext& ctx, const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
  ctx.outputs.push_back(path);
}

void write_manifest(RunContext& ctx, const std::string& for_output) {
  std::ostringstream ss;
  ss << "version=" << kVersion << "\n"
     << "seed=" << ctx.seed << "\n"
     << "config_hash=" << fnv_hex(ctx.config_text()) << "\n";
  write_file(ctx, for_output + ".manifest", ss.str());
}

template <typename T>
T parse_or_throw(ParseResult<T> r, const std::string& path) {
  if (std::holds_alternative<ParseError>(r)) {
    const ParseError& e = std::get<ParseError>(r);
    throw ValidationError(path + ":" + std::to_string(e.line) + ":" +
                          std::to_string(e.column) + ": " + e.message);
  }
  return std::get<T>(std::move(r));
}

Molecule load_molecule(const std::string& path) {
  return parse_or_throw(parse_molecule(read_file(path)), path);
}

NboRecord load_record(const std::string& path, ParseMode mode) {
  return parse_or_throw(parse_nbo_record(read_file(path), mode), path);
}

LonePairModelConfig lp_config_of(const RunContext& ctx) {
  if (ctx.config.contains("lp")) return lp_config_from_json(ctx.config["lp"].dump());
  return {};
}

MultitaskModelConfig mt_config_of(const RunContext& ctx) {
  if (ctx.config.contains("mt")) return mt_config_from_json(ctx.config["mt"].dump());
  return {};
}

TrainOptions train_options_of(const RunContext& ctx, const char* section) {
  TrainOptions opts;
  opts.seed = ctx.seed;
  if (ctx.config.contains(section)) {
    const json& t = ctx.config[section];
    opts.epochs = t.value("epochs", opts.epochs);
    opts.learning_rate = t.value("learning_rate", opts.learning_rate);
  }
  return opts;
}

OracleRules oracle_rules_of(const RunContext& ctx) {
  OracleRules rules;
  if (ctx.config.contains("oracle")) {
    const json& o = ctx.config["oracle"];
    rules.max_anchor_distance = o.value("max_anchor_distance", rules.max_anchor_distance);
    rules.max_graph_distance = o.value("max_graph_distance", rules.max_graph_distance);
    rules.e2_amplitude = o.value("e2_amplitude", rules.e2_amplitude);
    rules.e2_decay = o.value("e2_decay", rules.e2_decay);
  }
  return rules;
}

Checkpoint to_checkpoint(const std::vector<std::pair<std::string, Tensor>>& named) {
  Checkpoint ckpt;
  for (const auto& [name, t] : named) ckpt.tensors.push_back({name, t});
  return ckpt;
}

LonePairModel load_lp_model(const std::string& path) {
  LonePairModelConfig cfg = lp_config_from_json(read_file(path + ".json"));
  Rng rng(0);
  LonePairModel model(cfg, rng);
  model.load(load_checkpoint(path));
  return model;
}

MultitaskModel load_mt_model(const std::string& path) {
  MultitaskModelConfig cfg = mt_config_from_json(read_file(path + ".json"));
  Rng rng(0);
  MultitaskModel model(cfg, rng);
  model.load(load_checkpoint(path));
  return model;
}

std::string format_curve(const std::vector<LossCurveRow>& curve) {
  std::ostringstream ss;
  ss << "epoch\tl_alpha\tl_beta\tl_gamma\tl_delta\ttotal\n";
  for (const LossCurveRow& r : curve)
    ss << r.epoch << '\t' << format_float(r.l_alpha) << '\t' << format_float(r.l_beta)
       << '\t' << format_float(r.l_gamma) << '\t' << format_float(r.l_delta) << '\t'
       << format_float(r.total) << '\n';
  return ss.str();
}

// --- subcommand bodies -------------------------------------------------------

void cmd_parse(RunContext& ctx, const std::vector<std::string>& files) {
  for (const std::string& path : files) {
    std::string ext = fs::path(path).extension().string();
    std::string text = read_file(path);
    if (ext == ".molj") {
      parse_or_throw(parse_molecule(text), path);
      std::cout << path << ": ok (molecule)\n";
    } else if (ext == ".nboj" || ext == ".nbotxt") {
      parse_or_throw(parse_nbo_record(text, ctx.mode), path);
      std::cout << path << ": ok (nbo record)\n";
    } else if (ext == ".simg") {
      parse_or_throw(parse_simg(text), path);
      std::cout << path << ": ok (simg)\n";
    } else {
      throw ValidationError(path + ": unknown extension '" + ext + "'");
    }
  }
}

void cmd_oracle(RunContext& ctx, const std::string& in, const std::string& out) {
  Molecule m = load_molecule(in);
  NboRecord r = synth_label(m, oracle_rules_of(ctx));
  write_file(ctx, out, serialize_nbo_record(r));
  write_manifest(ctx, out);
}

void cmd_build_graph(RunContext& ctx, const std::string& mol_path,
                     const std::string& label_path, const std::string& out) {
  Molecule m = load_molecule(mol_path);
  NboRecord r = load_record(label_path, ctx.mode);
  ExtendedGraph eg = build_extended_graph(build_molecular_graph(m), counts_from_record(m, r));
  write_file(ctx, out, serialize_simg(build_simg(eg, r)));
  write_manifest(ctx, out);
}

// Labeled pool -> (molecules, counts, graphs) for the trainers.
struct LabeledSet {
  std::vector<Molecule> molecules;
  std::vector<std::vector<LpCounts>> counts;
  std::vector<SimgGraph> graphs;
  std::vector<const Pool::Entry*> entries;
};

LabeledSet load_labeled(const std::string& pool_dir, Pool& pool) {
  pool = Pool::load(pool_dir);
  LabeledSet set;
  for (const Pool::Entry* e : pool.labeled()) {
    set.entries.push_back(e);
    set.molecules.push_back(e->molecule);
    set.counts.push_back(counts_from_record(e->molecule, e->record));
    ExtendedGraph eg =
        build_extended_graph(build_molecular_graph(e->molecule), set.counts.back());
    set.graphs.push_back(build_simg(eg, e->record));
  }
  if (set.molecules.empty()) throw ValidationError("pool has no labeled molecules");
  return set;
}

void cmd_train_lp(RunContext& ctx, const std::string& pool_dir, const std::string& out) {
  Pool pool;
  LabeledSet set = load_labeled(pool_dir, pool);
  LonePairModelConfig cfg = lp_config_of(ctx);
  std::vector<LossCurveRow> curve;
  LonePairModel model =
      train_lp_model(set.molecules, set.counts, cfg, train_options_of(ctx, "lp_train"), &curve);
  save_checkpoint(out, to_checkpoint(model.named_parameters()));
  ctx.outputs.push_back(out);
  write_file(ctx, out + ".json", lp_config_to_json(cfg));
  write_file(ctx, out + ".curve.tsv", format_curve(curve));
  write_manifest(ctx, out);
  log_info("trained lone-pair model on " + std::to_string(set.molecules.size()) +
           " molecules");
}

void cmd_train_mt(RunContext& ctx, const std::string& pool_dir, const std::string& out) {
  Pool pool;
  LabeledSet set = load_labeled(pool_dir, pool);
  MultitaskModelConfig cfg = mt_config_of(ctx);
  std::vector<LossCurveRow> curve;
  MultitaskModel model =
      train_multitask(set.graphs, cfg, train_options_of(ctx, "mt_train"), &curve);
  save_checkpoint(out, to_checkpoint(model.named_parameters()));
  ctx.outputs.push_back(out);
  write_file(ctx, out + ".json", mt_config_to_json(cfg));
  write_file(ctx, out + ".curve.tsv", format_curve(curve));
  write_manifest(ctx, out);
  log_info("trained multitask model on " + std::to_string(set.graphs.size()) + " graphs");
}

void cmd_predict(RunContext& ctx, const std::string& mol_path, const std::string& lp_path,
                 const std::string& mt_path, const std::string& out) {
  Molecule m = load_molecule(mol_path);
  LonePairModel lp = load_lp_model(lp_path);
  MultitaskModel mt = load_mt_model(mt_path);
  PredictOutput result = predict_simg(m, lp, mt, ctx.seed, ctx.threshold);
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
  write_file(ctx, out, serialize_simg(result.simg));
  write_manifest(ctx, out);
}

void cmd_al_run(RunContext& ctx, const std::string& pool_dir, int rounds,
                const std::string& out) {
  Pool pool = Pool::load(pool_dir);
  AlConfig cfg;
  cfg.rounds = rounds;
  cfg.seed = ctx.seed;
  cfg.jobs = ctx.jobs;
  cfg.lp_config = lp_config_of(ctx);
  cfg.mt_config = mt_config_of(ctx);
  cfg.lp_train = train_options_of(ctx, "lp_train");
  cfg.mt_train = train_options_of(ctx, "mt_train");
  cfg.oracle = oracle_rules_of(ctx);
  if (ctx.config.contains("al")) {
    const json& a = ctx.config["al"];
    cfg.acquisition.ensemble_size = a.value("ensemble_size", cfg.acquisition.ensemble_size);
    cfg.acquisition.per_target_k = a.value("per_target_k", cfg.acquisition.per_target_k);
    cfg.acquisition.partitions = a.value("partitions", cfg.acquisition.partitions);
    cfg.acquisition.per_part_sample =
        a.value("per_part_sample", cfg.acquisition.per_part_sample);
    if (a.contains("targets"))
      cfg.acquisition.targets = a["targets"].get<std::vector<std::string>>();
  }
  std::vector<AlRound> history = al_loop(pool, cfg);
  pool.save(pool_dir);

  std::ostringstream ss;
  ss << "round\tlabeled_size\tn_selected\tselected\tselection_element_freq\n";
  for (const AlRound& r : history) {
    ss << r.round << '\t' << r.labeled_size << '\t' << r.selected.size() << '\t';
    for (size_t i = 0; i < r.selected.size(); ++i)
      ss << (i ? "," : "") << r.selected[i];
    ss << '\t';
    bool first = true;
    for (const auto& [elem, freq] : r.selection_element_freq) {
      ss << (first ? "" : ",") << kElements[elem] << ":" << format_float(freq);
      first = false;
    }
    ss << '\n';
  }
  write_file(ctx, out, ss.str());
  write_manifest(ctx, out);
}

void cmd_eval(RunContext& ctx, const std::string& pool_dir, const std::string& lp_path,
              const std::string& mt_path, const std::string& out) {
  Pool pool;
  LabeledSet set = load_labeled(pool_dir, pool);
  LonePairModel lp = load_lp_model(lp_path);
  MultitaskModel mt = load_mt_model(mt_path);

  int reconstructed = 0;
  std::vector<double> q_pred, q_true;
  std::vector<double> link_scores;
  std::vector<int> link_labels;
  std::vector<std::pair<std::vector<double>, std::vector<int>>> link_groups;

  for (size_t i = 0; i < set.molecules.size(); ++i) {
    const Molecule& m = set.molecules[i];
    ExtendedGraph mg = build_molecular_graph(m);
    std::vector<LpCounts> predicted = lp.predict_counts(prepare_mol_inputs(mg));
    bool exact = true;
    for (size_t a = 0; a < predicted.size(); ++a)
      if (predicted[a].total != set.counts[i][a].total ||
          predicted[a].type1 != set.counts[i][a].type1)
        exact = false;
    if (exact) ++reconstructed;

    // Target-quality metrics are computed on the true extension so every
    // molecule contributes even when the lp counts miss.
    GraphInputs in = prepare_graph_inputs(set.graphs[i].graph);
    PredictionBundle bundle = mt.forward(in, ctx.seed);
    for (size_t a = 0; a < m.atoms.size(); ++a) {
      q_pred.push_back(bundle.atom_preds.at(static_cast<int>(a), 0));
      q_true.push_back(set.graphs[i].atom_targets[a][0]);
    }
    std::set<std::pair<NodeRef, NodeRef>> positives;
    for (const InteractionEdge& e : set.graphs[i].interactions)
      positives.insert({e.donor, e.acceptor});
    std::vector<double> scores;
    std::vector<int> labels;
    for (size_t c = 0; c < in.candidates.size(); ++c) {
      scores.push_back(bundle.link_logits.at(static_cast<int>(c), 0));
      labels.push_back(
          positives.count({in.candidates[c].donor, in.candidates[c].acceptor}) ? 1 : 0);
    }
    link_scores.insert(link_scores.end(), scores.begin(), scores.end());
    link_labels.insert(link_labels.end(), labels.begin(), labels.end());
    link_groups.push_back({scores, labels});
  }

  std::ostringstream ss;
  ss << "molecules\t" << set.molecules.size() << "\n";
  ss << "lp_reconstruction_rate\t"
     << format_float(static_cast<double>(reconstructed) /
                     static_cast<double>(set.molecules.size()))
     << "\n";
  RegressionMetrics q = regression_metrics(q_pred, q_true);
  ss << "atom_charge_mae\t" << format_float(q.mae) << "\n";
  ss << "atom_charge_rmse\t" << format_float(q.rmse) << "\n";
  ss << "atom_charge_r2\t" << (q.r2_defined ? format_float(q.r2) : "undefined") << "\n";
  bool has_pos = false, has_neg = false;
  for (int l : link_labels) (l ? has_pos : has_neg) = true;
  if (has_pos && has_neg) {
    ss << "link_auroc\t" << format_float(auroc(link_scores, link_labels)) << "\n";
    MeanAurocResult ma = mean_auroc(link_groups);
    ss << "mean_link_auroc\t" << format_float(ma.value) << "\n";
    ss << "auroc_groups_skipped\t" << ma.groups_skipped << "\n";
  } else {
    ss << "link_auroc\tundefined\n";
  }
  write_file(ctx, out, ss.str());
  write_manifest(ctx, out);
}

void cmd_bench(RunContext& ctx, const std::string& pool_dir, const std::string& lp_path,
               const std::string& mt_path, const std::string& out) {
  Pool pool;
  LabeledSet set = load_labeled(pool_dir, pool);
  // The simg-star variant needs model-predicted records; it is skipped
  // unless checkpoints are supplied.
  std::optional<LonePairModel> lp;
  std::optional<MultitaskModel> mt;
  if (!lp_path.empty() && !mt_path.empty()) {
    lp = load_lp_model(lp_path);
    mt = load_mt_model(mt_path);
  }
  std::vector<BenchmarkSample> data;
  for (const Pool::Entry* e : set.entries) {
    double total_e2 = 0;
    for (const InteractionRecord& i : e->record.interactions) total_e2 += i.e2;
    BenchmarkSample s{e->molecule, e->record, total_e2, std::nullopt};
    if (lp)
      s.predicted_record =
          extract_record(predict_simg(e->molecule, *lp, *mt, ctx.seed, ctx.threshold).simg);
    data.push_back(std::move(s));
  }
  DownstreamConfig cfg;
  cfg.seed = ctx.seed;
  if (ctx.config.contains("bench")) {
    const json& b = ctx.config["bench"];
    cfg.layers = b.value("layers", cfg.layers);
    cfg.hidden = b.value("hidden", cfg.hidden);
    cfg.epochs = b.value("epochs", cfg.epochs);
    cfg.learning_rate = b.value("learning_rate", cfg.learning_rate);
    cfg.chemical_accuracy = b.value("chemical_accuracy", cfg.chemical_accuracy);
  }
  std::vector<GraphVariant> variants = {
      GraphVariant::MolGraph, GraphVariant::SimgFeaturesOnly,
      GraphVariant::SimgTopologyOnly, GraphVariant::FullSimg};
  if (lp) variants.push_back(GraphVariant::SimgStar);
  std::vector<BenchmarkRow> rows = downstream_benchmark(data, variants, cfg);
  std::ostringstream ss;
  ss << "variant\ttest_mae\tnormalized_mae\n";
  for (const BenchmarkRow& r : rows)
    ss << variant_name(r.variant) << '\t' << format_float(r.test_mae) << '\t'
       << format_float(r.normalized_mae) << '\n';
  write_file(ctx, out, ss.str());
  write_manifest(ctx, out);
}

void cmd_export_traj(RunContext& ctx, const std::string& mol_path,
                     const std::string& lp_path, const std::string& mt_path,
                     const std::string& out) {
  Molecule m = load_molecule(mol_path);
  LonePairModel lp = load_lp_model(lp_path);
  MultitaskModel mt = load_mt_model(mt_path);
  ExtendedGraph mg = build_molecular_graph(m);
  ExtendedGraph eg = build_extended_graph(mg, lp.predict_counts(prepare_mol_inputs(mg)));
  GraphInputs in = prepare_graph_inputs(eg);
  PredictionBundle bundle = mt.forward(in, ctx.seed, /*record_trajectory=*/true);
  std::ostringstream ss;
  ss << "step\tvalues\n";
  for (size_t step = 0; step < bundle.hidden_trajectory.size(); ++step) {
    ss << step << '\t';
    const std::vector<double>& row = bundle.hidden_trajectory[step];
    for (size_t i = 0; i < row.size(); ++i) ss << (i ? "," : "") << format_float(row[i]);
    ss << '\n';
  }
  write_file(ctx, out, ss.str());
  write_manifest(ctx, out);
}

void cmd_gen_pool(RunContext& ctx, const std::string& out_dir, int n, int n_labeled) {
  if (n < 1 || n_labeled < 0 || n_labeled > n)
    throw ValidationError("gen-pool: need n >= 1 and 0 <= labeled <= n");
  GeneratorConfig gen;
  if (ctx.config.contains("generator")) {
    const json& g = ctx.config["generator"];
    gen.min_heavy = g.value("min_heavy", gen.min_heavy);
    gen.max_heavy = g.value("max_heavy", gen.max_heavy);
    gen.multiple_bond_prob = g.value("multiple_bond_prob", gen.multiple_bond_prob);
    if (g.contains("elements")) gen.elements = g["elements"].get<std::vector<int>>();
  }
  OracleRules rules = oracle_rules_of(ctx);
  Rng rng(ctx.seed);
  Pool pool;
  int added = 0;
  while (added < n) {
    Molecule m = random_molecule(rng, gen);
    bool ok = added < n_labeled ? pool.add_labeled(m, synth_label(m, rules)) : pool.add(m);
    if (ok) ++added;
  }
  pool.save(out_dir);
  write_manifest(ctx, (fs::path(out_dir) / "pool").string());
  log_info("generated pool of " + std::to_string(n) + " molecules (" +
           std::to_string(n_labeled) + " labeled)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stereoelectronics-infused molecular graph pipeline"};
  app.require_subcommand(1);

  RunContext ctx;
  bool lenient = false;
  app.add_option("--seed", ctx.seed, "global random seed");
  app.add_option("--config", ctx.config_path, "JSON configuration file");
  app.add_flag("--lenient", lenient, "lenient parse mode (default strict)");
  app.add_option("--threshold", ctx.threshold, "link probability threshold tau");
  app.add_option("--jobs", ctx.jobs, "worker threads where supported");

  std::vector<std::string> parse_files;
  auto* c_parse = app.add_subcommand("parse", "validate MOLJ/NBOJ/NBOTXT/SIMG files");
  c_parse->add_option("files", parse_files)->required()->expected(-1);

  std::string in_path, label_path, out_path, pool_dir, lp_path, mt_path;
  auto* c_oracle = app.add_subcommand("oracle", "label a molecule with the synthetic oracle");
  c_oracle->add_option("input", in_path)->required();
  c_oracle->add_option("output", out_path)->required();

  auto* c_build = app.add_subcommand("build-graph", "molecule + labels -> SIMG file");
  c_build->add_option("molecule", in_path)->required();
  c_build->add_option("labels", label_path)->required();
  c_build->add_option("output", out_path)->required();

  auto* c_tlp = app.add_subcommand("train-lp", "train the lone-pair classifier");
  c_tlp->add_option("--pool", pool_dir)->required();
  c_tlp->add_option("--out", out_path)->required();

  auto* c_tmt = app.add_subcommand("train-mt", "train the multitask predictor");
  c_tmt->add_option("--pool", pool_dir)->required();
  c_tmt->add_option("--out", out_path)->required();

  auto* c_pred = app.add_subcommand("predict", "molecule -> SIMG* via trained checkpoints");
  c_pred->add_option("molecule", in_path)->required();
  c_pred->add_option("--lp", lp_path)->required();
  c_pred->add_option("--mt", mt_path)->required();
  c_pred->add_option("--out", out_path)->required();

  int rounds = 3;
  auto* c_al = app.add_subcommand("al-run", "run the active-learning loop on a pool");
  c_al->add_option("--pool", pool_dir)->required();
  c_al->add_option("--rounds", rounds);
  c_al->add_option("--out", out_path)->required();

  auto* c_eval = app.add_subcommand("eval", "evaluate trained models on a labeled pool");
  c_eval->add_option("--pool", pool_dir)->required();
  c_eval->add_option("--lp", lp_path)->required();
  c_eval->add_option("--mt", mt_path)->required();
  c_eval->add_option("--out", out_path)->required();

  auto* c_bench = app.add_subcommand("bench", "downstream graph-variant benchmark");
  c_bench->add_option("--pool", pool_dir)->required();
  c_bench->add_option("--out", out_path)->required();
  c_bench->add_option("--lp", lp_path);
  c_bench->add_option("--mt", mt_path);

  int pool_n = 100, pool_labeled = 50;
  auto* c_gen = app.add_subcommand("gen-pool", "generate a synthetic molecule pool");
  c_gen->add_option("--out", out_path)->required();
  c_gen->add_option("--n", pool_n);
  c_gen->add_option("--labeled", pool_labeled);

  auto* c_traj = app.add_subcommand("export-traj", "export evolver hidden-state trajectory");
  c_traj->add_option("molecule", in_path)->required();
  c_traj->add_option("--lp", lp_path)->required();
  c_traj->add_option("--mt", mt_path)->required();
  c_traj->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);
  ctx.mode = lenient ? ParseMode::Lenient : ParseMode::Strict;

  try {
    if (!ctx.config_path.empty()) {
      try {
        ctx.config = json::parse(read_file(ctx.config_path));
      } catch (const json::exception& e) {
        throw ValidationError(ctx.config_path + ": " + e.what());
      }
    }
    if (ctx.threshold <= 0.0 || ctx.threshold >= 1.0)
      throw ValidationError("--threshold must lie strictly between 0 and 1");

    if (c_parse->parsed()) cmd_parse(ctx, parse_files);
    else if (c_oracle->parsed()) cmd_oracle(ctx, in_path, out_path);
    else if (c_build->parsed()) cmd_build_graph(ctx, in_path, label_path, out_path);
    else if (c_tlp->parsed()) cmd_train_lp(ctx, pool_dir, out_path);
    else if (c_tmt->parsed()) cmd_train_mt(ctx, pool_dir, out_path);
    else if (c_pred->parsed()) cmd_predict(ctx, in_path, lp_path, mt_path, out_path);
    else if (c_al->parsed()) cmd_al_run(ctx, pool_dir, rounds, out_path);
    else if (c_eval->parsed()) cmd_eval(ctx, pool_dir, lp_path, mt_path, out_path);
    else if (c_bench->parsed()) cmd_bench(ctx, pool_dir, lp_path, mt_path, out_path);
    else if (c_gen->parsed()) cmd_gen_pool(ctx, out_path, pool_n, pool_labeled);
    else if (c_traj->parsed()) cmd_export_traj(ctx, in_path, lp_path, mt_path, out_path);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const std::string& path : ctx.outputs) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    bool validation = dynamic_cast<const ValidationError*>(&e) != nullptr ||
                      dynamic_cast<const GraphError*>(&e) != nullptr ||
                      dynamic_cast<const OracleError*>(&e) != nullptr ||
                      dynamic_cast<const std::invalid_argument*>(&e) != nullptr;
    return validation ? 1 : 2;
  }
}
