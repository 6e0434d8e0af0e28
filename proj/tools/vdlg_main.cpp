// vdlg: desk-scale visual dialog transformer with coreference soft constraints.
// Subcommands: gen-data, train, eval, probe, analyze-pe.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vdlg/checkpoint.hpp"
#include "vdlg/config.hpp"
#include "vdlg/data.hpp"
#include "vdlg/errors.hpp"
#include "vdlg/evaluation.hpp"
#include "vdlg/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vdlg;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

RunConfig load_run_config(const std::string& config_path, std::optional<std::uint64_t> seed_flag) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (const char* env = std::getenv("CORESEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("CORESEED must be an unsigned integer");
    }
  }
  if (seed_flag) cfg.seed = *seed_flag;
  cfg.validate();
  return cfg;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    std::uint64_t seed, const std::vector<std::string>& artifacts) {
  json m;
  m["command"] = command;
  m["seed"] = seed;
  json files = json::object();
  for (const std::string& rel : artifacts) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(file_fnv1a(out_dir + "/" + rel)));
    files[rel] = buf;
  }
  m["artifacts"] = std::move(files);
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw DataError("cannot write manifest under " + out_dir);
  out << m.dump(1) << '\n';
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Corpus load_split(const std::string& data_dir, const std::string& split) {
  return load_visdial_json(data_dir + "/" + split + ".json", data_dir + "/features.bin");
}

// ----- gen-data -----

int cmd_gen_data(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_flag, std::optional<int> dialogs,
                 std::optional<int> rounds, std::optional<int> pool,
                 std::optional<double> pronoun_rate) {
  RunConfig cfg = load_run_config(config_path, seed_flag);
  if (dialogs) cfg.dialogs = *dialogs;
  if (rounds) cfg.rounds = *rounds;
  if (pool) cfg.pool_size = *pool;
  if (pronoun_rate) cfg.pronoun_rate = *pronoun_rate;
  cfg.validate();

  fs::create_directories(out_dir);
  GenConfig gen = cfg.gen_config();

  struct Split {
    const char* name;
    int count;
    std::uint64_t first_id;
  };
  const Split splits[] = {{"train", cfg.dialogs, 1},
                          {"val", cfg.val_dialogs, 10'000'001},
                          {"test", cfg.test_dialogs, 20'000'001}};
  std::map<std::uint64_t, ImageRegionSet> all_regions;
  int total_links = 0;
  for (const Split& s : splits) {
    if (s.count == 0) continue;
    Corpus corpus =
        generate_corpus(hash_combine(cfg.seed, s.name), gen, s.count, s.first_id);
    for (const Dialog& d : corpus.dialogs) total_links += static_cast<int>(d.links.size());
    save_dialogs_json(corpus.dialogs, out_dir + std::string("/") + s.name + ".json");
    for (auto& [id, r] : corpus.regions) all_regions.emplace(id, std::move(r));
  }
  save_features_bin(all_regions, out_dir + "/features.bin");
  {
    std::ofstream cfg_out(out_dir + "/config.cfg");
    cfg_out << cfg.serialize();
  }

  std::uint64_t corpus_hash = 0xcbf29ce484222325ULL;
  std::vector<std::string> artifacts = {"train.json", "val.json", "test.json", "features.bin",
                                        "config.cfg"};
  for (const std::string& a : artifacts)
    corpus_hash = hash_combine(corpus_hash, a + ":" + hex64(file_fnv1a(out_dir + "/" + a)));
  write_manifest(out_dir, "gen-data", cfg.seed, artifacts);

  int instances_per_dialog = 2 * cfg.rounds;
  std::cout << "seed " << cfg.seed << "\n";
  std::cout << "corpus_hash " << hex64(corpus_hash) << "\n";
  std::cout << "dialogs " << cfg.dialogs << " val " << cfg.val_dialogs << " test "
            << cfg.test_dialogs << "\n";
  std::cout << "nsp_instances_per_dialog " << instances_per_dialog << "\n";
  std::cout << "coref_links " << total_links << "\n";
  if (total_links == 0)
    std::cout << "warning: no links (probe corpus unusable; raise pronoun-rate)\n";
  return 0;
}

// ----- train -----

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, std::optional<std::uint64_t> seed_flag) {
  RunConfig cfg = load_run_config(config_path, seed_flag);
  Corpus train = load_split(data_dir, "train");
  Corpus val = load_split(data_dir, "val");
  const VocabLexicon& vl = builtin_vocab_lexicon();
  fs::create_directories(out_dir);
  std::cout << "seed " << cfg.seed << "\n";
  TrainResult result = train_model(cfg, train, val, vl, out_dir, &std::cout);
  write_manifest(out_dir, "train", cfg.seed,
                 {"loss.csv", "validation.csv", "checkpoint.vdck"});
  std::cout << "steps " << result.steps << "\n";
  std::cout << "checkpoint " << result.final_checkpoint << "\n";
  if (!result.val_history.empty())
    std::cout << "final_val_r_at_1 " << result.val_history.back().second << "\n";
  return 0;
}

// ----- eval -----

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             const std::string& split, const std::string& out_dir, int threads_flag) {
  const VocabLexicon& vl = builtin_vocab_lexicon();
  CheckpointMeta meta;
  auto model = load_checkpoint(checkpoint_path, vl.vocab.size(), &meta);
  Corpus corpus = load_split(data_dir, split);
  int threads = threads_flag > 0 ? threads_flag : meta.config.threads;
  RankingOutcome out = evaluate_ranking(*model, corpus, vl, threads);

  json j;
  j["mrr"] = out.metrics.mrr;
  j["r_at_1"] = out.metrics.r_at_1;
  j["r_at_5"] = out.metrics.r_at_5;
  j["r_at_10"] = out.metrics.r_at_10;
  j["mean_rank"] = out.metrics.mean_rank;
  j["n_sets"] = out.metrics.n_sets;
  j["seed"] = meta.config.seed;
  j["split"] = split;
  std::string text = j.dump(1) + "\n";
  std::cout << text;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir + "/metrics.json");
    f << text;
    write_manifest(out_dir, "eval", meta.config.seed, {"metrics.json"});
  }
  return 0;
}

// ----- probe -----

int cmd_probe(const std::string& checkpoint_path, const std::string& data_dir,
              const std::string& split, const std::string& out_dir, int layer,
              const std::string& heads_arg, int window, const std::string& ks_arg,
              const std::string& compare_path, int max_dialogs) {
  const VocabLexicon& vl = builtin_vocab_lexicon();
  CheckpointMeta meta;
  auto model = load_checkpoint(checkpoint_path, vl.vocab.size(), &meta);
  Corpus corpus;
  try {
    corpus = load_split(data_dir, split);
  } catch (const DataError&) {
    throw;
  }
  bool any_links = false;
  for (const Dialog& d : corpus.dialogs)
    if (!d.links.empty()) any_links = true;
  if (!any_links)
    throw DataError("corpus has no coreference links; generate one with gen-data "
                    "(pronoun-rate > 0)");

  ProbeSpec spec;
  spec.layer = layer;
  if (!heads_arg.empty() && heads_arg != "all") {
    std::istringstream hs(heads_arg);
    std::string tok;
    while (std::getline(hs, tok, ',')) spec.heads.push_back(std::stoi(tok));
  }
  std::vector<int> ks;
  {
    std::istringstream kss(ks_arg);
    std::string tok;
    while (std::getline(kss, tok, ',')) ks.push_back(std::stoi(tok));
    if (ks.empty()) ks = {5, 10, 20};
  }

  fs::create_directories(out_dir);
  std::ofstream report(out_dir + "/probe_report.csv");
  report << "image_id,round,pronoun_pos";
  for (int k : ks) report << ",hit_at_" << k;
  report << "\n";

  std::vector<std::string> artifacts = {"probe_report.csv"};
  int exported = 0;
  auto hook = [&](const Dialog& d, int round, const ModelOutput& out, const TokenSequence&,
                  const CorefProbeReport& rep) {
    for (const LinkProbeResult& lr : rep.per_link) {
      report << d.image_id << ',' << round << ',' << lr.pronoun_pos;
      for (int k : ks) report << ',' << (lr.hit.at(k) ? 1 : 0);
      report << "\n";
    }
    // heatmaps: one file per (dialog, layer, head); optionally windowed around
    // the first probed pronoun of the round
    if (exported >= 16) return;  // keep exports bounded
    ++exported;
    int l = rep.layer;
    for (std::size_t h = 0; h < out.attention[static_cast<std::size_t>(l)].size(); ++h) {
      const Tensor& full = out.attention[static_cast<std::size_t>(l)][h];
      Tensor view = full;
      if (window > 0 && !rep.per_link.empty()) {
        int p = rep.per_link.front().pronoun_pos;
        int lo = std::max(0, p - window);
        int hi = std::min<int>(static_cast<int>(full.rows()), p + window + 1);
        view = Tensor(hi - lo, hi - lo);
        for (int r = lo; r < hi; ++r)
          for (int c = lo; c < hi; ++c) view.at(r - lo, c - lo) = full.at(r, c);
      }
      std::string stem = "attention_img" + std::to_string(d.image_id) + "_r" +
                         std::to_string(round) + "_l" + std::to_string(l) + "_h" +
                         std::to_string(h);
      write_matrix_pgm(view, out_dir + "/" + stem + ".pgm");
      write_matrix_csv(view, out_dir + "/" + stem + ".csv");
      artifacts.push_back(stem + ".pgm");
      artifacts.push_back(stem + ".csv");
    }
  };

  ProbeAggregate agg = probe_corpus(*model, corpus, vl, spec, ks, max_dialogs, hook);

  std::optional<ProbeAggregate> base;
  if (!compare_path.empty()) {
    auto base_model = load_checkpoint(compare_path, vl.vocab.size());
    base = probe_corpus(*base_model, corpus, vl, spec, ks, max_dialogs);
  }

  std::ofstream summary(out_dir + "/probe_summary.csv");
  summary.precision(17);
  summary << "k,hit_rate";
  if (base) summary << ",baseline_hit_rate,delta";
  summary << "\n";
  for (int k : ks) {
    summary << k << ',' << agg.hit_rate.at(k);
    if (base) summary << ',' << base->hit_rate.at(k) << ','
                      << (agg.hit_rate.at(k) - base->hit_rate.at(k));
    summary << "\n";
  }
  summary << "noun_fraction," << agg.noun_fraction;
  if (base) summary << ',' << base->noun_fraction << ','
                    << (agg.noun_fraction - base->noun_fraction);
  summary << "\n";
  summary.close();
  report.close();
  artifacts.push_back("probe_summary.csv");
  write_manifest(out_dir, "probe", meta.config.seed, artifacts);

  std::cout << "seed " << meta.config.seed << "\n";
  std::cout << "links " << agg.n_links << "\n";
  for (int k : ks) std::cout << "hit@" << k << " " << agg.hit_rate.at(k) << "\n";
  std::cout << "noun_fraction " << agg.noun_fraction << "\n";
  return 0;
}

// ----- analyze-pe -----

int cmd_analyze_pe(int d, int M, double k, double eps, const std::string& out_path) {
  PEConfig cfg{d, M, k, eps};
  PEAnalysis a = analyze_sentence_pe(cfg);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write " + out_path);
    out.precision(17);
    out << "delta,dot\n";
    for (std::size_t i = 0; i < a.dot_by_delta.size(); ++i)
      out << i << ',' << a.dot_by_delta[i] << "\n";
  }
  std::cout.precision(17);
  std::cout << "dot(0) " << a.dot_by_delta[0] << "\n";
  std::cout << "max_pair_deviation " << a.max_pair_deviation << "\n";
  std::cout << "max_closed_form_error " << a.max_closed_form_error << "\n";
  std::cout << "max_w_times_M " << a.max_frequency_times_M << "\n";
  bool pass = a.delta_only && a.monotone_decreasing && a.max_closed_form_error < 1e-12;
  std::cout << "monotonicity " << (a.monotone_decreasing ? "PASS" : "FAIL") << "\n";
  std::cout << "verdict " << (pass ? "PASS" : "FAIL") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale visual dialog transformer with coreference soft constraints"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, checkpoint_path, split = "test";
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> dialogs_flag, rounds_flag, pool_flag;
  std::optional<double> pronoun_rate_flag;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen->add_option("--config", config_path, "run config file");
  gen->add_option("--out", out_dir, "output corpus directory")->required();
  gen->add_option("--seed", seed_flag, "override config seed");
  gen->add_option("--dialogs", dialogs_flag, "training dialog count");
  gen->add_option("--rounds", rounds_flag, "rounds per dialog");
  gen->add_option("--pool", pool_flag, "candidate pool size");
  gen->add_option("--pronoun-rate", pronoun_rate_flag, "pronominal round rate");

  auto* train = app.add_subcommand("train", "train a model on a corpus");
  train->add_option("--config", config_path, "run config file");
  train->add_option("--data", data_dir, "corpus directory")->required();
  train->add_option("--out", out_dir, "run output directory")->required();
  train->add_option("--seed", seed_flag, "override config seed");

  int threads_flag = 0;
  auto* eval = app.add_subcommand("eval", "rank candidate pools with a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "corpus directory")->required();
  eval->add_option("--split", split, "corpus split (train/val/test)");
  eval->add_option("--out", out_dir, "output directory for metrics.json");
  eval->add_option("--threads", threads_flag, "evaluation threads");

  int layer = -1, window = 0, max_dialogs = -1;
  std::string heads_arg = "all", ks_arg = "5,10,20", compare_path;
  auto* probe = app.add_subcommand("probe", "coreference attention probe");
  probe->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  probe->add_option("--data", data_dir, "corpus directory")->required();
  probe->add_option("--split", split, "corpus split");
  probe->add_option("--out", out_dir, "output directory")->required();
  probe->add_option("--layer", layer, "attention layer (-1 = last)");
  probe->add_option("--heads", heads_arg, "comma list of heads or 'all'");
  probe->add_option("--window", window, "heatmap window around the pronoun (0 = full)");
  probe->add_option("--ks", ks_arg, "comma list of top-k thresholds");
  probe->add_option("--compare", compare_path, "baseline checkpoint for delta columns");
  probe->add_option("--max-dialogs", max_dialogs, "probe at most this many dialogs");

  int pe_d = 768, pe_M = 21;
  double pe_k = 100.0, pe_eps = 10000.0;
  std::string pe_out;
  auto* ape = app.add_subcommand("analyze-pe", "sentence-PE dot-product analysis");
  ape->add_option("--d", pe_d, "hidden size");
  ape->add_option("--M", pe_M, "max sentence count");
  ape->add_option("--k", pe_k, "scaling factor");
  ape->add_option("--eps", pe_eps, "wavelength base");
  ape->add_option("--out", pe_out, "curve CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed())
      return cmd_gen_data(config_path, out_dir, seed_flag, dialogs_flag, rounds_flag, pool_flag,
                          pronoun_rate_flag);
    if (train->parsed()) return cmd_train(config_path, data_dir, out_dir, seed_flag);
    if (eval->parsed())
      return cmd_eval(checkpoint_path, data_dir, split, out_dir, threads_flag);
    if (probe->parsed())
      return cmd_probe(checkpoint_path, data_dir, split, out_dir, layer, heads_arg, window,
                       ks_arg, compare_path, max_dialogs);
    if (ape->parsed()) return cmd_analyze_pe(pe_d, pe_M, pe_k, pe_eps, pe_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
