#include "vdlg/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "vdlg/errors.hpp"
#include "vdlg/optimizer.hpp"

namespace vdlg {

MaskedBatch make_masked_batch(const AssembledInput& input, const MaskRates& rates, Rng& rng,
                              bool c1, int mask_token_id) {
  MaskedBatch batch;
  batch.seq = input.seq;
  batch.regions = input.regions;
  batch.mask_token_id = mask_token_id;
  if (input.nsp_label != 0 && input.nsp_label != 1)
    throw DataError("instance without NSP label");
  batch.nsp_label = input.nsp_label;
  apply_mlm_mask(batch, rates.mlm, rng);
  if (rates.mir > 0.0) apply_mir_mask(batch, rates.mir, rng);
  if (c1) apply_pos_mask(batch, rates.pos, rng, true);
  return batch;
}

double lr_schedule(const RunConfig& cfg, std::int64_t step) {
  if (step <= 0) step = 0;
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
    double t = static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    return cfg.warmup_start_lr + t * (cfg.learning_rate - cfg.warmup_start_lr);
  }
  if (step >= cfg.total_steps) return cfg.final_lr;
  double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  double t = span <= 0.0 ? 1.0 : static_cast<double>(step - cfg.warmup_steps) / span;
  return cfg.learning_rate + t * (cfg.final_lr - cfg.learning_rate);
}

namespace {

std::vector<RankedAnswerSet> rank_dialog(const Model& model, const Dialog& dialog,
                                         const ImageRegionSet& regions, const VocabLexicon& vl,
                                         int max_lang_len) {
  std::vector<RankedAnswerSet> sets;
  ForwardOptions opts;
  opts.heads_nsp_only = true;
  for (int t = 1; t <= static_cast<int>(dialog.rounds.size()); ++t) {
    const DialogRound& r = dialog.rounds[static_cast<std::size_t>(t - 1)];
    RankedAnswerSet set;
    set.ground_truth = r.answer_index;
    for (const std::string& cand : r.candidates) {
      AssembledInput in = assemble_input(dialog, t, cand, regions, vl, max_lang_len);
      Tape tape;
      ModelOutput out = model.forward(tape, in.seq, in.regions, opts);
      set.scores.push_back(out.nsp_probability);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

}  // namespace

RankingOutcome evaluate_ranking(const Model& model, const Corpus& corpus,
                                const VocabLexicon& vl, int threads, int max_dialogs) {
  int n = static_cast<int>(corpus.dialogs.size());
  if (max_dialogs >= 0) n = std::min(n, max_dialogs);
  if (n == 0) throw DataError("evaluate_ranking: no dialogs");
  int max_lang_len = model.config().max_len - kImageRows;

  std::vector<std::vector<RankedAnswerSet>> per_dialog(static_cast<std::size_t>(n));
  int workers = std::max(1, std::min(threads, n));
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  auto work = [&]() {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= n) break;
      const Dialog& d = corpus.dialogs[static_cast<std::size_t>(i)];
      auto it = corpus.regions.find(d.image_id);
      if (it == corpus.regions.end())
        throw DataError("missing features for image id " + std::to_string(d.image_id));
      per_dialog[static_cast<std::size_t>(i)] =
          rank_dialog(model, d, it->second, vl, max_lang_len);
    }
  };
  if (workers == 1) {
    work();
  } else {
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  RankingOutcome out;
  for (auto& sets : per_dialog)
    for (auto& s : sets) out.sets.push_back(std::move(s));
  out.metrics = ranking_metrics(out.sets);
  return out;
}

ProbeAggregate probe_corpus(const Model& model, const Corpus& corpus, const VocabLexicon& vl,
                            const ProbeSpec& spec, const std::vector<int>& ks, int max_dialogs,
                            const ProbeRoundHook& hook) {
  ProbeAggregate agg;
  std::map<int, int> hits;
  for (int k : ks) hits[k] = 0;
  double noun_sum = 0.0;
  int noun_rounds = 0;

  int n = static_cast<int>(corpus.dialogs.size());
  if (max_dialogs >= 0) n = std::min(n, max_dialogs);
  int max_lang_len = model.config().max_len - kImageRows;
  ForwardOptions opts;
  opts.heads_nsp_only = true;
  opts.capture_attention = true;

  for (int di = 0; di < n; ++di) {
    const Dialog& dialog = corpus.dialogs[static_cast<std::size_t>(di)];
    if (dialog.links.empty()) continue;
    auto rit = corpus.regions.find(dialog.image_id);
    if (rit == corpus.regions.end())
      throw DataError("missing features for image id " + std::to_string(dialog.image_id));
    for (int t = 1; t <= static_cast<int>(dialog.rounds.size()); ++t) {
      bool has_link = false;
      for (const CorefLink& l : dialog.links)
        if (l.pronoun.sentence == 2 * t - 1) has_link = true;
      if (!has_link) continue;

      const DialogRound& r = dialog.rounds[static_cast<std::size_t>(t - 1)];
      AssembledInput in = assemble_input(
          dialog, t, r.candidates[static_cast<std::size_t>(r.answer_index)], rit->second, vl,
          max_lang_len);
      // probe only the links whose pronoun lives in this round's question
      std::vector<ResolvedLink> links;
      for (const ResolvedLink& rl : in.links)
        if (rl.pronoun_sentence == 2 * t - 1) links.push_back(rl);
      if (links.empty()) continue;

      Tape tape;
      ModelOutput out = model.forward(tape, in.seq, in.regions, opts);
      CorefProbeReport report = coref_probe(out, in.seq, links, spec, ks);
      for (const LinkProbeResult& lr : report.per_link)
        for (const auto& [k, hit] : lr.hit)
          if (hit) ++hits[k];
      agg.n_links += static_cast<int>(report.per_link.size());

      std::vector<int> prons = pronoun_positions(in.seq.ids, vl.vocab, vl.lexicon);
      if (!prons.empty()) {
        noun_sum += pos_attention_summary(out, in.seq, prons, spec);
        ++noun_rounds;
      }
      ++agg.n_probed_rounds;
      if (hook) hook(dialog, t, out, in.seq, report);
    }
  }
  if (agg.n_links == 0) throw DataError("probe corpus has no coreference links");
  for (int k : ks)
    agg.hit_rate[k] = static_cast<double>(hits.at(k)) / static_cast<double>(agg.n_links);
  agg.noun_fraction = noun_rounds ? noun_sum / noun_rounds : 0.0;
  return agg;
}

TrainResult train_model(const RunConfig& cfg, const Corpus& train, const Corpus& val,
                        const VocabLexicon& vl, const std::string& out_dir,
                        std::ostream* progress) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  Model model(cfg.encoder_config(vl.vocab.size()), cfg.seed);
  Adam adam;
  Rng root(cfg.seed);
  Rng order_rng = root.fork("order");
  Rng mask_rng = root.fork("mask");
  Rng dropout_rng = root.fork("dropout");

  MaskRates rates{cfg.mlm_rate, cfg.mir_rate, cfg.pos_mask_rate};
  int max_lang_len = cfg.max_len - kImageRows;
  int mask_id = vl.vocab.mask_id();

  std::ofstream loss_csv(out_dir + "/loss.csv");
  if (!loss_csv) throw DataError("cannot write loss csv under " + out_dir);
  loss_csv << "step,mlm,mir,nsp,pos,total,learning_rate\n";
  loss_csv.precision(17);

  std::ofstream val_csv(out_dir + "/validation.csv");
  val_csv << "step,instances,val_r_at_1\n";
  val_csv.precision(17);

  TrainResult result;
  std::string last_good = out_dir + "/checkpoint.vdck";
  std::int64_t step = 0;
  std::int64_t instances_seen = 0;

  // one epoch = sub_sample of the 20 NSP instances per dialog, shuffled
  auto build_epoch = [&]() {
    std::vector<std::pair<int, int>> picks;  // (dialog, instance index within its 20)
    int per_dialog = 2 * cfg.rounds;
    for (int d = 0; d < static_cast<int>(train.dialogs.size()); ++d) {
      std::vector<int> idx(static_cast<std::size_t>(per_dialog));
      for (int i = 0; i < per_dialog; ++i) idx[static_cast<std::size_t>(i)] = i;
      for (int i = 0; i < cfg.sub_sample; ++i) {
        int j = i + static_cast<int>(order_rng.uniform_int(
                        static_cast<std::uint64_t>(per_dialog - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        picks.emplace_back(d, idx[static_cast<std::size_t>(i)]);
      }
    }
    for (std::size_t i = 0; i + 1 < picks.size(); ++i) {
      std::size_t j = i + static_cast<std::size_t>(order_rng.uniform_int(picks.size() - i));
      std::swap(picks[i], picks[j]);
    }
    return picks;
  };

  auto instance_of = [&](int dialog_idx, int pick) {
    const Dialog& d = train.dialogs[static_cast<std::size_t>(dialog_idx)];
    const ImageRegionSet& regions = train.regions.at(d.image_id);
    int t = pick / 2 + 1;
    bool positive = pick % 2 == 0;
    const DialogRound& r = d.rounds[static_cast<std::size_t>(t - 1)];
    std::string cand;
    if (positive) {
      cand = r.candidates[static_cast<std::size_t>(r.answer_index)];
    } else {
      std::size_t wrong = mask_rng.uniform_int(r.candidates.size() - 1);
      if (wrong >= static_cast<std::size_t>(r.answer_index)) ++wrong;
      cand = r.candidates[wrong];
    }
    AssembledInput in = assemble_input(d, t, cand, regions, vl, max_lang_len);
    in.nsp_label = positive ? 1 : 0;
    return in;
  };

  auto validate_now = [&]() {
    RankingOutcome out = evaluate_ranking(model, val, vl, cfg.threads, cfg.eval_dialogs);
    result.val_history.emplace_back(instances_seen, out.metrics.r_at_1);
    val_csv << step << ',' << instances_seen << ',' << out.metrics.r_at_1 << '\n';
    val_csv.flush();
    if (progress)
      (*progress) << "step " << step << " instances " << instances_seen << " val R@1 "
                  << out.metrics.r_at_1 << "\n";
    return out.metrics.r_at_1;
  };

  std::vector<std::pair<int, int>> epoch;
  std::size_t cursor = 0;
  try {
    while (step < cfg.total_steps) {
      model.params().zero_grad();
      double sum_mlm = 0, sum_mir = 0, sum_nsp = 0, sum_pos = 0, sum_total = 0;
      int batch_n = 0;
      for (; batch_n < cfg.batch_size; ++batch_n) {
        if (cursor >= epoch.size()) {
          epoch = build_epoch();
          cursor = 0;
        }
        auto [di, pick] = epoch[cursor++];
        AssembledInput in = instance_of(di, pick);
        MaskedBatch batch =
            make_masked_batch(in, rates, mask_rng, cfg.c1_pos_constraint, mask_id);
        Tape tape;
        ForwardOptions opts;
        opts.training = true;
        opts.dropout_rng = &dropout_rng;
        ModelOutput out = model.forward(tape, batch.seq, batch.regions, opts);
        LossBreakdown lb = compute_losses(tape, batch, out,
                                          {cfg.c1_pos_constraint, cfg.pos_loss_weight});
        tape.backward(lb.total);
        sum_mlm += lb.mlm;
        sum_mir += lb.mir;
        sum_nsp += lb.nsp;
        sum_pos += lb.pos;
        sum_total += lb.total_value;
        ++instances_seen;
      }
      // batch-mean gradients
      for (Parameter* p : model.params().all())
        for (std::int64_t i = 0; i < p->grad.size(); ++i)
          p->grad[i] /= static_cast<double>(batch_n);

      double lr = lr_schedule(cfg, step);
      adam.step(model.params(), lr);
      ++step;

      double inv = 1.0 / static_cast<double>(batch_n);
      loss_csv << step << ',' << sum_mlm * inv << ',' << sum_mir * inv << ',' << sum_nsp * inv
               << ',' << sum_pos * inv << ',' << sum_total * inv << ',' << lr << '\n';

      if (step % cfg.eval_interval == 0 || step == cfg.total_steps) {
        validate_now();
        save_checkpoint(last_good, model, cfg, static_cast<std::uint64_t>(step), cfg.seed);
      }
    }
  } catch (const NumericalError&) {
    result.aborted = true;
    result.steps = step;
    result.final_checkpoint = last_good;
    throw;
  }

  result.steps = step;
  result.final_checkpoint = last_good;
  save_checkpoint(last_good, model, cfg, static_cast<std::uint64_t>(step), cfg.seed);
  return result;
}

}  // namespace vdlg
