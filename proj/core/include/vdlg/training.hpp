#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vdlg/checkpoint.hpp"
#include "vdlg/config.hpp"
#include "vdlg/evaluation.hpp"
#include "vdlg/objectives.hpp"

namespace vdlg {

struct MaskRates {
  double mlm = 0.15;
  double mir = 0.15;
  double pos = 0.15;
};

// Applies MLM + MIR (+ POS when c1) masking to one assembled instance.
MaskedBatch make_masked_batch(const AssembledInput& input, const MaskRates& rates, Rng& rng,
                              bool c1, int mask_token_id);

// Linear warmup from warmup_start_lr to learning_rate over warmup_steps, then
// linear decay to final_lr at total_steps (clamped afterwards).
double lr_schedule(const RunConfig& cfg, std::int64_t step);

struct RankingOutcome {
  RankingMetrics metrics;
  std::vector<RankedAnswerSet> sets;
};

// Ranks every round's candidate pool by NSP score. max_dialogs < 0 ranks the
// whole corpus; dialogs are processed in parallel over `threads`, reduction
// order is fixed so results do not depend on the thread count.
RankingOutcome evaluate_ranking(const Model& model, const Corpus& corpus,
                                const VocabLexicon& vl, int threads, int max_dialogs = -1);

struct ProbeAggregate {
  std::map<int, double> hit_rate;  // k -> rate over links
  int n_links = 0;
  double noun_fraction = 0.0;  // pronoun attention mass on nouns (mean)
  int n_probed_rounds = 0;
};

// Runs the coreference probe over every linked round of the corpus: assemble
// with the ground-truth answer, capture attention, probe the links of that
// round. The per-round callback (optional) receives the forward products for
// export purposes.
using ProbeRoundHook = std::function<void(const Dialog&, int round, const ModelOutput&,
                                          const TokenSequence&, const CorefProbeReport&)>;
ProbeAggregate probe_corpus(const Model& model, const Corpus& corpus, const VocabLexicon& vl,
                            const ProbeSpec& spec, const std::vector<int>& ks,
                            int max_dialogs = -1, const ProbeRoundHook& hook = nullptr);

struct TrainResult {
  std::string final_checkpoint;
  std::vector<std::pair<std::int64_t, double>> val_history;  // (instances seen, R@1)
  std::int64_t steps = 0;
  bool aborted = false;  // non-finite loss; last good checkpoint retained
};

// Deterministic training run: per-step CSV of loss components, periodic
// validation R@1 plus checkpoints under out_dir. Throws NumericalError after
// retaining the last good checkpoint if the loss goes non-finite.
TrainResult train_model(const RunConfig& cfg, const Corpus& train, const Corpus& val,
                        const VocabLexicon& vl, const std::string& out_dir,
                        std::ostream* progress = nullptr);

}  // namespace vdlg
