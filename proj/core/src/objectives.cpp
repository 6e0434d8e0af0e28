#include "vdlg/objectives.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

#include "vdlg/errors.hpp"

namespace vdlg {

namespace {

std::atomic<void (*)(const std::string&)> g_warning_handler{nullptr};

void default_warning(const std::string& msg) {
  static std::atomic<int> count{0};
  int n = count.fetch_add(1);
  if (n < 5) std::cerr << "[vdlg] warning: " << msg << "\n";
  if (n == 5) std::cerr << "[vdlg] warning: (further warnings suppressed)\n";
}

}  // namespace

void set_warning_handler(void (*handler)(const std::string&)) { g_warning_handler = handler; }

void emit_warning(const std::string& message) {
  auto h = g_warning_handler.load();
  if (h)
    h(message);
  else
    default_warning(message);
}

void apply_mlm_mask(MaskedBatch& batch, double rate, Rng& rng) {
  if (!(rate > 0.0 && rate < 1.0)) throw NumericalError("mask rate outside (0, 1)");
  if (batch.mask_token_id < 0) throw DataError("mask token id unset");
  bool any_maskable = false;
  for (std::size_t i = 0; i < batch.seq.size(); ++i)
    if (!batch.seq.special[i]) any_maskable = true;
  if (!any_maskable) throw DataError("sequence has no maskable language token");
  batch.mlm_positions.clear();
  batch.mlm_targets.clear();
  for (std::size_t i = 0; i < batch.seq.size(); ++i) {
    if (batch.seq.special[i]) continue;
    if (!rng.bernoulli(rate)) continue;
    batch.mlm_positions.push_back(static_cast<int>(i));
    batch.mlm_targets.push_back(batch.seq.ids[i]);
    batch.seq.ids[i] = batch.mask_token_id;
  }
}

void apply_mir_mask(MaskedBatch& batch, double rate, Rng& rng) {
  if (rate < 0.0 || rate > 1.0) throw NumericalError("mask rate outside [0, 1]");
  batch.mir_rows.clear();
  batch.mir_categories.clear();
  for (int r = 0; r < kImageRegions; ++r) {
    bool mask = rate >= 1.0 || (rate > 0.0 && rng.bernoulli(rate));
    if (!mask) continue;
    int row = r + 1;  // row 0 is the global image row, exempt
    batch.mir_rows.push_back(row);
    batch.mir_categories.push_back(batch.regions.categories[static_cast<std::size_t>(r)]);
    for (std::int64_t c = 0; c < batch.regions.features.cols(); ++c)
      batch.regions.features.at(row, c) = 0.0;
  }
}

void apply_pos_mask(MaskedBatch& batch, double rate, Rng& rng, bool c1_enabled) {
  if (!c1_enabled) throw ConfigError("apply_pos_mask called while the POS constraint is disabled");
  if (!(rate > 0.0 && rate < 1.0)) throw NumericalError("mask rate outside (0, 1)");
  batch.pos_positions.clear();
  batch.pos_targets.clear();
  for (std::size_t i = 0; i < batch.seq.size(); ++i) {
    if (batch.seq.special[i]) continue;
    if (!rng.bernoulli(rate)) continue;
    PosTag truth = batch.seq.pos_tags[i];
    PosTag target = is_pronoun_tag(truth) ? PosTag::kNN : truth;
    batch.pos_positions.push_back(static_cast<int>(i));
    batch.pos_targets.push_back(static_cast<int>(target));
    batch.seq.pos_tags[i] = PosTag::kPosMask;
  }
}

LossBreakdown compute_losses(Tape& tape, const MaskedBatch& batch, const ModelOutput& out,
                             const LossFlags& flags) {
  LossBreakdown lb;
  std::vector<Var> terms;

  auto check_finite = [](double v, const char* term) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + term + " loss");
  };

  if (!batch.mlm_positions.empty()) {
    if (!out.mlm_logits.valid()) throw ConfigError("MLM loss requires mlm_logits");
    Var sel = tape.select_rows(out.mlm_logits, batch.mlm_positions);
    Var mlm = tape.softmax_xent_mean(sel, batch.mlm_targets);
    lb.mlm = tape.value(mlm).item();
    check_finite(lb.mlm, "MLM");
    terms.push_back(mlm);
  } else {
    emit_warning("no masked language positions; MLM term = 0");
  }

  if (!batch.mir_rows.empty()) {
    if (!out.mir_logits.valid()) throw ConfigError("MIR loss requires mir_logits");
    std::vector<int> rows;
    rows.reserve(batch.mir_rows.size());
    for (int r : batch.mir_rows) rows.push_back(r);
    Var sel = tape.select_rows(out.mir_logits, rows);
    Tensor onehot(static_cast<std::int64_t>(rows.size()), tape.value(out.mir_logits).cols());
    for (std::size_t i = 0; i < batch.mir_categories.size(); ++i) {
      int cat = batch.mir_categories[i];
      if (cat < 0 || cat >= onehot.cols()) throw DataError("region category out of range");
      onehot.at(static_cast<std::int64_t>(i), cat) = 1.0;
    }
    Var mir = tape.kl_vs_softmax_sum(std::move(onehot), sel);
    lb.mir = tape.value(mir).item();
    check_finite(lb.mir, "MIR");
    terms.push_back(mir);
  } else {
    emit_warning("no masked image regions; MIR term = 0");
  }

  if (!out.nsp_logit.valid()) throw ConfigError("NSP loss requires nsp_logit");
  if (batch.nsp_label != 0 && batch.nsp_label != 1) throw DataError("NSP label must be 0 or 1");
  Var nsp = tape.bce_with_logit(out.nsp_logit, static_cast<double>(batch.nsp_label));
  lb.nsp = tape.value(nsp).item();
  check_finite(lb.nsp, "NSP");
  terms.push_back(nsp);

  Var pos_term;
  if (flags.c1_pos_constraint) {
    if (!batch.pos_positions.empty()) {
      if (!out.pos_logits.valid()) throw ConfigError("POS loss requires pos_logits");
      Var sel = tape.select_rows(out.pos_logits, batch.pos_positions);
      pos_term = tape.softmax_xent_mean(sel, batch.pos_targets);
      lb.pos = tape.value(pos_term).item();
      check_finite(lb.pos, "POS");
    } else {
      emit_warning("no masked POS positions; POS term = 0");
    }
  }

  if (terms.empty()) throw NumericalError("no active loss terms");
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  if (pos_term.valid()) total = tape.add_scaled(total, pos_term, flags.pos_weight);
  lb.total = total;
  lb.total_value = tape.value(total).item();
  check_finite(lb.total_value, "total");
  return lb;
}

}  // namespace vdlg
