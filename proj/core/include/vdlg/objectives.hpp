#pragma once

#include "vdlg/encoder.hpp"
#include "vdlg/sequence.hpp"

namespace vdlg {

// One training instance after masking. MLM targets exist only at masked
// language positions, MIR targets only at zeroed region rows, and every masked
// pronoun's POS target is NN.
struct MaskedBatch {
  TokenSequence seq;        // [MASK] ids / POSMASK tags substituted in place
  ImageRegionSet regions;   // masked feature rows zeroed
  int mask_token_id = -1;   // vocabulary id of [MASK]
  std::vector<int> mlm_positions;
  std::vector<int> mlm_targets;  // original token ids
  std::vector<int> pos_positions;
  std::vector<int> pos_targets;  // PosTag values; NN substituted for pronouns
  std::vector<int> mir_rows;     // region-set row indices in [1, 36]
  std::vector<int> mir_categories;
  int nsp_label = 0;
};

// Bernoulli(rate) masking of non-special language tokens with pure [MASK]
// replacement. rate must lie in (0, 1).
void apply_mlm_mask(MaskedBatch& batch, double rate, Rng& rng);

// Zeroes Bernoulli(rate)-selected region feature rows (global row exempt) and
// records their categories as one-hot KL targets. rate in [0, 1].
void apply_mir_mask(MaskedBatch& batch, double rate, Rng& rng);

// Replaces Bernoulli(rate)-selected input POS tags with POSMASK. Prediction
// targets are the ground-truth tag, except pronouns (PRP/PRP$) which target NN.
// Calling this while the POS constraint is disabled is an error.
void apply_pos_mask(MaskedBatch& batch, double rate, Rng& rng, bool c1_enabled);

struct LossFlags {
  bool c1_pos_constraint = false;
  double pos_weight = 1.0;
};

struct LossBreakdown {
  Var total;  // graph node; backward() through this trains everything
  double mlm = 0.0;
  double mir = 0.0;
  double nsp = 0.0;
  double pos = 0.0;
  double total_value = 0.0;
};

// mlm: mean cross-entropy at masked language positions
// mir: sum of KL(one-hot || predicted category distribution) over masked rows
// nsp: binary cross-entropy of the [CLS] logit against the instance label
// pos: mean cross-entropy of POS logits against (NN-substituted) targets
// total = mlm + mir + nsp (+ pos_weight * pos when C1 is on)
// A term with no masked positions contributes 0 and logs a warning.
LossBreakdown compute_losses(Tape& tape, const MaskedBatch& batch, const ModelOutput& out,
                             const LossFlags& flags);

// Warning sink for empty-mask loss terms (rate-limited stderr by default).
void set_warning_handler(void (*handler)(const std::string&));
void emit_warning(const std::string& message);

}  // namespace vdlg
