#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdlg/autodiff.hpp"
#include "vdlg/embeddings.hpp"
#include "vdlg/sequence.hpp"

namespace vdlg {

struct EncoderConfig {
  int d = 64;
  int layers = 2;
  int heads = 4;
  int feature_dim = 32;  // f, image region feature width
  int vocab_size = 0;
  int pos_tag_count = kPosTagCount;
  int categories = 12;  // C, semantic categories for the MIR head
  int max_len = 256;    // total rows including the 37 image rows
  double dropout = 0.1;
  bool c1_pos_constraint = false;
  bool c2_sentence_pe = false;
  PEConfig pe;  // pe.d is forced to d

  void validate() const;
};

// One attention head: softmax(Q K^T / sqrt(d_head)) V with optional key mask.
struct AttentionResult {
  Var context;
  Var probs;  // row-stochastic over unmasked keys
};
AttentionResult attention_head(Tape& tape, Var q, Var k, Var v,
                               const std::vector<std::uint8_t>* key_mask = nullptr);

// Forward products. Head logits are graph nodes so losses stay differentiable;
// pos_logits is invalid when the POS constraint is off (no POS structures exist
// in that build), and the language heads cover language rows only.
struct ModelOutput {
  Var hidden;      // n x d
  Var mlm_logits;  // n_lang x V
  Var pos_logits;  // n_lang x T (invalid unless C1)
  Var mir_logits;  // 37 x C
  Var nsp_logit;   // 1 x 1
  double nsp_probability = 0.0;
  std::vector<std::vector<Tensor>> attention;  // [layer][head] n x n when captured
  int n_lang = 0;
  int n_total = 0;
};

struct ForwardOptions {
  bool capture_attention = false;
  bool training = false;       // enables dropout (needs dropout_rng)
  bool heads_nsp_only = false; // ranking fast path: skip MLM/POS/MIR heads
  Rng* dropout_rng = nullptr;
  const std::vector<std::uint8_t>* key_mask = nullptr;  // padding keys to drop
};

// Single-stream bidirectional encoder over [language rows ; 37 image rows],
// post-layer-norm residual blocks with a GELU feed-forward, plus the MLM, POS,
// MIR and NSP output heads. Parameters are initialized per-name from the seed,
// so builds with and without constraint tables share identical common weights.
class Model {
 public:
  Model(EncoderConfig cfg, std::uint64_t seed);

  ModelOutput forward(Tape& tape, const TokenSequence& seq, const ImageRegionSet& regions,
                      const ForwardOptions& opts = {}) const;

  const EncoderConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  EmbeddingTables tables() const;

 private:
  EncoderConfig cfg_;
  // store_ is mutated only between steps (optimizer); forward is const and
  // safe to run from parallel threads on disjoint tapes.
  mutable ParamStore store_;
};

}  // namespace vdlg
