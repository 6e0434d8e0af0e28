#include "vdlg/encoder.hpp"

#include <cmath>

#include "vdlg/errors.hpp"

namespace vdlg {

void EncoderConfig::validate() const {
  if (d <= 0 || layers <= 0 || heads <= 0) throw ConfigError("model dims must be positive");
  if (d % heads != 0) throw ConfigError("head count must divide d");
  if (vocab_size <= 0) throw ConfigError("vocab_size unset");
  if (categories <= 0) throw ConfigError("categories must be positive");
  if (max_len < kImageRows + 1) throw ConfigError("max_len too small for image rows");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout out of [0, 1)");
  if (c2_sentence_pe) {
    PEConfig p = pe;
    p.d = d;
    p.validate();
  }
}

AttentionResult attention_head(Tape& tape, Var q, Var k, Var v,
                               const std::vector<std::uint8_t>* key_mask) {
  const Tensor& Q = tape.value(q);
  const Tensor& K = tape.value(k);
  const Tensor& V = tape.value(v);
  if (Q.rows() != K.rows() || K.rows() != V.rows())
    throw NumericalError("attention_head: row count mismatch");
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(K.cols()));
  Var scores = tape.scale(tape.matmul_nt(q, k), inv_sqrt_d);
  Var probs = tape.masked_softmax_rows(scores, key_mask);
  return {tape.matmul(probs, v), probs};
}

namespace {

Tensor init_normal(std::int64_t rows, std::int64_t cols, std::uint64_t seed,
                   const std::string& name, double stddev = 0.02) {
  Rng rng(hash_combine(seed, name));
  return Tensor::randn(rows, cols, rng, stddev);
}

std::string layer_name(int l, const char* suffix) {
  return "layer" + std::to_string(l) + "." + suffix;
}

}  // namespace

Model::Model(EncoderConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.pe.d = cfg_.d;
  cfg_.validate();
  auto dense = [&](const std::string& name, std::int64_t r, std::int64_t c) -> Parameter& {
    return store_.create(name, init_normal(r, c, seed, name));
  };
  auto zeros = [&](const std::string& name, std::int64_t c) -> Parameter& {
    return store_.create(name, Tensor(1, c));
  };
  auto ones = [&](const std::string& name, std::int64_t c) -> Parameter& {
    return store_.create(name, Tensor(1, c, 1.0));
  };

  dense("word_emb", cfg_.vocab_size, cfg_.d);
  dense("tokpos_emb", cfg_.max_len, cfg_.d);
  dense("seg_emb", kSegmentCount, cfg_.d);
  if (cfg_.c1_pos_constraint) dense("postag_emb", cfg_.pos_tag_count, cfg_.d);
  dense("img_feat_proj", cfg_.feature_dim, cfg_.d);
  dense("img_geom_proj", 5, cfg_.d);
  ones("emb_ln_g", cfg_.d);
  zeros("emb_ln_b", cfg_.d);

  for (int l = 0; l < cfg_.layers; ++l) {
    dense(layer_name(l, "wq"), cfg_.d, cfg_.d);
    zeros(layer_name(l, "bq"), cfg_.d);
    dense(layer_name(l, "wk"), cfg_.d, cfg_.d);
    zeros(layer_name(l, "bk"), cfg_.d);
    dense(layer_name(l, "wv"), cfg_.d, cfg_.d);
    zeros(layer_name(l, "bv"), cfg_.d);
    dense(layer_name(l, "wo"), cfg_.d, cfg_.d);
    zeros(layer_name(l, "bo"), cfg_.d);
    ones(layer_name(l, "ln1_g"), cfg_.d);
    zeros(layer_name(l, "ln1_b"), cfg_.d);
    dense(layer_name(l, "w1"), cfg_.d, 4 * cfg_.d);
    zeros(layer_name(l, "b1"), 4 * cfg_.d);
    dense(layer_name(l, "w2"), 4 * cfg_.d, cfg_.d);
    zeros(layer_name(l, "b2"), cfg_.d);
    ones(layer_name(l, "ln2_g"), cfg_.d);
    zeros(layer_name(l, "ln2_b"), cfg_.d);
  }

  dense("head_mlm_w", cfg_.d, cfg_.vocab_size);
  zeros("head_mlm_b", cfg_.vocab_size);
  if (cfg_.c1_pos_constraint) {
    dense("head_pos_w", cfg_.d, cfg_.pos_tag_count);
    zeros("head_pos_b", cfg_.pos_tag_count);
  }
  dense("head_mir_w", cfg_.d, cfg_.categories);
  zeros("head_mir_b", cfg_.categories);
  dense("head_nsp_w", cfg_.d, 1);
  zeros("head_nsp_b", 1);
}

EmbeddingTables Model::tables() const {
  EmbeddingTables t;
  t.word = store_.find("word_emb");
  t.token_position = store_.find("tokpos_emb");
  t.segment = store_.find("seg_emb");
  t.pos_tag = store_.find("postag_emb");
  return t;
}

ModelOutput Model::forward(Tape& tape, const TokenSequence& seq, const ImageRegionSet& regions,
                           const ForwardOptions& opts) const {
  const int n_lang = static_cast<int>(seq.size());
  const int n = n_lang + kImageRows;
  if (n_lang < 1) throw DataError("empty token sequence");
  if (n > cfg_.max_len)
    throw DataError("input length " + std::to_string(n) + " exceeds max length " +
                    std::to_string(cfg_.max_len));
  double drop = opts.training ? cfg_.dropout : 0.0;
  if (drop > 0.0 && !opts.dropout_rng)
    throw ConfigError("training forward requires a dropout rng");

  EmbedFlags flags{cfg_.c1_pos_constraint, cfg_.c2_sentence_pe};
  Var lang = embed_language(tape, seq, tables(), cfg_.pe, flags);
  Var img = embed_image(tape, regions, store_.at("img_feat_proj"), store_.at("img_geom_proj"));
  // image rows carry the image segment embedding; with C1 on they also carry
  // the NONE tag row (the constraint is linguistic, image rows have no POS)
  img = tape.add(img, tape.select_rows(tape.param(store_.at("seg_emb")),
                                       {static_cast<int>(Segment::kImage)}));
  if (cfg_.c1_pos_constraint)
    img = tape.add(img, tape.select_rows(tape.param(store_.at("postag_emb")),
                                         {static_cast<int>(PosTag::kNone)}));

  Var x = tape.concat_rows(lang, img);
  x = tape.layer_norm(x, tape.param(store_.at("emb_ln_g")), tape.param(store_.at("emb_ln_b")));
  if (drop > 0.0) x = tape.dropout(x, drop, *opts.dropout_rng);

  ModelOutput out;
  if (opts.capture_attention) out.attention.resize(static_cast<std::size_t>(cfg_.layers));

  const int dh = cfg_.d / cfg_.heads;
  for (int l = 0; l < cfg_.layers; ++l) {
    auto& P = store_;
    Var qf = tape.add(tape.matmul(x, tape.param(P.at(layer_name(l, "wq")))),
                      tape.param(P.at(layer_name(l, "bq"))));
    Var kf = tape.add(tape.matmul(x, tape.param(P.at(layer_name(l, "wk")))),
                      tape.param(P.at(layer_name(l, "bk"))));
    Var vf = tape.add(tape.matmul(x, tape.param(P.at(layer_name(l, "wv")))),
                      tape.param(P.at(layer_name(l, "bv"))));
    std::vector<Var> ctx;
    ctx.reserve(static_cast<std::size_t>(cfg_.heads));
    for (int h = 0; h < cfg_.heads; ++h) {
      Var qh = tape.slice_cols(qf, h * dh, (h + 1) * dh);
      Var kh = tape.slice_cols(kf, h * dh, (h + 1) * dh);
      Var vh = tape.slice_cols(vf, h * dh, (h + 1) * dh);
      AttentionResult att = attention_head(tape, qh, kh, vh, opts.key_mask);
      if (opts.capture_attention) out.attention[l].push_back(tape.value(att.probs));
      ctx.push_back(att.context);
    }
    Var merged = tape.add(tape.matmul(tape.concat_cols(ctx), tape.param(P.at(layer_name(l, "wo")))),
                          tape.param(P.at(layer_name(l, "bo"))));
    if (drop > 0.0) merged = tape.dropout(merged, drop, *opts.dropout_rng);
    x = tape.layer_norm(tape.add(x, merged), tape.param(P.at(layer_name(l, "ln1_g"))),
                        tape.param(P.at(layer_name(l, "ln1_b"))));

    Var h1 = tape.gelu(tape.add(tape.matmul(x, tape.param(P.at(layer_name(l, "w1")))),
                                tape.param(P.at(layer_name(l, "b1")))));
    Var h2 = tape.add(tape.matmul(h1, tape.param(P.at(layer_name(l, "w2")))),
                      tape.param(P.at(layer_name(l, "b2"))));
    if (drop > 0.0) h2 = tape.dropout(h2, drop, *opts.dropout_rng);
    x = tape.layer_norm(tape.add(x, h2), tape.param(P.at(layer_name(l, "ln2_g"))),
                        tape.param(P.at(layer_name(l, "ln2_b"))));
  }

  out.hidden = x;
  out.n_lang = n_lang;
  out.n_total = n;

  std::vector<int> lang_rows(static_cast<std::size_t>(n_lang));
  for (int i = 0; i < n_lang; ++i) lang_rows[static_cast<std::size_t>(i)] = i;
  std::vector<int> img_rows(static_cast<std::size_t>(kImageRows));
  for (int i = 0; i < kImageRows; ++i) img_rows[static_cast<std::size_t>(i)] = n_lang + i;

  if (!opts.heads_nsp_only) {
    Var lang_h = tape.select_rows(x, lang_rows);
    out.mlm_logits = tape.add(tape.matmul(lang_h, tape.param(store_.at("head_mlm_w"))),
                              tape.param(store_.at("head_mlm_b")));
    if (cfg_.c1_pos_constraint)
      out.pos_logits = tape.add(tape.matmul(lang_h, tape.param(store_.at("head_pos_w"))),
                                tape.param(store_.at("head_pos_b")));
    Var img_h = tape.select_rows(x, img_rows);
    out.mir_logits = tape.add(tape.matmul(img_h, tape.param(store_.at("head_mir_w"))),
                              tape.param(store_.at("head_mir_b")));
  }
  Var cls = tape.select_rows(x, {0});
  out.nsp_logit = tape.add(tape.matmul(cls, tape.param(store_.at("head_nsp_w"))),
                           tape.param(store_.at("head_nsp_b")));
  out.nsp_probability = 1.0 / (1.0 + std::exp(-tape.value(out.nsp_logit).item()));
  return out;
}

}  // namespace vdlg
