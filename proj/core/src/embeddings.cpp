#include "vdlg/embeddings.hpp"

#include <cmath>

#include "vdlg/errors.hpp"

namespace vdlg {

void PEConfig::validate() const {
  if (d < 2 || d % 2 != 0) throw ConfigError("PEConfig: d must be even and >= 2");
  if (M < 1) throw ConfigError("PEConfig: M must be >= 1");
  if (!(k > 0.0)) throw ConfigError("PEConfig: k must be > 0");
  if (!(epsilon > 1.0)) throw ConfigError("PEConfig: epsilon must be > 1");
}

double pe_frequency(const PEConfig& cfg, int i) {
  return 1.0 / (cfg.M + std::pow(cfg.epsilon, 2.0 * i / cfg.d));
}

Tensor sentence_position_embedding(int pos, const PEConfig& cfg) {
  cfg.validate();
  if (pos < 0 || pos >= cfg.M)
    throw NumericalError("sentence position out of [0, M)");
  Tensor row(1, cfg.d);
  for (int i = 0; i < cfg.d / 2; ++i) {
    double w = pe_frequency(cfg, i);
    row[2 * i] = std::sin(pos * w) / cfg.k;
    row[2 * i + 1] = std::cos(pos * w) / cfg.k;
  }
  return row;
}

Tensor sentence_pe_table(const PEConfig& cfg) {
  cfg.validate();
  Tensor table(cfg.M, cfg.d);
  for (int pos = 0; pos < cfg.M; ++pos) {
    Tensor row = sentence_position_embedding(pos, cfg);
    for (int c = 0; c < cfg.d; ++c) table.at(pos, c) = row[c];
  }
  return table;
}

double pe_dot_closed_form(const PEConfig& cfg, double dpos) {
  double sum = 0.0;
  for (int i = 0; i < cfg.d / 2; ++i) sum += std::cos(pe_frequency(cfg, i) * dpos);
  return sum / (cfg.k * cfg.k);
}

void validate_regions(const ImageRegionSet& regions) {
  if (regions.features.rows() != kImageRows || regions.boxes.rows() != kImageRegions ||
      regions.boxes.cols() != 4 ||
      regions.categories.size() != static_cast<std::size_t>(kImageRegions))
    throw DataError("image region set must hold 36 boxes plus 1 global row");
  for (int r = 0; r < kImageRegions; ++r) {
    double x1 = regions.boxes.at(r, 0), y1 = regions.boxes.at(r, 1);
    double x2 = regions.boxes.at(r, 2), y2 = regions.boxes.at(r, 3);
    bool in_unit = x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 && y2 <= 1.0;
    if (!in_unit || !(x1 < x2) || !(y1 < y2))
      throw DataError("non-normalized box at region " + std::to_string(r));
  }
}

Tensor region_geometry(const ImageRegionSet& regions) {
  Tensor geom(kImageRows, 5);
  geom.at(0, 0) = 0.0;
  geom.at(0, 1) = 0.0;
  geom.at(0, 2) = 1.0;
  geom.at(0, 3) = 1.0;
  geom.at(0, 4) = 1.0;
  for (int r = 0; r < kImageRegions; ++r) {
    double x1 = regions.boxes.at(r, 0), y1 = regions.boxes.at(r, 1);
    double x2 = regions.boxes.at(r, 2), y2 = regions.boxes.at(r, 3);
    geom.at(r + 1, 0) = x1;
    geom.at(r + 1, 1) = y1;
    geom.at(r + 1, 2) = x2;
    geom.at(r + 1, 3) = y2;
    geom.at(r + 1, 4) = (x2 - x1) * (y2 - y1);
  }
  return geom;
}

Var embed_language(Tape& tape, const TokenSequence& seq, const EmbeddingTables& tables,
                   const PEConfig& pe, const EmbedFlags& flags) {
  if (!tables.word || !tables.token_position || !tables.segment)
    throw ConfigError("embed_language: missing embedding table");
  const auto n = static_cast<int>(seq.size());
  std::vector<int> word_idx(seq.ids.begin(), seq.ids.end());
  std::vector<int> pos_idx(n);
  for (int i = 0; i < n; ++i) pos_idx[i] = i;

  for (int id : seq.ids)
    if (id < 0 || id >= tables.word->value.rows())
      throw DataError("token id outside word table");
  if (n > tables.token_position->value.rows())
    throw NumericalError("sequence longer than token position table");

  Var x = tape.select_rows(tape.param(*tables.word), std::move(word_idx));
  x = tape.add(x, tape.select_rows(tape.param(*tables.token_position), std::move(pos_idx)));
  x = tape.add(x, tape.select_rows(tape.param(*tables.segment), seq.segments));

  if (flags.use_pos_embed) {
    if (!tables.pos_tag) throw ConfigError("embed_language: POS table absent with C1 enabled");
    std::vector<int> tag_idx(n);
    for (int i = 0; i < n; ++i) tag_idx[i] = static_cast<int>(seq.pos_tags[i]);
    x = tape.add(x, tape.select_rows(tape.param(*tables.pos_tag), std::move(tag_idx)));
  }
  if (flags.use_sentence_pe) {
    Tensor rows(n, pe.d);
    Tensor table = sentence_pe_table(pe);
    for (int i = 0; i < n; ++i) {
      int s = seq.sentence_index[i];
      if (s < 0 || s >= pe.M)
        throw DataError("missing sentence index with use_sentence_pe");
      for (int c = 0; c < pe.d; ++c) rows.at(i, c) = table.at(s, c);
    }
    x = tape.add(x, tape.input(std::move(rows)));
  }
  return x;
}

Var embed_image(Tape& tape, const ImageRegionSet& regions, Parameter& feature_proj,
                Parameter& geometry_proj) {
  validate_regions(regions);
  if (feature_proj.value.rows() != regions.features.cols() || geometry_proj.value.rows() != 5)
    throw ConfigError("embed_image: projection shape mismatch");
  Var feat = tape.matmul(tape.input(regions.features), tape.param(feature_proj));
  Var geom = tape.matmul(tape.input(region_geometry(regions)), tape.param(geometry_proj));
  return tape.add(feat, geom);
}

}  // namespace vdlg
