#pragma once

#include <array>

#include "vdlg/autodiff.hpp"
#include "vdlg/sequence.hpp"
#include "vdlg/tensor.hpp"

namespace vdlg {

// Scaled sinusoidal sentence position embedding parameters:
//   PE[pos, 2i]   = sin(pos * w_i) / k
//   PE[pos, 2i+1] = cos(pos * w_i) / k,  w_i = 1 / (M + epsilon^(2i/d))
// The M term in the denominator keeps w_i * M <= M/(M+1) < 1, so the pairwise
// dot product (1/k^2) sum_i cos(w_i * dpos) is monotonically decreasing in the
// sentence distance; k scales the embedding down so it acts as a soft bias.
struct PEConfig {
  int d = 768;
  int M = 21;
  double k = 100.0;
  double epsilon = 10000.0;

  void validate() const;  // d even >= 2, M >= 1, k > 0, epsilon > 1
};

double pe_frequency(const PEConfig& cfg, int i);  // w_i for i in [0, d/2)
Tensor sentence_position_embedding(int pos, const PEConfig& cfg);  // 1 x d
Tensor sentence_pe_table(const PEConfig& cfg);                     // M x d
// Closed form of PE(p1) . PE(p2) as a function of dpos = |p1 - p2|.
double pe_dot_closed_form(const PEConfig& cfg, double dpos);

// Per-region features plus geometry. Row 0 of `features` is the mean-pooled
// whole image; rows 1..36 correspond to boxes[0..35] and categories[0..35].
struct ImageRegionSet {
  Tensor features;              // 37 x f
  Tensor boxes;                 // 36 x 4, normalized [x1, y1, x2, y2]
  std::vector<int> categories;  // 36
};
inline constexpr int kImageRegions = 36;
inline constexpr int kImageRows = 37;

void validate_regions(const ImageRegionSet& regions);  // throws DataError

// Learnable embedding tables, all rows d wide. pos_tag is null when the POS
// constraint is disabled (the table then never exists).
struct EmbeddingTables {
  Parameter* word = nullptr;            // V x d
  Parameter* token_position = nullptr;  // L x d
  Parameter* segment = nullptr;         // 4 x d
  Parameter* pos_tag = nullptr;         // T x d
};

struct EmbedFlags {
  bool use_pos_embed = false;
  bool use_sentence_pe = false;
};

// Summed input representation of the language rows: word + token position +
// segment (+ POS tag row, + sentence PE) per flags. Disabled flags add nothing.
Var embed_language(Tape& tape, const TokenSequence& seq, const EmbeddingTables& tables,
                   const PEConfig& pe, const EmbedFlags& flags);

// 37 x d rows: feature projection + projection of the 5-d geometry
// [x1, y1, x2, y2, area]; the global row uses geometry [0, 0, 1, 1, 1].
Var embed_image(Tape& tape, const ImageRegionSet& regions, Parameter& feature_proj,
                Parameter& geometry_proj);

// The 37 x 5 geometry block used by embed_image (exposed for tests).
Tensor region_geometry(const ImageRegionSet& regions);

}  // namespace vdlg
