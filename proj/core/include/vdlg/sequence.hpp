#pragma once

#include <cstdint>
#include <vector>

#include "vdlg/text.hpp"

namespace vdlg {

// Segment roles of input rows. Four ids: the paper only requires telling
// questions from answers and delimiting QA pairs, plus the image modality.
enum class Segment : int { kCaption = 0, kQuestion = 1, kAnswer = 2, kImage = 3 };
inline constexpr int kSegmentCount = 4;

// Tokenized dialog text with per-token annotations. Token position is the
// index within the sequence. Image rows are not part of a TokenSequence; they
// join the language rows inside the model.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<int> segments;        // Segment values
  std::vector<int> sentence_index;  // caption 0, Q_i 2i-1, A_i 2i; -1 if unset
  std::vector<PosTag> pos_tags;
  std::vector<std::uint8_t> special;  // 1 for [CLS]/[SEP] (never maskable)

  std::size_t size() const { return ids.size(); }

  void push(int id, Segment seg, int sentence, PosTag tag, bool is_special) {
    ids.push_back(id);
    segments.push_back(static_cast<int>(seg));
    sentence_index.push_back(sentence);
    pos_tags.push_back(tag);
    special.push_back(is_special ? 1 : 0);
  }
};

}  // namespace vdlg
