#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vdlg {

// Penn Treebank tags restricted to what the closed vocabulary needs, plus NONE
// (non-language tokens: specials, image rows) and POSMASK (masked tag input).
enum class PosTag : int {
  kNone = 0,
  kPosMask,
  kNN,
  kNNS,
  kPRP,
  kPRPS,  // PRP$
  kVB,
  kVBZ,
  kVBP,
  kVBD,
  kVBG,
  kVBN,
  kJJ,
  kRB,
  kDT,
  kIN,
  kCC,
  kCD,
  kWP,
  kWDT,
  kWRB,
  kEX,
  kTO,
  kMD,
  kUH,
  kPunct,
  kCount
};

inline constexpr int kPosTagCount = static_cast<int>(PosTag::kCount);

std::string_view pos_tag_name(PosTag tag);
std::optional<PosTag> pos_tag_from_name(std::string_view name);
bool is_pronoun_tag(PosTag tag);  // PRP or PRP$
bool is_noun_tag(PosTag tag);     // NN or NNS

// Closed token -> id map with the five special tokens. Ids are dense from 0 in
// file/builtin order; specials always present exactly once.
class Vocabulary {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::string_view kMask = "[MASK]";

  int add(const std::string& token);  // returns existing id if present
  int id(const std::string& token) const;  // [UNK] id for out-of-vocabulary
  std::optional<int> lookup(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }
  int mask_id() const { return mask_; }
  bool is_special(int id) const {
    return id == pad_ || id == unk_ || id == cls_ || id == sep_ || id == mask_;
  }

  void finalize_specials();  // resolves special ids; throws if absent/duplicated

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1, mask_ = -1;
};

// Word -> tag map over the closed vocabulary. Ambiguous words carry one fixed tag.
class PosLexicon {
 public:
  void set(const std::string& token, PosTag tag);
  PosTag tag(const std::string& token) const;  // NONE for unknown/special tokens
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, PosTag> map_;
};

// The ~300-word synthetic closed vocabulary and its lexicon.
struct VocabLexicon {
  Vocabulary vocab;
  PosLexicon lexicon;
};
const VocabLexicon& builtin_vocab_lexicon();

// One `token<TAB>tag` entry per line, UTF-8; '#' starts a comment line.
VocabLexicon load_vocab_lexicon(const std::string& path);
void save_vocab_lexicon(const VocabLexicon& vl, const std::string& path);

// Whitespace + punctuation split over the closed vocabulary; unknown words map
// to [UNK]. Total function; lowercases ASCII.
std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab);

// Length-preserving lexicon tagging; special tokens tag as NONE.
std::vector<PosTag> tag_pos(const std::vector<int>& ids, const Vocabulary& vocab,
                            const PosLexicon& lexicon);

// Indices of PRP/PRP$ tokens, excluding the word "it" (which frequently has no
// referent in dialog and is left out of coreference probes).
std::vector<int> pronoun_positions(const std::vector<int>& ids, const Vocabulary& vocab,
                                   const PosLexicon& lexicon);

}  // namespace vdlg
