#include "vdlg/text.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "vdlg/errors.hpp"

namespace vdlg {

namespace {

constexpr std::array<std::string_view, kPosTagCount> kTagNames = {
    "NONE", "POSMASK", "NN",  "NNS", "PRP", "PRP$", "VB",  "VBZ", "VBP",
    "VBD",  "VBG",     "VBN", "JJ",  "RB",  "DT",   "IN",  "CC",  "CD",
    "WP",   "WDT",     "WRB", "EX",  "TO",  "MD",   "UH",  "PUNCT"};

}  // namespace

std::string_view pos_tag_name(PosTag tag) { return kTagNames.at(static_cast<std::size_t>(tag)); }

std::optional<PosTag> pos_tag_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kTagNames.size(); ++i)
    if (kTagNames[i] == name) return static_cast<PosTag>(i);
  return std::nullopt;
}

bool is_pronoun_tag(PosTag tag) { return tag == PosTag::kPRP || tag == PosTag::kPRPS; }
bool is_noun_tag(PosTag tag) { return tag == PosTag::kNN || tag == PosTag::kNNS; }

int Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  ids_[token] = id;
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? unk_ : it->second;
}

std::optional<int> Vocabulary::lookup(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DataError("vocabulary id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::finalize_specials() {
  auto resolve = [&](std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end())
      throw DataError("vocabulary missing special token " + std::string(name));
    return it->second;
  };
  pad_ = resolve(kPad);
  unk_ = resolve(kUnk);
  cls_ = resolve(kCls);
  sep_ = resolve(kSep);
  mask_ = resolve(kMask);
}

void PosLexicon::set(const std::string& token, PosTag tag) { map_[token] = tag; }

PosTag PosLexicon::tag(const std::string& token) const {
  auto it = map_.find(token);
  return it == map_.end() ? PosTag::kNone : it->second;
}

namespace {

struct Entry {
  const char* word;
  PosTag tag;
};

// Closed synthetic vocabulary. The generator's templates only draw from here,
// so tagging is total over generated text.
const Entry kBuiltinEntries[] = {
    // punctuation
    {"?", PosTag::kPunct},
    {".", PosTag::kPunct},
    {",", PosTag::kPunct},
    // pronouns; ambiguous words take one fixed tag ("her" reads possessive)
    {"he", PosTag::kPRP},
    {"she", PosTag::kPRP},
    {"they", PosTag::kPRP},
    {"him", PosTag::kPRP},
    {"them", PosTag::kPRP},
    {"it", PosTag::kPRP},
    {"his", PosTag::kPRPS},
    {"her", PosTag::kPRPS},
    {"its", PosTag::kPRPS},
    {"their", PosTag::kPRPS},
    // determiners
    {"the", PosTag::kDT},
    {"a", PosTag::kDT},
    {"an", PosTag::kDT},
    {"some", PosTag::kDT},
    {"this", PosTag::kDT},
    {"that", PosTag::kDT},
    {"these", PosTag::kDT},
    {"those", PosTag::kDT},
    {"each", PosTag::kDT},
    {"both", PosTag::kDT},
    // interjection answers
    {"yes", PosTag::kUH},
    {"no", PosTag::kUH},
    {"maybe", PosTag::kUH},
    // verbs
    {"is", PosTag::kVBZ},
    {"are", PosTag::kVBP},
    {"was", PosTag::kVBD},
    {"were", PosTag::kVBD},
    {"do", PosTag::kVBP},
    {"does", PosTag::kVBZ},
    {"did", PosTag::kVBD},
    {"be", PosTag::kVB},
    {"look", PosTag::kVB},
    {"looks", PosTag::kVBZ},
    {"seem", PosTag::kVB},
    {"seems", PosTag::kVBZ},
    {"have", PosTag::kVBP},
    {"has", PosTag::kVBZ},
    {"can", PosTag::kMD},
    {"see", PosTag::kVB},
    {"say", PosTag::kVB},
    {"tell", PosTag::kVB},
    {"standing", PosTag::kVBG},
    {"sitting", PosTag::kVBG},
    {"riding", PosTag::kVBG},
    {"walking", PosTag::kVBG},
    {"flying", PosTag::kVBG},
    {"wearing", PosTag::kVBG},
    {"holding", PosTag::kVBG},
    {"parked", PosTag::kVBN},
    {"painted", PosTag::kVBN},
    {"made", PosTag::kVBN},
    // wh words
    {"what", PosTag::kWP},
    {"who", PosTag::kWP},
    {"which", PosTag::kWDT},
    {"how", PosTag::kWRB},
    {"where", PosTag::kWRB},
    {"when", PosTag::kWRB},
    // function words
    {"there", PosTag::kEX},
    {"not", PosTag::kRB},
    {"very", PosTag::kRB},
    {"also", PosTag::kRB},
    {"only", PosTag::kRB},
    {"still", PosTag::kRB},
    {"and", PosTag::kCC},
    {"or", PosTag::kCC},
    {"but", PosTag::kCC},
    {"of", PosTag::kIN},
    {"in", PosTag::kIN},
    {"on", PosTag::kIN},
    {"at", PosTag::kIN},
    {"near", PosTag::kIN},
    {"behind", PosTag::kIN},
    {"under", PosTag::kIN},
    {"over", PosTag::kIN},
    {"with", PosTag::kIN},
    {"around", PosTag::kIN},
    {"to", PosTag::kTO},
    // numbers
    {"one", PosTag::kCD},
    {"two", PosTag::kCD},
    {"three", PosTag::kCD},
    {"four", PosTag::kCD},
    {"five", PosTag::kCD},
    {"six", PosTag::kCD},
    {"seven", PosTag::kCD},
    {"eight", PosTag::kCD},
    {"nine", PosTag::kCD},
    {"ten", PosTag::kCD},
    // colors
    {"red", PosTag::kJJ},
    {"blue", PosTag::kJJ},
    {"green", PosTag::kJJ},
    {"yellow", PosTag::kJJ},
    {"black", PosTag::kJJ},
    {"white", PosTag::kJJ},
    {"brown", PosTag::kJJ},
    {"gray", PosTag::kJJ},
    {"orange", PosTag::kJJ},
    {"purple", PosTag::kJJ},
    {"pink", PosTag::kJJ},
    // qualities and other adjectives
    {"old", PosTag::kJJ},
    {"new", PosTag::kJJ},
    {"young", PosTag::kJJ},
    {"tall", PosTag::kJJ},
    {"short", PosTag::kJJ},
    {"big", PosTag::kJJ},
    {"small", PosTag::kJJ},
    {"large", PosTag::kJJ},
    {"little", PosTag::kJJ},
    {"clean", PosTag::kJJ},
    {"dirty", PosTag::kJJ},
    {"bright", PosTag::kJJ},
    {"dark", PosTag::kJJ},
    {"shiny", PosTag::kJJ},
    {"dull", PosTag::kJJ},
    {"wooden", PosTag::kJJ},
    {"metal", PosTag::kJJ},
    {"plastic", PosTag::kJJ},
    {"happy", PosTag::kJJ},
    {"sad", PosTag::kJJ},
    {"busy", PosTag::kJJ},
    {"quiet", PosTag::kJJ},
    {"sunny", PosTag::kJJ},
    {"cloudy", PosTag::kJJ},
    {"empty", PosTag::kJJ},
    {"full", PosTag::kJJ},
    {"open", PosTag::kJJ},
    {"closed", PosTag::kJJ},
    {"round", PosTag::kJJ},
    {"square", PosTag::kJJ},
    {"many", PosTag::kJJ},
    {"few", PosTag::kJJ},
    {"daytime", PosTag::kNN},
    {"nighttime", PosTag::kNN},
    // scene object classes (singular / plural)
    {"bike", PosTag::kNN},
    {"bikes", PosTag::kNNS},
    {"building", PosTag::kNN},
    {"buildings", PosTag::kNNS},
    {"dog", PosTag::kNN},
    {"dogs", PosTag::kNNS},
    {"cat", PosTag::kNN},
    {"cats", PosTag::kNNS},
    {"tree", PosTag::kNN},
    {"trees", PosTag::kNNS},
    {"car", PosTag::kNN},
    {"cars", PosTag::kNNS},
    {"bench", PosTag::kNN},
    {"benches", PosTag::kNNS},
    {"kite", PosTag::kNN},
    {"kites", PosTag::kNNS},
    {"boat", PosTag::kNN},
    {"boats", PosTag::kNNS},
    {"man", PosTag::kNN},
    {"men", PosTag::kNNS},
    {"woman", PosTag::kNN},
    {"women", PosTag::kNNS},
    // other nouns
    {"street", PosTag::kNN},
    {"streets", PosTag::kNNS},
    {"sky", PosTag::kNN},
    {"grass", PosTag::kNN},
    {"water", PosTag::kNN},
    {"field", PosTag::kNN},
    {"fields", PosTag::kNNS},
    {"park", PosTag::kNN},
    {"parks", PosTag::kNNS},
    {"road", PosTag::kNN},
    {"roads", PosTag::kNNS},
    {"table", PosTag::kNN},
    {"tables", PosTag::kNNS},
    {"chair", PosTag::kNN},
    {"chairs", PosTag::kNNS},
    {"window", PosTag::kNN},
    {"windows", PosTag::kNNS},
    {"door", PosTag::kNN},
    {"doors", PosTag::kNNS},
    {"wall", PosTag::kNN},
    {"walls", PosTag::kNNS},
    {"fence", PosTag::kNN},
    {"fences", PosTag::kNNS},
    {"house", PosTag::kNN},
    {"houses", PosTag::kNNS},
    {"hill", PosTag::kNN},
    {"hills", PosTag::kNNS},
    {"cloud", PosTag::kNN},
    {"clouds", PosTag::kNNS},
    {"flower", PosTag::kNN},
    {"flowers", PosTag::kNNS},
    {"bird", PosTag::kNN},
    {"birds", PosTag::kNNS},
    {"horse", PosTag::kNN},
    {"horses", PosTag::kNNS},
    {"bus", PosTag::kNN},
    {"buses", PosTag::kNNS},
    {"train", PosTag::kNN},
    {"trains", PosTag::kNNS},
    {"plane", PosTag::kNN},
    {"planes", PosTag::kNNS},
    {"ball", PosTag::kNN},
    {"balls", PosTag::kNNS},
    {"hat", PosTag::kNN},
    {"hats", PosTag::kNNS},
    {"shirt", PosTag::kNN},
    {"shirts", PosTag::kNNS},
    {"umbrella", PosTag::kNN},
    {"umbrellas", PosTag::kNNS},
    {"sign", PosTag::kNN},
    {"signs", PosTag::kNNS},
    {"light", PosTag::kNN},
    {"lights", PosTag::kNNS},
    {"phone", PosTag::kNN},
    {"phones", PosTag::kNNS},
    {"book", PosTag::kNN},
    {"books", PosTag::kNNS},
    {"cup", PosTag::kNN},
    {"cups", PosTag::kNNS},
    {"plate", PosTag::kNN},
    {"plates", PosTag::kNNS},
    {"bottle", PosTag::kNN},
    {"bottles", PosTag::kNNS},
    {"bag", PosTag::kNN},
    {"bags", PosTag::kNNS},
    {"clock", PosTag::kNN},
    {"clocks", PosTag::kNNS},
    {"picture", PosTag::kNN},
    {"pictures", PosTag::kNNS},
    {"mirror", PosTag::kNN},
    {"mirrors", PosTag::kNNS},
    {"lamp", PosTag::kNN},
    {"lamps", PosTag::kNNS},
    {"color", PosTag::kNN},
    {"colors", PosTag::kNNS},
    {"side", PosTag::kNN},
    {"top", PosTag::kNN},
    {"bottom", PosTag::kNN},
    {"left", PosTag::kNN},
    {"right", PosTag::kNN},
    {"front", PosTag::kNN},
    {"back", PosTag::kNN},
    {"middle", PosTag::kNN},
    {"corner", PosTag::kNN},
    {"ground", PosTag::kNN},
    {"floor", PosTag::kNN},
    {"roof", PosTag::kNN},
    {"roofs", PosTag::kNNS},
    {"wheel", PosTag::kNN},
    {"wheels", PosTag::kNNS},
    {"leaf", PosTag::kNN},
    {"leaves", PosTag::kNNS},
    {"branch", PosTag::kNN},
    {"branches", PosTag::kNNS},
    {"person", PosTag::kNN},
    {"people", PosTag::kNNS},
    {"child", PosTag::kNN},
    {"children", PosTag::kNNS},
    {"boy", PosTag::kNN},
    {"boys", PosTag::kNNS},
    {"girl", PosTag::kNN},
    {"girls", PosTag::kNNS},
};

VocabLexicon build_builtin() {
  VocabLexicon vl;
  vl.vocab.add(std::string(Vocabulary::kPad));
  vl.vocab.add(std::string(Vocabulary::kUnk));
  vl.vocab.add(std::string(Vocabulary::kCls));
  vl.vocab.add(std::string(Vocabulary::kSep));
  vl.vocab.add(std::string(Vocabulary::kMask));
  for (const Entry& e : kBuiltinEntries) {
    vl.vocab.add(e.word);
    vl.lexicon.set(e.word, e.tag);
  }
  vl.vocab.finalize_specials();
  return vl;
}

}  // namespace

const VocabLexicon& builtin_vocab_lexicon() {
  static const VocabLexicon vl = build_builtin();
  return vl;
}

VocabLexicon load_vocab_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path);
  VocabLexicon vl;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected token<TAB>tag");
    std::string token = line.substr(0, tab);
    std::string tag_name = line.substr(tab + 1);
    while (!tag_name.empty() && (tag_name.back() == '\r' || tag_name.back() == ' '))
      tag_name.pop_back();
    auto tag = pos_tag_from_name(tag_name);
    if (!tag)
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown POS tag " + tag_name);
    if (vl.vocab.lookup(token))
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate token " + token);
    vl.vocab.add(token);
    vl.lexicon.set(token, *tag);
  }
  vl.vocab.finalize_specials();
  return vl;
}

void save_vocab_lexicon(const VocabLexicon& vl, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write lexicon file: " + path);
  for (int i = 0; i < vl.vocab.size(); ++i) {
    const std::string& tok = vl.vocab.token(i);
    out << tok << '\t' << pos_tag_name(vl.lexicon.tag(tok)) << '\n';
  }
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> ids;
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) {
      ids.push_back(vocab.id(word));
      word.clear();
    }
  };
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c == '?' || c == '.' || c == ',' || c == '!') {
      flush();
      ids.push_back(vocab.id(std::string(1, c == '!' ? '.' : static_cast<char>(c))));
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return ids;
}

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

std::vector<PosTag> tag_pos(const std::vector<int>& ids, const Vocabulary& vocab,
                            const PosLexicon& lexicon) {
  std::vector<PosTag> tags;
  tags.reserve(ids.size());
  for (int id : ids) {
    if (vocab.is_special(id))
      tags.push_back(PosTag::kNone);
    else
      tags.push_back(lexicon.tag(vocab.token(id)));
  }
  return tags;
}

std::vector<int> pronoun_positions(const std::vector<int>& ids, const Vocabulary& vocab,
                                   const PosLexicon& lexicon) {
  std::vector<int> out;
  auto it_id = vocab.lookup("it");
  auto tags = tag_pos(ids, vocab, lexicon);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!is_pronoun_tag(tags[i])) continue;
    if (it_id && ids[i] == *it_id) continue;
    out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace vdlg
