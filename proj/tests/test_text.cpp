#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vdlg/errors.hpp"
#include "vdlg/text.hpp"

using namespace vdlg;

TEST_CASE("tokenize: direct lookup, empty, OOV") {
  const auto& vl = builtin_vocab_lexicon();
  const Vocabulary& v = vl.vocab;

  auto ids = tokenize("do they look old ?", v);
  REQUIRE(ids.size() == 5);
  CHECK(ids[0] == *v.lookup("do"));
  CHECK(ids[1] == *v.lookup("they"));
  CHECK(ids[2] == *v.lookup("look"));
  CHECK(ids[3] == *v.lookup("old"));
  CHECK(ids[4] == *v.lookup("?"));

  CHECK(tokenize("", v).empty());
  auto oov = tokenize("xqzzy", v);
  REQUIRE(oov.size() == 1);
  CHECK(oov[0] == v.unk_id());
}

TEST_CASE("tokenize: punctuation splitting and round trip") {
  const auto& vl = builtin_vocab_lexicon();
  auto ids = tokenize("is it daytime?", vl.vocab);
  CHECK(detokenize(ids, vl.vocab) == "is it daytime ?");
  // in-vocabulary text round-trips up to whitespace normalization
  std::string s = "a red bike and some blue buildings .";
  CHECK(detokenize(tokenize(s, vl.vocab), vl.vocab) == s);
  CHECK(detokenize(tokenize("A  Red   BIKE", vl.vocab), vl.vocab) == "a red bike");
}

TEST_CASE("vocabulary: ids dense from 0, specials present exactly once") {
  const auto& vl = builtin_vocab_lexicon();
  const Vocabulary& v = vl.vocab;
  CHECK(v.size() > 250);  // roughly 300-word closed vocabulary
  CHECK(v.size() < 400);
  for (int i = 0; i < v.size(); ++i) CHECK(*v.lookup(v.token(i)) == i);
  int specials = 0;
  for (int i = 0; i < v.size(); ++i)
    if (v.is_special(i)) ++specials;
  CHECK(specials == 5);
  CHECK(v.pad_id() != v.unk_id());
}

TEST_CASE("tag_pos: pronouns, lexicon entries, specials") {
  const auto& vl = builtin_vocab_lexicon();
  auto tag1 = tag_pos(tokenize("they", vl.vocab), vl.vocab, vl.lexicon);
  REQUIRE(tag1.size() == 1);
  CHECK(tag1[0] == PosTag::kPRP);

  auto tag2 = tag_pos(tokenize("buildings", vl.vocab), vl.vocab, vl.lexicon);
  CHECK(tag2[0] == PosTag::kNNS);

  auto tag3 = tag_pos({vl.vocab.sep_id()}, vl.vocab, vl.lexicon);
  CHECK(tag3[0] == PosTag::kNone);

  auto tag4 = tag_pos(tokenize("their", vl.vocab), vl.vocab, vl.lexicon);
  CHECK(tag4[0] == PosTag::kPRPS);
}

TEST_CASE("tag_pos: length preserved over random strings") {
  const auto& vl = builtin_vocab_lexicon();
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::string s;
    int words = static_cast<int>(rng.uniform_int(12));
    for (int w = 0; w < words; ++w) {
      int id = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vl.vocab.size())));
      s += vl.vocab.token(id) + " ";
    }
    auto ids = tokenize(s, vl.vocab);
    auto tags = tag_pos(ids, vl.vocab, vl.lexicon);
    CHECK(tags.size() == ids.size());
    // pure function: identical input, identical output
    CHECK(tag_pos(ids, vl.vocab, vl.lexicon) == tags);
  }
}

TEST_CASE("pronoun_positions: probe set and the 'it' exclusion") {
  const auto& vl = builtin_vocab_lexicon();
  auto p1 = pronoun_positions(tokenize("are they tall or short", vl.vocab), vl.vocab, vl.lexicon);
  CHECK(p1 == std::vector<int>{1});

  auto p2 = pronoun_positions(tokenize("is it daytime", vl.vocab), vl.vocab, vl.lexicon);
  CHECK(p2.empty());

  auto p3 = pronoun_positions(tokenize("a red bike near a tree", vl.vocab), vl.vocab, vl.lexicon);
  CHECK(p3.empty());

  // possessive "its" stays in the probe set; bare "it" does not
  auto p4 = pronoun_positions(tokenize("is its wheel red", vl.vocab), vl.vocab, vl.lexicon);
  CHECK(p4 == std::vector<int>{1});

  for (const char* w : {"he", "she", "they", "him", "her", "them", "its", "his", "their"}) {
    auto p = pronoun_positions(tokenize(w, vl.vocab), vl.vocab, vl.lexicon);
    CHECK(p.size() == 1);
  }
}

TEST_CASE("lexicon file round trip: token<TAB>tag") {
  const auto& vl = builtin_vocab_lexicon();
  std::string path = std::filesystem::temp_directory_path() / "vdlg_lexicon_test.tsv";
  save_vocab_lexicon(vl, path);
  VocabLexicon loaded = load_vocab_lexicon(path);
  CHECK(loaded.vocab.size() == vl.vocab.size());
  for (int i = 0; i < vl.vocab.size(); ++i) {
    CHECK(loaded.vocab.token(i) == vl.vocab.token(i));
    CHECK(loaded.lexicon.tag(vl.vocab.token(i)) == vl.lexicon.tag(vl.vocab.token(i)));
  }
  std::remove(path.c_str());
}

TEST_CASE("lexicon file: malformed lines rejected") {
  namespace fs = std::filesystem;
  std::string path = fs::temp_directory_path() / "vdlg_lexicon_bad.tsv";
  {
    std::ofstream out(path);
    out << "[PAD]\tNONE\nword-without-tab\n";
  }
  CHECK_THROWS_AS(load_vocab_lexicon(path), DataError);
  {
    std::ofstream out(path);
    out << "[PAD]\tNOSUCHTAG\n";
  }
  CHECK_THROWS_AS(load_vocab_lexicon(path), DataError);
  std::remove(path.c_str());
}
