#include "vdlg/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vdlg/errors.hpp"

namespace vdlg {

using json = nlohmann::json;

// ----- synthetic world -----

namespace {

struct ClassSpec {
  const char* singular;
  const char* plural;
  int gender;  // 0 none, 1 he, 2 she
};

// index 0 is background (padding regions only, never mentioned in text)
const ClassSpec kClasses[] = {
    {"", "", 0},           {"bike", "bikes", 0},   {"building", "buildings", 0},
    {"dog", "dogs", 0},    {"cat", "cats", 0},     {"tree", "trees", 0},
    {"car", "cars", 0},    {"bench", "benches", 0}, {"kite", "kites", 0},
    {"boat", "boats", 0},  {"man", "men", 1},      {"woman", "women", 2},
};
constexpr int kClassCount = 12;

const char* kSceneColors[] = {"red", "blue", "green", "yellow", "black", "white", "brown", "gray"};
constexpr int kSceneColorCount = 8;
const char* kExtraColors[] = {"purple", "pink", "orange"};

// opposite pairs sit at (2i, 2i+1)
const char* kQualities[] = {"old", "new", "tall", "short", "big", "small", "clean", "dirty"};
constexpr int kQualityCount = 8;

constexpr std::uint64_t kWorldSeed = 0x76646c6757524c44ULL;

std::vector<double> prototype(const std::string& kind, int index, int f) {
  Rng rng(hash_combine(hash_combine(kWorldSeed, kind), std::to_string(index) + "/" +
                                                           std::to_string(f)));
  std::vector<double> v(static_cast<std::size_t>(f));
  for (auto& x : v) x = rng.normal();
  return v;
}

std::vector<double> object_feature(const SceneObject& o, int f, double noise, Rng& rng) {
  auto cls = prototype("class", o.class_id, f);
  auto col = prototype("color", o.color, f);
  auto qua = prototype("quality", o.quality, f);
  std::vector<double> v(static_cast<std::size_t>(f));
  for (int i = 0; i < f; ++i)
    v[static_cast<std::size_t>(i)] = cls[i] + 0.8 * col[i] + 0.8 * qua[i] + noise * rng.normal();
  return v;
}

enum class PronounForm { kThey, kHe, kShe, kIt };

PronounForm form_of(const SceneObject& o) {
  if (o.plural) return PronounForm::kThey;
  if (o.gender == 1) return PronounForm::kHe;
  if (o.gender == 2) return PronounForm::kShe;
  return PronounForm::kIt;
}

const char* pronoun_word(PronounForm f) {
  switch (f) {
    case PronounForm::kThey: return "they";
    case PronounForm::kHe: return "he";
    case PronounForm::kShe: return "she";
    case PronounForm::kIt: return "it";
  }
  return "it";
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string join_ws(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

// distractor universe for candidate pools; large enough for pool_size up to 100
std::vector<std::string> distractor_universe() {
  std::vector<std::string> out;
  for (const char* c : kSceneColors) out.emplace_back(c);
  for (const char* c : kExtraColors) out.emplace_back(c);
  for (const char* q : kQualities) out.emplace_back(q);
  out.emplace_back("maybe");
  for (const char* c : kSceneColors) out.push_back(std::string("very ") + c);
  for (const char* q : kQualities) out.push_back(std::string("very ") + q);
  for (const char* q : kQualities) out.push_back(std::string("not ") + q);
  for (const char* a : kSceneColors)
    for (const char* b : kQualities) out.push_back(std::string(a) + " and " + b);
  return out;  // 8+3+8+1+8+8+8+64 = 108
}

}  // namespace

int world_category_count() { return kClassCount; }

void GenConfig::validate() const {
  if (n_objects < 1 || n_objects > kSceneColorCount)
    throw ConfigError("n_objects must be in [1, 8] (distinct colors per scene)");
  if (n_rounds < 1 || n_rounds > 10) throw ConfigError("n_rounds must be in [1, 10]");
  if (pool_size < 2 || pool_size > 100) throw ConfigError("pool_size must be in [2, 100]");
  if (pronoun_rate < 0.0 || pronoun_rate > 1.0) throw ConfigError("pronoun_rate outside [0, 1]");
  if (filler_rate < 0.0 || filler_rate > 0.5) throw ConfigError("filler_rate outside [0, 0.5]");
  if (coref_prev_prob < 0.0 || coref_prev_prob > 1.0)
    throw ConfigError("coref_prev_prob outside [0, 1]");
  if (coref_max_back < 2) throw ConfigError("coref_max_back must be >= 2");
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  if (feature_noise < 0.0) throw ConfigError("feature_noise must be >= 0");
}

namespace {

struct Mention {
  int round = -1;   // 0 = caption
  int order = -1;   // tie-break within a round (caption lists several objects)
  TokenRef noun;    // last noun mention head
  int noun_start = -1;
  int noun_len = 0;
};

struct PoolResult {
  std::vector<std::string> candidates;
  int answer_index;
};

PoolResult build_pool(const std::string& truth, const std::vector<std::string>& preferred,
                      int pool_size, Rng& rng) {
  std::vector<std::string> pool{truth};
  auto push_unique = [&](const std::string& s) {
    if (static_cast<int>(pool.size()) >= pool_size) return;
    if (std::find(pool.begin(), pool.end(), s) == pool.end()) pool.push_back(s);
  };
  for (const auto& p : preferred) push_unique(p);
  std::vector<std::string> universe = distractor_universe();
  // deterministic partial shuffle
  for (std::size_t i = 0; i + 1 < universe.size(); ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(universe.size() - i));
    std::swap(universe[i], universe[j]);
  }
  for (const auto& u : universe) push_unique(u);
  if (static_cast<int>(pool.size()) < pool_size)
    throw DataError("distractor universe too small for pool size");
  // place the truth at a random slot
  int gt = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(pool_size)));
  std::swap(pool[0], pool[static_cast<std::size_t>(gt)]);
  return {std::move(pool), gt};
}

}  // namespace

std::pair<Scene, Dialog> generate_dialog(Rng& rng, const GenConfig& cfg,
                                         std::uint64_t image_id) {
  cfg.validate();

  Scene scene;
  scene.image_id = image_id;
  scene.daytime = rng.bernoulli(0.5);

  // distinct classes and colors per scene
  std::vector<int> class_pool;
  for (int c = 1; c < kClassCount; ++c) class_pool.push_back(c);
  std::vector<int> color_pool;
  for (int c = 0; c < kSceneColorCount; ++c) color_pool.push_back(c);
  for (int i = 0; i < cfg.n_objects; ++i) {
    std::size_t ci = static_cast<std::size_t>(rng.uniform_int(class_pool.size()));
    std::size_t ki = static_cast<std::size_t>(rng.uniform_int(color_pool.size()));
    SceneObject o;
    o.class_id = class_pool[ci];
    class_pool.erase(class_pool.begin() + static_cast<std::ptrdiff_t>(ci));
    o.color = color_pool[ki];
    color_pool.erase(color_pool.begin() + static_cast<std::ptrdiff_t>(ki));
    o.gender = kClasses[o.class_id].gender;
    o.plural = o.gender == 0 && rng.bernoulli(0.65);
    o.quality = static_cast<int>(rng.uniform_int(kQualityCount));
    double x1 = rng.uniform(0.0, 0.55);
    double y1 = rng.uniform(0.0, 0.55);
    o.box = {x1, y1, x1 + rng.uniform(0.2, 0.4), y1 + rng.uniform(0.2, 0.4)};
    o.feature = object_feature(o, cfg.feature_dim, cfg.feature_noise, rng);
    scene.objects.push_back(std::move(o));
  }

  Dialog dialog;
  dialog.image_id = image_id;

  // caption introduces every object with its color: "a red bike and some blue buildings ."
  std::vector<std::string> cap;
  std::vector<Mention> mention(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& o = scene.objects[i];
    if (i > 0) cap.push_back(i + 1 == scene.objects.size() ? "and" : ",");
    int start = static_cast<int>(cap.size());
    cap.push_back(o.plural ? "some" : "a");
    cap.push_back(kSceneColors[o.color]);
    cap.push_back(o.plural ? kClasses[o.class_id].plural : kClasses[o.class_id].singular);
    mention[i].round = 0;
    mention[i].order = static_cast<int>(i);
    mention[i].noun = TokenRef{0, static_cast<int>(cap.size()) - 1};
    mention[i].noun_start = start;
    mention[i].noun_len = 3;
  }
  cap.push_back(".");
  dialog.caption = join_ws(cap);

  auto noun_of = [&](const SceneObject& o) {
    return std::string(o.plural ? kClasses[o.class_id].plural : kClasses[o.class_id].singular);
  };

  for (int t = 1; t <= cfg.n_rounds; ++t) {
    DialogRound round;
    std::vector<std::string> q;
    std::string truth;
    std::vector<std::string> preferred;  // informative distractors

    bool filler = rng.bernoulli(cfg.filler_rate);
    if (filler) {
      q = {"is", "it", "daytime", "?"};
      truth = scene.daytime ? "yes" : "no";
      preferred = {scene.daytime ? std::string("no") : std::string("yes"), "maybe"};
    } else {
      // choose target object and reference form
      int target = -1;
      bool pronominal = rng.bernoulli(cfg.pronoun_rate);
      if (pronominal) {
        // an object is pronominalizable only when it is the most recent
        // reference among objects sharing its pronoun form (so the link is
        // resolvable by recency)
        std::vector<int> usable;
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
          PronounForm f = form_of(scene.objects[i]);
          bool newest = true;
          for (std::size_t j = 0; j < scene.objects.size(); ++j) {
            if (i == j || form_of(scene.objects[j]) != f) continue;
            if (mention[j].round > mention[i].round ||
                (mention[j].round == mention[i].round && mention[j].order > mention[i].order))
              newest = false;
          }
          if (newest) usable.push_back(static_cast<int>(i));
        }
        if (usable.empty()) {
          pronominal = false;
        } else {
          bool want_prev = rng.bernoulli(cfg.coref_prev_prob);
          std::vector<int> near, far;
          for (int i : usable) {
            int dist = t - mention[static_cast<std::size_t>(i)].round;
            (dist <= 1 ? near : far).push_back(i);
          }
          const std::vector<int>& bucket =
              want_prev ? (near.empty() ? far : near) : (far.empty() ? near : far);
          target = bucket[static_cast<std::size_t>(rng.uniform_int(bucket.size()))];
        }
      }
      if (target < 0) {
        pronominal = false;
        // rotate topics: prefer the least recently referenced object
        int best = 0;
        for (std::size_t i = 1; i < scene.objects.size(); ++i)
          if (mention[i].round < mention[static_cast<std::size_t>(best)].round) best = static_cast<int>(i);
        // random tie-ish spread
        if (rng.bernoulli(0.35))
          best = static_cast<int>(rng.uniform_int(scene.objects.size()));
        target = best;
      }

      const SceneObject& o = scene.objects[static_cast<std::size_t>(target)];
      PronounForm form = form_of(o);
      bool plural = o.plural;
      std::string be = plural ? "are" : "is";
      std::string aux = plural ? "do" : "does";

      int pron_offset = -1;
      int noun_start = -1, noun_head = -1;
      double kind_roll = rng.uniform();
      if (kind_roll < 0.45) {
        // "what color is the bike ?" / "what color are they ?"
        q = {"what", "color", be};
        if (pronominal) {
          pron_offset = static_cast<int>(q.size());
          q.push_back(pronoun_word(form));
        } else {
          noun_start = static_cast<int>(q.size());
          q.push_back("the");
          noun_head = static_cast<int>(q.size());
          q.push_back(noun_of(o));
        }
        q.push_back("?");
        truth = kSceneColors[o.color];
        for (const SceneObject& other : scene.objects)
          if (&other != &o) preferred.emplace_back(kSceneColors[other.color]);
      } else if (kind_roll < 0.80) {
        // "is the bike red ?" / "are they blue ?"
        int asked;
        if (rng.bernoulli(0.5)) {
          asked = o.color;
        } else if (scene.objects.size() > 1 && rng.bernoulli(0.7)) {
          // coreference matters: ask another object's color
          std::size_t j = rng.uniform_int(scene.objects.size());
          while (static_cast<int>(j) == target) j = rng.uniform_int(scene.objects.size());
          asked = scene.objects[j].color;
        } else {
          asked = static_cast<int>(rng.uniform_int(kSceneColorCount));
        }
        q = {be};
        if (pronominal) {
          pron_offset = static_cast<int>(q.size());
          q.push_back(pronoun_word(form));
        } else {
          noun_start = static_cast<int>(q.size());
          q.push_back("the");
          noun_head = static_cast<int>(q.size());
          q.push_back(noun_of(o));
        }
        q.push_back(kSceneColors[asked]);
        q.push_back("?");
        truth = asked == o.color ? "yes" : "no";
        preferred = {truth == "yes" ? std::string("no") : std::string("yes"), "maybe"};
      } else {
        // "does the dog look old ?" / "do they look tall ?"
        int asked = rng.bernoulli(0.5) ? o.quality : (o.quality ^ 1);
        q = {aux};
        if (pronominal) {
          pron_offset = static_cast<int>(q.size());
          q.push_back(pronoun_word(form));
        } else {
          noun_start = static_cast<int>(q.size());
          q.push_back("the");
          noun_head = static_cast<int>(q.size());
          q.push_back(noun_of(o));
        }
        q.push_back("look");
        q.push_back(kQualities[asked]);
        q.push_back("?");
        truth = asked == o.quality ? "yes" : "no";
        preferred = {truth == "yes" ? std::string("no") : std::string("yes"), "maybe"};
      }

      Mention& m = mention[static_cast<std::size_t>(target)];
      if (pronominal) {
        if (form != PronounForm::kIt) {
          CorefLink link;
          link.pronoun = TokenRef{2 * t - 1, pron_offset};
          link.antecedent = m.noun;
          link.antecedent_start = m.noun_start;
          link.antecedent_len = m.noun_len;
          dialog.links.push_back(link);
        }
        m.round = t;  // reference recency moves; the noun mention stays
        m.order = 0;
      } else {
        m.round = t;
        m.order = 0;
        m.noun = TokenRef{2 * t - 1, noun_head};
        m.noun_start = noun_start;
        m.noun_len = 2;  // "the <noun>"
      }
    }

    PoolResult pool = build_pool(truth, preferred, cfg.pool_size, rng);
    round.question = join_ws(q);
    round.candidates = std::move(pool.candidates);
    round.answer_index = pool.answer_index;
    dialog.rounds.push_back(std::move(round));
  }

  if (cfg.pronoun_rate > 0.0 && scene.objects.empty())
    throw DataError("pronoun requested before any noun is available");
  return {std::move(scene), std::move(dialog)};
}

Corpus generate_corpus(std::uint64_t seed, const GenConfig& cfg, int n_dialogs,
                       std::uint64_t first_image_id) {
  cfg.validate();
  if (n_dialogs < 1) throw ConfigError("n_dialogs must be positive");
  Corpus corpus;
  Rng rng(seed);
  for (int i = 0; i < n_dialogs; ++i) {
    auto [scene, dialog] = generate_dialog(rng, cfg, first_image_id + static_cast<std::uint64_t>(i));
    corpus.regions.emplace(scene.image_id, scene_to_regions(scene, cfg.feature_dim));
    corpus.dialogs.push_back(std::move(dialog));
  }
  return corpus;
}

ImageRegionSet scene_to_regions(const Scene& scene, int feature_dim) {
  if (scene.objects.size() > kImageRegions) throw DataError("scene exceeds 36 objects");
  ImageRegionSet rs;
  rs.features = Tensor(kImageRows, feature_dim);
  rs.boxes = Tensor(kImageRegions, 4);
  rs.categories.assign(kImageRegions, 0);

  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& o = scene.objects[i];
    if (static_cast<int>(o.feature.size()) != feature_dim)
      throw DataError("object feature width mismatch");
    for (int c = 0; c < feature_dim; ++c)
      rs.features.at(static_cast<std::int64_t>(i) + 1, c) = o.feature[static_cast<std::size_t>(c)];
    for (int b = 0; b < 4; ++b) rs.boxes.at(static_cast<std::int64_t>(i), b) = o.box[static_cast<std::size_t>(b)];
    rs.categories[i] = o.class_id;
  }
  // padding regions: small fixed boxes, background category, zero features
  for (std::size_t i = scene.objects.size(); i < kImageRegions; ++i) {
    rs.boxes.at(static_cast<std::int64_t>(i), 0) = 0.01;
    rs.boxes.at(static_cast<std::int64_t>(i), 1) = 0.01;
    rs.boxes.at(static_cast<std::int64_t>(i), 2) = 0.05;
    rs.boxes.at(static_cast<std::int64_t>(i), 3) = 0.05;
  }
  // global row: mean-pooled object features plus a day/night component
  auto day = prototype("daytime", 0, feature_dim);
  for (int c = 0; c < feature_dim; ++c) {
    double mean = 0.0;
    for (const SceneObject& o : scene.objects) mean += o.feature[static_cast<std::size_t>(c)];
    if (!scene.objects.empty()) mean /= static_cast<double>(scene.objects.size());
    rs.features.at(0, c) = mean + (scene.daytime ? 1.0 : -1.0) * day[static_cast<std::size_t>(c)];
  }
  validate_regions(rs);
  return rs;
}

// ----- assembly -----

AssembledInput assemble_input(const Dialog& dialog, int round, const std::string& candidate,
                              const ImageRegionSet& regions, const VocabLexicon& vl,
                              int max_lang_len) {
  if (round < 1 || round > static_cast<int>(dialog.rounds.size()))
    throw DataError("round out of range");
  const Vocabulary& vocab = vl.vocab;
  const PosLexicon& lex = vl.lexicon;

  auto tok = [&](const std::string& s) { return tokenize(s, vocab); };
  std::vector<int> cap = tok(dialog.caption);
  std::vector<int> cand = tok(candidate);
  std::vector<std::vector<int>> qs, as;
  for (int i = 0; i < round; ++i) {
    const DialogRound& r = dialog.rounds[static_cast<std::size_t>(i)];
    if (r.answer_index < 0 || r.answer_index >= static_cast<int>(r.candidates.size()))
      throw DataError("round " + std::to_string(i + 1) + ": answer_index out of range");
    qs.push_back(tok(r.question));
    as.push_back(tok(r.candidates[static_cast<std::size_t>(r.answer_index)]));
  }

  // минimal layout: [CLS] C [SEP] Q_t cand [SEP]
  std::size_t base = 1 + cap.size() + 1 + qs.back().size() + cand.size() + 1;
  if (base > static_cast<std::size_t>(max_lang_len))
    throw DataError("caption alone exceeds the length budget");
  int first_kept = round - 1;  // history rounds [first_kept, round-1), 0-based
  std::size_t total = base;
  for (int i = round - 2; i >= 0; --i) {
    std::size_t add = qs[static_cast<std::size_t>(i)].size() + as[static_cast<std::size_t>(i)].size() + 1;
    if (total + add > static_cast<std::size_t>(max_lang_len)) break;
    total += add;
    first_kept = i;
  }

  AssembledInput out;
  out.round = round;
  out.regions = regions;
  TokenSequence& seq = out.seq;
  std::map<int, int> sentence_start;  // dialog sentence id -> absolute start

  auto push_words = [&](const std::vector<int>& ids, Segment seg, int sentence) {
    sentence_start[sentence] = static_cast<int>(seq.size());
    for (int id : ids) {
      PosTag tag = vocab.is_special(id) ? PosTag::kNone : lex.tag(vocab.token(id));
      seq.push(id, seg, sentence, tag, false);
    }
  };

  seq.push(vocab.cls_id(), Segment::kCaption, 0, PosTag::kNone, true);
  push_words(cap, Segment::kCaption, 0);
  seq.push(vocab.sep_id(), Segment::kCaption, 0, PosTag::kNone, true);
  for (int i = first_kept; i < round - 1; ++i) {
    push_words(qs[static_cast<std::size_t>(i)], Segment::kQuestion, 2 * (i + 1) - 1);
    push_words(as[static_cast<std::size_t>(i)], Segment::kAnswer, 2 * (i + 1));
    seq.push(vocab.sep_id(), Segment::kAnswer, 2 * (i + 1), PosTag::kNone, true);
  }
  push_words(qs.back(), Segment::kQuestion, 2 * round - 1);
  push_words(cand, Segment::kAnswer, 2 * round);
  seq.push(vocab.sep_id(), Segment::kAnswer, 2 * round, PosTag::kNone, true);

  for (const CorefLink& link : dialog.links) {
    auto ps = sentence_start.find(link.pronoun.sentence);
    auto as_ = sentence_start.find(link.antecedent.sentence);
    if (ps == sentence_start.end() || as_ == sentence_start.end()) continue;
    ResolvedLink rl;
    rl.pronoun_pos = ps->second + link.pronoun.offset;
    rl.pronoun_sentence = link.pronoun.sentence;
    rl.antecedent_head = as_->second + link.antecedent.offset;
    for (int s = 0; s < link.antecedent_len; ++s)
      rl.antecedent_span.push_back(as_->second + link.antecedent_start + s);
    if (rl.pronoun_pos >= static_cast<int>(seq.size()) ||
        rl.antecedent_head >= static_cast<int>(seq.size()))
      throw DataError("coreference link outside assembled sequence");
    out.links.push_back(std::move(rl));
  }
  return out;
}

std::vector<AssembledInput> sample_nsp_instances(const Dialog& dialog,
                                                 const ImageRegionSet& regions,
                                                 const VocabLexicon& vl, int max_lang_len,
                                                 Rng& rng) {
  std::vector<AssembledInput> out;
  for (int t = 1; t <= static_cast<int>(dialog.rounds.size()); ++t) {
    const DialogRound& r = dialog.rounds[static_cast<std::size_t>(t - 1)];
    if (r.candidates.size() < 2) throw DataError("candidate pool needs >= 2 entries");
    if (r.answer_index < 0 || r.answer_index >= static_cast<int>(r.candidates.size()))
      throw DataError("pool without ground truth answer");
    AssembledInput pos = assemble_input(dialog, t, r.candidates[static_cast<std::size_t>(r.answer_index)],
                                        regions, vl, max_lang_len);
    pos.nsp_label = 1;
    out.push_back(std::move(pos));

    std::size_t wrong = rng.uniform_int(r.candidates.size() - 1);
    if (wrong >= static_cast<std::size_t>(r.answer_index)) ++wrong;
    AssembledInput neg =
        assemble_input(dialog, t, r.candidates[wrong], regions, vl, max_lang_len);
    neg.nsp_label = 0;
    out.push_back(std::move(neg));
  }
  return out;
}

void validate_layout(const AssembledInput& in, const VocabLexicon& vl) {
  const TokenSequence& seq = in.seq;
  const Vocabulary& vocab = vl.vocab;
  if (seq.size() < 4) throw DataError("layout: sequence too short");
  if (seq.ids[0] != vocab.cls_id()) throw DataError("layout: [CLS] missing at position 0");
  for (std::size_t i = 1; i < seq.size(); ++i)
    if (seq.ids[i] == vocab.cls_id()) throw DataError("layout: duplicate [CLS]");
  if (seq.ids.back() != vocab.sep_id()) throw DataError("layout: missing trailing [SEP]");
  int prev_sentence = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.sentence_index[i] < prev_sentence)
      throw DataError("layout: sentence indices not monotone");
    prev_sentence = seq.sentence_index[i];
    bool special_id = seq.ids[i] == vocab.cls_id() || seq.ids[i] == vocab.sep_id();
    if (special_id != (seq.special[i] != 0))
      throw DataError("layout: special flag inconsistent");
    if (special_id && seq.pos_tags[i] != PosTag::kNone)
      throw DataError("layout: special token must tag NONE");
    int seg = seq.segments[i];
    int sent = seq.sentence_index[i];
    if (sent == 0 && seg != static_cast<int>(Segment::kCaption))
      throw DataError("layout: caption segment mismatch");
    if (sent > 0 && sent % 2 == 1 && seg != static_cast<int>(Segment::kQuestion))
      throw DataError("layout: question segment mismatch");
    if (sent > 0 && sent % 2 == 0 && seg != static_cast<int>(Segment::kAnswer))
      throw DataError("layout: answer segment mismatch");
  }
}

// ----- serialization -----

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw DataError(path + ": unknown field '" + it.key() + "'");
  }
}

json link_to_json(const CorefLink& l) {
  json j;
  j["pronoun"] = {l.pronoun.sentence, l.pronoun.offset};
  j["antecedent"] = {l.antecedent.sentence, l.antecedent.offset};
  j["antecedent_span"] = {l.antecedent_start, l.antecedent_len};
  return j;
}

CorefLink link_from_json(const json& j, const std::string& path) {
  reject_unknown_keys(j, {"pronoun", "antecedent", "antecedent_span"}, path);
  auto pair_of = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2)
      throw DataError(path + ": field '" + key + "' must be a 2-element array");
    return std::make_pair(j[key][0].get<int>(), j[key][1].get<int>());
  };
  CorefLink l;
  auto p = pair_of("pronoun");
  l.pronoun = {p.first, p.second};
  auto a = pair_of("antecedent");
  l.antecedent = {a.first, a.second};
  auto s = pair_of("antecedent_span");
  l.antecedent_start = s.first;
  l.antecedent_len = s.second;
  return l;
}

}  // namespace

void save_dialogs_json(const std::vector<Dialog>& dialogs, const std::string& path) {
  json root = json::array();
  for (const Dialog& d : dialogs) {
    json jd;
    jd["image_id"] = d.image_id;
    jd["caption"] = d.caption;
    json rounds = json::array();
    for (const DialogRound& r : d.rounds) {
      json jr;
      jr["question"] = r.question;
      jr["answer_index"] = r.answer_index;
      jr["candidates"] = r.candidates;
      rounds.push_back(std::move(jr));
    }
    jd["rounds"] = std::move(rounds);
    json links = json::array();
    for (const CorefLink& l : d.links) links.push_back(link_to_json(l));
    jd["coref_links"] = std::move(links);
    root.push_back(std::move(jd));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dialog file: " + path);
  out << root.dump(1) << '\n';
}

std::vector<Dialog> load_dialogs_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dialog file: " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw DataError(path + ": JSON parse error: " + e.what());
  }
  if (!root.is_array()) throw DataError(path + ": top level must be an array of dialogs");
  std::vector<Dialog> dialogs;
  for (std::size_t di = 0; di < root.size(); ++di) {
    const json& jd = root[di];
    std::string dpath = path + ": dialog " + std::to_string(di);
    if (!jd.is_object()) throw DataError(dpath + ": must be an object");
    reject_unknown_keys(jd, {"image_id", "caption", "rounds", "coref_links"}, dpath);
    for (const char* req : {"image_id", "caption", "rounds"})
      if (!jd.contains(req)) throw DataError(dpath + ": missing field '" + req + "'");
    Dialog d;
    if (!jd["image_id"].is_number_unsigned() && !jd["image_id"].is_number_integer())
      throw DataError(dpath + ": field 'image_id' must be an integer");
    d.image_id = jd["image_id"].get<std::uint64_t>();
    if (!jd["caption"].is_string()) throw DataError(dpath + ": field 'caption' must be a string");
    d.caption = jd["caption"].get<std::string>();
    if (!jd["rounds"].is_array()) throw DataError(dpath + ": field 'rounds' must be an array");
    for (std::size_t ri = 0; ri < jd["rounds"].size(); ++ri) {
      const json& jr = jd["rounds"][ri];
      std::string rpath = dpath + ", round " + std::to_string(ri);
      if (!jr.is_object()) throw DataError(rpath + ": must be an object");
      reject_unknown_keys(jr, {"question", "answer_index", "candidates"}, rpath);
      for (const char* req : {"question", "answer_index", "candidates"})
        if (!jr.contains(req)) throw DataError(rpath + ": missing field '" + req + "'");
      DialogRound r;
      if (!jr["question"].is_string())
        throw DataError(rpath + ": field 'question' must be a string");
      r.question = jr["question"].get<std::string>();
      if (!jr["answer_index"].is_number_integer())
        throw DataError(rpath + ": field 'answer_index' must be an integer");
      r.answer_index = jr["answer_index"].get<int>();
      if (!jr["candidates"].is_array())
        throw DataError(rpath + ": field 'candidates' must be an array");
      for (const auto& c : jr["candidates"]) {
        if (!c.is_string()) throw DataError(rpath + ": candidates must be strings");
        r.candidates.push_back(c.get<std::string>());
      }
      if (r.answer_index < 0 || r.answer_index >= static_cast<int>(r.candidates.size()))
        throw DataError(rpath + ": field 'answer_index' out of range");
      d.rounds.push_back(std::move(r));
    }
    if (jd.contains("coref_links")) {
      if (!jd["coref_links"].is_array())
        throw DataError(dpath + ": field 'coref_links' must be an array");
      for (std::size_t li = 0; li < jd["coref_links"].size(); ++li)
        d.links.push_back(
            link_from_json(jd["coref_links"][li], dpath + ", link " + std::to_string(li)));
    }
    dialogs.push_back(std::move(d));
  }
  return dialogs;
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(path + ": truncated feature file");
  return v;
}

}  // namespace

void save_features_bin(const std::map<std::uint64_t, ImageRegionSet>& regions,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file: " + path);
  if (regions.empty()) throw DataError("no regions to write");
  std::uint32_t f = static_cast<std::uint32_t>(regions.begin()->second.features.cols());
  out.write("VDRF", 4);
  write_raw<std::uint32_t>(out, 1);  // version
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(regions.size()));
  write_raw<std::uint32_t>(out, f);
  for (const auto& [id, rs] : regions) {
    if (rs.features.cols() != static_cast<std::int64_t>(f))
      throw DataError("inconsistent feature width across images");
    validate_regions(rs);
    write_raw<std::uint64_t>(out, id);
    for (int r = 0; r < kImageRegions; ++r) {
      for (std::uint32_t c = 0; c < f; ++c)
        write_raw<double>(out, rs.features.at(r + 1, static_cast<std::int64_t>(c)));
      for (int b = 0; b < 4; ++b) write_raw<double>(out, rs.boxes.at(r, b));
    }
    for (std::uint32_t c = 0; c < f; ++c)
      write_raw<double>(out, rs.features.at(0, static_cast<std::int64_t>(c)));
    for (int r = 0; r < kImageRegions; ++r)
      write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(rs.categories[static_cast<std::size_t>(r)]));
  }
}

std::map<std::uint64_t, ImageRegionSet> load_features_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VDRF", 4) != 0)
    throw DataError(path + ": bad magic, not a VDRF feature file");
  auto version = read_raw<std::uint32_t>(in, path);
  if (version != 1) throw DataError(path + ": unsupported version " + std::to_string(version));
  auto count = read_raw<std::uint32_t>(in, path);
  auto f = read_raw<std::uint32_t>(in, path);
  if (f == 0 || f > 65536) throw DataError(path + ": bad feature width");
  std::map<std::uint64_t, ImageRegionSet> regions;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto id = read_raw<std::uint64_t>(in, path);
    ImageRegionSet rs;
    rs.features = Tensor(kImageRows, static_cast<std::int64_t>(f));
    rs.boxes = Tensor(kImageRegions, 4);
    rs.categories.assign(kImageRegions, 0);
    for (int r = 0; r < kImageRegions; ++r) {
      for (std::uint32_t c = 0; c < f; ++c)
        rs.features.at(r + 1, static_cast<std::int64_t>(c)) = read_raw<double>(in, path);
      for (int b = 0; b < 4; ++b) rs.boxes.at(r, b) = read_raw<double>(in, path);
    }
    for (std::uint32_t c = 0; c < f; ++c)
      rs.features.at(0, static_cast<std::int64_t>(c)) = read_raw<double>(in, path);
    for (int r = 0; r < kImageRegions; ++r)
      rs.categories[static_cast<std::size_t>(r)] = static_cast<int>(read_raw<std::uint32_t>(in, path));
    validate_regions(rs);
    if (regions.count(id)) throw DataError(path + ": duplicate image id " + std::to_string(id));
    regions.emplace(id, std::move(rs));
  }
  return regions;
}

Corpus load_visdial_json(const std::string& dialog_path, const std::string& feature_path) {
  Corpus corpus;
  corpus.dialogs = load_dialogs_json(dialog_path);
  corpus.regions = load_features_bin(feature_path);
  for (const Dialog& d : corpus.dialogs)
    if (!corpus.regions.count(d.image_id))
      throw DataError(dialog_path + ": missing features for image id " +
                      std::to_string(d.image_id));
  return corpus;
}

std::uint64_t file_fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    if (!in) break;
  }
  return h;
}

}  // namespace vdlg
