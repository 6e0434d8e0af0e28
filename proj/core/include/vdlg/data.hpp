#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vdlg/embeddings.hpp"
#include "vdlg/rng.hpp"
#include "vdlg/sequence.hpp"
#include "vdlg/text.hpp"

namespace vdlg {

// ----- dialog structures -----

struct DialogRound {
  std::string question;
  std::vector<std::string> candidates;
  int answer_index = 0;  // ground truth position in candidates
};

// Token coordinates inside a dialog: sentence 0 is the caption, 2i-1 is Q_i,
// 2i is A_i; offset indexes the sentence's whitespace tokens.
struct TokenRef {
  int sentence = -1;
  int offset = -1;
};

struct CorefLink {
  TokenRef pronoun;
  TokenRef antecedent;        // head noun token of the mention
  int antecedent_start = -1;  // mention span start within the antecedent sentence
  int antecedent_len = 0;
};

struct Dialog {
  std::uint64_t image_id = 0;
  std::string caption;
  std::vector<DialogRound> rounds;
  std::vector<CorefLink> links;
};

// ----- synthetic scenes -----

struct SceneObject {
  int class_id = 0;  // 0 is background (padding rows only)
  bool plural = false;
  int gender = 0;  // 0 none, 1 "he", 2 "she"
  int color = 0;
  int quality = 0;
  std::array<double, 4> box{};
  std::vector<double> feature;
};

struct Scene {
  std::uint64_t image_id = 0;
  bool daytime = true;
  std::vector<SceneObject> objects;
};

int world_category_count();  // object classes incl. background; MIR's C

struct GenConfig {
  int n_objects = 3;
  int n_rounds = 10;
  int pool_size = 10;
  double pronoun_rate = 0.5;
  double filler_rate = 0.08;     // non-referential "is it daytime ?" rounds
  double coref_prev_prob = 0.7;  // antecedent in the previous round
  int coref_max_back = 4;        // otherwise 2..max rounds back
  int feature_dim = 32;
  double feature_noise = 0.1;

  void validate() const;
};

// Template-driven dialog with ground-truth links. Answers are determined by
// scene attributes; pronouns always corefer with the most recent compatible
// mention, so the links are resolvable from the discourse.
std::pair<Scene, Dialog> generate_dialog(Rng& rng, const GenConfig& cfg,
                                         std::uint64_t image_id);

struct Corpus {
  std::vector<Dialog> dialogs;
  std::map<std::uint64_t, ImageRegionSet> regions;
};

Corpus generate_corpus(std::uint64_t seed, const GenConfig& cfg, int n_dialogs,
                       std::uint64_t first_image_id = 1);

ImageRegionSet scene_to_regions(const Scene& scene, int feature_dim);

// ----- input assembly -----

struct ResolvedLink {
  int pronoun_pos = -1;  // absolute position in the assembled sequence
  int pronoun_sentence = -1;
  int antecedent_head = -1;
  std::vector<int> antecedent_span;
};

// Layout: [CLS] C [SEP] Q_1 A_1 [SEP] ... Q_t cand [SEP]; 37 image rows follow
// inside the model. nsp_label is set by the NSP sampler.
struct AssembledInput {
  TokenSequence seq;
  ImageRegionSet regions;
  int nsp_label = -1;
  int round = 0;
  std::vector<ResolvedLink> links;
};

// max_lang_len is the language-row budget (model max_len minus the 37 image
// rows). When history overflows, the oldest rounds are dropped first; the
// caption is always kept.
AssembledInput assemble_input(const Dialog& dialog, int round, const std::string& candidate,
                              const ImageRegionSet& regions, const VocabLexicon& vl,
                              int max_lang_len);

// Per round: one positive (ground truth, label 1) and one uniformly sampled
// wrong candidate (label 0) -> 2 * n_rounds instances.
std::vector<AssembledInput> sample_nsp_instances(const Dialog& dialog,
                                                 const ImageRegionSet& regions,
                                                 const VocabLexicon& vl, int max_lang_len,
                                                 Rng& rng);

// Layout grammar check used by tests: single [CLS] at 0, [SEP] placement,
// monotone sentence indices, tag/segment consistency.
void validate_layout(const AssembledInput& in, const VocabLexicon& vl);

// ----- serialization -----

void save_dialogs_json(const std::vector<Dialog>& dialogs, const std::string& path);
std::vector<Dialog> load_dialogs_json(const std::string& path);

void save_features_bin(const std::map<std::uint64_t, ImageRegionSet>& regions,
                       const std::string& path);
std::map<std::uint64_t, ImageRegionSet> load_features_bin(const std::string& path);

// Dialog JSON + feature binary with per-image referential integrity checks.
Corpus load_visdial_json(const std::string& dialog_path, const std::string& feature_path);

std::uint64_t file_fnv1a(const std::string& path);

}  // namespace vdlg
