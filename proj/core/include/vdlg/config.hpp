#pragma once

#include <cstdint>
#include <string>

#include "vdlg/data.hpp"
#include "vdlg/encoder.hpp"

namespace vdlg {

// Flat key-value run configuration. Text format: `key = value` lines, '#'
// comments, and `include <path>` directives (relative to the including file).
// Unknown keys are rejected so ablation configs stay diff-able and typo-safe.
struct RunConfig {
  // model
  int d = 64;
  int layers = 2;
  int heads = 4;
  int feature_dim = 32;
  int max_len = 256;
  int categories = 12;
  double dropout = 0.1;
  bool c1_pos_constraint = false;
  bool c2_sentence_pe = false;
  double pos_loss_weight = 1.0;
  // sentence position embedding
  int pe_M = 21;
  double pe_k = 100.0;
  double pe_epsilon = 10000.0;
  // optimizer and schedule: warm up from warmup_start_lr to learning_rate,
  // then decay linearly to final_lr at total_steps
  double learning_rate = 5e-5;
  double warmup_start_lr = 5e-6;
  double final_lr = 5e-6;
  std::int64_t warmup_steps = 30000;
  std::int64_t total_steps = 70000;
  int batch_size = 32;
  // masking
  double mlm_rate = 0.15;
  double mir_rate = 0.15;
  double pos_mask_rate = 0.15;
  // data generation
  std::uint64_t seed = 1;
  int dialogs = 2000;
  int val_dialogs = 200;
  int test_dialogs = 300;
  int rounds = 10;
  int pool_size = 10;
  int n_objects = 3;
  double pronoun_rate = 0.5;
  double filler_rate = 0.08;
  double coref_prev_prob = 0.7;
  int coref_max_back = 4;
  double feature_noise = 0.1;
  // training control
  int sub_sample = 8;          // NSP instances drawn per dialog per epoch (of 20)
  std::int64_t eval_interval = 50;  // steps between validation evaluations
  int eval_dialogs = 24;       // validation dialogs per evaluation
  int threads = 1;             // ranking-evaluation parallelism (over dialogs)

  void validate() const;
  EncoderConfig encoder_config(int vocab_size) const;
  GenConfig gen_config() const;
  std::string serialize() const;  // canonical text, parse(serialize()) == *this
};

RunConfig parse_config_text(const std::string& text, const std::string& source_name = "<string>");
RunConfig load_config(const std::string& path);
void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value,
                       const std::string& where);

}  // namespace vdlg
