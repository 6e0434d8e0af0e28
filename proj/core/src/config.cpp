#include "vdlg/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vdlg/errors.hpp"

namespace vdlg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected boolean, got '" + v + "'");
}

std::int64_t parse_int(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    std::int64_t r = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected number, got '" + v + "'");
  }
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void apply_config_line(RunConfig& c, const std::string& key, const std::string& value,
                       const std::string& w) {
  if (key == "d") c.d = static_cast<int>(parse_int(value, w));
  else if (key == "layers") c.layers = static_cast<int>(parse_int(value, w));
  else if (key == "heads") c.heads = static_cast<int>(parse_int(value, w));
  else if (key == "feature_dim") c.feature_dim = static_cast<int>(parse_int(value, w));
  else if (key == "max_len") c.max_len = static_cast<int>(parse_int(value, w));
  else if (key == "categories") c.categories = static_cast<int>(parse_int(value, w));
  else if (key == "dropout") c.dropout = parse_double(value, w);
  else if (key == "c1_pos_constraint") c.c1_pos_constraint = parse_bool(value, w);
  else if (key == "c2_sentence_pe") c.c2_sentence_pe = parse_bool(value, w);
  else if (key == "pos_loss_weight") c.pos_loss_weight = parse_double(value, w);
  else if (key == "pe_M") c.pe_M = static_cast<int>(parse_int(value, w));
  else if (key == "pe_k") c.pe_k = parse_double(value, w);
  else if (key == "pe_epsilon") c.pe_epsilon = parse_double(value, w);
  else if (key == "learning_rate") c.learning_rate = parse_double(value, w);
  else if (key == "warmup_start_lr") c.warmup_start_lr = parse_double(value, w);
  else if (key == "final_lr") c.final_lr = parse_double(value, w);
  else if (key == "warmup_steps") c.warmup_steps = parse_int(value, w);
  else if (key == "total_steps") c.total_steps = parse_int(value, w);
  else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(value, w));
  else if (key == "mlm_rate") c.mlm_rate = parse_double(value, w);
  else if (key == "mir_rate") c.mir_rate = parse_double(value, w);
  else if (key == "pos_mask_rate") c.pos_mask_rate = parse_double(value, w);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(value, w));
  else if (key == "dialogs") c.dialogs = static_cast<int>(parse_int(value, w));
  else if (key == "val_dialogs") c.val_dialogs = static_cast<int>(parse_int(value, w));
  else if (key == "test_dialogs") c.test_dialogs = static_cast<int>(parse_int(value, w));
  else if (key == "rounds") c.rounds = static_cast<int>(parse_int(value, w));
  else if (key == "pool_size") c.pool_size = static_cast<int>(parse_int(value, w));
  else if (key == "n_objects") c.n_objects = static_cast<int>(parse_int(value, w));
  else if (key == "pronoun_rate") c.pronoun_rate = parse_double(value, w);
  else if (key == "filler_rate") c.filler_rate = parse_double(value, w);
  else if (key == "coref_prev_prob") c.coref_prev_prob = parse_double(value, w);
  else if (key == "coref_max_back") c.coref_max_back = static_cast<int>(parse_int(value, w));
  else if (key == "feature_noise") c.feature_noise = parse_double(value, w);
  else if (key == "sub_sample") c.sub_sample = static_cast<int>(parse_int(value, w));
  else if (key == "eval_interval") c.eval_interval = parse_int(value, w);
  else if (key == "eval_dialogs") c.eval_dialogs = static_cast<int>(parse_int(value, w));
  else if (key == "threads") c.threads = static_cast<int>(parse_int(value, w));
  else throw ConfigError(w + ": unknown key '" + key + "'");
}

namespace {

void parse_into(RunConfig& cfg, std::istream& in, const std::string& source,
                int include_depth) {
  if (include_depth > 8) throw ConfigError(source + ": include depth exceeded");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string where = source + ":" + std::to_string(line_no);
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.rfind("include ", 0) == 0) {
      std::string inc = trim(line.substr(8));
      std::filesystem::path base = std::filesystem::path(source).parent_path();
      std::filesystem::path target = inc;
      if (target.is_relative() && !base.empty()) target = base / target;
      std::ifstream f(target);
      if (!f) throw ConfigError(where + ": cannot open include file " + target.string());
      parse_into(cfg, f, target.string(), include_depth + 1);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + ": expected key = value");
    apply_config_line(cfg, key, value, where);
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& source_name) {
  RunConfig cfg;
  std::istringstream in(text);
  parse_into(cfg, in, source_name, 0);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  parse_into(cfg, in, path, 0);
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  if (d <= 0 || d % 2 != 0) throw ConfigError("d must be positive and even");
  if (layers <= 0 || heads <= 0) throw ConfigError("layers/heads must be positive");
  if (d % heads != 0) throw ConfigError("heads must divide d");
  if (feature_dim <= 0) throw ConfigError("feature_dim must be positive");
  if (max_len < kImageRows + 4) throw ConfigError("max_len too small");
  if (categories < 1) throw ConfigError("categories must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout outside [0, 1)");
  if (pos_loss_weight < 0.0) throw ConfigError("pos_loss_weight must be >= 0");
  PEConfig pe{d, pe_M, pe_k, pe_epsilon};
  pe.validate();
  if (pe_M < 2 * rounds + 1) throw ConfigError("pe_M must cover caption plus all Q/A sentences");
  if (!(learning_rate > 0.0) || !(warmup_start_lr > 0.0) || !(final_lr > 0.0))
    throw ConfigError("learning rates must be positive");
  if (warmup_steps < 0 || total_steps <= 0 || warmup_steps > total_steps)
    throw ConfigError("invalid schedule step counts");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  for (double r : {mlm_rate, pos_mask_rate})
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("mask rates must lie in (0, 1)");
  if (mir_rate < 0.0 || mir_rate > 1.0) throw ConfigError("mir_rate outside [0, 1]");
  if (dialogs < 1 || val_dialogs < 0 || test_dialogs < 0)
    throw ConfigError("dialog counts invalid");
  gen_config().validate();
  if (sub_sample < 1 || sub_sample > 2 * rounds)
    throw ConfigError("sub_sample must lie in [1, 2 * rounds]");
  if (eval_interval <= 0) throw ConfigError("eval_interval must be positive");
  if (eval_dialogs < 1) throw ConfigError("eval_dialogs must be positive");
  if (threads < 1) throw ConfigError("threads must be positive");
}

EncoderConfig RunConfig::encoder_config(int vocab_size) const {
  EncoderConfig e;
  e.d = d;
  e.layers = layers;
  e.heads = heads;
  e.feature_dim = feature_dim;
  e.vocab_size = vocab_size;
  e.categories = categories;
  e.max_len = max_len;
  e.dropout = dropout;
  e.c1_pos_constraint = c1_pos_constraint;
  e.c2_sentence_pe = c2_sentence_pe;
  e.pe = PEConfig{d, pe_M, pe_k, pe_epsilon};
  return e;
}

GenConfig RunConfig::gen_config() const {
  GenConfig g;
  g.n_objects = n_objects;
  g.n_rounds = rounds;
  g.pool_size = pool_size;
  g.pronoun_rate = pronoun_rate;
  g.filler_rate = filler_rate;
  g.coref_prev_prob = coref_prev_prob;
  g.coref_max_back = coref_max_back;
  g.feature_dim = feature_dim;
  g.feature_noise = feature_noise;
  return g;
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "# model\n";
  os << "d = " << d << "\n";
  os << "layers = " << layers << "\n";
  os << "heads = " << heads << "\n";
  os << "feature_dim = " << feature_dim << "\n";
  os << "max_len = " << max_len << "\n";
  os << "categories = " << categories << "\n";
  os << "dropout = " << fmt_double(dropout) << "\n";
  os << "c1_pos_constraint = " << (c1_pos_constraint ? "true" : "false") << "\n";
  os << "c2_sentence_pe = " << (c2_sentence_pe ? "true" : "false") << "\n";
  os << "pos_loss_weight = " << fmt_double(pos_loss_weight) << "\n";
  os << "# sentence position embedding\n";
  os << "pe_M = " << pe_M << "\n";
  os << "pe_k = " << fmt_double(pe_k) << "\n";
  os << "pe_epsilon = " << fmt_double(pe_epsilon) << "\n";
  os << "# optimizer\n";
  os << "learning_rate = " << fmt_double(learning_rate) << "\n";
  os << "warmup_start_lr = " << fmt_double(warmup_start_lr) << "\n";
  os << "final_lr = " << fmt_double(final_lr) << "\n";
  os << "warmup_steps = " << warmup_steps << "\n";
  os << "total_steps = " << total_steps << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "# masking\n";
  os << "mlm_rate = " << fmt_double(mlm_rate) << "\n";
  os << "mir_rate = " << fmt_double(mir_rate) << "\n";
  os << "pos_mask_rate = " << fmt_double(pos_mask_rate) << "\n";
  os << "# data\n";
  os << "seed = " << seed << "\n";
  os << "dialogs = " << dialogs << "\n";
  os << "val_dialogs = " << val_dialogs << "\n";
  os << "test_dialogs = " << test_dialogs << "\n";
  os << "rounds = " << rounds << "\n";
  os << "pool_size = " << pool_size << "\n";
  os << "n_objects = " << n_objects << "\n";
  os << "pronoun_rate = " << fmt_double(pronoun_rate) << "\n";
  os << "filler_rate = " << fmt_double(filler_rate) << "\n";
  os << "coref_prev_prob = " << fmt_double(coref_prev_prob) << "\n";
  os << "coref_max_back = " << coref_max_back << "\n";
  os << "feature_noise = " << fmt_double(feature_noise) << "\n";
  os << "# training control\n";
  os << "sub_sample = " << sub_sample << "\n";
  os << "eval_interval = " << eval_interval << "\n";
  os << "eval_dialogs = " << eval_dialogs << "\n";
  os << "threads = " << threads << "\n";
  return os.str();
}

}  // namespace vdlg
