#pragma once

#include <map>
#include <string>
#include <vector>

#include "vdlg/data.hpp"
#include "vdlg/encoder.hpp"

namespace vdlg {

// One candidate pool scored by the model. Ties break by candidate index so
// ranks (and every metric built on them) are reproducible.
struct RankedAnswerSet {
  std::vector<double> scores;
  int ground_truth = -1;

  int rank() const;  // in [1, N]
};

struct RankingMetrics {
  double mrr = 0.0;
  double r_at_1 = 0.0;
  double r_at_5 = 0.0;
  double r_at_10 = 0.0;
  double mean_rank = 0.0;
  std::size_t n_sets = 0;
};

// mrr = mean(1/rank), r@k = fraction with rank <= k, mean_rank = mean(rank).
// When a pool has fewer than k candidates, r@k counts it as hit (with a warning).
RankingMetrics ranking_metrics(const std::vector<RankedAnswerSet>& sets);

// Attention aggregation spec: layer -1 means the final layer; empty head list
// means all heads of that layer (mean over the selected heads).
struct ProbeSpec {
  int layer = -1;
  std::vector<int> heads;
};

struct LinkProbeResult {
  int pronoun_pos = -1;
  std::vector<double> attention;  // renormalized over considered positions
  std::map<int, bool> hit;        // k -> antecedent token within top-k
};

struct CorefProbeReport {
  std::vector<LinkProbeResult> per_link;
  std::map<int, double> hit_rate;  // k -> fraction over links
  int layer = -1;
  std::vector<int> heads;
};

// For each link, averages the pronoun row of the selected attention maps,
// restricts it to language positions (dropping specials and the pronoun
// itself), renormalizes, and tests whether any token of the antecedent mention
// ranks in the top-k attended positions. Image positions never participate.
CorefProbeReport coref_probe(const ModelOutput& out, const TokenSequence& seq,
                             const std::vector<ResolvedLink>& links, const ProbeSpec& spec,
                             const std::vector<int>& ks = {5, 10, 20});

// Fraction of pronoun attention mass that lands on noun tokens (NN/NNS),
// relative to all language-token mass, averaged over the given pronouns.
double pos_attention_summary(const ModelOutput& out, const TokenSequence& seq,
                             const std::vector<int>& pronoun_positions, const ProbeSpec& spec);

// Numerical verification of the sentence-PE geometry: pairwise dot products
// depend on |dpos| only, match the closed form (1/k^2) sum_i cos(w_i dpos),
// and decrease strictly with the distance.
struct PEAnalysis {
  std::vector<double> dot_by_delta;   // closed form at dpos = 0..M
  double max_pair_deviation = 0.0;    // same-delta raw dots vs each other
  double max_closed_form_error = 0.0; // raw dot vs closed form
  bool delta_only = false;
  bool monotone_decreasing = false;
  double max_frequency_times_M = 0.0; // max_i w_i * M (monotone-region check)
};

PEAnalysis analyze_sentence_pe(const PEConfig& cfg);

// Matrix exports: CSV and 8-bit portable graymap (P2), values scaled to the
// matrix max.
void write_matrix_csv(const Tensor& m, const std::string& path);
void write_matrix_pgm(const Tensor& m, const std::string& path);

}  // namespace vdlg
