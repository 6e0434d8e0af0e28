#include "vdlg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vdlg/errors.hpp"
#include "vdlg/objectives.hpp"

namespace vdlg {

int RankedAnswerSet::rank() const {
  if (ground_truth < 0 || ground_truth >= static_cast<int>(scores.size()))
    throw DataError("ranked set without ground truth index");
  double gt = scores[static_cast<std::size_t>(ground_truth)];
  int r = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > gt) ++r;
    else if (scores[j] == gt && static_cast<int>(j) < ground_truth) ++r;
  }
  return r;
}

RankingMetrics ranking_metrics(const std::vector<RankedAnswerSet>& sets) {
  if (sets.empty()) throw DataError("ranking_metrics on empty input");
  RankingMetrics m;
  m.n_sets = sets.size();
  bool warned = false;
  auto r_at = [&](const RankedAnswerSet& s, int rank, int k) {
    if (static_cast<int>(s.scores.size()) < k) {
      if (!warned) {
        emit_warning("pool smaller than k; r@k reported as hit");
        warned = true;
      }
      return 1.0;
    }
    return rank <= k ? 1.0 : 0.0;
  };
  for (const RankedAnswerSet& s : sets) {
    int rank = s.rank();
    m.mrr += 1.0 / rank;
    m.r_at_1 += rank <= 1 ? 1.0 : 0.0;
    m.r_at_5 += r_at(s, rank, 5);
    m.r_at_10 += r_at(s, rank, 10);
    m.mean_rank += rank;
  }
  double n = static_cast<double>(sets.size());
  m.mrr /= n;
  m.r_at_1 /= n;
  m.r_at_5 /= n;
  m.r_at_10 /= n;
  m.mean_rank /= n;
  return m;
}

namespace {

// mean pronoun-row attention over the selected layer/heads
std::vector<double> aggregate_row(const ModelOutput& out, int row, const ProbeSpec& spec) {
  if (out.attention.empty())
    throw DataError("attention maps not captured; run the forward pass with capture enabled");
  int layer = spec.layer < 0 ? static_cast<int>(out.attention.size()) - 1 : spec.layer;
  if (layer < 0 || layer >= static_cast<int>(out.attention.size()))
    throw ConfigError("probe layer out of range");
  const auto& maps = out.attention[static_cast<std::size_t>(layer)];
  std::vector<int> heads = spec.heads;
  if (heads.empty())
    for (int h = 0; h < static_cast<int>(maps.size()); ++h) heads.push_back(h);
  std::vector<double> acc(static_cast<std::size_t>(maps.at(0).cols()), 0.0);
  for (int h : heads) {
    if (h < 0 || h >= static_cast<int>(maps.size())) throw ConfigError("probe head out of range");
    const Tensor& a = maps[static_cast<std::size_t>(h)];
    for (std::int64_t c = 0; c < a.cols(); ++c)
      acc[static_cast<std::size_t>(c)] += a.at(row, c);
  }
  for (double& v : acc) v /= static_cast<double>(heads.size());
  return acc;
}

}  // namespace

CorefProbeReport coref_probe(const ModelOutput& out, const TokenSequence& seq,
                             const std::vector<ResolvedLink>& links, const ProbeSpec& spec,
                             const std::vector<int>& ks) {
  if (links.empty()) throw DataError("coref_probe: empty link list");
  CorefProbeReport report;
  report.layer = spec.layer < 0 ? static_cast<int>(out.attention.size()) - 1 : spec.layer;
  report.heads = spec.heads;
  std::map<int, int> hits;
  for (int k : ks) hits[k] = 0;

  for (const ResolvedLink& link : links) {
    if (link.pronoun_pos < 0 || link.pronoun_pos >= out.n_lang)
      throw DataError("coref_probe: pronoun position outside language rows");
    std::vector<double> row = aggregate_row(out, link.pronoun_pos, spec);

    // considered positions: language tokens, excluding specials and the pronoun
    std::vector<int> considered;
    double mass = 0.0;
    for (int p = 0; p < out.n_lang; ++p) {
      if (p == link.pronoun_pos) continue;
      if (seq.special[static_cast<std::size_t>(p)]) continue;
      considered.push_back(p);
      mass += row[static_cast<std::size_t>(p)];
    }
    if (considered.empty() || mass <= 0.0)
      throw DataError("coref_probe: no language positions to rank");

    LinkProbeResult lr;
    lr.pronoun_pos = link.pronoun_pos;
    lr.attention.assign(considered.size(), 0.0);
    for (std::size_t i = 0; i < considered.size(); ++i)
      lr.attention[i] = row[static_cast<std::size_t>(considered[i])] / mass;

    // positions ordered by attention, ties by position (stable, reproducible)
    std::vector<std::size_t> order(considered.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return lr.attention[a] > lr.attention[b];
    });

    for (int k : ks) {
      bool hit = false;
      int top = std::min<int>(k, static_cast<int>(order.size()));
      for (int i = 0; i < top && !hit; ++i) {
        int pos = considered[order[static_cast<std::size_t>(i)]];
        if (pos == link.antecedent_head) hit = true;
        for (int s : link.antecedent_span)
          if (pos == s) hit = true;
      }
      lr.hit[k] = hit;
      if (hit) ++hits[k];
    }
    report.per_link.push_back(std::move(lr));
  }
  for (int k : ks)
    report.hit_rate[k] = static_cast<double>(hits[k]) / static_cast<double>(links.size());
  return report;
}

double pos_attention_summary(const ModelOutput& out, const TokenSequence& seq,
                             const std::vector<int>& pronoun_positions, const ProbeSpec& spec) {
  if (pronoun_positions.empty()) throw DataError("pos_attention_summary: no pronouns");
  double total = 0.0;
  for (int p : pronoun_positions) {
    if (p < 0 || p >= out.n_lang)
      throw DataError("pos_attention_summary: pronoun outside language rows");
    std::vector<double> row = aggregate_row(out, p, spec);
    double lang_mass = 0.0, noun_mass = 0.0;
    for (int q = 0; q < out.n_lang; ++q) {
      if (q == p || seq.special[static_cast<std::size_t>(q)]) continue;
      lang_mass += row[static_cast<std::size_t>(q)];
      if (is_noun_tag(seq.pos_tags[static_cast<std::size_t>(q)]))
        noun_mass += row[static_cast<std::size_t>(q)];
    }
    if (lang_mass <= 0.0) throw DataError("pos_attention_summary: zero language mass");
    total += noun_mass / lang_mass;
  }
  return total / static_cast<double>(pronoun_positions.size());
}

PEAnalysis analyze_sentence_pe(const PEConfig& cfg) {
  cfg.validate();
  PEAnalysis a;
  Tensor table = sentence_pe_table(cfg);

  auto raw_dot = [&](int p1, int p2) {
    double s = 0.0;
    for (int c = 0; c < cfg.d; ++c) s += table.at(p1, c) * table.at(p2, c);
    return s;
  };

  // group raw dots by delta; verify same-delta pairs agree and match closed form
  std::vector<double> first_by_delta(static_cast<std::size_t>(cfg.M), 0.0);
  std::vector<bool> seen(static_cast<std::size_t>(cfg.M), false);
  a.max_pair_deviation = 0.0;
  a.max_closed_form_error = 0.0;
  for (int p1 = 0; p1 < cfg.M; ++p1) {
    for (int p2 = 0; p2 < cfg.M; ++p2) {
      int delta = std::abs(p1 - p2);
      double dot = raw_dot(p1, p2);
      if (!seen[static_cast<std::size_t>(delta)]) {
        seen[static_cast<std::size_t>(delta)] = true;
        first_by_delta[static_cast<std::size_t>(delta)] = dot;
      } else {
        a.max_pair_deviation = std::max(
            a.max_pair_deviation, std::abs(dot - first_by_delta[static_cast<std::size_t>(delta)]));
      }
      a.max_closed_form_error =
          std::max(a.max_closed_form_error, std::abs(dot - pe_dot_closed_form(cfg, delta)));
    }
  }
  a.delta_only = a.max_pair_deviation < 1e-12;

  // the closed-form curve extends one step past the largest realizable pair
  // distance (delta = M), still inside the monotone region w_i * M < 1
  for (int delta = 0; delta <= cfg.M; ++delta)
    a.dot_by_delta.push_back(pe_dot_closed_form(cfg, delta));
  a.monotone_decreasing = true;
  for (std::size_t i = 1; i < a.dot_by_delta.size(); ++i)
    if (!(a.dot_by_delta[i] < a.dot_by_delta[i - 1])) a.monotone_decreasing = false;

  a.max_frequency_times_M = pe_frequency(cfg, 0) * cfg.M;
  return a;
}

void write_matrix_csv(const Tensor& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write csv: " + path);
  out.precision(17);
  for (std::int64_t r = 0; r < m.rows(); ++r) {
    for (std::int64_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m.at(r, c);
    }
    out << '\n';
  }
}

void write_matrix_pgm(const Tensor& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write pgm: " + path);
  double mx = 0.0;
  for (std::int64_t i = 0; i < m.size(); ++i) mx = std::max(mx, m[i]);
  if (mx <= 0.0) mx = 1.0;
  out << "P2\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  for (std::int64_t r = 0; r < m.rows(); ++r) {
    for (std::int64_t c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << static_cast<int>(std::lround(255.0 * std::max(0.0, m.at(r, c)) / mx));
    }
    out << '\n';
  }
}

}  // namespace vdlg
