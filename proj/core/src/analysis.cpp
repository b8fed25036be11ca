#include "rsagame/analysis.hpp"

#include "rsagame/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace rsagame {

std::string_view to_string(ProvenanceFilter filter) {
  switch (filter) {
    case ProvenanceFilter::logic: return "logic";
    case ProvenanceFilter::topk: return "topk";
    case ProvenanceFilter::all: return "all";
  }
  return "all";
}

std::string_view to_string(LlmScoreMode mode) {
  return mode == LlmScoreMode::normalized_prob ? "normalized-prob" : "raw-logprob";
}

ProvenanceFilter provenance_filter_from_string(std::string_view text) {
  if (text == "logic") return ProvenanceFilter::logic;
  if (text == "topk") return ProvenanceFilter::topk;
  if (text == "all") return ProvenanceFilter::all;
  throw Error(fmt::format("unknown provenance filter '{}'", text));
}

LlmScoreMode llm_score_mode_from_string(std::string_view text) {
  if (text == "normalized-prob") return LlmScoreMode::normalized_prob;
  if (text == "raw-logprob") return LlmScoreMode::raw_logprob;
  throw Error(fmt::format("unknown LLM score mode '{}'", text));
}

bool passes(const ScoreRecord& record, ProvenanceFilter filter) {
  switch (filter) {
    case ProvenanceFilter::logic: return record.provenance == Provenance::logic;
    case ProvenanceFilter::topk: return record.provenance == Provenance::topk;
    case ProvenanceFilter::all: return true;
  }
  return true;
}

double llm_score(const ScoreRecord& record, LlmScoreMode mode) {
  return mode == LlmScoreMode::normalized_prob ? record.llm_prob_norm : record.llm_logprob;
}

// ---------------------------------------------------------------- correlation

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw DimensionError(fmt::format("correlation of {} and {} values", xs.size(), ys.size()));
  if (xs.size() < 2) throw DimensionError("correlation needs at least 2 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  // sqrt(fl(v*v)) == v, so identical inputs give exactly 1.
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && xs[order[j]] == xs[order[i]]) ++j;
    // Positions i..j-1 hold ranks i+1..j.
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw DimensionError(fmt::format("correlation of {} and {} values", xs.size(), ys.size()));
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------- experiments

namespace {

double rsa_value(const ScoreRecord& record, MfKind mf, double alpha) {
  const auto it = record.rsa.find({mf, alpha});
  if (it == record.rsa.end())
    throw Error(fmt::format("record {}/{}/'{}' has no RSA score for mf={} alpha={}", record.game_id,
                            record.object_index, record.utterance, to_string(mf), alpha));
  return it->second;
}

}  // namespace

OverallCorrelation overall_correlation(const std::vector<ScoreRecord>& records, MfKind mf, double alpha,
                                       ProvenanceFilter filter, LlmScoreMode mode) {
  OverallCorrelation c{mf, alpha, filter, mode, 0, std::nullopt, std::nullopt, {}, {}, {}};
  for (const auto& record : records) {
    if (!passes(record, filter)) continue;
    c.rsa_scores.push_back(rsa_value(record, mf, alpha));
    c.llm_scores.push_back(llm_score(record, mode));
    c.provenance.push_back(record.provenance);
  }
  c.rows = c.rsa_scores.size();
  if (c.rows < 2)
    throw Error(fmt::format("overall correlation ({}, {}, alpha={}): only {} rows after filtering",
                            to_string(mf), to_string(filter), alpha, c.rows));
  c.pcc = pearson(c.llm_scores, c.rsa_scores);
  c.srcc = spearman(c.llm_scores, c.rsa_scores);
  return c;
}

GroupStats summarize(std::vector<double> values, std::size_t skipped, double bin_width) {
  GroupStats s;
  s.used = values.size();
  s.skipped = skipped;
  const auto bins = static_cast<std::size_t>(std::llround(2.0 / bin_width));
  s.histogram.assign(bins, 0);
  if (!values.empty()) {
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    s.mean = mean;
    s.sd = std::sqrt(ss / n);
    for (double v : values) {
      auto bin = static_cast<std::ptrdiff_t>(std::floor((v + 1.0) / bin_width));
      bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(bins) - 1);
      ++s.histogram[static_cast<std::size_t>(bin)];
    }
  }
  s.values = std::move(values);
  return s;
}

PerGroupCorrelation per_group_correlation(const std::vector<ScoreRecord>& records, MfKind mf,
                                          double alpha, ProvenanceFilter filter, LlmScoreMode mode,
                                          const GroupOptions& options) {
  if (!(options.bin_width > 0.0)) throw Error("histogram bin width must be positive");
  // Records arrive grouped by game; keep first-seen group order for determinism.
  std::vector<std::pair<std::string, std::size_t>> keys;
  std::map<std::pair<std::string, std::size_t>, std::size_t> index;
  std::vector<std::vector<double>> llm, rsa;
  for (const auto& record : records) {
    if (!passes(record, filter)) continue;
    if (options.target_only && !record.is_target) continue;
    const auto key = std::make_pair(record.game_id, record.object_index);
    auto [it, inserted] = index.try_emplace(key, keys.size());
    if (inserted) {
      keys.push_back(key);
      llm.emplace_back();
      rsa.emplace_back();
    }
    llm[it->second].push_back(llm_score(record, mode));
    rsa[it->second].push_back(rsa_value(record, mf, alpha));
  }

  PerGroupCorrelation out;
  out.mf = mf;
  out.alpha = alpha;
  out.filter = filter;
  out.mode = mode;
  out.target_only = options.target_only;
  out.total_groups = keys.size();
  out.bin_width = options.bin_width;
  std::vector<double> pccs, srccs;
  std::size_t pcc_skipped = 0, srcc_skipped = 0;
  for (std::size_t g = 0; g < keys.size(); ++g) {
    if (llm[g].size() < options.min_rows) {
      ++pcc_skipped;
      ++srcc_skipped;
      continue;
    }
    if (auto r = pearson(llm[g], rsa[g])) pccs.push_back(*r); else ++pcc_skipped;
    if (auto r = spearman(llm[g], rsa[g])) srccs.push_back(*r); else ++srcc_skipped;
  }
  if (pccs.empty() && srccs.empty())
    throw Error(fmt::format("per-group correlation ({}, {}, alpha={}): all {} groups skipped",
                            to_string(mf), to_string(filter), alpha, keys.size()));
  out.pcc = summarize(std::move(pccs), pcc_skipped, options.bin_width);
  out.srcc = summarize(std::move(srccs), srcc_skipped, options.bin_width);
  return out;
}

const OverallCorrelation* AlphaReport::find_overall(MfKind mf, ProvenanceFilter filter) const {
  for (const auto& c : overall)
    if (c.mf == mf && c.filter == filter) return &c;
  return nullptr;
}

const PerGroupCorrelation* AlphaReport::find_group(MfKind mf, ProvenanceFilter filter,
                                                   bool target_only) const {
  for (const auto& c : target_only ? per_group_target : per_group)
    if (c.mf == mf && c.filter == filter) return &c;
  return nullptr;
}

AlphaReport evaluate_alpha(const std::vector<ScoreRecord>& records, double alpha,
                           const std::vector<MfKind>& mfs, LlmScoreMode mode,
                           const GroupOptions& options) {
  AlphaReport report;
  report.alpha = alpha;
  report.mode = mode;
  for (MfKind mf : mfs) {
    for (ProvenanceFilter filter :
         {ProvenanceFilter::logic, ProvenanceFilter::topk, ProvenanceFilter::all}) {
      try {
        report.overall.push_back(overall_correlation(records, mf, alpha, filter, mode));
      } catch (const Error& e) {
        report.notes.emplace_back(e.what());
      }
      for (bool target_only : {false, true}) {
        GroupOptions o = options;
        o.target_only = target_only;
        try {
          auto c = per_group_correlation(records, mf, alpha, filter, mode, o);
          (target_only ? report.per_group_target : report.per_group).push_back(std::move(c));
        } catch (const Error& e) {
          report.notes.push_back(fmt::format("{}{}", target_only ? "[target-only] " : "", e.what()));
        }
      }
    }
  }
  return report;
}

std::vector<AlphaReport> alpha_sweep(const RecordsBuilder& build, const std::vector<double>& alphas,
                                     const std::vector<MfKind>& mfs, LlmScoreMode mode,
                                     const GroupOptions& options) {
  if (alphas.empty()) throw Error("alpha sweep needs at least one alpha");
  std::vector<double> seen;
  std::vector<AlphaReport> out;
  for (double alpha : alphas) {
    if (!(alpha > 0.0)) throw Error(fmt::format("alpha must be > 0 (got {})", alpha));
    if (std::find(seen.begin(), seen.end(), alpha) != seen.end()) continue;
    seen.push_back(alpha);
    out.push_back(evaluate_alpha(build(alpha), alpha, mfs, mode, options));
  }
  return out;
}

// ---------------------------------------------------------------- JSON

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

nlohmann::ordered_json stats_json(const GroupStats& s) {
  nlohmann::ordered_json j;
  j["used"] = s.used;
  j["skipped"] = s.skipped;
  j["mean"] = opt(s.mean);
  j["sd"] = opt(s.sd);
  j["histogram"] = s.histogram;
  return j;
}

}  // namespace

nlohmann::ordered_json to_json(const OverallCorrelation& c, bool with_points) {
  nlohmann::ordered_json j;
  j["mf_kind"] = to_string(c.mf);
  j["alpha"] = c.alpha;
  j["provenance"] = to_string(c.filter);
  j["llm_score_mode"] = to_string(c.mode);
  j["rows"] = c.rows;
  j["pcc"] = opt(c.pcc);
  j["srcc"] = opt(c.srcc);
  if (with_points) {
    j["rsa"] = c.rsa_scores;
    j["llm"] = c.llm_scores;
  }
  return j;
}

nlohmann::ordered_json to_json(const PerGroupCorrelation& c) {
  nlohmann::ordered_json j;
  j["mf_kind"] = to_string(c.mf);
  j["alpha"] = c.alpha;
  j["provenance"] = to_string(c.filter);
  j["llm_score_mode"] = to_string(c.mode);
  j["grouping"] = c.target_only ? "game-target" : "game-object";
  j["total_groups"] = c.total_groups;
  j["bin_width"] = c.bin_width;
  j["pcc"] = stats_json(c.pcc);
  j["srcc"] = stats_json(c.srcc);
  return j;
}

nlohmann::ordered_json to_json(const AlphaReport& r) {
  nlohmann::ordered_json j;
  j["alpha"] = r.alpha;
  j["llm_score_mode"] = to_string(r.mode);
  j["overall"] = nlohmann::ordered_json::array();
  for (const auto& c : r.overall) j["overall"].push_back(to_json(c));
  j["per_group"] = nlohmann::ordered_json::array();
  for (const auto& c : r.per_group) j["per_group"].push_back(to_json(c));
  j["per_group_target_only"] = nlohmann::ordered_json::array();
  for (const auto& c : r.per_group_target) j["per_group_target_only"].push_back(to_json(c));
  j["notes"] = r.notes;
  return j;
}

}  // namespace rsagame
