#pragma once

#include "rsagame/meaning.hpp"
#include "rsagame/utterance.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rsagame {

/// α values of the reference sweep.
inline constexpr std::array<double, 6> kSweepAlphas = {0.2, 0.6, 1.0, 1.4, 1.8, 3.0};

struct RsaKey {
  MfKind mf = MfKind::rule;
  double alpha = 1.0;
  auto operator<=>(const RsaKey&) const = default;
};

/// One (game, object, utterance) row with the LLM score and the RSA speaker
/// probability for every (meaning function, α) that was computed.
struct ScoreRecord {
  std::string game_id;
  std::size_t object_index = 0;
  bool is_target = false;
  std::string utterance;
  Provenance provenance = Provenance::logic;
  double cost = 1.0;
  double llm_logprob = 0.0;
  double llm_prob_norm = 0.0;  // softmax of llm_logprob within (game, object)
  std::map<RsaKey, double> rsa;
};

enum class ProvenanceFilter { logic, topk, all };
enum class LlmScoreMode { normalized_prob, raw_logprob };

std::string_view to_string(ProvenanceFilter filter);
std::string_view to_string(LlmScoreMode mode);
ProvenanceFilter provenance_filter_from_string(std::string_view text);
LlmScoreMode llm_score_mode_from_string(std::string_view text);

bool passes(const ScoreRecord& record, ProvenanceFilter filter);
double llm_score(const ScoreRecord& record, LlmScoreMode mode);

/// Sample Pearson r clamped to [-1, 1]; nullopt when either input is constant.
/// Throws DimensionError on length mismatch or fewer than 2 points.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

/// 1-based ranks, ties get the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson over average ranks.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

struct OverallCorrelation {
  MfKind mf = MfKind::rule;
  double alpha = 1.0;
  ProvenanceFilter filter = ProvenanceFilter::all;
  LlmScoreMode mode = LlmScoreMode::normalized_prob;
  std::size_t rows = 0;
  std::optional<double> pcc;
  std::optional<double> srcc;
  // Scatter: x = RSA speaker probability, y = LLM score.
  std::vector<double> rsa_scores;
  std::vector<double> llm_scores;
  std::vector<Provenance> provenance;
};

/// One correlation over every filtered row.
/// Throws Error when fewer than 2 rows survive the filter.
OverallCorrelation overall_correlation(const std::vector<ScoreRecord>& records, MfKind mf, double alpha,
                                       ProvenanceFilter filter, LlmScoreMode mode);

struct GroupStats {
  std::size_t used = 0;
  std::size_t skipped = 0;
  std::optional<double> mean;
  std::optional<double> sd;  // population standard deviation
  std::vector<double> values;
  std::vector<std::size_t> histogram;
};

struct PerGroupCorrelation {
  MfKind mf = MfKind::rule;
  double alpha = 1.0;
  ProvenanceFilter filter = ProvenanceFilter::all;
  LlmScoreMode mode = LlmScoreMode::normalized_prob;
  bool target_only = false;
  std::size_t total_groups = 0;
  double bin_width = 0.05;
  GroupStats pcc;
  GroupStats srcc;
};

struct GroupOptions {
  std::size_t min_rows = 3;
  double bin_width = 0.05;
  bool target_only = false;
};

/// Correlation within each (game, object) group. Groups with
/// fewer than min_rows rows or constant scores are skipped and counted.
/// Throws Error when every group is skipped for both metrics.
PerGroupCorrelation per_group_correlation(const std::vector<ScoreRecord>& records, MfKind mf,
                                          double alpha, ProvenanceFilter filter, LlmScoreMode mode,
                                          const GroupOptions& options = {});

/// Mean, population σ and fixed-width histogram over [-1, 1].
GroupStats summarize(std::vector<double> values, std::size_t skipped, double bin_width);

/// All evaluations at one α. Missing entries (too little data) are reported
/// in `notes` instead of failing the whole run.
struct AlphaReport {
  double alpha = 1.0;
  LlmScoreMode mode = LlmScoreMode::normalized_prob;
  std::vector<OverallCorrelation> overall;
  std::vector<PerGroupCorrelation> per_group;
  std::vector<PerGroupCorrelation> per_group_target;
  std::vector<std::string> notes;

  const OverallCorrelation* find_overall(MfKind mf, ProvenanceFilter filter) const;
  const PerGroupCorrelation* find_group(MfKind mf, ProvenanceFilter filter, bool target_only = false) const;
};

AlphaReport evaluate_alpha(const std::vector<ScoreRecord>& records, double alpha,
                           const std::vector<MfKind>& mfs, LlmScoreMode mode,
                           const GroupOptions& options = {});

using RecordsBuilder = std::function<std::vector<ScoreRecord>(double alpha)>;

/// Rebuilds records (and so speaker tables) for each α and evaluates them.
std::vector<AlphaReport> alpha_sweep(const RecordsBuilder& build, const std::vector<double>& alphas,
                                     const std::vector<MfKind>& mfs, LlmScoreMode mode,
                                     const GroupOptions& options = {});

nlohmann::ordered_json to_json(const OverallCorrelation& c, bool with_points = false);
nlohmann::ordered_json to_json(const PerGroupCorrelation& c);
nlohmann::ordered_json to_json(const AlphaReport& r);

// ---------------------------------------------------------------- emission

/// Columns: game_id object_index utterance provenance cost llm_logprob
/// llm_prob_norm mf_kind alpha rsa_prob. One row per (record, mf, α).
void write_records_tsv(std::ostream& out, const std::vector<ScoreRecord>& records,
                       const std::string& manifest_hash);

/// Rows (Logic, Top-k, All) × (Prompt, Rule); columns PCC mean/σ, SRCC mean/σ.
std::string summary_table(const AlphaReport& report, bool target_only = false);

/// alpha, mf, pcc_topk, pcc_logic, pcc_all.
std::string alpha_pcc_table(const std::vector<AlphaReport>& reports);

std::string scatter_svg(const OverallCorrelation& c, const std::string& manifest_hash);
std::string histogram_svg(const AlphaReport& report, MfKind mf, bool srcc, const std::string& manifest_hash);

struct EmittedFiles {
  std::vector<std::filesystem::path> files;
};

/// Writes records.tsv, summary.json, summary.tsv, alpha_pcc.tsv and
/// plots/*.svg under `out_dir`. Output is byte-stable for identical inputs.
EmittedFiles emit_report(const std::vector<AlphaReport>& reports, const std::vector<ScoreRecord>& records,
                         const std::filesystem::path& out_dir, const std::string& manifest_hash);

}  // namespace rsagame
