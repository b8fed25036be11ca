#pragma once

#include "rsagame/llm_client.hpp"
#include "rsagame/utterance.hpp"
#include "rsagame/world.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rsagame {

struct LexiconEntry {
  std::string word;
  std::string attribute;
  std::string feature;

  auto operator<=>(const LexiconEntry&) const = default;
};

/// The word -> feature relation D used by the rule-based meaning function.
/// A word may describe several features.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::set<LexiconEntry> entries) : entries_(std::move(entries)) {}

  /// Every feature word of the schema plus the shipped synonyms
  /// (forwards->front, tiny->small, table->desk, couch->sofa, ...).
  static Lexicon default_for(const AttributeSchema& schema);

  /// Tab-separated `word attribute feature`, one per line; `#` starts a comment.
  static Lexicon parse(std::istream& in);
  static Lexicon load(const std::filesystem::path& path);
  std::string to_text() const;
  std::string hash() const;

  /// Throws SchemaError if an entry names an unknown attribute/feature or a
  /// schema feature word is not covered.
  void validate(const AttributeSchema& schema) const;

  const std::set<LexiconEntry>& entries() const noexcept { return entries_; }
  std::vector<const LexiconEntry*> lookup(std::string_view word) const;

 private:
  std::set<LexiconEntry> entries_;
};

/// Lowercase, punctuation to spaces, split on whitespace.
std::vector<std::string> meaning_tokens(std::string_view text);

/// 0 iff some word of `utterance` describes a feature the object does not
/// have; unknown words carry no evidence.
int rule_meaning(std::string_view utterance, const ObjectDescription& object, const Lexicon& lexicon);

enum class MfKind { rule, prompt };
std::string_view to_string(MfKind kind);
MfKind mf_kind_from_string(std::string_view text);

/// Rows are utterances, columns objects, values in [0, 1].
struct MeaningMatrix {
  std::string game_id;
  MfKind kind = MfKind::rule;
  std::string template_hash;  // lexicon hash for rule matrices
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t u, std::size_t o) const { return values.at(u * cols + o); }
  double& at(std::size_t u, std::size_t o) { return values.at(u * cols + o); }

  /// Throws DimensionError/Error if the shape or value range is wrong.
  void check() const;
};

MeaningMatrix rule_matrix(const ReferenceGame& game, const UtteranceSpace& space, const Lexicon& lexicon);

/// Few-shot Yes/No template for the prompt-based meaning function.
/// Placeholders: {examples}, {object}, {utterance}.
const PromptTemplate& default_mf_template();

struct Shot {
  std::string object;
  std::string utterance;
  bool answer;
};

/// Worked examples for n in {3, 6}; throws Error otherwise.
const std::vector<Shot>& default_shots(int n);

struct PromptMeaningConfig {
  PromptTemplate tmpl = default_mf_template();
  int shots = 3;
  std::size_t top_n = 20;

  std::string render(const ObjectDescription& object, std::string_view utterance) const;
  /// Hash over template text and shot count.
  std::string hash() const;
};

/// P(Yes) / (P(Yes) + P(No)) for the rendered n-shot prompt.
double prompt_meaning(std::string_view utterance, const ObjectDescription& object, LanguageModel& model,
                      const PromptMeaningConfig& config);

/// Fills a prompt matrix; per-cell failures become ScoringError.
MeaningMatrix prompt_matrix(const ReferenceGame& game, const UtteranceSpace& space, LanguageModel& model,
                            const PromptMeaningConfig& config, std::size_t workers = 1);

nlohmann::ordered_json matrix_to_json(const MeaningMatrix& m);
MeaningMatrix matrix_from_json(const nlohmann::json& j);

/// 1 iff score >= threshold.
int binarize(double score, double threshold);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct MFEvalReport {
  std::optional<double> accuracy;
  std::optional<double> precision;  // absent when nothing was predicted positive
  std::optional<double> recall;     // absent when there are no positives
  double threshold = 0.5;
  Confusion counts;
};

MFEvalReport evaluate_mf(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Tries every observed score plus 0 and 1; returns the accuracy-maximizing
/// threshold, ties broken toward the smaller threshold.
MFEvalReport sweep_threshold(const std::vector<double>& scores, const std::vector<int>& truth);

nlohmann::ordered_json to_json(const MFEvalReport& report);

struct LabelledPair {
  ObjectDescription object;
  std::string utterance;
  int label = 0;
};

/// Line-delimited `{"object": <description text or attribute map>,
/// "utterance": ..., "label": 0|1}`. Lines starting with `#` are skipped.
std::vector<LabelledPair> read_labels(std::istream& in, const AttributeSchema& schema);
std::vector<LabelledPair> read_labels_file(const std::filesystem::path& path,
                                           const AttributeSchema& schema);

}  // namespace rsagame
