#pragma once

#include "rsagame/world.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace rsagame {

/// Partial assignment: one slot per schema attribute, std::nullopt = absent.
struct FeatureBundle {
  std::vector<std::pair<std::string, std::optional<std::string>>> slots;

  const std::optional<std::string>* slot(std::string_view attribute) const;
  std::size_t present_count() const;

  bool operator==(const FeatureBundle&) const = default;
};

/// Every present feature of `bundle` matches `object`.
bool subsumed_by(const FeatureBundle& bundle, const ObjectDescription& object);

/// The full bundle of an object (no absent slots).
FeatureBundle bundle_of(const AttributeSchema& schema, const ObjectDescription& object);

struct LogicOrigin {
  FeatureBundle bundle;
  bool operator==(const LogicOrigin&) const = default;
};

struct TopKOrigin {
  int rank = 0;           // 1 = best
  std::string raw_text;   // generation before normalization
  double logprob = 0.0;   // generation score reported with the candidate
  bool operator==(const TopKOrigin&) const = default;
};

enum class Provenance { logic, topk };

std::string_view to_string(Provenance provenance);
Provenance provenance_from_string(std::string_view text);

struct Utterance {
  std::string text;
  std::variant<LogicOrigin, TopKOrigin> origin;
  double cost = 1.0;

  Provenance provenance() const {
    return std::holds_alternative<LogicOrigin>(origin) ? Provenance::logic : Provenance::topk;
  }
  bool operator==(const Utterance&) const = default;
};

struct UtteranceSpace {
  std::string game_id;
  std::vector<Utterance> utterances;

  std::size_t count(Provenance provenance) const;
  bool operator==(const UtteranceSpace&) const = default;
};

/// Cartesian product of (F_A ∪ {absent}) over attributes, absent last in each
/// slot, first attribute varying slowest.
std::vector<FeatureBundle> enumerate_bundles(const AttributeSchema& schema);

/// Noun-phrase realization with omissions:
/// absent type -> "thing", absent size/colour -> dropped (comma only when both
/// present), absent orientation -> no "facing" clause.
std::string realize_bundle(const FeatureBundle& bundle);

/// Realized bundles that at least one object of the game satisfies, in
/// enumeration order. Depends only on the object set.
UtteranceSpace logical_utterances(const ReferenceGame& game);

/// Trim, collapse internal whitespace, strip trailing punctuation, lowercase.
std::string normalize_utterance(std::string_view text);

/// Whitespace-separated word count of the normalized text (at least 1).
std::size_t word_count(std::string_view text);

struct Generation {
  std::string text;
  int rank = 0;
  double score = 0.0;
};

/// Normalizes, drops empties, and deduplicates keeping the best rank.
/// Output is ordered by rank.
UtteranceSpace ingest_topk(const ReferenceGame& game, std::vector<Generation> generations);

/// Logic utterances first, then top-k ones whose text is not already present.
/// Returns the merged space and the number of dropped duplicates.
std::pair<UtteranceSpace, std::size_t> merge_spaces(const UtteranceSpace& logic,
                                                    const UtteranceSpace& topk);

enum class CostMode { word_count, token_count, feature_count };

std::string_view to_string(CostMode mode);
CostMode cost_mode_from_string(std::string_view text);

/// |u| under `mode`.
///  - word_count: words of the normalized surface string.
///  - token_count: `token_count` must be given (from the model tokenizer).
///  - feature_count: present features of a logic bundle; for top-k, the words
///    after the leading determiner. Both floored at 1.
double utterance_cost(const Utterance& utterance, CostMode mode = CostMode::word_count,
                      std::optional<std::size_t> token_count = std::nullopt);

nlohmann::ordered_json utterance_to_json(const std::string& game_id, const Utterance& utterance);
Utterance utterance_from_json(const nlohmann::json& j);

/// One line per utterance: {game_id, text, provenance, cost}.
void write_spaces(std::ostream& out, const std::vector<UtteranceSpace>& spaces,
                  const std::string& manifest_hash);
/// Spaces in first-seen game order.
std::vector<UtteranceSpace> read_spaces(std::istream& in);
std::vector<UtteranceSpace> read_spaces_file(const std::filesystem::path& path);

}  // namespace rsagame
