#pragma once

#include "rsagame/world.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace rsagame {

struct GameSource {
  std::string file;
  std::string trial_id;

  bool operator==(const GameSource&) const = default;
};

/// Games plus where each came from. sources[i] describes games[i].
struct Corpus {
  std::vector<ReferenceGame> games;
  std::vector<GameSource> sources;

  bool operator==(const Corpus&) const = default;
};

/// Throws IngestionError on duplicate game ids or invalid games.
void check_corpus(const Corpus& corpus);

/// Parses one TUNA trial document and emits one game per entity, with that
/// entity as target. Game ids are `<trial-id>#<entity-index>`. Only the
/// schema attributes are read; anything else on an entity is ignored.
std::vector<ReferenceGame> parse_tuna_trial(std::string_view xml,
                                            const AttributeSchema& schema = AttributeSchema::furniture(),
                                            std::string_view fallback_trial_id = {});

struct LoadOptions {
  bool skip_bad = false;
  const AttributeSchema* schema = nullptr;  // furniture when null
};

struct LoadResult {
  Corpus corpus;
  std::vector<std::string> errors;  // only populated with skip_bad
  std::size_t files = 0;
};

/// Loads every *.xml under `dir` (recursively), ordered by relative path,
/// then by entity index. Errors carry the offending file path.
LoadResult load_corpus(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Reproducible random games with distinct objects and a random target.
Corpus generate_synthetic(std::uint64_t seed, const AttributeSchema& schema,
                          std::size_t n_objects, std::size_t n_games);

struct CorpusStats {
  std::size_t games = 0;
  std::size_t trials = 0;
  std::size_t objects = 0;  // summed over games
  std::map<std::string, std::size_t> games_per_object_count;
  std::map<std::string, std::map<std::string, std::size_t>> feature_counts;  // targets only
};

CorpusStats corpus_stats(const Corpus& corpus);
nlohmann::ordered_json to_json(const CorpusStats& stats);

// Canonical persistence: a header line, then one compact JSON record per game
// with fields {game_id, schema, objects, target_index, source} in that order.
nlohmann::ordered_json game_to_json(const ReferenceGame& game, const GameSource& source);
ReferenceGame game_from_json(const nlohmann::json& j, GameSource* source = nullptr);
nlohmann::ordered_json schema_to_json(const AttributeSchema& schema);
AttributeSchema schema_from_json(const nlohmann::json& j);
nlohmann::ordered_json object_to_json(const AttributeSchema& schema, const ObjectDescription& object);

void write_corpus(std::ostream& out, const Corpus& corpus, const std::string& manifest_hash);
Corpus read_corpus(std::istream& in);
Corpus read_corpus_file(const std::filesystem::path& path);

/// Hash of the canonical serialization without header.
std::string corpus_hash(const Corpus& corpus);

}  // namespace rsagame
