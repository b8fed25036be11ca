#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rsagame {

inline constexpr std::string_view kCorpusFormat = "rsagame.corpus/1";
inline constexpr std::string_view kUtteranceFormat = "rsagame.utterances/1";
inline constexpr std::string_view kScoresFormat = "rsagame.scores/1";
inline constexpr std::string_view kMeaningFormat = "rsagame.meaning/1";

std::string tool_version();

/// Everything needed to say how an output file was produced.
///
/// The content hash covers every field except the timestamps, so two runs
/// with identical inputs and settings share a hash and byte-identical outputs.
struct RunManifest {
  std::string tool_version = rsagame::tool_version();
  std::string stage;
  std::string corpus_hash;
  std::string lexicon_hash;
  std::map<std::string, std::string> template_hashes;
  std::string model_id;
  std::string endpoint;  // "mock" offline
  std::size_t k = 0;
  std::vector<double> alphas;
  std::string cost_mode;
  std::string llm_score_mode;
  std::map<std::string, std::string> settings;  // every other effective flag
  std::vector<std::string> upstream;            // manifest hashes of input files
  std::string started_at;
  std::string finished_at;

  /// Names of required fields that are still empty.
  std::vector<std::string> missing_fields() const;
  bool complete() const { return missing_fields().empty(); }

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  std::string content_hash() const;
};

/// ISO-8601 UTC. Honors SOURCE_DATE_EPOCH so reproducible runs also get
/// identical manifest files.
std::string utc_timestamp();

/// Writes `<path>` as pretty JSON; throws Error if the manifest is incomplete.
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

/// First line of every line-delimited output file.
nlohmann::ordered_json file_header(std::string_view format, std::string_view manifest_hash);

struct JsonLines {
  std::string format;
  std::string manifest_hash;
  std::vector<nlohmann::json> records;
};

/// Reads a header line plus records. Throws IngestionError on a wrong format tag
/// or malformed line (with its line number).
JsonLines read_json_lines(std::istream& in, std::string_view expected_format);

}  // namespace rsagame
