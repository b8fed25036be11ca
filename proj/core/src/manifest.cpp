#include "rsagame/manifest.hpp"

#include "rsagame/error.hpp"
#include "rsagame/hash.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <istream>

#ifndef RSAGAME_VERSION
#define RSAGAME_VERSION "0.0.0"
#endif

namespace rsagame {

std::string tool_version() { return "rsagame " RSAGAME_VERSION; }

std::vector<std::string> RunManifest::missing_fields() const {
  std::vector<std::string> missing;
  const auto need = [&](const std::string& value, const char* name) {
    if (value.empty()) missing.emplace_back(name);
  };
  need(tool_version, "tool_version");
  need(stage, "stage");
  need(corpus_hash, "corpus_hash");
  need(lexicon_hash, "lexicon_hash");
  need(model_id, "model_id");
  need(endpoint, "endpoint");
  need(cost_mode, "cost_mode");
  need(llm_score_mode, "llm_score_mode");
  need(started_at, "started_at");
  if (template_hashes.empty()) missing.emplace_back("template_hashes");
  if (alphas.empty()) missing.emplace_back("alphas");
  return missing;
}

namespace {

nlohmann::ordered_json hashed_fields(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool_version"] = m.tool_version;
  j["stage"] = m.stage;
  j["corpus_hash"] = m.corpus_hash;
  j["lexicon_hash"] = m.lexicon_hash;
  j["template_hashes"] = m.template_hashes;
  j["model_id"] = m.model_id;
  j["endpoint"] = m.endpoint;
  j["k"] = m.k;
  j["alphas"] = m.alphas;
  j["cost_mode"] = m.cost_mode;
  j["llm_score_mode"] = m.llm_score_mode;
  j["settings"] = m.settings;
  j["upstream"] = m.upstream;
  return j;
}

}  // namespace

nlohmann::ordered_json RunManifest::to_json() const {
  auto j = hashed_fields(*this);
  j["manifest_sha256"] = content_hash();
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.stage = j.at("stage").get<std::string>();
  m.corpus_hash = j.at("corpus_hash").get<std::string>();
  m.lexicon_hash = j.at("lexicon_hash").get<std::string>();
  m.template_hashes = j.at("template_hashes").get<std::map<std::string, std::string>>();
  m.model_id = j.at("model_id").get<std::string>();
  m.endpoint = j.at("endpoint").get<std::string>();
  m.k = j.at("k").get<std::size_t>();
  m.alphas = j.at("alphas").get<std::vector<double>>();
  m.cost_mode = j.at("cost_mode").get<std::string>();
  m.llm_score_mode = j.at("llm_score_mode").get<std::string>();
  m.settings = j.at("settings").get<std::map<std::string, std::string>>();
  m.upstream = j.at("upstream").get<std::vector<std::string>>();
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  return m;
}

std::string RunManifest::content_hash() const { return sha256_hex(hashed_fields(*this).dump()); }

std::string utc_timestamp() {
  std::chrono::system_clock::time_point now = std::chrono::system_clock::now();
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    now = std::chrono::system_clock::time_point(std::chrono::seconds(std::atoll(epoch)));
  }
  const auto seconds = std::chrono::time_point_cast<std::chrono::seconds>(now);
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(seconds)));
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  if (const auto missing = manifest.missing_fields(); !missing.empty()) {
    std::string names;
    for (const auto& name : missing) names += (names.empty() ? "" : ", ") + name;
    throw Error(fmt::format("run manifest incomplete, missing: {}", names));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write manifest '{}'", path.string()));
  out << manifest.to_json().dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read manifest '{}'", path.string()));
  return RunManifest::from_json(nlohmann::json::parse(in));
}

nlohmann::ordered_json file_header(std::string_view format, std::string_view manifest_hash) {
  nlohmann::ordered_json meta;
  meta["format"] = format;
  meta["manifest_sha256"] = manifest_hash;
  nlohmann::ordered_json header;
  header["_meta"] = std::move(meta);
  return header;
}

JsonLines read_json_lines(std::istream& in, std::string_view expected_format) {
  JsonLines out;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IngestionError(fmt::format("line {}: {}", line_no, e.what()));
    }
    if (!have_header) {
      if (!j.contains("_meta"))
        throw IngestionError(fmt::format("line {}: missing '_meta' header", line_no));
      out.format = j["_meta"].value("format", "");
      out.manifest_hash = j["_meta"].value("manifest_sha256", "");
      if (out.format != expected_format)
        throw IngestionError(
            fmt::format("expected format '{}', found '{}'", expected_format, out.format));
      have_header = true;
      continue;
    }
    out.records.push_back(std::move(j));
  }
  if (!have_header) throw IngestionError("empty file: missing '_meta' header");
  return out;
}

}  // namespace rsagame
