#include "rsagame/corpus.hpp"

#include "rsagame/error.hpp"
#include "rsagame/hash.hpp"
#include "rsagame/manifest.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace rsagame {

namespace pt = boost::property_tree;

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

void collect_entities(const pt::ptree& node, std::vector<const pt::ptree*>& out) {
  for (const auto& [name, child] : node) {
    if (name == "ENTITY") {
      out.push_back(&child);
    } else if (name != "<xmlattr>" && name != "<xmlcomment>") {
      collect_entities(child, out);
    }
  }
}

}  // namespace

void check_corpus(const Corpus& corpus) {
  if (corpus.sources.size() != corpus.games.size())
    throw IngestionError("corpus sources do not line up with games");
  std::set<std::string, std::less<>> ids;
  for (const auto& game : corpus.games) {
    if (!ids.insert(game.game_id).second)
      throw IngestionError(fmt::format("duplicate game id '{}'", game.game_id));
    const auto violations = validate_game(game);
    if (!violations.empty())
      throw IngestionError(
          fmt::format("game '{}' is invalid: {}", game.game_id, to_string(violations.front())));
  }
}

std::vector<ReferenceGame> parse_tuna_trial(std::string_view xml, const AttributeSchema& schema,
                                            std::string_view fallback_trial_id) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw IngestionError(fmt::format("malformed trial XML: {}", e.what()));
  }

  std::string trial_id(fallback_trial_id);
  if (const auto trial = tree.get_child_optional("TRIAL")) {
    if (auto id = trial->get_optional<std::string>("<xmlattr>.ID")) trial_id = trim(*id);
  }
  if (trial_id.empty()) throw IngestionError("trial has no ID and no fallback id was given");

  std::vector<const pt::ptree*> entities;
  collect_entities(tree, entities);
  if (entities.empty()) throw IngestionError(fmt::format("trial '{}' has no entities", trial_id));

  std::vector<ObjectDescription> objects;
  objects.reserve(entities.size());
  for (std::size_t e = 0; e < entities.size(); ++e) {
    const pt::ptree& entity = *entities[e];
    const std::string entity_id = entity.get("<xmlattr>.ID", fmt::format("#{}", e));
    ObjectDescription object;
    for (const auto& [name, child] : entity) {
      if (name != "ATTRIBUTE") continue;
      const std::string attribute = lowercase(trim(child.get("<xmlattr>.NAME", "")));
      if (!schema.index_of(attribute)) continue;
      const std::string value = lowercase(trim(child.get("<xmlattr>.VALUE", "")));
      if (!schema.has_feature(attribute, value))
        throw IngestionError(fmt::format("trial '{}', entity '{}': feature '{}' not in domain of '{}'",
                                         trial_id, entity_id, value, attribute));
      object.assignment.insert_or_assign(attribute, value);
    }
    for (const auto& attribute : schema.attributes()) {
      if (!object.feature(attribute.name))
        throw IngestionError(fmt::format("trial '{}', entity '{}': missing attribute '{}'",
                                         trial_id, entity_id, attribute.name));
    }
    objects.push_back(std::move(object));
  }

  std::vector<ReferenceGame> games;
  games.reserve(objects.size());
  for (std::size_t t = 0; t < objects.size(); ++t) {
    ReferenceGame game{fmt::format("{}#{}", trial_id, t), schema, objects, t};
    const auto violations = validate_game(game);
    if (!violations.empty())
      throw IngestionError(fmt::format("trial '{}' yields invalid game {}: {}", trial_id,
                                       game.game_id, to_string(violations.front())));
    games.push_back(std::move(game));
  }
  return games;
}

LoadResult load_corpus(const std::filesystem::path& dir, const LoadOptions& options) {
  namespace fs = std::filesystem;
  const AttributeSchema& schema = options.schema ? *options.schema : AttributeSchema::furniture();
  if (!fs::is_directory(dir))
    throw IngestionError(fmt::format("'{}' is not a directory", dir.string()));

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && lowercase(entry.path().extension().string()) == ".xml")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
    return a.lexically_relative(dir).generic_string() < b.lexically_relative(dir).generic_string();
  });

  LoadResult result;
  for (const auto& file : files) {
    const std::string relative = file.lexically_relative(dir).generic_string();
    try {
      std::ifstream in(file, std::ios::binary);
      if (!in) throw IngestionError("cannot open file");
      std::stringstream buffer;
      buffer << in.rdbuf();
      auto games = parse_tuna_trial(buffer.str(), schema, file.stem().string());
      for (auto& game : games) {
        const std::string trial_id = game.game_id.substr(0, game.game_id.rfind('#'));
        result.corpus.sources.push_back({relative, trial_id});
        result.corpus.games.push_back(std::move(game));
      }
      ++result.files;
    } catch (const Error& e) {
      std::string message = fmt::format("{}: {}", file.string(), e.what());
      if (!options.skip_bad) throw IngestionError(message);
      spdlog::warn("skipping {}", message);
      result.errors.push_back(std::move(message));
    }
  }
  check_corpus(result.corpus);

  std::size_t objects = 0;
  for (const auto& game : result.corpus.games) objects += game.objects.size();
  if (result.corpus.games.empty()) {
    spdlog::warn("no games loaded from '{}'", dir.string());
  } else {
    spdlog::info("loaded {} games ({} objects) from {} trial files", result.corpus.games.size(),
                 objects, result.files);
  }
  return result;
}

Corpus generate_synthetic(std::uint64_t seed, const AttributeSchema& schema,
                          std::size_t n_objects, std::size_t n_games) {
  const std::uint64_t capacity = schema.assignment_count();
  if (n_objects > capacity)
    throw CapacityError(fmt::format("{} distinct objects requested but the schema only has {}",
                                    n_objects, capacity));
  if (n_objects < 2) throw CapacityError("a game needs at least 2 objects");

  const auto all = enumerate_objects(schema);
  std::mt19937_64 rng(seed);
  Corpus corpus;
  for (std::size_t g = 0; g < n_games; ++g) {
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Partial Fisher-Yates: the first n_objects slots are a uniform sample.
    for (std::size_t i = 0; i < n_objects; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    ReferenceGame game;
    game.game_id = fmt::format("synthetic-{}-{}", seed, g);
    game.schema = schema;
    for (std::size_t i = 0; i < n_objects; ++i) game.objects.push_back(all[order[i]]);
    game.target_index = std::uniform_int_distribution<std::size_t>(0, n_objects - 1)(rng);
    corpus.sources.push_back({"synthetic", fmt::format("seed-{}", seed)});
    corpus.games.push_back(std::move(game));
  }
  return corpus;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.games = corpus.games.size();
  std::set<std::pair<std::string, std::string>> trials;
  for (std::size_t i = 0; i < corpus.games.size(); ++i) {
    const auto& game = corpus.games[i];
    stats.objects += game.objects.size();
    ++stats.games_per_object_count[std::to_string(game.objects.size())];
    if (i < corpus.sources.size()) trials.emplace(corpus.sources[i].file, corpus.sources[i].trial_id);
    for (const auto& [attribute, feature] : game.target().assignment)
      ++stats.feature_counts[attribute][feature];
  }
  stats.trials = trials.size();
  return stats;
}

nlohmann::ordered_json to_json(const CorpusStats& stats) {
  nlohmann::ordered_json j;
  j["games"] = stats.games;
  j["trials"] = stats.trials;
  j["objects"] = stats.objects;
  j["games_per_object_count"] = stats.games_per_object_count;
  j["target_feature_counts"] = stats.feature_counts;
  return j;
}

nlohmann::ordered_json schema_to_json(const AttributeSchema& schema) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& attribute : schema.attributes()) {
    nlohmann::ordered_json a;
    a["name"] = attribute.name;
    a["features"] = attribute.features;
    j.push_back(std::move(a));
  }
  return j;
}

AttributeSchema schema_from_json(const nlohmann::json& j) {
  std::vector<Attribute> attributes;
  for (const auto& a : j)
    attributes.push_back({a.at("name").get<std::string>(), a.at("features").get<std::vector<std::string>>()});
  return AttributeSchema(std::move(attributes));
}

nlohmann::ordered_json object_to_json(const AttributeSchema& schema, const ObjectDescription& object) {
  nlohmann::ordered_json o = nlohmann::ordered_json::object();
  for (const auto& attribute : schema.attributes()) {
    const std::string* feature = object.feature(attribute.name);
    o[attribute.name] = feature ? *feature : std::string();
  }
  return o;
}

nlohmann::ordered_json game_to_json(const ReferenceGame& game, const GameSource& source) {
  nlohmann::ordered_json j;
  j["game_id"] = game.game_id;
  j["schema"] = schema_to_json(game.schema);
  nlohmann::ordered_json objects = nlohmann::ordered_json::array();
  for (const auto& object : game.objects) objects.push_back(object_to_json(game.schema, object));
  j["objects"] = std::move(objects);
  j["target_index"] = game.target_index;
  j["source"] = {{"file", source.file}, {"trial_id", source.trial_id}};
  return j;
}

ReferenceGame game_from_json(const nlohmann::json& j, GameSource* source) {
  ReferenceGame game;
  game.game_id = j.at("game_id").get<std::string>();
  game.schema = schema_from_json(j.at("schema"));
  for (const auto& o : j.at("objects")) {
    ObjectDescription object;
    for (const auto& [attribute, feature] : o.items())
      object.assignment.emplace(attribute, feature.get<std::string>());
    game.objects.push_back(std::move(object));
  }
  game.target_index = j.at("target_index").get<std::size_t>();
  if (source && j.contains("source")) {
    source->file = j["source"].value("file", "");
    source->trial_id = j["source"].value("trial_id", "");
  }
  return game;
}

void write_corpus(std::ostream& out, const Corpus& corpus, const std::string& manifest_hash) {
  out << file_header(kCorpusFormat, manifest_hash).dump() << '\n';
  for (std::size_t i = 0; i < corpus.games.size(); ++i)
    out << game_to_json(corpus.games[i], corpus.sources.at(i)).dump() << '\n';
}

Corpus read_corpus(std::istream& in) {
  const auto lines = read_json_lines(in, kCorpusFormat);
  Corpus corpus;
  for (const auto& record : lines.records) {
    GameSource source;
    corpus.games.push_back(game_from_json(record, &source));
    corpus.sources.push_back(std::move(source));
  }
  check_corpus(corpus);
  return corpus;
}

Corpus read_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open corpus file '{}'", path.string()));
  try {
    return read_corpus(in);
  } catch (const IngestionError& e) {
    throw IngestionError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string corpus_hash(const Corpus& corpus) {
  std::ostringstream out;
  for (std::size_t i = 0; i < corpus.games.size(); ++i)
    out << game_to_json(corpus.games[i], corpus.sources.at(i)).dump() << '\n';
  return sha256_hex(out.str());
}

}  // namespace rsagame
