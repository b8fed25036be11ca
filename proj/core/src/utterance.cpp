#include "rsagame/utterance.hpp"

#include "rsagame/error.hpp"
#include "rsagame/manifest.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

namespace rsagame {

const std::optional<std::string>* FeatureBundle::slot(std::string_view attribute) const {
  for (const auto& [name, value] : slots)
    if (name == attribute) return &value;
  return nullptr;
}

std::size_t FeatureBundle::present_count() const {
  return static_cast<std::size_t>(
      std::count_if(slots.begin(), slots.end(), [](const auto& s) { return s.second.has_value(); }));
}

bool subsumed_by(const FeatureBundle& bundle, const ObjectDescription& object) {
  for (const auto& [attribute, value] : bundle.slots) {
    if (!value) continue;
    const std::string* feature = object.feature(attribute);
    if (!feature || *feature != *value) return false;
  }
  return true;
}

FeatureBundle bundle_of(const AttributeSchema& schema, const ObjectDescription& object) {
  FeatureBundle bundle;
  for (const auto& attribute : schema.attributes()) {
    const std::string* feature = object.feature(attribute.name);
    if (!feature) throw SchemaError(fmt::format("object has no '{}' attribute", attribute.name));
    bundle.slots.emplace_back(attribute.name, *feature);
  }
  return bundle;
}

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::logic ? "logic" : "topk";
}

Provenance provenance_from_string(std::string_view text) {
  if (text == "logic") return Provenance::logic;
  if (text == "topk") return Provenance::topk;
  throw Error(fmt::format("unknown provenance '{}'", text));
}

std::size_t UtteranceSpace::count(Provenance provenance) const {
  return static_cast<std::size_t>(std::count_if(
      utterances.begin(), utterances.end(),
      [&](const Utterance& u) { return u.provenance() == provenance; }));
}

std::vector<FeatureBundle> enumerate_bundles(const AttributeSchema& schema) {
  std::vector<FeatureBundle> out;
  std::size_t total = 1;
  for (const auto& attribute : schema.attributes()) total *= attribute.features.size() + 1;
  out.reserve(total);
  // digit == features.size() encodes the absent slot.
  std::vector<std::size_t> digits(schema.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    FeatureBundle bundle;
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const auto& attribute = schema[i];
      if (digits[i] < attribute.features.size()) {
        bundle.slots.emplace_back(attribute.name, attribute.features[digits[i]]);
      } else {
        bundle.slots.emplace_back(attribute.name, std::nullopt);
      }
    }
    out.push_back(std::move(bundle));
    for (std::size_t pos = schema.size(); pos-- > 0;) {
      if (++digits[pos] <= schema[pos].features.size()) break;
      digits[pos] = 0;
    }
  }
  return out;
}

std::string realize_bundle(const FeatureBundle& bundle) {
  const auto get = [&](std::string_view attribute) -> std::optional<std::string> {
    const auto* slot = bundle.slot(attribute);
    return slot ? *slot : std::nullopt;
  };
  const auto size = get(kSize);
  const auto colour = get(kColour);
  const auto type = get(kType);
  const auto orientation = get(kOrientation);

  std::string text = "a";
  if (size && colour) {
    text += fmt::format(" {}, {}", *size, *colour);
  } else if (size) {
    text += " " + *size;
  } else if (colour) {
    text += " " + *colour;
  }
  text += " " + (type ? *type : std::string("thing"));
  if (orientation) text += " facing " + *orientation;
  return text;
}

UtteranceSpace logical_utterances(const ReferenceGame& game) {
  UtteranceSpace space{game.game_id, {}};
  std::unordered_set<std::string> seen;
  for (auto& bundle : enumerate_bundles(game.schema)) {
    const bool described = std::any_of(game.objects.begin(), game.objects.end(),
                                       [&](const auto& o) { return subsumed_by(bundle, o); });
    if (!described) continue;
    std::string text = realize_bundle(bundle);
    if (!seen.insert(text).second) continue;
    Utterance u{text, LogicOrigin{std::move(bundle)}, 1.0};
    u.cost = utterance_cost(u);
    space.utterances.push_back(std::move(u));
  }
  return space;
}

std::string normalize_utterance(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  while (!out.empty()) {
    const auto c = static_cast<unsigned char>(out.back());
    if (std::ispunct(c) || std::isspace(c)) {
      out.pop_back();
    } else {
      break;
    }
  }
  return out;
}

std::size_t word_count(std::string_view text) {
  const std::string normalized = normalize_utterance(text);
  if (normalized.empty()) return 1;
  return static_cast<std::size_t>(std::count(normalized.begin(), normalized.end(), ' ')) + 1;
}

UtteranceSpace ingest_topk(const ReferenceGame& game, std::vector<Generation> generations) {
  UtteranceSpace space{game.game_id, {}};
  if (generations.empty()) {
    spdlog::warn("game '{}': no top-k generations to ingest", game.game_id);
    return space;
  }
  std::stable_sort(generations.begin(), generations.end(),
                   [](const Generation& a, const Generation& b) { return a.rank < b.rank; });
  std::unordered_set<std::string> seen;
  for (auto& generation : generations) {
    std::string text = normalize_utterance(generation.text);
    if (text.empty() || !seen.insert(text).second) continue;
    Utterance u{std::move(text),
                TopKOrigin{generation.rank, std::move(generation.text), generation.score}, 1.0};
    u.cost = utterance_cost(u);
    space.utterances.push_back(std::move(u));
  }
  return space;
}

std::pair<UtteranceSpace, std::size_t> merge_spaces(const UtteranceSpace& logic,
                                                    const UtteranceSpace& topk) {
  if (!logic.game_id.empty() && !topk.game_id.empty() && logic.game_id != topk.game_id)
    throw Error(fmt::format("cannot merge spaces of games '{}' and '{}'", logic.game_id, topk.game_id));
  UtteranceSpace merged{logic.game_id.empty() ? topk.game_id : logic.game_id, logic.utterances};
  std::unordered_set<std::string> seen;
  for (const auto& u : merged.utterances) seen.insert(u.text);
  std::size_t dropped = 0;
  for (const auto& u : topk.utterances) {
    if (seen.insert(u.text).second) {
      merged.utterances.push_back(u);
    } else {
      ++dropped;
    }
  }
  return {std::move(merged), dropped};
}

std::string_view to_string(CostMode mode) {
  switch (mode) {
    case CostMode::word_count: return "word-count";
    case CostMode::token_count: return "token-count";
    case CostMode::feature_count: return "feature-count";
  }
  return "word-count";
}

CostMode cost_mode_from_string(std::string_view text) {
  if (text == "word-count") return CostMode::word_count;
  if (text == "token-count") return CostMode::token_count;
  if (text == "feature-count") return CostMode::feature_count;
  throw Error(fmt::format("unknown cost mode '{}'", text));
}

double utterance_cost(const Utterance& utterance, CostMode mode,
                      std::optional<std::size_t> token_count) {
  switch (mode) {
    case CostMode::word_count:
      return static_cast<double>(word_count(utterance.text));
    case CostMode::token_count:
      if (!token_count) throw Error("token-count cost needs the model's token count");
      return static_cast<double>(std::max<std::size_t>(*token_count, 1));
    case CostMode::feature_count:
      if (const auto* logic = std::get_if<LogicOrigin>(&utterance.origin))
        return static_cast<double>(std::max<std::size_t>(logic->bundle.present_count(), 1));
      return static_cast<double>(std::max<std::size_t>(word_count(utterance.text), 2) - 1);
  }
  return 1.0;
}

nlohmann::ordered_json utterance_to_json(const std::string& game_id, const Utterance& utterance) {
  nlohmann::ordered_json j;
  j["game_id"] = game_id;
  j["text"] = utterance.text;
  nlohmann::ordered_json provenance;
  provenance["kind"] = to_string(utterance.provenance());
  if (const auto* logic = std::get_if<LogicOrigin>(&utterance.origin)) {
    nlohmann::ordered_json bundle = nlohmann::ordered_json::array();
    for (const auto& [attribute, value] : logic->bundle.slots) {
      bundle.push_back({attribute, value ? nlohmann::ordered_json(*value) : nlohmann::ordered_json()});
    }
    provenance["bundle"] = std::move(bundle);
  } else {
    const auto& topk = std::get<TopKOrigin>(utterance.origin);
    provenance["rank"] = topk.rank;
    provenance["raw"] = topk.raw_text;
    provenance["logprob"] = topk.logprob;
  }
  j["provenance"] = std::move(provenance);
  j["cost"] = utterance.cost;
  return j;
}

Utterance utterance_from_json(const nlohmann::json& j) {
  Utterance u;
  u.text = j.at("text").get<std::string>();
  u.cost = j.at("cost").get<double>();
  const auto& provenance = j.at("provenance");
  if (provenance_from_string(provenance.at("kind").get<std::string>()) == Provenance::logic) {
    LogicOrigin logic;
    for (const auto& slot : provenance.at("bundle")) {
      std::optional<std::string> value;
      if (!slot.at(1).is_null()) value = slot.at(1).get<std::string>();
      logic.bundle.slots.emplace_back(slot.at(0).get<std::string>(), std::move(value));
    }
    u.origin = std::move(logic);
  } else {
    u.origin = TopKOrigin{provenance.at("rank").get<int>(), provenance.at("raw").get<std::string>(),
                          provenance.at("logprob").get<double>()};
  }
  if (u.text.empty()) throw IngestionError("utterance with empty text");
  if (!(u.cost >= 1.0)) throw IngestionError(fmt::format("utterance '{}' has cost < 1", u.text));
  return u;
}

void write_spaces(std::ostream& out, const std::vector<UtteranceSpace>& spaces,
                  const std::string& manifest_hash) {
  out << file_header(kUtteranceFormat, manifest_hash).dump() << '\n';
  for (const auto& space : spaces)
    for (const auto& u : space.utterances) out << utterance_to_json(space.game_id, u).dump() << '\n';
}

std::vector<UtteranceSpace> read_spaces(std::istream& in) {
  const auto lines = read_json_lines(in, kUtteranceFormat);
  std::vector<UtteranceSpace> spaces;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const auto& record : lines.records) {
    const auto game_id = record.at("game_id").get<std::string>();
    auto [it, inserted] = index.try_emplace(game_id, spaces.size());
    if (inserted) spaces.push_back({game_id, {}});
    auto& space = spaces[it->second];
    space.utterances.push_back(utterance_from_json(record));
    for (std::size_t i = 0; i + 1 < space.utterances.size(); ++i) {
      if (space.utterances[i].text == space.utterances.back().text)
        throw IngestionError(fmt::format("game '{}': duplicate utterance '{}'", game_id,
                                         space.utterances.back().text));
    }
  }
  return spaces;
}

std::vector<UtteranceSpace> read_spaces_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open utterance file '{}'", path.string()));
  return read_spaces(in);
}

}  // namespace rsagame
