#include "rsagame/meaning.hpp"

#include "rsagame/error.hpp"
#include "rsagame/hash.hpp"
#include "rsagame/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace rsagame {

// ---------------------------------------------------------------- lexicon

Lexicon Lexicon::default_for(const AttributeSchema& schema) {
  std::set<LexiconEntry> entries;
  for (const auto& attribute : schema.attributes())
    for (const auto& feature : attribute.features) entries.insert({feature, attribute.name, feature});

  struct Synonym {
    const char* word;
    std::string_view attribute;
    const char* feature;
  };
  static const Synonym kSynonyms[] = {
      {"forwards", kOrientation, "front"}, {"forward", kOrientation, "front"},
      {"frontwards", kOrientation, "front"}, {"backwards", kOrientation, "back"},
      {"backward", kOrientation, "back"},  {"tiny", kSize, "small"},
      {"little", kSize, "small"},          {"big", kSize, "large"},
      {"huge", kSize, "large"},            {"table", kType, "desk"},
      {"couch", kType, "sofa"},            {"settee", kType, "sofa"},
      {"armchair", kType, "chair"},        {"gray", kColour, "grey"},
  };
  for (const auto& s : kSynonyms) {
    if (schema.has_feature(s.attribute, s.feature))
      entries.insert({s.word, std::string(s.attribute), s.feature});
  }
  return Lexicon(std::move(entries));
}

Lexicon Lexicon::parse(std::istream& in) {
  std::set<LexiconEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw SchemaError(fmt::format("lexicon line {}: expected word<TAB>attribute<TAB>feature", line_no));
    entries.insert({fields[0], fields[1], fields[2]});
  }
  return Lexicon(std::move(entries));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(fmt::format("cannot read lexicon '{}'", path.string()));
  try {
    return parse(in);
  } catch (const SchemaError& e) {
    throw SchemaError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string Lexicon::to_text() const {
  std::string out = "# word\tattribute\tfeature\n";
  for (const auto& e : entries_) out += fmt::format("{}\t{}\t{}\n", e.word, e.attribute, e.feature);
  return out;
}

std::string Lexicon::hash() const { return sha256_hex(to_text()); }

void Lexicon::validate(const AttributeSchema& schema) const {
  for (const auto& e : entries_) {
    if (!schema.has_feature(e.attribute, e.feature))
      throw SchemaError(fmt::format("lexicon maps '{}' to unknown feature {}={}", e.word, e.attribute,
                                    e.feature));
  }
  for (const auto& attribute : schema.attributes()) {
    for (const auto& feature : attribute.features) {
      if (!entries_.contains({feature, attribute.name, feature}))
        throw SchemaError(fmt::format("lexicon does not cover feature word '{}'", feature));
    }
  }
}

std::vector<const LexiconEntry*> Lexicon::lookup(std::string_view word) const {
  std::vector<const LexiconEntry*> out;
  for (auto it = entries_.lower_bound({std::string(word), "", ""});
       it != entries_.end() && it->word == word; ++it)
    out.push_back(&*it);
  return out;
}

// ---------------------------------------------------------------- rule MF

std::vector<std::string> meaning_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

int rule_meaning(std::string_view utterance, const ObjectDescription& object, const Lexicon& lexicon) {
  for (const auto& token : meaning_tokens(utterance)) {
    for (const LexiconEntry* entry : lexicon.lookup(token)) {
      const std::string* has = object.feature(entry->attribute);
      if (!has || *has != entry->feature) return 0;
    }
  }
  return 1;
}

std::string_view to_string(MfKind kind) { return kind == MfKind::rule ? "rule" : "prompt"; }

MfKind mf_kind_from_string(std::string_view text) {
  if (text == "rule") return MfKind::rule;
  if (text == "prompt") return MfKind::prompt;
  throw Error(fmt::format("unknown meaning function '{}'", text));
}

void MeaningMatrix::check() const {
  if (values.size() != rows * cols)
    throw DimensionError(fmt::format("meaning matrix '{}' has {} values for {}x{}", game_id,
                                     values.size(), rows, cols));
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(fmt::format("meaning matrix '{}' has value {} outside [0,1]", game_id, v));
    if (kind == MfKind::rule && v != 0.0 && v != 1.0)
      throw Error(fmt::format("rule matrix '{}' has non-binary value {}", game_id, v));
  }
}

MeaningMatrix rule_matrix(const ReferenceGame& game, const UtteranceSpace& space, const Lexicon& lexicon) {
  MeaningMatrix m{game.game_id, MfKind::rule, lexicon.hash(), space.utterances.size(),
                  game.objects.size(), {}};
  m.values.resize(m.rows * m.cols);
  for (std::size_t u = 0; u < m.rows; ++u)
    for (std::size_t o = 0; o < m.cols; ++o)
      m.at(u, o) = rule_meaning(space.utterances[u].text, game.objects[o], lexicon);
  return m;
}

// ---------------------------------------------------------------- prompt MF

const PromptTemplate& default_mf_template() {
  static const PromptTemplate tmpl(
      "mf-yes-no",
      "Decide whether the description is literally true of the object. Answer Yes or No.\n"
      "\n"
      "{examples}"
      "Object: {object}\n"
      "Description: {utterance}\n"
      "Answer:");
  return tmpl;
}

const std::vector<Shot>& default_shots(int n) {
  static const std::vector<Shot> kSix = {
      {"a large, grey chair facing front", "a grey chair", true},
      {"a small, blue fan facing left", "the red fan", false},
      {"a large, green sofa facing back", "a green thing facing back", true},
      {"a small, red desk facing right", "a large desk", false},
      {"a small, grey fan facing front", "the small fan facing forwards", true},
      {"a large, blue chair facing left", "a blue sofa", false},
  };
  static const std::vector<Shot> kThree(kSix.begin(), kSix.begin() + 3);
  if (n == 3) return kThree;
  if (n == 6) return kSix;
  throw Error(fmt::format("no {}-shot prompt; use 3 or 6", n));
}

std::string PromptMeaningConfig::render(const ObjectDescription& object,
                                        std::string_view utterance) const {
  std::string examples;
  for (const auto& shot : default_shots(shots))
    examples += fmt::format("Object: {}\nDescription: {}\nAnswer: {}\n\n", shot.object, shot.utterance,
                            shot.answer ? "Yes" : "No");
  return tmpl.render({{"examples", examples},
                      {"object", realize_description(object)},
                      {"utterance", std::string(utterance)}});
}

std::string PromptMeaningConfig::hash() const {
  return sha256_hex(fmt::format("{}\x1f{}-shot", tmpl.text(), shots));
}

double prompt_meaning(std::string_view utterance, const ObjectDescription& object, LanguageModel& model,
                      const PromptMeaningConfig& config) {
  const auto answer = yes_no_probability(model, config.render(object, utterance), config.top_n);
  const double mass = answer.yes + answer.no;
  if (!(mass > 0.0)) throw ProtocolError("Yes and No both have zero probability");
  return std::clamp(answer.yes / mass, 0.0, 1.0);
}

MeaningMatrix prompt_matrix(const ReferenceGame& game, const UtteranceSpace& space, LanguageModel& model,
                            const PromptMeaningConfig& config, std::size_t workers) {
  MeaningMatrix m{game.game_id, MfKind::prompt, config.hash(), space.utterances.size(),
                  game.objects.size(), {}};
  m.values.resize(m.rows * m.cols);
  parallel_for(m.rows * m.cols, workers, [&](std::size_t cell) {
    const std::size_t u = cell / m.cols;
    const std::size_t o = cell % m.cols;
    try {
      m.values[cell] = prompt_meaning(space.utterances[u].text, game.objects[o], model, config);
    } catch (const Error& e) {
      throw ScoringError(game.game_id, space.utterances[u].text, o, e.what());
    }
  });
  return m;
}

nlohmann::ordered_json matrix_to_json(const MeaningMatrix& m) {
  nlohmann::ordered_json j;
  j["game_id"] = m.game_id;
  j["mf_kind"] = to_string(m.kind);
  j["template_hash"] = m.template_hash;
  j["rows"] = m.rows;
  j["cols"] = m.cols;
  j["values"] = m.values;
  return j;
}

MeaningMatrix matrix_from_json(const nlohmann::json& j) {
  MeaningMatrix m;
  m.game_id = j.at("game_id").get<std::string>();
  m.kind = mf_kind_from_string(j.at("mf_kind").get<std::string>());
  m.template_hash = j.at("template_hash").get<std::string>();
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.values = j.at("values").get<std::vector<double>>();
  m.check();
  return m;
}

// ---------------------------------------------------------------- evaluation

int binarize(double score, double threshold) { return score >= threshold ? 1 : 0; }

MFEvalReport evaluate_mf(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    throw DimensionError(fmt::format("{} predictions for {} labels", predicted.size(), truth.size()));
  MFEvalReport report;
  auto& c = report.counts;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++c.tp;
    else if (p && !t) ++c.fp;
    else if (!p && !t) ++c.tn;
    else ++c.fn;
  }
  const auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  report.accuracy = ratio(c.tp + c.tn, c.total());
  report.precision = ratio(c.tp, c.tp + c.fp);
  report.recall = ratio(c.tp, c.tp + c.fn);
  return report;
}

MFEvalReport sweep_threshold(const std::vector<double>& scores, const std::vector<int>& truth) {
  if (scores.empty()) throw Error("threshold sweep needs at least one score");
  if (scores.size() != truth.size())
    throw DimensionError(fmt::format("{} scores for {} labels", scores.size(), truth.size()));
  std::vector<double> candidates = scores;
  candidates.push_back(0.0);
  candidates.push_back(1.0);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::optional<MFEvalReport> best;
  std::vector<int> predicted(scores.size());
  for (double t : candidates) {
    for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = binarize(scores[i], t);
    auto report = evaluate_mf(predicted, truth);
    report.threshold = t;
    if (!best || *report.accuracy > *best->accuracy) best = std::move(report);
  }
  return *best;
}

nlohmann::ordered_json to_json(const MFEvalReport& report) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
  };
  nlohmann::ordered_json j;
  j["accuracy"] = opt(report.accuracy);
  j["precision"] = opt(report.precision);
  j["recall"] = opt(report.recall);
  j["threshold"] = report.threshold;
  j["counts"] = {{"tp", report.counts.tp}, {"fp", report.counts.fp}, {"tn", report.counts.tn},
                 {"fn", report.counts.fn}};
  return j;
}

std::vector<LabelledPair> read_labels(std::istream& in, const AttributeSchema& schema) {
  std::vector<LabelledPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabelledPair pair;
      const auto& object = j.at("object");
      if (object.is_string()) {
        auto parsed = parse_description(schema, object.get<std::string>());
        if (!parsed) throw SchemaError(fmt::format("unknown object description '{}'", object.get<std::string>()));
        pair.object = std::move(*parsed);
      } else {
        for (const auto& [attribute, feature] : object.items())
          pair.object.assignment.emplace(attribute, feature.get<std::string>());
        check_object(schema, pair.object);
      }
      pair.utterance = j.at("utterance").get<std::string>();
      pair.label = j.at("label").get<int>();
      if (pair.label != 0 && pair.label != 1) throw SchemaError("label must be 0 or 1");
      out.push_back(std::move(pair));
    } catch (const std::exception& e) {
      throw IngestionError(fmt::format("label line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

std::vector<LabelledPair> read_labels_file(const std::filesystem::path& path,
                                           const AttributeSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open label file '{}'", path.string()));
  try {
    return read_labels(in, schema);
  } catch (const IngestionError& e) {
    throw IngestionError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace rsagame
