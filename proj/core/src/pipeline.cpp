#include "rsagame/pipeline.hpp"

#include "rsagame/error.hpp"
#include "rsagame/manifest.hpp"
#include "rsagame/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <tuple>
#include <ostream>

namespace rsagame {

std::string_view to_string(SpaceMode mode) {
  switch (mode) {
    case SpaceMode::logic: return "logic";
    case SpaceMode::topk: return "topk";
    case SpaceMode::both: return "both";
  }
  return "?";
}

SpaceMode space_mode_from_string(std::string_view text) {
  if (text == "logic") return SpaceMode::logic;
  if (text == "topk") return SpaceMode::topk;
  if (text == "both") return SpaceMode::both;
  throw Error(fmt::format("unknown utterance mode '{}' (expected logic, topk or both)", text));
}

SpaceResult build_space(const ReferenceGame& game, const SpaceOptions& options, LanguageModel* model) {
  SpaceResult result;
  UtteranceSpace logic{game.game_id, {}};
  UtteranceSpace topk{game.game_id, {}};
  if (options.mode != SpaceMode::topk) logic = logical_utterances(game);
  if (options.mode != SpaceMode::logic) {
    if (!model) throw Error("top-k utterances need a language model");
    const auto& tmpl = options.context_template ? *options.context_template : default_context_template();
    const auto candidates = model->generate_topk(render_context(game, tmpl), options.k, options.starts);
    std::vector<Generation> generations;
    generations.reserve(candidates.size());
    for (const auto& c : candidates) generations.push_back({c.text, c.rank, c.logprob});
    topk = ingest_topk(game, std::move(generations));
  }
  if (options.mode == SpaceMode::logic) {
    result.space = std::move(logic);
  } else if (options.mode == SpaceMode::topk) {
    result.space = std::move(topk);
  } else {
    std::tie(result.space, result.dropped_duplicates) = merge_spaces(logic, topk);
  }
  return result;
}

const MeaningMatrix* GameScores::meaning(MfKind kind) const {
  for (const auto& m : meanings)
    if (m.kind == kind) return &m;
  return nullptr;
}

GameScores score_game(const ReferenceGame& game, const UtteranceSpace& space, LanguageModel& model,
                      const ScoreOptions& options) {
  if (space.game_id != game.game_id)
    throw Error(fmt::format("utterance space '{}' paired with game '{}'", space.game_id, game.game_id));
  if (space.utterances.empty()) throw Error(fmt::format("game '{}' has an empty utterance space", game.game_id));

  const auto& tmpl = options.context_template ? *options.context_template : default_context_template();
  const std::size_t n_obj = game.objects.size();
  const std::size_t n_utt = space.utterances.size();

  GameScores out;
  out.game_id = game.game_id;
  out.target_index = game.target_index;
  out.n_objects = n_obj;
  out.utterances = space.utterances;
  out.token_counts.assign(n_utt, 0);
  out.llm_logprob.assign(n_obj, std::vector<double>(n_utt, 0.0));

  std::vector<std::string> contexts;
  contexts.reserve(n_obj);
  for (std::size_t o = 0; o < n_obj; ++o) contexts.push_back(render_context(game, tmpl, o));

  parallel_for(n_obj * n_utt, options.workers, [&](std::size_t cell) {
    const std::size_t o = cell / n_utt;
    const std::size_t u = cell % n_utt;
    const auto& utt = space.utterances[u];
    ScoredSequence s;
    try {
      s = model.score_sequence(contexts[o], utt.text);
    } catch (const Error& e) {
      throw ScoringError(game.game_id, utt.text, o, e.what());
    }
    out.llm_logprob[o][u] = s.total_logprob;
    if (o == game.target_index) {
      out.token_counts[u] = s.token_count();
      if (options.reuse_beam_scores)
        if (const auto* origin = std::get_if<TopKOrigin>(&utt.origin)) out.llm_logprob[o][u] = origin->logprob;
    }
  });

  for (MfKind kind : options.mfs) {
    if (kind == MfKind::rule) {
      out.meanings.push_back(rule_matrix(game, space, options.lexicon));
    } else {
      out.meanings.push_back(prompt_matrix(game, space, model, options.prompt, options.workers));
    }
  }
  return out;
}

std::vector<double> costs_for(const GameScores& scores, CostMode mode) {
  std::vector<double> costs;
  costs.reserve(scores.utterances.size());
  for (std::size_t u = 0; u < scores.utterances.size(); ++u) {
    std::optional<std::size_t> tokens;
    if (mode == CostMode::token_count) tokens = std::max<std::size_t>(scores.token_counts.at(u), 1);
    costs.push_back(utterance_cost(scores.utterances[u], mode, tokens));
  }
  return costs;
}

namespace {

// Softmax of one object's logprob row.
std::vector<double> normalize_row(const std::vector<double>& logprobs) {
  const double peak = *std::max_element(logprobs.begin(), logprobs.end());
  std::vector<double> out(logprobs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logprobs.size(); ++i) total += out[i] = std::exp(logprobs[i] - peak);
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace

std::vector<ScoreRecord> build_records(const std::vector<GameScores>& scores, const std::vector<double>& alphas,
                                       const RecordOptions& options, std::vector<std::string>* notes) {
  std::vector<ScoreRecord> records;
  for (const auto& game : scores) {
    const std::size_t n_utt = game.utterances.size();
    const auto costs = costs_for(game, options.cost_mode);

    std::map<RsaKey, SpeakerTable> speakers;
    std::string failure;
    std::vector<std::string> degenerate_notes;
    for (const auto& m : game.meanings) {
      const auto listener = literal_listener(m, options.prior);
      if (const auto n = std::count(listener.degenerate.begin(), listener.degenerate.end(), true); n > 0)
        degenerate_notes.push_back(fmt::format("game '{}': {} degenerate utterance(s) under {} MF get zero speaker probability",
                                               game.game_id, n, to_string(m.kind)));
      for (double alpha : alphas) {
        SpeakerConfig cfg{alpha, options.cost_mode, options.prior};
        try {
          speakers.emplace(RsaKey{m.kind, alpha}, pragmatic_speaker(listener, costs, cfg));
        } catch (const UnreachableObjectError& e) {
          failure = fmt::format("game '{}' skipped under {} MF: {}", game.game_id, to_string(m.kind), e.what());
          break;
        }
      }
      if (!failure.empty()) break;
    }
    if (!failure.empty()) {
      spdlog::warn("{}", failure);
      if (notes) notes->push_back(failure);
      continue;
    }
    if (notes) notes->insert(notes->end(), degenerate_notes.begin(), degenerate_notes.end());

    for (std::size_t o = 0; o < game.n_objects; ++o) {
      const auto norm = normalize_row(game.llm_logprob.at(o));
      for (std::size_t u = 0; u < n_utt; ++u) {
        ScoreRecord r;
        r.game_id = game.game_id;
        r.object_index = o;
        r.is_target = o == game.target_index;
        r.utterance = game.utterances[u].text;
        r.provenance = game.utterances[u].provenance();
        r.cost = costs[u];
        r.llm_logprob = game.llm_logprob[o][u];
        r.llm_prob_norm = norm[u];
        for (const auto& [key, table] : speakers) r.rsa.emplace(key, table.at(u, o));
        records.push_back(std::move(r));
      }
    }
  }
  return records;
}

nlohmann::ordered_json scores_to_json(const GameScores& scores) {
  nlohmann::ordered_json j;
  j["game_id"] = scores.game_id;
  j["target_index"] = scores.target_index;
  j["n_objects"] = scores.n_objects;
  auto& utts = j["utterances"] = nlohmann::ordered_json::array();
  for (const auto& u : scores.utterances) utts.push_back(utterance_to_json(scores.game_id, u));
  j["token_counts"] = scores.token_counts;
  j["llm_logprob"] = scores.llm_logprob;
  auto& ms = j["meanings"] = nlohmann::ordered_json::array();
  for (const auto& m : scores.meanings) ms.push_back(matrix_to_json(m));
  return j;
}

GameScores scores_from_json(const nlohmann::json& j) {
  GameScores s;
  try {
    s.game_id = j.at("game_id").get<std::string>();
    s.target_index = j.at("target_index").get<std::size_t>();
    s.n_objects = j.at("n_objects").get<std::size_t>();
    for (const auto& u : j.at("utterances")) s.utterances.push_back(utterance_from_json(u));
    s.token_counts = j.at("token_counts").get<std::vector<std::size_t>>();
    s.llm_logprob = j.at("llm_logprob").get<std::vector<std::vector<double>>>();
    for (const auto& m : j.at("meanings")) s.meanings.push_back(matrix_from_json(m));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(fmt::format("malformed score record: {}", e.what()));
  }
  const std::size_t n_utt = s.utterances.size();
  if (s.target_index >= s.n_objects || s.token_counts.size() != n_utt || s.llm_logprob.size() != s.n_objects)
    throw DimensionError(fmt::format("score record '{}' has inconsistent dimensions", s.game_id));
  for (const auto& row : s.llm_logprob)
    if (row.size() != n_utt) throw DimensionError(fmt::format("score record '{}': logprob row size", s.game_id));
  for (const auto& m : s.meanings) {
    m.check();
    if (m.rows != n_utt || m.cols != s.n_objects)
      throw DimensionError(fmt::format("score record '{}': {} matrix shape", s.game_id, to_string(m.kind)));
  }
  return s;
}

void write_scores(std::ostream& out, const std::vector<GameScores>& scores, const std::string& manifest_hash) {
  out << file_header(kScoresFormat, manifest_hash).dump() << '\n';
  for (const auto& s : scores) out << scores_to_json(s).dump() << '\n';
}

std::vector<GameScores> read_scores(std::istream& in) {
  const auto lines = read_json_lines(in, kScoresFormat);
  std::vector<GameScores> out;
  out.reserve(lines.records.size());
  for (const auto& j : lines.records) out.push_back(scores_from_json(j));
  return out;
}

std::vector<GameScores> read_scores_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open scores file '{}'", path.string()));
  return read_scores(in);
}

}  // namespace rsagame
