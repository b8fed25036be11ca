#pragma once

#include "rsagame/analysis.hpp"
#include "rsagame/llm_client.hpp"
#include "rsagame/meaning.hpp"
#include "rsagame/rsa.hpp"
#include "rsagame/utterance.hpp"
#include "rsagame/world.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rsagame {

enum class SpaceMode { logic, topk, both };
std::string_view to_string(SpaceMode mode);
SpaceMode space_mode_from_string(std::string_view text);

struct SpaceOptions {
  SpaceMode mode = SpaceMode::both;
  std::size_t k = 15;
  std::vector<std::string> starts = {"a", "the"};
  const PromptTemplate* context_template = nullptr;  // default when null
};

struct SpaceResult {
  UtteranceSpace space;
  std::size_t dropped_duplicates = 0;
};

/// Utterance space for one game. Top-k generation needs `model`.
SpaceResult build_space(const ReferenceGame& game, const SpaceOptions& options, LanguageModel* model);

/// Everything scored for one game. RSA tables are not stored: they are cheap
/// and are rebuilt for whatever α list the analysis asks for.
struct GameScores {
  std::string game_id;
  std::size_t target_index = 0;
  std::size_t n_objects = 0;
  std::vector<Utterance> utterances;
  std::vector<std::size_t> token_counts;          // under the target context
  std::vector<std::vector<double>> llm_logprob;   // [object][utterance]
  std::vector<MeaningMatrix> meanings;

  const MeaningMatrix* meaning(MfKind kind) const;
};

struct ScoreOptions {
  std::vector<MfKind> mfs = {MfKind::rule, MfKind::prompt};
  Lexicon lexicon;
  PromptMeaningConfig prompt;
  const PromptTemplate* context_template = nullptr;
  /// Top-k rows of the target reuse the beam score instead of being rescored.
  bool reuse_beam_scores = false;
  std::size_t workers = 1;
};

GameScores score_game(const ReferenceGame& game, const UtteranceSpace& space, LanguageModel& model,
                      const ScoreOptions& options);

/// |u| per utterance of a scored game.
std::vector<double> costs_for(const GameScores& scores, CostMode mode);

struct RecordOptions {
  CostMode cost_mode = CostMode::word_count;
  Prior prior;
};

/// One record per (game, object, utterance), with an RSA probability for every
/// stored meaning matrix × α. Games where some object is unreachable under a
/// meaning function are left out and described in `notes`, as are
/// utterances that no object satisfies.
std::vector<ScoreRecord> build_records(const std::vector<GameScores>& scores, const std::vector<double>& alphas,
                                       const RecordOptions& options, std::vector<std::string>* notes = nullptr);

nlohmann::ordered_json scores_to_json(const GameScores& scores);
GameScores scores_from_json(const nlohmann::json& j);
void write_scores(std::ostream& out, const std::vector<GameScores>& scores, const std::string& manifest_hash);
std::vector<GameScores> read_scores(std::istream& in);
std::vector<GameScores> read_scores_file(const std::filesystem::path& path);

}  // namespace rsagame
