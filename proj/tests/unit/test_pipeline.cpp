#include "rsagame/corpus.hpp"
#include "rsagame/error.hpp"
#include "rsagame/pipeline.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace rsagame;

namespace {

const Corpus& corpus() {
  static const Corpus c = generate_synthetic(3, AttributeSchema::furniture(), 7, 11);
  return c;
}

ScoreOptions options(std::vector<MfKind> mfs = {MfKind::rule, MfKind::prompt}) {
  ScoreOptions o;
  o.mfs = std::move(mfs);
  o.lexicon = Lexicon::default_for(AttributeSchema::furniture());
  return o;
}

}  // namespace

TEST_CASE("build_space modes") {
  MockLanguageModel model(3);
  const auto& game = corpus().games[0];
  SpaceOptions opts;
  opts.k = 3;

  opts.mode = SpaceMode::logic;
  const auto logic = build_space(game, opts, nullptr).space;
  CHECK(logic == logical_utterances(game));
  CHECK(logic.count(Provenance::topk) == 0);

  opts.mode = SpaceMode::topk;
  CHECK_THROWS_AS(build_space(game, opts, nullptr), Error);
  const auto topk = build_space(game, opts, &model).space;
  CHECK(topk.count(Provenance::logic) == 0);
  CHECK(topk.utterances.size() <= 6);
  CHECK(topk.utterances.size() >= 1);

  opts.mode = SpaceMode::both;
  const auto both = build_space(game, opts, &model);
  CHECK(both.space.count(Provenance::logic) == logic.utterances.size());
  CHECK(both.space.utterances.size() + both.dropped_duplicates ==
        logic.utterances.size() + topk.utterances.size());
  CHECK(build_space(game, opts, &model).space == both.space);

  CHECK(space_mode_from_string(to_string(SpaceMode::topk)) == SpaceMode::topk);
  CHECK_THROWS_AS(space_mode_from_string("beam"), Error);
}

TEST_CASE("score_game fills every cell") {
  MockLanguageModel model(3);
  const auto& game = corpus().games[1];
  SpaceOptions sopts;
  sopts.k = 3;
  const auto space = build_space(game, sopts, &model).space;
  const auto scores = score_game(game, space, model, options());
  const std::size_t n_utt = space.utterances.size();
  CHECK(scores.llm_logprob.size() == 7);
  for (const auto& row : scores.llm_logprob) {
    REQUIRE(row.size() == n_utt);
    for (double v : row) CHECK(v < 0.0);
  }
  REQUIRE(scores.token_counts.size() == n_utt);
  for (std::size_t u = 0; u < n_utt; ++u)
    CHECK(scores.token_counts[u] == mock_tokenize(space.utterances[u].text).size());
  REQUIRE(scores.meanings.size() == 2);
  CHECK(scores.meaning(MfKind::rule)->rows == n_utt);
  CHECK(scores.meaning(MfKind::prompt)->cols == 7);
  CHECK(scores.meaning(MfKind::rule)->values == rule_matrix(game, space, options().lexicon).values);

  ScoreOptions threaded = options();
  threaded.workers = 4;
  const auto again = score_game(game, space, model, threaded);
  CHECK(scores_to_json(again) == scores_to_json(scores));

  UtteranceSpace wrong = space;
  wrong.game_id = "elsewhere";
  CHECK_THROWS_AS(score_game(game, wrong, model, options()), Error);
}

TEST_CASE("records agree with the speaker tables and normalize per object") {
  MockLanguageModel model(4);
  std::vector<GameScores> all;
  for (const auto& game : corpus().games) {
    SpaceOptions sopts;
    sopts.k = 3;
    all.push_back(score_game(game, build_space(game, sopts, &model).space, model, options()));
  }
  const std::vector<double> alphas = {0.6, 1.0};
  std::vector<std::string> notes;
  const auto records = build_records(all, alphas, {}, &notes);
  CHECK(notes.empty());

  std::size_t expected_rows = 0;
  for (const auto& g : all) expected_rows += g.n_objects * g.utterances.size();
  REQUIRE(records.size() == expected_rows);

  std::size_t i = 0;
  for (const auto& g : all) {
    const auto costs = costs_for(g, CostMode::word_count);
    for (std::size_t o = 0; o < g.n_objects; ++o) {
      double norm_total = 0.0;
      for (std::size_t u = 0; u < g.utterances.size(); ++u, ++i) {
        const auto& r = records[i];
        CHECK(r.game_id == g.game_id);
        CHECK(r.object_index == o);
        CHECK(r.is_target == (o == g.target_index));
        CHECK(r.llm_logprob == g.llm_logprob[o][u]);
        norm_total += r.llm_prob_norm;
        CHECK(r.rsa.size() == 4);
      }
      CHECK(std::abs(norm_total - 1.0) < 1e-12);
    }
    // Cross-check one table against the linear-space oracle.
    const auto& m = *g.meaning(MfKind::prompt);
    std::vector<std::vector<double>> rows(m.rows, std::vector<double>(m.cols));
    for (std::size_t u = 0; u < m.rows; ++u)
      for (std::size_t o = 0; o < m.cols; ++o) rows[u][o] = m.at(u, o);
    const auto expected = oracle::speaker(oracle::listener(rows), costs, 0.6);
    const std::size_t base = i - g.n_objects * g.utterances.size();
    for (std::size_t o = 0; o < g.n_objects; ++o)
      for (std::size_t u = 0; u < g.utterances.size(); ++u) {
        const auto& r = records[base + o * g.utterances.size() + u];
        CHECK(std::abs(r.rsa.at({MfKind::prompt, 0.6}) - static_cast<double>(expected[u][o])) < 1e-9);
      }
  }
}

TEST_CASE("unreachable games are skipped with a note") {
  MockLanguageModel model(4);
  const auto& game = corpus().games[0];
  SpaceOptions sopts;
  sopts.mode = SpaceMode::logic;
  auto scores = score_game(game, build_space(game, sopts, &model).space, model, options({MfKind::rule}));
  auto& m = scores.meanings[0];
  for (std::size_t u = 0; u < m.rows; ++u) m.at(u, 2) = 0.0;
  std::vector<std::string> notes;
  CHECK(build_records({scores}, {1.0}, {}, &notes).empty());
  REQUIRE(notes.size() == 1);
  CHECK(notes[0].find(game.game_id) != std::string::npos);
  CHECK(notes[0].find("skipped") != std::string::npos);
}

TEST_CASE("degenerate utterances are reported") {
  MockLanguageModel model(4);
  const auto& game = corpus().games[0];
  SpaceOptions sopts;
  sopts.mode = SpaceMode::logic;
  auto scores = score_game(game, build_space(game, sopts, &model).space, model, options({MfKind::rule}));
  auto& m = scores.meanings[0];
  for (std::size_t o = 0; o < m.cols; ++o) m.at(0, o) = 0.0;
  std::vector<std::string> notes;
  const auto records = build_records({scores}, {1.0}, {}, &notes);
  REQUIRE(notes.size() == 1);
  CHECK(notes[0].find("1 degenerate") != std::string::npos);
  for (const auto& r : records)
    if (r.utterance == scores.utterances[0].text) CHECK(r.rsa.at({MfKind::rule, 1.0}) == 0.0);
}

TEST_CASE("beam-score reuse only changes target top-k rows") {
  MockLanguageModel model(5);
  const auto& game = corpus().games[2];
  SpaceOptions sopts;
  sopts.mode = SpaceMode::logic;
  const auto logic = build_space(game, sopts, &model).space;
  // Generation scores deliberately unlike the rescoring model's.
  const auto topk = ingest_topk(game, {{"the odd chair", 1, -0.125}, {"a strange desk", 2, -0.25}});
  const auto space = merge_spaces(logic, topk).first;

  const auto rescored = score_game(game, space, model, options({MfKind::rule}));
  ScoreOptions faithful_opts = options({MfKind::rule});
  faithful_opts.reuse_beam_scores = true;
  const auto faithful = score_game(game, space, model, faithful_opts);

  std::size_t changed = 0;
  for (std::size_t o = 0; o < game.objects.size(); ++o)
    for (std::size_t u = 0; u < space.utterances.size(); ++u) {
      const auto* origin = std::get_if<TopKOrigin>(&space.utterances[u].origin);
      if (o == game.target_index && origin) {
        CHECK(faithful.llm_logprob[o][u] == origin->logprob);
        CHECK(rescored.llm_logprob[o][u] != origin->logprob);
        ++changed;
      } else {
        CHECK(faithful.llm_logprob[o][u] == rescored.llm_logprob[o][u]);
      }
    }
  CHECK(changed == 2);
}

TEST_CASE("scores round trip through JSON lines") {
  MockLanguageModel model(6);
  std::vector<GameScores> all;
  for (const auto& game : corpus().games) {
    SpaceOptions sopts;
    sopts.k = 2;
    all.push_back(score_game(game, build_space(game, sopts, &model).space, model, options()));
  }
  std::stringstream buf;
  write_scores(buf, all, "feedface");
  const auto text = buf.str();
  const auto back = read_scores(buf);
  REQUIRE(back.size() == all.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(scores_to_json(back[i]) == scores_to_json(all[i]));
  std::stringstream again;
  write_scores(again, back, "feedface");
  CHECK(again.str() == text);

  auto broken = scores_to_json(all[0]);
  broken["llm_logprob"].erase(0);
  CHECK_THROWS_AS(scores_from_json(broken), DimensionError);
}

TEST_CASE("a sweep point matches a single-alpha run") {
  MockLanguageModel model(7);
  std::vector<GameScores> all;
  for (const auto& game : corpus().games) {
    SpaceOptions sopts;
    sopts.k = 3;
    all.push_back(score_game(game, build_space(game, sopts, &model).space, model, options()));
  }
  const std::vector<MfKind> mfs = {MfKind::rule, MfKind::prompt};
  const auto build = [&](double a) { return build_records(all, {a}, {}); };
  const std::vector<double> alphas(kSweepAlphas.begin(), kSweepAlphas.end());
  const auto sweep = alpha_sweep(build, alphas, mfs, LlmScoreMode::normalized_prob);
  const auto single = alpha_sweep(build, {1.0}, mfs, LlmScoreMode::normalized_prob);
  REQUIRE(sweep.size() == 6);
  CHECK(to_json(sweep[2]).dump() == to_json(single[0]).dump());
}
