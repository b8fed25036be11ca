#include "rsagame/corpus.hpp"
#include "rsagame/error.hpp"

#include "paths.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace rsagame;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string serialize(const Corpus& c) {
  std::ostringstream out;
  write_corpus(out, c, "hash");
  return out.str();
}

}  // namespace

TEST_CASE("one game per entity, extra attributes ignored") {
  const auto games = parse_tuna_trial(slurp(data_dir() / "tuna/good/s1t1.xml"));
  REQUIRE(games.size() == 7);
  for (std::size_t i = 0; i < games.size(); ++i) {
    CHECK(games[i].game_id == "s1t1#" + std::to_string(i));
    CHECK(games[i].target_index == i);
    CHECK(games[i].objects == games[0].objects);
    CHECK(validate_game(games[i]).empty());
  }
  CHECK(realize_description(games[0].objects[0]) == "a large, red chair facing left");
  for (const auto& o : games[0].objects) CHECK(o.assignment.size() == 4);
}

TEST_CASE("attribute values are lowercased") {
  const auto games = parse_tuna_trial(slurp(data_dir() / "tuna/good/s1t2.xml"));
  REQUIRE(games.size() == 7);
  CHECK(*games[0].objects[0].feature("colour") == "grey");
}

TEST_CASE("missing orientation is an ingestion error naming entity and attribute") {
  try {
    parse_tuna_trial(slurp(data_dir() / "tuna/bad/s2t1_missing_orientation.xml"));
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    const std::string what = e.what();
    CHECK(what.find("orientation") != std::string::npos);
    CHECK(what.find("103") != std::string::npos);
  }
}

TEST_CASE("trial without entities") {
  CHECK_THROWS_AS(parse_tuna_trial("<TRIAL ID=\"x\"><DOMAIN/></TRIAL>"), IngestionError);
  CHECK_THROWS_AS(parse_tuna_trial("<TRIAL ID=\"x\"><DOMAIN>"), IngestionError);
}

TEST_CASE("load_corpus orders by file and is deterministic") {
  const auto a = load_corpus(data_dir() / "tuna/good");
  const auto b = load_corpus(data_dir() / "tuna/good");
  REQUIRE(a.corpus.games.size() == 14);
  CHECK(a.files == 2);
  CHECK(a.corpus.games[0].game_id == "s1t1#0");
  CHECK(a.corpus.games[7].game_id == "s1t2#0");
  CHECK(a.corpus.sources[7].file == "s1t2.xml");
  CHECK(serialize(a.corpus) == serialize(b.corpus));
}

TEST_CASE("load_corpus error handling") {
  CHECK_THROWS_WITH_AS(load_corpus(data_dir() / "tuna/bad"),
                       doctest::Contains("s2t1_missing_orientation.xml"), IngestionError);
  const auto skipped = load_corpus(data_dir() / "tuna/bad", {true, nullptr});
  CHECK(skipped.corpus.games.size() == 7);
  REQUIRE(skipped.errors.size() == 1);
  CHECK(skipped.errors[0].find("s2t1_missing_orientation.xml") != std::string::npos);

  const auto empty = scratch_dir("corpus_empty");
  CHECK(load_corpus(empty).corpus.games.empty());
}

TEST_CASE("round trip through the canonical format") {
  const auto loaded = load_corpus(data_dir() / "tuna/good").corpus;
  const std::string text = serialize(loaded);
  std::istringstream in(text);
  const auto back = read_corpus(in);
  CHECK(back == loaded);
  CHECK(serialize(back) == text);
  CHECK(corpus_hash(back) == corpus_hash(loaded));
}

TEST_CASE("canonical field order") {
  const auto loaded = load_corpus(data_dir() / "tuna/good").corpus;
  std::istringstream in(serialize(loaded));
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header.find("\"_meta\"") != std::string::npos);
  CHECK(first.rfind("{\"game_id\":", 0) == 0);
  CHECK(first.find("\"schema\"") < first.find("\"objects\""));
  CHECK(first.find("\"objects\"") < first.find("\"target_index\""));
}

TEST_CASE("read_corpus rejects duplicates and malformed lines") {
  const auto loaded = load_corpus(data_dir() / "tuna/good").corpus;
  std::string text = serialize(loaded);
  const auto second_line = text.find('\n') + 1;
  const auto end = text.find('\n', second_line) + 1;
  std::istringstream dup(text + text.substr(second_line, end - second_line));
  CHECK_THROWS_AS(read_corpus(dup), IngestionError);
  std::istringstream junk(text + "{not json\n");
  CHECK_THROWS_AS(read_corpus(junk), IngestionError);
}

TEST_CASE("generate_synthetic") {
  const auto& schema = AttributeSchema::furniture();
  const auto a = generate_synthetic(1, schema, 7, 10);
  REQUIRE(a.games.size() == 10);
  for (const auto& g : a.games) {
    CHECK(g.objects.size() == 7);
    CHECK(validate_game(g).empty());
  }
  CHECK_NOTHROW(check_corpus(a));
  CHECK(generate_synthetic(1, schema, 7, 10) == a);
  CHECK_FALSE(generate_synthetic(2, schema, 7, 10) == a);
  CHECK_THROWS_AS(generate_synthetic(1, schema, 200, 1), CapacityError);
  CHECK_NOTHROW(generate_synthetic(1, schema, 128, 1));
}

TEST_CASE("corpus_stats") {
  const auto c = load_corpus(data_dir() / "tuna/good").corpus;
  const auto s = corpus_stats(c);
  CHECK(s.games == 14);
  CHECK(s.trials == 2);
  CHECK(s.objects == 98);
}
