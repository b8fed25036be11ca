#include "rsagame/corpus.hpp"
#include "rsagame/error.hpp"
#include "rsagame/utterance.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

using namespace rsagame;

namespace {

const AttributeSchema& furniture() { return AttributeSchema::furniture(); }

ObjectDescription obj(const std::string& type, const std::string& colour, const std::string& size,
                      const std::string& orientation) {
  return make_object(furniture(), {type, colour, size, orientation});
}

FeatureBundle bundle(std::optional<std::string> type, std::optional<std::string> colour,
                     std::optional<std::string> size, std::optional<std::string> orientation) {
  return {{{"type", type}, {"colour", colour}, {"size", size}, {"orientation", orientation}}};
}

oracle::Object as_oracle(const ObjectDescription& o) {
  return {o.assignment.begin(), o.assignment.end()};
}

std::set<std::string> texts(const UtteranceSpace& s) {
  std::set<std::string> out;
  for (const auto& u : s.utterances) out.insert(u.text);
  return out;
}

}  // namespace

TEST_CASE("enumerate_bundles") {
  const auto all = enumerate_bundles(furniture());
  CHECK(all.size() == 375);
  std::size_t empty = 0;
  for (const auto& b : all) empty += b.present_count() == 0 ? 1 : 0;
  CHECK(empty == 1);
  CHECK(all.back().present_count() == 0);
  CHECK(all.front() == bundle("chair", "blue", "large", "left"));

  const AttributeSchema tiny(std::vector<Attribute>{{"type", {"a", "b"}}});
  CHECK(enumerate_bundles(tiny).size() == 3);
}

TEST_CASE("realize_bundle omission rules") {
  CHECK(realize_bundle(bundle("desk", "red", "small", std::nullopt)) == "a small, red desk");
  CHECK(realize_bundle(bundle(std::nullopt, "red", std::nullopt, std::nullopt)) == "a red thing");
  CHECK(realize_bundle(bundle(std::nullopt, std::nullopt, std::nullopt, std::nullopt)) == "a thing");
  CHECK(realize_bundle(bundle("desk", "red", "small", "front")) == "a small, red desk facing front");
  CHECK(realize_bundle(bundle("fan", std::nullopt, "large", "back")) == "a large fan facing back");
  CHECK(realize_bundle(bundle(std::nullopt, std::nullopt, std::nullopt, "left")) == "a thing facing left");
}

TEST_CASE("realize_bundle agrees with the reference realizer on every bundle") {
  const auto ours = enumerate_bundles(furniture());
  for (const auto& b : ours) {
    oracle::Object ob;
    for (const auto& [attr, value] : b.slots) ob[attr] = value.value_or("");
    CHECK(realize_bundle(b) == oracle::realize(ob));
  }
}

TEST_CASE("single object world yields 16 utterances") {
  ReferenceGame g{"g", furniture(), {obj("chair", "red", "large", "left")}, 0};
  const auto space = logical_utterances(g);
  CHECK(space.utterances.size() == 16);
  CHECK(oracle::count_logic_bundles(oracle::furniture(), {as_oracle(g.objects[0])}) == 16);
  CHECK(texts(space).contains("a thing"));
  CHECK(texts(space).contains("a large, red chair facing left"));
}

TEST_CASE("logical_utterances matches brute force on random games") {
  const auto corpus = generate_synthetic(11, furniture(), 7, 30);
  for (const auto& g : corpus.games) {
    std::vector<oracle::Object> objs;
    for (const auto& o : g.objects) objs.push_back(as_oracle(o));
    const auto space = logical_utterances(g);
    CHECK(space.utterances.size() == oracle::count_logic_bundles(oracle::furniture(), objs));
    CHECK(texts(space).size() == space.utterances.size());
    for (const auto& o : g.objects) CHECK(texts(space).contains(realize_description(o)));
    for (const auto& u : space.utterances) {
      CHECK(u.provenance() == Provenance::logic);
      CHECK(u.text == realize_bundle(std::get<LogicOrigin>(u.origin).bundle));
    }
  }
}

TEST_CASE("logic space depends on the object set only") {
  const auto a = obj("chair", "red", "large", "left");
  const auto b = obj("desk", "green", "small", "back");
  ReferenceGame one{"g", furniture(), {a, b}, 0};
  ReferenceGame other{"g", furniture(), {a, b}, 1};
  CHECK(logical_utterances(one) == logical_utterances(other));

  ReferenceGame dup{"g", furniture(), {a, a}, 0};
  ReferenceGame single{"g", furniture(), {a}, 0};
  CHECK(texts(logical_utterances(dup)) == texts(logical_utterances(single)));

  // Adding an object never removes utterances.
  const auto small = texts(logical_utterances(one));
  ReferenceGame bigger{"g", furniture(), {a, b, obj("fan", "blue", "small", "front")}, 0};
  const auto big = texts(logical_utterances(bigger));
  for (const auto& t : small) CHECK(big.contains(t));
}

TEST_CASE("normalize_utterance") {
  CHECK(normalize_utterance("  A  Red   Desk. ") == "a red desk");
  CHECK(normalize_utterance("the chair!?") == "the chair");
  CHECK(normalize_utterance("a small, red desk") == "a small, red desk");
  CHECK(normalize_utterance("...") == "");
}

TEST_CASE("ingest_topk dedup keeps the best rank") {
  ReferenceGame g{"g", furniture(), {obj("desk", "red", "small", "front"), obj("chair", "red", "large", "left")}, 0};
  const auto space = ingest_topk(g, {{"a red desk.", 2, -1.5}, {"a red desk", 1, -1.0}, {"A Red Desk", 3, -2.0},
                                     {"   ", 4, -3.0}, {"the desk", 5, -3.5}});
  REQUIRE(space.utterances.size() == 2);
  CHECK(space.utterances[0].text == "a red desk");
  const auto& origin = std::get<TopKOrigin>(space.utterances[0].origin);
  CHECK(origin.rank == 1);
  CHECK(origin.raw_text == "a red desk");
  CHECK(space.utterances[1].text == "the desk");

  // Idempotent.
  std::vector<Generation> again;
  for (const auto& u : space.utterances) {
    const auto& o = std::get<TopKOrigin>(u.origin);
    again.push_back({u.text, o.rank, o.logprob});
  }
  const auto twice = ingest_topk(g, again);
  CHECK(texts(twice) == texts(space));

  CHECK(ingest_topk(g, {}).utterances.empty());
}

TEST_CASE("merge_spaces keeps logic entries and drops duplicate texts") {
  ReferenceGame g{"g", furniture(), {obj("desk", "red", "small", "front"), obj("chair", "red", "large", "left")}, 0};
  const auto logic = logical_utterances(g);
  const auto topk = ingest_topk(g, {{"a red thing", 1, -0.5}, {"the red desk", 2, -1.0}});
  const auto [merged, dropped] = merge_spaces(logic, topk);
  CHECK(dropped == 1);
  CHECK(merged.utterances.size() == logic.utterances.size() + 1);
  CHECK(merged.count(Provenance::topk) == 1);
  CHECK(merged.utterances.back().text == "the red desk");
  CHECK(texts(merged).size() == merged.utterances.size());
}

TEST_CASE("utterance_cost") {
  const auto u = [](std::string text) { return Utterance{std::move(text), TopKOrigin{1, "", 0.0}, 1.0}; };
  CHECK(utterance_cost(u("a chair")) == 2);
  CHECK(utterance_cost(u("a red thing")) == 3);
  CHECK(utterance_cost(u("a small, red desk facing front")) == 6);
  CHECK(utterance_cost(u("a chair"), CostMode::token_count, 5) == 5);
  CHECK_THROWS(utterance_cost(u("a chair"), CostMode::token_count));
  CHECK(utterance_cost(u("the red chair"), CostMode::feature_count) == 2);
  CHECK(utterance_cost(u("chair"), CostMode::feature_count) == 1);
  Utterance logic{"a red thing", LogicOrigin{bundle(std::nullopt, "red", std::nullopt, std::nullopt)}, 3.0};
  CHECK(utterance_cost(logic, CostMode::feature_count) == 1);
  Utterance nothing{"a thing", LogicOrigin{bundle(std::nullopt, std::nullopt, std::nullopt, std::nullopt)}, 2.0};
  CHECK(utterance_cost(nothing, CostMode::feature_count) == 1);
}

TEST_CASE("spaces round trip") {
  ReferenceGame g{"g", furniture(), {obj("desk", "red", "small", "front"), obj("chair", "red", "large", "left")}, 0};
  const auto [merged, dropped] = merge_spaces(logical_utterances(g), ingest_topk(g, {{"The red desk.", 1, -1.25}}));
  (void)dropped;
  std::ostringstream out;
  write_spaces(out, {merged}, "h");
  std::istringstream in(out.str());
  const auto back = read_spaces(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == merged);
}
