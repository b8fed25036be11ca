#include "rsagame/error.hpp"
#include "rsagame/world.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <set>

using namespace rsagame;

namespace {

ObjectDescription obj(const std::string& type, const std::string& colour, const std::string& size,
                      const std::string& orientation) {
  return make_object(AttributeSchema::furniture(), {type, colour, size, orientation});
}

ReferenceGame seven_object_game() {
  return {"g",
          AttributeSchema::furniture(),
          {obj("chair", "red", "large", "left"), obj("desk", "red", "small", "front"),
           obj("desk", "green", "small", "front"), obj("sofa", "blue", "large", "right"),
           obj("fan", "grey", "small", "back"), obj("chair", "green", "large", "left"),
           obj("fan", "blue", "large", "front")},
          0};
}

bool has_rule(const std::vector<Violation>& vs, const std::string& rule) {
  for (const auto& v : vs)
    if (v.rule == rule) return true;
  return false;
}

}  // namespace

TEST_CASE("furniture schema domains") {
  const auto& s = AttributeSchema::furniture();
  REQUIRE(s.size() == 4);
  CHECK(s[0].name == "type");
  CHECK(s[0].features == std::vector<std::string>{"chair", "sofa", "desk", "fan"});
  CHECK(s[1].features == std::vector<std::string>{"blue", "red", "green", "grey"});
  CHECK(s[2].features == std::vector<std::string>{"large", "small"});
  CHECK(s[3].features == std::vector<std::string>{"left", "right", "front", "back"});
  CHECK(s.assignment_count() == 128);
}

TEST_CASE("schema validation") {
  using Attrs = std::vector<Attribute>;
  CHECK_THROWS_AS(AttributeSchema(Attrs{{"", {"a"}}}), SchemaError);
  CHECK_THROWS_AS(AttributeSchema(Attrs{{"a", {}}}), SchemaError);
  CHECK_THROWS_AS(AttributeSchema(Attrs{{"a", {"x"}}, {"a", {"y"}}}), SchemaError);
  CHECK_THROWS_AS(AttributeSchema(Attrs{{"a", {"x", "x"}}}), SchemaError);
}

TEST_CASE("enumerate_objects matches brute force count") {
  const auto objects = enumerate_objects(AttributeSchema::furniture());
  CHECK(objects.size() == 128);
  CHECK(std::set<ObjectDescription>(objects.begin(), objects.end()).size() == 128);
}

TEST_CASE("realize_description template") {
  CHECK(realize_description(obj("desk", "red", "small", "front")) == "a small, red desk facing front");
  CHECK(realize_description(obj("chair", "grey", "large", "front")) == "a large, grey chair facing front");
  const auto o = obj("fan", "blue", "large", "back");
  CHECK(realize_description(o) == realize_description(o));
  ObjectDescription partial;
  partial.assignment = {{"type", "fan"}};
  CHECK_THROWS_AS(realize_description(partial), SchemaError);
}

TEST_CASE("realize_description is injective and parse_description inverts it") {
  const auto& schema = AttributeSchema::furniture();
  std::set<std::string> texts;
  for (const auto& o : enumerate_objects(schema)) {
    const auto text = realize_description(o);
    texts.insert(text);
    const auto back = parse_description(schema, text);
    REQUIRE(back);
    CHECK(*back == o);
  }
  CHECK(texts.size() == 128);
  CHECK_FALSE(parse_description(schema, "a purple chair"));
}

TEST_CASE("validate_game") {
  SUBCASE("well formed") { CHECK(validate_game(seven_object_game()).empty()); }
  SUBCASE("duplicate target") {
    auto g = seven_object_game();
    g.objects[3] = g.objects[0];
    CHECK(has_rule(validate_game(g), "target not uniquely identifiable"));
  }
  SUBCASE("feature outside domain") {
    auto g = seven_object_game();
    g.objects[2].assignment["colour"] = "purple";
    const auto vs = validate_game(g);
    REQUIRE(has_rule(vs, "feature not in domain"));
    CHECK(vs.front().object_index == 2u);
  }
  SUBCASE("missing attribute") {
    auto g = seven_object_game();
    g.objects[1].assignment.erase("size");
    CHECK(has_rule(validate_game(g), "missing attribute"));
  }
  SUBCASE("target out of range") {
    auto g = seven_object_game();
    g.target_index = 7;
    CHECK(has_rule(validate_game(g), "target index out of range"));
  }
  SUBCASE("single object") {
    auto g = seven_object_game();
    g.objects.resize(1);
    CHECK(has_rule(validate_game(g), "too few objects"));
  }
}

TEST_CASE("make_object rejects features outside the schema") {
  CHECK_THROWS_AS(obj("chair", "purple", "large", "left"), SchemaError);
  CHECK_THROWS_AS(make_object(AttributeSchema::furniture(), {"chair"}), SchemaError);
}
