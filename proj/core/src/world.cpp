#include "rsagame/world.hpp"

#include "rsagame/error.hpp"

#include <fmt/format.h>

#include <set>
#include <unordered_map>

namespace rsagame {

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes)
    : attributes_(std::move(attributes)) {
  if (attributes_.empty()) throw SchemaError("schema has no attributes");
  std::set<std::string, std::less<>> names;
  for (const auto& attribute : attributes_) {
    if (attribute.name.empty()) throw SchemaError("attribute with empty name");
    if (!names.insert(attribute.name).second)
      throw SchemaError(fmt::format("duplicate attribute '{}'", attribute.name));
    if (attribute.features.empty())
      throw SchemaError(fmt::format("attribute '{}' has an empty domain", attribute.name));
    std::set<std::string, std::less<>> features;
    for (const auto& feature : attribute.features) {
      if (feature.empty())
        throw SchemaError(fmt::format("attribute '{}' has an empty feature name", attribute.name));
      if (!features.insert(feature).second)
        throw SchemaError(
            fmt::format("duplicate feature '{}' in attribute '{}'", feature, attribute.name));
    }
  }
}

const AttributeSchema& AttributeSchema::furniture() {
  static const AttributeSchema schema({
      {std::string(kType), {"chair", "sofa", "desk", "fan"}},
      {std::string(kColour), {"blue", "red", "green", "grey"}},
      {std::string(kSize), {"large", "small"}},
      {std::string(kOrientation), {"left", "right", "front", "back"}},
  });
  return schema;
}

std::optional<std::size_t> AttributeSchema::index_of(std::string_view attribute) const {
  for (std::size_t i = 0; i < attributes_.size(); ++i)
    if (attributes_[i].name == attribute) return i;
  return std::nullopt;
}

bool AttributeSchema::has_feature(std::string_view attribute, std::string_view feature) const {
  const auto index = index_of(attribute);
  if (!index) return false;
  for (const auto& f : attributes_[*index].features)
    if (f == feature) return true;
  return false;
}

std::uint64_t AttributeSchema::assignment_count() const {
  std::uint64_t count = 1;
  for (const auto& attribute : attributes_) count *= attribute.features.size();
  return count;
}

const std::string* ObjectDescription::feature(std::string_view attribute) const {
  const auto it = assignment.find(attribute);
  return it == assignment.end() ? nullptr : &it->second;
}

ObjectDescription make_object(const AttributeSchema& schema,
                              const std::vector<std::string>& features_in_order) {
  if (features_in_order.size() != schema.size())
    throw SchemaError(fmt::format("expected {} features, got {}", schema.size(),
                                  features_in_order.size()));
  ObjectDescription object;
  for (std::size_t i = 0; i < schema.size(); ++i)
    object.assignment.emplace(schema[i].name, features_in_order[i]);
  check_object(schema, object);
  return object;
}

void check_object(const AttributeSchema& schema, const ObjectDescription& object) {
  for (const auto& attribute : schema.attributes()) {
    const std::string* feature = object.feature(attribute.name);
    if (!feature) throw SchemaError(fmt::format("missing attribute '{}'", attribute.name));
    if (!schema.has_feature(attribute.name, *feature))
      throw SchemaError(
          fmt::format("feature '{}' not in domain of '{}'", *feature, attribute.name));
  }
  if (object.assignment.size() != schema.size()) {
    for (const auto& [name, value] : object.assignment)
      if (!schema.index_of(name)) throw SchemaError(fmt::format("unknown attribute '{}'", name));
  }
}

std::vector<ObjectDescription> enumerate_objects(const AttributeSchema& schema) {
  std::vector<ObjectDescription> out;
  out.reserve(schema.assignment_count());
  std::vector<std::size_t> digits(schema.size(), 0);
  while (true) {
    ObjectDescription object;
    for (std::size_t i = 0; i < schema.size(); ++i)
      object.assignment.emplace(schema[i].name, schema[i].features[digits[i]]);
    out.push_back(std::move(object));
    std::size_t pos = schema.size();
    while (pos > 0) {
      --pos;
      if (++digits[pos] < schema[pos].features.size()) break;
      digits[pos] = 0;
      if (pos == 0) return out;
    }
  }
}

std::string realize_description(const ObjectDescription& object) {
  const auto require = [&](std::string_view attribute) -> const std::string& {
    const std::string* f = object.feature(attribute);
    if (!f) throw SchemaError(fmt::format("object has no '{}' attribute", attribute));
    return *f;
  };
  const std::string& size = require(kSize);
  const std::string& colour = require(kColour);
  const std::string& type = require(kType);
  const std::string& orientation = require(kOrientation);
  return fmt::format("a {}, {} {} facing {}", size, colour, type, orientation);
}

std::optional<ObjectDescription> parse_description(const AttributeSchema& schema,
                                                   std::string_view text) {
  // Realization is injective, so a lookup table over every object is exact.
  static thread_local std::optional<AttributeSchema> cached_schema;
  static thread_local std::unordered_map<std::string, ObjectDescription> table;
  if (!cached_schema || !(*cached_schema == schema)) {
    table.clear();
    for (auto& object : enumerate_objects(schema))
      table.emplace(realize_description(object), std::move(object));
    cached_schema = schema;
  }
  const auto it = table.find(std::string(text));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::vector<Violation> validate_game(const ReferenceGame& game) {
  std::vector<Violation> out;
  if (game.objects.size() < 2)
    out.push_back({std::nullopt, "too few objects",
                   fmt::format("game has {} objects, needs at least 2", game.objects.size())});
  for (std::size_t i = 0; i < game.objects.size(); ++i) {
    const auto& object = game.objects[i];
    for (const auto& attribute : game.schema.attributes()) {
      const std::string* feature = object.feature(attribute.name);
      if (!feature) {
        out.push_back({i, "missing attribute", attribute.name});
      } else if (!game.schema.has_feature(attribute.name, *feature)) {
        out.push_back({i, "feature not in domain",
                       fmt::format("'{}' under '{}'", *feature, attribute.name)});
      }
    }
    for (const auto& [name, value] : object.assignment)
      if (!game.schema.index_of(name)) out.push_back({i, "unknown attribute", name});
  }
  if (game.target_index >= game.objects.size()) {
    out.push_back({std::nullopt, "target index out of range",
                   fmt::format("target {} with {} objects", game.target_index,
                               game.objects.size())});
  } else {
    const auto& target = game.objects[game.target_index];
    for (std::size_t i = 0; i < game.objects.size(); ++i) {
      if (i != game.target_index && game.objects[i] == target)
        out.push_back({i, "target not uniquely identifiable",
                       fmt::format("object {} duplicates the target", i)});
    }
  }
  return out;
}

std::string to_string(const Violation& violation) {
  if (violation.object_index)
    return fmt::format("object {}: {} ({})", *violation.object_index, violation.rule,
                       violation.detail);
  return fmt::format("{} ({})", violation.rule, violation.detail);
}

}  // namespace rsagame
