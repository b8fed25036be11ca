#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rsagame {

// Attribute names used by the noun-phrase template.
inline constexpr std::string_view kType = "type";
inline constexpr std::string_view kColour = "colour";
inline constexpr std::string_view kSize = "size";
inline constexpr std::string_view kOrientation = "orientation";

struct Attribute {
  std::string name;
  std::vector<std::string> features;

  bool operator==(const Attribute&) const = default;
};

/// Ordered attribute -> feature-domain table that defines a world's vocabulary.
class AttributeSchema {
 public:
  /// Throws SchemaError on empty/duplicate names or empty domains.
  explicit AttributeSchema(std::vector<Attribute> attributes);

  /// Type {chair, sofa, desk, fan}; Colour {blue, red, green, grey};
  /// Size {large, small}; Orientation {left, right, front, back}.
  static const AttributeSchema& furniture();

  std::span<const Attribute> attributes() const noexcept { return attributes_; }
  std::size_t size() const noexcept { return attributes_.size(); }
  const Attribute& operator[](std::size_t i) const { return attributes_.at(i); }

  std::optional<std::size_t> index_of(std::string_view attribute) const;
  bool has_feature(std::string_view attribute, std::string_view feature) const;

  /// Number of distinct fully specified objects: product of domain sizes.
  std::uint64_t assignment_count() const;

  bool operator==(const AttributeSchema&) const = default;

 private:
  std::vector<Attribute> attributes_;
};

/// A fully specified object: exactly one feature per schema attribute.
struct ObjectDescription {
  std::map<std::string, std::string, std::less<>> assignment;

  /// Feature for `attribute`, or nullptr when unassigned.
  const std::string* feature(std::string_view attribute) const;

  bool operator==(const ObjectDescription&) const = default;
  auto operator<=>(const ObjectDescription&) const = default;
};

/// Builds an object from features listed in schema attribute order.
ObjectDescription make_object(const AttributeSchema& schema,
                              const std::vector<std::string>& features_in_order);

/// Throws SchemaError unless `object` assigns every schema attribute a feature
/// from its domain and nothing else.
void check_object(const AttributeSchema& schema, const ObjectDescription& object);

/// All Π|F_A| full assignments in lexicographic schema order.
std::vector<ObjectDescription> enumerate_objects(const AttributeSchema& schema);

struct ReferenceGame {
  std::string game_id;
  AttributeSchema schema = AttributeSchema::furniture();
  std::vector<ObjectDescription> objects;
  std::size_t target_index = 0;

  const ObjectDescription& target() const { return objects.at(target_index); }
  bool operator==(const ReferenceGame&) const = default;
};

/// `a <size>, <colour> <type> facing <orientation>`.
/// Throws SchemaError if one of the four template attributes is missing.
std::string realize_description(const ObjectDescription& object);

/// Inverse of realize_description over the schema's objects; nullopt if
/// `text` is not the realization of any object.
std::optional<ObjectDescription> parse_description(const AttributeSchema& schema,
                                                   std::string_view text);

struct Violation {
  std::optional<std::size_t> object_index;
  std::string rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

/// Empty iff every ReferenceGame invariant holds.
std::vector<Violation> validate_game(const ReferenceGame& game);

std::string to_string(const Violation& violation);

}  // namespace rsagame
