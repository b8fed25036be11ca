#pragma once

#include <stdexcept>
#include <string>

namespace rsagame {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An object or bundle does not fit the schema it is used with.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A TUNA trial or corpus file could not be turned into games.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// More distinct objects were requested than the schema can produce.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Matrix, prior or cost vectors have incompatible shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Some object receives no literal-listener mass from any utterance.
class UnreachableObjectError : public Error {
 public:
  using Error::Error;
};

/// Network failure that survived all retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The endpoint cannot provide what was asked (no logprobs, no n-best, ...).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// The endpoint answered, but not in the shape we need.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A model call failed while filling a meaning matrix; carries the cell identity.
class ScoringError : public Error {
 public:
  ScoringError(std::string game_id, std::string utterance, std::size_t object_index,
               const std::string& cause)
      : Error("scoring failed for game '" + game_id + "', utterance '" + utterance +
              "', object " + std::to_string(object_index) + ": " + cause),
        game_id_(std::move(game_id)),
        utterance_(std::move(utterance)),
        object_index_(object_index) {}

  const std::string& game_id() const noexcept { return game_id_; }
  const std::string& utterance() const noexcept { return utterance_; }
  std::size_t object_index() const noexcept { return object_index_; }

 private:
  std::string game_id_;
  std::string utterance_;
  std::size_t object_index_;
};

/// A persisted template still contains an unfilled `{placeholder}`.
class TemplateError : public Error {
 public:
  using Error::Error;
};

}  // namespace rsagame
