#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace kgclab {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// Which slot of a fact a query asks for. A Head query p(?, o) ranks
// candidate heads; a Tail query p(s, ?) ranks candidate tails.
enum class Direction : std::uint8_t { Head = 0, Tail = 1 };

inline constexpr Direction kDirections[] = {Direction::Head, Direction::Tail};

inline std::size_t index_of(Direction d) { return static_cast<std::size_t>(d); }
const char* to_string(Direction d);
Direction parse_direction(const std::string& s);

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
    h ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
    h ^= h >> 29;
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 32;
    return static_cast<std::size_t>(h);
  }
};

// A completion query formed from a fact. For a fact p(s,o) the Tail query has
// anchor s and truth o, the Head query has anchor o and truth s.
struct Query {
  Direction direction = Direction::Tail;
  RelationId relation = 0;
  EntityId anchor = 0;
  EntityId truth = 0;

  static Query from_triple(const Triple& t, Direction d) {
    return d == Direction::Tail ? Query{d, t.relation, t.head, t.tail}
                                : Query{d, t.relation, t.tail, t.head};
  }

  // The fact obtained by placing `candidate` in the open slot.
  Triple with_candidate(EntityId candidate) const {
    return direction == Direction::Tail ? Triple{anchor, relation, candidate}
                                        : Triple{candidate, relation, anchor};
  }

  friend bool operator==(const Query&, const Query&) = default;
};

// Error hierarchy. Every error the library raises derives from Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct LookupError : Error {
  using Error::Error;
};

// Input violates a data invariant (e.g. overlapping splits).
struct DataError : Error {
  using Error::Error;
};

// Internal invariant broken; indicates a bug, never bad input.
struct DefectError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(std::move(file)), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace kgclab
