#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgclab/graph.hpp"

namespace kgclab {

struct ActiveFeature {
  enum class Kind : std::uint8_t { Rule, Existence };
  Kind kind = Kind::Rule;
  std::uint32_t id = 0;
  double weight = 0.0;

  friend bool operator==(const ActiveFeature&, const ActiveFeature&) = default;
};

// Additive breakdown of a linear score: logit = intercept + sum of weights.
struct Explanation {
  double intercept = 0.0;
  std::vector<ActiveFeature> features;  // sorted by (kind, id)
};

// Directed fact scorer. Implementations must be pure: the same arguments
// always produce the same value, and concurrent calls are safe.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::string name() const = 0;
  virtual double score(Direction direction, const Triple& triple, const GraphOverlay& graph) const = 0;

  // scores[c] = score(q.direction, q.with_candidate(c), graph) for every
  // entity c; scores.size() is the entity count. Overridden for speed.
  virtual void score_all(const Query& q, const GraphOverlay& graph, std::span<double> scores) const;

  // Feature-level breakdown, for scorers that are linear in binary features.
  virtual std::optional<Explanation> explain(Direction, const Triple&, const GraphOverlay&) const {
    return std::nullopt;
  }
};

// Ignores the graph entirely; useful as a control in perturbation runs.
class ConstantScorer final : public Scorer {
 public:
  explicit ConstantScorer(double value = 0.0) : value_(value) {}
  std::string name() const override { return "constant"; }
  double score(Direction, const Triple&, const GraphOverlay&) const override { return value_; }

 private:
  double value_;
};

}  // namespace kgclab
