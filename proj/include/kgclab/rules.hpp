#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kgclab/graph.hpp"

namespace kgclab {

// One body atom of a path rule, read left to right along the variable chain
// X = V0, V1, ..., Vn = Y. Forward means r(V{i-1}, V{i}); inverse means
// r(V{i}, V{i-1}).
struct BodyAtom {
  RelationId relation = 0;
  bool inverse = false;

  friend auto operator<=>(const BodyAtom&, const BodyAtom&) = default;
};

enum class RuleKind : std::uint8_t {
  // h(X,Y) <= chain of 1..3 atoms from X to Y.
  Cyclic,
  // h(X,c') <= b(X,c), or h(X,c') <= b(c,X) when the atom is inverse.
  Constant,
};

struct Rule {
  RuleKind kind = RuleKind::Cyclic;
  RelationId head_relation = 0;
  EntityId head_constant = 0;  // Constant rules only
  EntityId body_constant = 0;  // Constant rules only
  std::vector<BodyAtom> body;

  std::uint64_t support = 0;
  std::uint64_t body_groundings = 0;
  double confidence = 0.0;

  std::size_t length() const { return body.size(); }
  // Whether any body atom uses `r`; leave-one-out only matters if so.
  bool body_mentions(RelationId r) const;

  // Structural identity; statistics are ignored.
  std::weak_ordering compare_shape(const Rule& other) const;
  bool same_shape(const Rule& other) const { return compare_shape(other) == 0; }
};

struct RuleLess {
  bool operator()(const Rule& a, const Rule& b) const { return a.compare_shape(b) < 0; }
};

// Immutable rule list indexed by head relation. Every rule applies to both
// query directions of its head relation.
class RuleSet {
 public:
  RuleSet() = default;
  explicit RuleSet(std::vector<Rule> rules);

  std::span<const Rule> rules() const { return rules_; }
  const Rule& operator[](std::size_t i) const { return rules_[i]; }
  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  std::span<const std::uint32_t> for_relation(RelationId r) const;

 private:
  std::vector<Rule> rules_;
  std::vector<std::vector<std::uint32_t>> by_relation_;
};

// Does a body grounding connect the triple's head to its tail (cyclic) or
// satisfy the constant pattern? With leave_one_out the triple itself is
// invisible while grounding. Reflexive facts (head == tail) never fire.
bool rule_fires(const Rule& rule, const Triple& triple, const GraphOverlay& graph,
                bool leave_one_out);

// All candidates c for which the rule's body holds for query.with_candidate(c),
// ignoring leave-one-out. Sorted, unique, never contains the anchor.
std::vector<EntityId> rule_predictions(const Rule& rule, Direction direction, EntityId anchor,
                                       const GraphOverlay& graph);

struct GroundingStats {
  std::uint64_t support = 0;
  std::uint64_t body_groundings = 0;
};

// Exact statistics over X != Y pairs. A pair whose head fact is in the graph
// is a grounding only if the body still holds with that fact left out.
GroundingStats compute_stats(const Rule& rule, const KnowledgeGraph& graph);

struct MineConfig {
  int max_len = 3;
  std::uint64_t min_support = 2;
  double min_conf = 0.001;
  // Start triples to sample; 0 or >= |graph| walks every triple.
  std::size_t samples = 0;
  std::uint64_t seed = 42;
  // Per-node expansion cap during path search (sampled beyond it); 0 = none.
  std::size_t max_branching = 64;
  bool constant_rules = true;
  // Pessimistic confidence support / (groundings + offset); 0 keeps it raw.
  double confidence_offset = 0.0;
};

RuleSet mine_rules(const KnowledgeGraph& graph, const MineConfig& cfg);

std::string format_rule(const Rule& rule, const Vocabulary& vocab);

struct RuleParseOptions {
  bool strict = true;
  // AnyBURL writes body_groundings before support; swap the first two columns.
  bool anyburl_columns = false;
};

struct RuleParseReport {
  std::size_t parsed = 0;
  std::size_t unsupported = 0;    // well-formed but outside the rule language
  std::size_t unknown_labels = 0; // mentions a relation/entity not in vocab
  std::size_t malformed = 0;      // lenient mode only
};

// Line format: support<TAB>body_groundings<TAB>confidence<TAB>rule, where rule
// reads "h(X,Y) <= b1(X,A), b2(A,Y)". Variables are X, Y, A, B, C.
RuleSet parse_rules(const std::string& text, const Vocabulary& vocab,
                    const RuleParseOptions& opts = {}, RuleParseReport* report = nullptr,
                    const std::string& source = "<rules>");
RuleSet load_rules(const std::filesystem::path& path, const Vocabulary& vocab,
                   const RuleParseOptions& opts = {}, RuleParseReport* report = nullptr);

std::string serialize_rules(const RuleSet& rules, const Vocabulary& vocab);
void write_rules(const std::filesystem::path& path, const RuleSet& rules, const Vocabulary& vocab);

}  // namespace kgclab
