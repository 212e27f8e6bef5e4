#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgclab/graph.hpp"
#include "kgclab/scorer.hpp"

namespace kgclab {

struct RelationFunctionality {
  RelationId relation = 0;
  std::string label;
  std::size_t n_facts = 0;
  std::size_t n_heads = 0;
  std::size_t n_heads_multi_tail = 0;
  double functional_fraction = 1.0;
  bool is_functional = false;
  // Mirror statistics (one head per tail); not part of the OOT test.
  std::size_t n_tails = 0;
  std::size_t n_tails_multi_head = 0;
  double inverse_functional_fraction = 1.0;
};

struct FunctionalityReport {
  double theta = 1.0;
  std::vector<RelationFunctionality> relations;  // by relation id

  const RelationFunctionality& at(RelationId r) const { return relations.at(r); }
};

// Per relation: how many heads have more than one tail. A relation is
// functional when 1 - n_heads_multi_tail / n_heads >= theta.
FunctionalityReport detect_oot(const KnowledgeGraph& graph, double theta = 1.0,
                               const Vocabulary* vocab = nullptr);

struct OolReport {
  std::size_t n_test_facts = 0;
  std::size_t n_violations = 0;
  std::vector<Triple> violations;
  Connectivity mode = Connectivity::Undirected;
};

// Test facts whose entity pair is already connected in train.
OolReport check_ool(const Split& split, Connectivity mode = Connectivity::Undirected);

enum class PenaltyMode : std::uint8_t { OOT, OOL };

const char* to_string(PenaltyMode m);
PenaltyMode parse_penalty_mode(const std::string& s);

struct PenaltyScorerConfig {
  PenaltyMode mode = PenaltyMode::OOT;
  double epsilon = 0.1;
  std::uint64_t seed = 42;
  Connectivity connectivity = Connectivity::Undirected;
};

// Random score in [0, eps] minus (eps + 1) for an active negative pattern and
// another (eps + 1) when the candidate never touches the relation in train.
//
// OOT, Head query: candidate already has an outgoing edge of the relation.
// OOT, Tail query: candidate already has an incoming edge (mirror rule).
// OOL: candidate is connected to the query anchor.
// The scored fact itself never counts as evidence.
class PenaltyScorer final : public Scorer {
 public:
  PenaltyScorer(PenaltyScorerConfig cfg, const KnowledgeGraph& train);

  std::string name() const override;
  double score(Direction direction, const Triple& triple, const GraphOverlay& graph) const override;

  const PenaltyScorerConfig& config() const { return cfg_; }
  double noise(const Query& q, EntityId candidate) const;
  bool pattern_active(const Query& q, EntityId candidate, const GraphOverlay& graph) const;
  bool in_domain(RelationId r, EntityId e) const;

 private:
  PenaltyScorerConfig cfg_;
  std::size_t num_entities_;
  std::vector<std::vector<bool>> domain_;  // [relation][entity]
};

// Drops candidates connected to the query anchor in `train`; order preserved.
std::vector<EntityId> posthoc_filter(std::span<const EntityId> ranking, const Query& query,
                                     const GraphOverlay& train,
                                     Connectivity mode = Connectivity::Undirected);

nlohmann::json to_json(const FunctionalityReport& r);
nlohmann::json to_json(const OolReport& r, const Vocabulary& vocab);

}  // namespace kgclab
