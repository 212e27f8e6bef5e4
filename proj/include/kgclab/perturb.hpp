#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgclab/eval.hpp"
#include "kgclab/graph.hpp"
#include "kgclab/scorer.hpp"

namespace kgclab {

enum class Protocol : std::uint8_t { AddOot, DelOot, AddOol, DelOol };

const char* to_string(Protocol p);

struct PerturbConfig {
  std::uint64_t seed = 42;
  // Del-OOL keeps only cases whose base score exceeds tau.
  double tau = 1.0;
  int cases_per_fact = 1;
  // Rejection-sampling budget per draw before a case is skipped.
  int max_attempts = 1000;
};

// Feature-level difference between two explanations of the same fact.
struct FeatureFlip {
  std::vector<ActiveFeature> gained;
  std::vector<ActiveFeature> lost;
  double analytic_delta = 0.0;  // sum(gained) - sum(lost)

  bool any() const { return !gained.empty() || !lost.empty(); }
  bool rules_changed() const;
};

struct PerturbationCase {
  Triple test_fact;
  Triple base_fact;
  Triple influential_fact;
  std::vector<Triple> random_facts;
  Direction direction = Direction::Head;
  double score_before = 0.0;
  double score_after_attack = 0.0;
  double score_after_random = 0.0;
  // Filled when the scorer can explain itself.
  std::optional<FeatureFlip> attack_flip;
  std::optional<FeatureFlip> random_flip;

  double delta_attack() const { return score_after_attack - score_before; }
  double delta_random() const { return score_after_random - score_before; }
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population (ddof 0)
};

Summary summarize(const std::vector<double>& xs);

struct PerturbationReport {
  Protocol protocol = Protocol::AddOot;
  Direction direction = Direction::Head;
  std::string scorer;
  std::optional<RelationId> target_relation;
  double tau = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_cases = 0;
  std::size_t n_skipped = 0;        // nothing sampleable
  std::size_t n_below_tau = 0;      // Del-OOL only
  // OOT on the Tail direction tests the mirrored one-head rule.
  bool mirrored_pattern = false;
  Summary before, delta_attack, delta_random;
  std::vector<PerturbationCase> cases;

  bool empty() const { return n_cases == 0; }
};

// Head direction only; target facts are the test facts of `target`.
PerturbationReport run_add_oot(const Scorer& scorer, const Split& split, RelationId target,
                               const PerturbConfig& cfg = {});
PerturbationReport run_del_oot(const Scorer& scorer, const Split& split, RelationId target,
                               const PerturbConfig& cfg = {});
PerturbationReport run_add_ool(const Scorer& scorer, const Split& split, Direction direction,
                               const PerturbConfig& cfg = {});
PerturbationReport run_del_ool(const Scorer& scorer, const Split& split, Direction direction,
                               const PerturbConfig& cfg = {});

struct AddRankResult {
  MetricTable original;
  MetricTable attack;
  MetricTable random;
  std::size_t n_perturbed = 0;
  std::size_t n_skipped = 0;
};

// Full filtered rankings with each target fact's attack (or random) overlay in
// place. Non-target and skipped facts are ranked on the original graph.
// `target` is required for AddOot and ignored for AddOol.
AddRankResult rank_after_add(const Scorer& scorer, const Split& split, Protocol protocol,
                             std::optional<RelationId> target, const PerturbConfig& cfg = {},
                             const EvalOptions& opts = {});

nlohmann::json to_json(const PerturbationReport& r, const Vocabulary& vocab, bool with_cases = true);
// Mean +- std lines in the layout of the published perturbation tables.
std::string to_text(const PerturbationReport& r);

}  // namespace kgclab
