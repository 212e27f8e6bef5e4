#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgclab/graph.hpp"
#include "kgclab/rules.hpp"
#include "kgclab/scorer.hpp"

namespace kgclab {

// Existence feature slot conditions for a target fact p_j(s,o):
//   HeadSame     exists e: p_i(s,e)
//   TailSame     exists e: p_i(e,o)
//   HeadInverse  exists e: p_i(e,s)
//   TailInverse  exists e: p_i(o,e)
// always evaluated with the target fact itself left out.
enum class SlotType : std::uint8_t { HeadSame = 0, TailSame = 1, HeadInverse = 2, TailInverse = 3 };

inline constexpr SlotType kSlotTypes[] = {SlotType::HeadSame, SlotType::TailSame,
                                          SlotType::HeadInverse, SlotType::TailInverse};

const char* to_string(SlotType s);
SlotType parse_slot_type(const std::string& s);

bool existence_holds(const Triple& target, SlotType slot, RelationId feature_relation,
                     const GraphOverlay& graph);

struct ExistenceSpec {
  RelationId target = 0;
  Direction direction = Direction::Head;
  SlotType slot = SlotType::HeadSame;
  RelationId feature_relation = 0;

  friend bool operator==(const ExistenceSpec&, const ExistenceSpec&) = default;
};

// Parses "single:<target>:<direction>:<slot>[:<feature relation>]"; the
// feature relation defaults to the target.
ExistenceSpec parse_existence_spec(const std::string& text, const Vocabulary& vocab);

enum class ExistenceMode : std::uint8_t { None, Single, All };

// Dense feature id space. Rule j has ids 2j (Head) and 2j+1 (Tail); existence
// ids are numbered separately.
class FeatureIndex {
 public:
  static FeatureIndex none(const RuleSet& rules, std::size_t num_relations);
  static FeatureIndex single(const RuleSet& rules, std::size_t num_relations,
                             std::vector<ExistenceSpec> specs);
  // `shared` drops the target relation from the id: one feature per
  // (direction, slot, feature relation) shared by every target.
  static FeatureIndex all(const RuleSet& rules, std::size_t num_relations, bool shared = false);

  ExistenceMode mode() const { return mode_; }
  bool shared() const { return shared_; }
  std::size_t num_rules() const { return num_rules_; }
  std::size_t num_relations() const { return num_relations_; }
  std::size_t num_rule_features() const { return 2 * num_rules_; }
  std::size_t num_existence_features() const;
  std::size_t num_intercepts() const { return 2 * num_relations_; }

  static std::uint32_t rule_feature(std::uint32_t rule, Direction d) {
    return 2 * rule + static_cast<std::uint32_t>(index_of(d));
  }
  static std::uint32_t intercept(RelationId r, Direction d) {
    return 2 * r + static_cast<std::uint32_t>(index_of(d));
  }
  std::optional<std::uint32_t> existence_feature(const ExistenceSpec& spec) const;
  ExistenceSpec describe_existence(std::uint32_t id) const;

  // Single mode: ids active for (target relation, direction).
  std::span<const std::uint32_t> single_ids(RelationId target, Direction d) const;

 private:
  ExistenceMode mode_ = ExistenceMode::None;
  bool shared_ = false;
  std::size_t num_rules_ = 0;
  std::size_t num_relations_ = 0;
  std::vector<ExistenceSpec> specs_;                       // Single mode
  std::vector<std::vector<std::uint32_t>> single_lookup_;  // [target*2+dir]
};

struct FeatureVector {
  std::vector<std::uint32_t> rules;      // sorted rule feature ids
  std::vector<std::uint32_t> existence;  // sorted existence feature ids

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Binary features of `triple` for the `direction` model: rule features fire
// under leave-one-out grounding, existence features look at other facts only.
FeatureVector build_features(const Triple& triple, Direction direction, const GraphOverlay& graph,
                             const FeatureIndex& index, const RuleSet& rules);

// Existence ids only.
void existence_features(const Triple& triple, Direction direction, const GraphOverlay& graph,
                        const FeatureIndex& index, std::vector<std::uint32_t>& out);

struct LinearModel {
  std::vector<double> w;          // rule feature weights
  std::vector<double> beta;       // existence feature weights
  std::vector<double> intercept;  // per (relation, direction)

  static LinearModel zeros(const FeatureIndex& index);
  bool matches(const FeatureIndex& index) const;
};

double logit(const LinearModel& model, const FeatureVector& x, RelationId relation, Direction d);
double score(const LinearModel& model, const Triple& triple, Direction direction,
             const GraphOverlay& graph, const FeatureIndex& index, const RuleSet& rules);

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct TrainConfig {
  int negatives_per_positive = 10;
  int epochs = 1000;
  double learning_rate = 0.5;
  double l2 = 0.01;
  std::uint64_t seed = 42;
};

struct TrainingExample {
  FeatureVector x;
  Triple triple;
  RelationId relation = 0;
  Direction direction = Direction::Head;
  double label = 0.0;
};

// Mean binary cross-entropy over positives and sampled negatives plus
// (l2/2)(|w|^2 + |beta|^2). Parameters are flattened as [w, beta, intercept].
class TrainingProblem {
 public:
  TrainingProblem(const KnowledgeGraph& train, const RuleSet& rules, const FeatureIndex& index,
                  const TrainConfig& cfg);
  TrainingProblem(std::vector<TrainingExample> examples, const FeatureIndex& index, double l2);

  std::size_t dimension() const;
  std::span<const TrainingExample> examples() const { return examples_; }

  double loss(std::span<const double> params) const;
  // Returns the loss; writes d loss / d params into grad.
  double loss_and_gradient(std::span<const double> params, std::span<double> grad) const;

  std::vector<double> flatten(const LinearModel& m) const;
  LinearModel unflatten(std::span<const double> params) const;

 private:
  const FeatureIndex* index_;
  double l2_;
  std::vector<TrainingExample> examples_;
};

// Full-batch gradient descent. loss_history, if given, receives the loss
// before each epoch plus the final loss.
LinearModel train(const KnowledgeGraph& train_graph, const RuleSet& rules, const FeatureIndex& index,
                  const TrainConfig& cfg, std::vector<double>* loss_history = nullptr);

// Checkpoint: one "descriptor<TAB>weight" line per parameter.
std::string serialize_model(const LinearModel& model, const FeatureIndex& index, const RuleSet& rules,
                            const Vocabulary& vocab);
LinearModel parse_model(const std::string& text, const FeatureIndex& index, const RuleSet& rules,
                        const Vocabulary& vocab, const std::string& source = "<model>");
void save_model(const std::filesystem::path& path, const LinearModel& model, const FeatureIndex& index,
                const RuleSet& rules, const Vocabulary& vocab);
LinearModel load_model(const std::filesystem::path& path, const FeatureIndex& index,
                       const RuleSet& rules, const Vocabulary& vocab);

class AggregatorScorer final : public Scorer {
 public:
  AggregatorScorer(const RuleSet& rules, const FeatureIndex& index, LinearModel model);

  std::string name() const override { return "aggregator"; }
  double score(Direction direction, const Triple& triple, const GraphOverlay& graph) const override;
  void score_all(const Query& q, const GraphOverlay& graph, std::span<double> scores) const override;
  std::optional<Explanation> explain(Direction direction, const Triple& triple,
                                     const GraphOverlay& graph) const override;

  const LinearModel& model() const { return model_; }
  const FeatureIndex& index() const { return *index_; }
  const RuleSet& rules() const { return *rules_; }

 private:
  const RuleSet* rules_;
  const FeatureIndex* index_;
  LinearModel model_;
};

}  // namespace kgclab
