#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kgclab/graph.hpp"
#include "kgclab/scorer.hpp"

namespace kgclab {

// Known true answers per query, used for filtered ranking.
class KnownAnswers {
 public:
  KnownAnswers() = default;
  explicit KnownAnswers(std::span<const Triple> triples);
  // train U valid U test.
  explicit KnownAnswers(const Split& split);

  // Sorted answers for the query's (direction, relation, anchor).
  std::span<const EntityId> answers(const Query& q) const;
  bool is_answer(const Query& q, EntityId e) const;

 private:
  static std::uint64_t key(Direction d, RelationId r, EntityId anchor) {
    return (static_cast<std::uint64_t>(anchor) << 32) | (static_cast<std::uint64_t>(r) << 1) |
           index_of(d);
  }
  void add(const Triple& t);
  void finalize();

  std::unordered_map<std::uint64_t, std::vector<EntityId>> map_;
};

enum class TieMode : std::uint8_t { Average, Optimistic, Pessimistic };

TieMode parse_tie_mode(const std::string& s);

struct EvalOptions {
  TieMode ties = TieMode::Average;
  std::vector<Direction> directions = {Direction::Head, Direction::Tail};
  // Drop candidates connected to the anchor in train before ranking.
  bool posthoc = false;
  Connectivity posthoc_mode = Connectivity::Undirected;
};

struct Ranking {
  Query query;
  // Filtered rank of the truth; absent if the truth itself was removed.
  std::optional<double> rank;
  // Surviving candidates by descending score (ties by id), when requested.
  std::vector<std::pair<EntityId, double>> candidates;

  double reciprocal() const { return rank ? 1.0 / *rank : 0.0; }
};

// rank = 1 + #higher + #tied / 2 under the average convention.
double tie_rank(std::size_t higher, std::size_t tied, TieMode mode);

// Ranks the truth among all entities scored against `graph`; the post-hoc
// filter also reads connectivity from `graph`.
Ranking rank_query(const Scorer& scorer, const Query& query, const GraphOverlay& graph,
                   const KnownAnswers& known, const EvalOptions& opts = {},
                   bool keep_candidates = false);

struct GroupStats {
  std::size_t n = 0;
  double sum_rr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;

  void add(const Ranking& r);
  void merge(const GroupStats& o);
  double mrr() const { return n ? sum_rr / n : 0.0; }
  double hits(int k) const;
};

// Per (relation, direction) metric sums with Head, Tail and Joint rollups.
class MetricTable {
 public:
  using Key = std::pair<std::string, Direction>;

  void add(const std::string& relation, const Ranking& r);
  void set(const std::string& relation, Direction d, GroupStats g);

  const std::map<Key, GroupStats>& groups() const { return groups_; }
  const GroupStats& group(const std::string& relation, Direction d) const;
  bool has(const std::string& relation, Direction d) const;

  GroupStats direction(Direction d) const;
  GroupStats joint() const;

  nlohmann::json to_json() const;
  static MetricTable from_json(const nlohmann::json& j);
  std::string to_text() const;

 private:
  std::map<Key, GroupStats> groups_;
};

struct RankedQuery {
  Triple fact;
  Direction direction = Direction::Tail;
  std::optional<double> rank;
};

// Two queries per test fact (restricted by opts.directions), filtered against
// train U valid U test. Queries run in parallel; results are merged in order.
MetricTable evaluate(const Scorer& scorer, const Split& split, const EvalOptions& opts = {},
                     std::vector<RankedQuery>* ranks = nullptr);
// Same, but scoring against a perturbed view of the train graph.
MetricTable evaluate(const Scorer& scorer, const Split& split, const GraphOverlay& graph,
                     const EvalOptions& opts, std::vector<RankedQuery>* ranks = nullptr);

// Joint MRR after replacing one cell's MRR.
double substitute_and_recompute(const MetricTable& table, const std::string& relation, Direction d,
                                double replacement_mrr);

struct RelativeRow {
  std::string relation;
  std::size_t n_queries = 0;  // reference table's count
  std::vector<std::pair<std::string, std::optional<double>>> ratios;
};

std::vector<RelativeRow> relative_comparison(
    const std::vector<std::pair<std::string, MetricTable>>& tables, const std::string& reference,
    Direction d);
nlohmann::json to_json(const std::vector<RelativeRow>& rows);

// "relation(head,tail)@H<TAB>rank" lines; "-" marks a removed truth.
std::string format_ranking_dump(std::span<const RankedQuery> ranks, const Vocabulary& vocab);
MetricTable ingest_ranking_dump(const std::string& text, const std::string& source = "<dump>");

}  // namespace kgclab
