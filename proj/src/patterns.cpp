#include "kgclab/patterns.hpp"

#include <algorithm>

#include "kgclab/parallel.hpp"

namespace kgclab {

FunctionalityReport detect_oot(const KnowledgeGraph& graph, double theta, const Vocabulary* vocab) {
  if (theta < 0 || theta > 1) throw ConfigError("theta must lie in [0,1]");
  FunctionalityReport rep;
  rep.theta = theta;
  rep.relations.resize(graph.num_relations());
  for (RelationId r = 0; r < graph.num_relations(); ++r) {
    auto& f = rep.relations[r];
    f.relation = r;
    if (vocab) f.label = vocab->relations.label(r);
    std::vector<EntityId> heads, tails;
    for (auto idx : graph.with_relation(r)) {
      heads.push_back(graph.triple(idx).head);
      tails.push_back(graph.triple(idx).tail);
    }
    f.n_facts = heads.size();
    // Count distinct ids and ids seen more than once.
    auto tally = [](std::vector<EntityId>& v, std::size_t& distinct, std::size_t& multi) {
      std::sort(v.begin(), v.end());
      for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        while (j < v.size() && v[j] == v[i]) ++j;
        ++distinct;
        if (j - i > 1) ++multi;
        i = j;
      }
    };
    tally(heads, f.n_heads, f.n_heads_multi_tail);
    tally(tails, f.n_tails, f.n_tails_multi_head);
    if (f.n_heads > 0)
      f.functional_fraction = 1.0 - static_cast<double>(f.n_heads_multi_tail) / f.n_heads;
    if (f.n_tails > 0)
      f.inverse_functional_fraction = 1.0 - static_cast<double>(f.n_tails_multi_head) / f.n_tails;
    f.is_functional = f.n_heads > 0 && f.functional_fraction >= theta;
  }
  return rep;
}

OolReport check_ool(const Split& split, Connectivity mode) {
  OolReport rep;
  rep.mode = mode;
  rep.n_test_facts = split.test.size();
  GraphOverlay view(split.train);
  for (const auto& t : split.test)
    if (view.connected(t.head, t.tail, std::nullopt, mode)) rep.violations.push_back(t);
  rep.n_violations = rep.violations.size();
  return rep;
}

const char* to_string(PenaltyMode m) { return m == PenaltyMode::OOT ? "oot" : "ool"; }

PenaltyMode parse_penalty_mode(const std::string& s) {
  if (s == "oot" || s == "OOT") return PenaltyMode::OOT;
  if (s == "ool" || s == "OOL") return PenaltyMode::OOL;
  throw ConfigError("unknown penalty mode '" + s + "' (expected oot or ool)");
}

PenaltyScorer::PenaltyScorer(PenaltyScorerConfig cfg, const KnowledgeGraph& train)
    : cfg_(cfg), num_entities_(train.num_entities()) {
  if (!(cfg_.epsilon > 0)) throw ConfigError("epsilon must be positive");
  domain_.assign(train.num_relations(), std::vector<bool>(num_entities_, false));
  for (const auto& t : train.triples()) {
    domain_[t.relation][t.head] = true;
    domain_[t.relation][t.tail] = true;
  }
}

std::string PenaltyScorer::name() const { return std::string("penalty-") + to_string(cfg_.mode); }

double PenaltyScorer::noise(const Query& q, EntityId candidate) const {
  std::uint64_t h = mix_seed(cfg_.seed, index_of(q.direction), q.relation, q.anchor, candidate);
  return static_cast<double>(h >> 11) * 0x1.0p-53 * cfg_.epsilon;
}

bool PenaltyScorer::in_domain(RelationId r, EntityId e) const {
  return r < domain_.size() && e < num_entities_ && domain_[r][e];
}

bool PenaltyScorer::pattern_active(const Query& q, EntityId c, const GraphOverlay& graph) const {
  const Triple self = q.with_candidate(c);
  if (cfg_.mode == PenaltyMode::OOL) return graph.connected(c, q.anchor, self, cfg_.connectivity);
  const Slot slot = q.direction == Direction::Head ? Slot::HeadFixed : Slot::TailFixed;
  return graph.has_neighbor(q.relation, c, slot, self);
}

double PenaltyScorer::score(Direction direction, const Triple& triple, const GraphOverlay& graph) const {
  const Query q = Query::from_triple(triple, direction);
  const EntityId c = q.truth;
  double s = noise(q, c);
  if (pattern_active(q, c, graph)) s -= cfg_.epsilon + 1.0;
  if (!in_domain(q.relation, c)) s -= cfg_.epsilon + 1.0;
  return s;
}

std::vector<EntityId> posthoc_filter(std::span<const EntityId> ranking, const Query& query,
                                     const GraphOverlay& train, Connectivity mode) {
  std::vector<EntityId> out;
  out.reserve(ranking.size());
  for (EntityId c : ranking)
    if (!train.connected(c, query.anchor, std::nullopt, mode)) out.push_back(c);
  return out;
}

nlohmann::json to_json(const FunctionalityReport& r) {
  nlohmann::json rels = nlohmann::json::array();
  for (const auto& f : r.relations) {
    rels.push_back({{"relation", f.label.empty() ? std::to_string(f.relation) : f.label},
                    {"n_facts", f.n_facts},
                    {"n_heads", f.n_heads},
                    {"n_heads_multi_tail", f.n_heads_multi_tail},
                    {"functional_fraction", f.functional_fraction},
                    {"is_functional", f.is_functional},
                    {"n_tails", f.n_tails},
                    {"n_tails_multi_head", f.n_tails_multi_head},
                    {"inverse_functional_fraction", f.inverse_functional_fraction}});
  }
  return {{"report", "functionality"}, {"theta", r.theta}, {"relations", rels}};
}

nlohmann::json to_json(const OolReport& r, const Vocabulary& vocab) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& t : r.violations) v.push_back(vocab.format(t));
  return {{"report", "ool"},
          {"connectivity", r.mode == Connectivity::Undirected ? "undirected" : "directed"},
          {"n_test_facts", r.n_test_facts},
          {"n_violations", r.n_violations},
          {"violations", v}};
}

}  // namespace kgclab
