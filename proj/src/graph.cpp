#include "kgclab/graph.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace kgclab {

const char* to_string(Direction d) { return d == Direction::Head ? "head" : "tail"; }

Direction parse_direction(const std::string& s) {
  if (s == "head" || s == "Head" || s == "H" || s == "h") return Direction::Head;
  if (s == "tail" || s == "Tail" || s == "T" || s == "t") return Direction::Tail;
  throw ConfigError("unknown direction '" + s + "' (expected head or tail)");
}

std::uint32_t Interner::intern(std::string_view label) {
  std::string key(label);
  auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<std::uint32_t> Interner::find(std::string_view label) const {
  auto it = ids_.find(std::string(label));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

EntityId Vocabulary::entity(std::string_view label) const {
  auto id = entities.find(label);
  if (!id) throw LookupError("unknown entity '" + std::string(label) + "'");
  return *id;
}

RelationId Vocabulary::relation(std::string_view label) const {
  auto id = relations.find(label);
  if (!id) throw LookupError("unknown relation '" + std::string(label) + "'");
  return *id;
}

std::string Vocabulary::format(const Triple& t) const {
  return relations.label(t.relation) + "(" + entities.label(t.head) + "," + entities.label(t.tail) + ")";
}

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples, std::size_t num_entities,
                               std::size_t num_relations)
    : num_entities_(num_entities), num_relations_(num_relations) {
  triples_.reserve(triples.size());
  set_.reserve(triples.size());
  for (const auto& t : triples) {
    if (t.head >= num_entities || t.tail >= num_entities || t.relation >= num_relations)
      throw DefectError("triple id out of vocabulary range");
    if (set_.insert(t).second)
      triples_.push_back(t);
    else
      ++duplicates_;
  }

  const auto n = static_cast<std::uint32_t>(triples_.size());
  std::vector<std::uint32_t> order(n);

  auto group = [&](auto less, auto key_of, auto value_of, auto& values, auto& runs) {
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return less(triples_[a], triples_[b]); });
    values.clear();
    values.reserve(n);
    runs.clear();
    runs.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const Triple& t = triples_[order[i]];
      auto k = key_of(t);
      auto [it, fresh] = runs.try_emplace(k, Run{i, 0});
      ++it->second.length;
      values.push_back(value_of(t));
    }
  };

  group([](const Triple& a, const Triple& b) {
          return std::tie(a.head, a.relation, a.tail) < std::tie(b.head, b.relation, b.tail);
        },
        [](const Triple& t) { return key(t.head, t.relation); },
        [](const Triple& t) { return t.tail; }, sp_values_, sp_runs_);
  group([](const Triple& a, const Triple& b) {
          return std::tie(a.relation, a.tail, a.head) < std::tie(b.relation, b.tail, b.head);
        },
        [](const Triple& t) { return key(t.relation, t.tail); },
        [](const Triple& t) { return t.head; }, po_values_, po_runs_);
  group([](const Triple& a, const Triple& b) {
          return std::tie(a.head, a.tail, a.relation) < std::tie(b.head, b.tail, b.relation);
        },
        [](const Triple& t) { return key(t.head, t.tail); },
        [](const Triple& t) { return t.relation; }, pair_values_, pair_runs_);

  // Counting-sort CSR for per-entity and per-relation triple lists.
  incident_offsets_.assign(num_entities_ + 1, 0);
  for (const auto& t : triples_) {
    ++incident_offsets_[t.head + 1];
    if (t.tail != t.head) ++incident_offsets_[t.tail + 1];
  }
  std::partial_sum(incident_offsets_.begin(), incident_offsets_.end(), incident_offsets_.begin());
  incident_values_.resize(incident_offsets_.back());
  {
    auto cursor = incident_offsets_;
    for (std::uint32_t i = 0; i < n; ++i) {
      const Triple& t = triples_[i];
      incident_values_[cursor[t.head]++] = i;
      if (t.tail != t.head) incident_values_[cursor[t.tail]++] = i;
    }
  }

  relation_offsets_.assign(num_relations_ + 1, 0);
  for (const auto& t : triples_) ++relation_offsets_[t.relation + 1];
  std::partial_sum(relation_offsets_.begin(), relation_offsets_.end(), relation_offsets_.begin());
  relation_values_.resize(n);
  {
    auto cursor = relation_offsets_;
    for (std::uint32_t i = 0; i < n; ++i) relation_values_[cursor[triples_[i].relation]++] = i;
  }
}

std::span<const EntityId> KnowledgeGraph::tails(EntityId head, RelationId r) const {
  auto it = sp_runs_.find(key(head, r));
  if (it == sp_runs_.end()) return {};
  return {sp_values_.data() + it->second.offset, it->second.length};
}

std::span<const EntityId> KnowledgeGraph::heads(RelationId r, EntityId tail) const {
  auto it = po_runs_.find(key(r, tail));
  if (it == po_runs_.end()) return {};
  return {po_values_.data() + it->second.offset, it->second.length};
}

std::span<const RelationId> KnowledgeGraph::relations_between(EntityId head, EntityId tail) const {
  auto it = pair_runs_.find(key(head, tail));
  if (it == pair_runs_.end()) return {};
  return {pair_values_.data() + it->second.offset, it->second.length};
}

std::span<const std::uint32_t> KnowledgeGraph::incident(EntityId e) const {
  if (e >= num_entities_) return {};
  return {incident_values_.data() + incident_offsets_[e],
          incident_offsets_[e + 1] - incident_offsets_[e]};
}

std::span<const std::uint32_t> KnowledgeGraph::with_relation(RelationId r) const {
  if (r >= num_relations_) return {};
  return {relation_values_.data() + relation_offsets_[r],
          relation_offsets_[r + 1] - relation_offsets_[r]};
}

bool GraphOverlay::add(const Triple& t) {
  if (in(added_, t)) return false;
  auto it = std::find(removed_.begin(), removed_.end(), t);
  if (it != removed_.end()) {
    removed_.erase(it);
    return true;
  }
  if (base_->contains(t)) return false;
  added_.push_back(t);
  return true;
}

bool GraphOverlay::remove(const Triple& t) {
  auto it = std::find(added_.begin(), added_.end(), t);
  if (it != added_.end()) {
    added_.erase(it);
    return true;
  }
  if (!base_->contains(t) || in(removed_, t)) return false;
  removed_.push_back(t);
  return true;
}

bool GraphOverlay::contains(const Triple& t) const {
  if (in(added_, t)) return true;
  return base_->contains(t) && !in(removed_, t);
}

std::vector<EntityId> GraphOverlay::neighbors(RelationId r, EntityId fixed, Slot slot,
                                              const std::optional<Triple>& exclude) const {
  std::vector<EntityId> out;
  for_each_neighbor(r, fixed, slot, [&](EntityId e) { out.push_back(e); }, exclude);
  return out;
}

bool GraphOverlay::has_neighbor(RelationId r, EntityId fixed, Slot slot,
                                const std::optional<Triple>& exclude) const {
  const bool head_fixed = slot == Slot::HeadFixed;
  auto run = head_fixed ? base_->tails(fixed, r) : base_->heads(r, fixed);
  for (EntityId e : run) {
    Triple t = head_fixed ? Triple{fixed, r, e} : Triple{e, r, fixed};
    if (exclude && *exclude == t) continue;
    if (!removed_.empty() && in(removed_, t)) continue;
    return true;
  }
  for (const auto& t : added_) {
    if (t.relation != r || (exclude && *exclude == t)) continue;
    if (head_fixed ? t.head == fixed : t.tail == fixed) return true;
  }
  return false;
}

bool GraphOverlay::connected(EntityId a, EntityId b, const std::optional<Triple>& exclude,
                             Connectivity mode) const {
  auto directed = [&](EntityId h, EntityId t) {
    for (RelationId r : base_->relations_between(h, t)) {
      Triple x{h, r, t};
      if (exclude && *exclude == x) continue;
      if (!removed_.empty() && in(removed_, x)) continue;
      return true;
    }
    for (const auto& x : added_)
      if (x.head == h && x.tail == t && !(exclude && *exclude == x)) return true;
    return false;
  };
  if (directed(a, b)) return true;
  return mode == Connectivity::Undirected && a != b && directed(b, a);
}

std::vector<Triple> GraphOverlay::effective_triples() const {
  std::vector<Triple> out;
  out.reserve(size());
  for (const auto& t : base_->triples())
    if (removed_.empty() || !in(removed_, t)) out.push_back(t);
  out.insert(out.end(), added_.begin(), added_.end());
  return out;
}

Split make_split(Vocabulary vocab, std::vector<Triple> train, std::vector<Triple> valid,
                 std::vector<Triple> test) {
  Split split;
  split.train = KnowledgeGraph(std::move(train), vocab.num_entities(), vocab.num_relations());

  auto dedupe = [](std::vector<Triple>& v) {
    std::unordered_set<Triple, TripleHash> seen;
    std::erase_if(v, [&](const Triple& t) { return !seen.insert(t).second; });
  };
  dedupe(valid);
  dedupe(test);

  std::unordered_set<Triple, TripleHash> valid_set(valid.begin(), valid.end());
  for (const auto& t : valid)
    if (split.train.contains(t))
      throw DataError("valid triple also in train: " + vocab.format(t));
  for (const auto& t : test) {
    if (split.train.contains(t)) throw DataError("test triple also in train: " + vocab.format(t));
    if (valid_set.contains(t)) throw DataError("test triple also in valid: " + vocab.format(t));
  }

  split.vocab = std::move(vocab);
  split.valid = std::move(valid);
  split.test = std::move(test);
  return split;
}

}  // namespace kgclab
