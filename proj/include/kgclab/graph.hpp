#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgclab/types.hpp"

namespace kgclab {

// Bijective label <-> dense id mapping. Ids are handed out in first-seen order.
class Interner {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct Vocabulary {
  Interner entities;
  Interner relations;

  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }

  EntityId entity(std::string_view label) const;
  RelationId relation(std::string_view label) const;
  std::string format(const Triple& t) const;
};

// Which argument of a relation is bound when asking for neighbours.
// HeadFixed: {e : r(fixed, e)}; TailFixed: {e : r(e, fixed)}.
enum class Slot : std::uint8_t { HeadFixed, TailFixed };

enum class Connectivity : std::uint8_t { Undirected, Directed };

// Immutable triple store with hash-addressed adjacency runs.
//
// Every index is a flat array of ids grouped into runs; a hash map
// addresses each run by its packed key. Runs in the (head, relation) and
// (relation, tail) indexes are sorted so neighbour sets are deterministic.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  // Duplicates are collapsed and counted. Entity/relation counts must cover
  // every id used by the triples.
  KnowledgeGraph(std::vector<Triple> triples, std::size_t num_entities, std::size_t num_relations);

  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }
  std::size_t duplicates_collapsed() const { return duplicates_; }

  std::span<const Triple> triples() const { return triples_; }
  const Triple& triple(std::uint32_t index) const { return triples_[index]; }
  bool contains(const Triple& t) const { return set_.contains(t); }

  std::span<const EntityId> tails(EntityId head, RelationId r) const;
  std::span<const EntityId> heads(RelationId r, EntityId tail) const;
  // Relations r with r(head, tail); direction-sensitive.
  std::span<const RelationId> relations_between(EntityId head, EntityId tail) const;
  // Indices of all triples mentioning e in either slot.
  std::span<const std::uint32_t> incident(EntityId e) const;
  // Indices of all triples of relation r, in insertion order.
  std::span<const std::uint32_t> with_relation(RelationId r) const;

 private:
  struct Run {
    std::uint32_t offset = 0;
    std::uint32_t length = 0;
  };

  static std::uint64_t key(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }

  std::vector<Triple> triples_;
  std::unordered_set<Triple, TripleHash> set_;
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::size_t duplicates_ = 0;

  std::vector<EntityId> sp_values_;
  std::unordered_map<std::uint64_t, Run> sp_runs_;
  std::vector<EntityId> po_values_;
  std::unordered_map<std::uint64_t, Run> po_runs_;
  std::vector<RelationId> pair_values_;
  std::unordered_map<std::uint64_t, Run> pair_runs_;

  std::vector<std::uint32_t> incident_offsets_;
  std::vector<std::uint32_t> incident_values_;
  std::vector<std::uint32_t> relation_offsets_;
  std::vector<std::uint32_t> relation_values_;
};

// A perturbed view of a KnowledgeGraph: (base \ removed) U added.
//
// The base graph is never touched, so every perturbation experiment can be
// expressed as a fresh overlay over the original training graph. An overlay
// is a cheap value; copy it to branch.
class GraphOverlay {
 public:
  explicit GraphOverlay(const KnowledgeGraph& base) : base_(&base) {}

  const KnowledgeGraph& base() const { return *base_; }
  std::span<const Triple> added() const { return added_; }
  std::span<const Triple> removed() const { return removed_; }
  bool pristine() const { return added_.empty() && removed_.empty(); }

  // Both return whether the effective triple set changed.
  bool add(const Triple& t);
  bool remove(const Triple& t);

  bool contains(const Triple& t) const;
  std::size_t size() const { return base_->size() - removed_.size() + added_.size(); }

  // Calls f(e) for every e in the neighbour set, skipping the excluded triple.
  template <class F>
  void for_each_neighbor(RelationId r, EntityId fixed, Slot slot, F&& f,
                         const std::optional<Triple>& exclude = std::nullopt) const;

  std::vector<EntityId> neighbors(RelationId r, EntityId fixed, Slot slot,
                                  const std::optional<Triple>& exclude = std::nullopt) const;
  bool has_neighbor(RelationId r, EntityId fixed, Slot slot,
                    const std::optional<Triple>& exclude = std::nullopt) const;

  // True iff some effective triple r(a,b) (or r(b,a) when undirected) exists,
  // ignoring `exclude`.
  bool connected(EntityId a, EntityId b, const std::optional<Triple>& exclude = std::nullopt,
                 Connectivity mode = Connectivity::Undirected) const;

  // Calls f(triple) for every effective triple that mentions e.
  template <class F>
  void for_each_incident(EntityId e, F&& f) const;

  std::vector<Triple> effective_triples() const;

 private:
  static bool in(std::span<const Triple> v, const Triple& t) {
    for (const auto& x : v)
      if (x == t) return true;
    return false;
  }

  const KnowledgeGraph* base_;
  std::vector<Triple> added_;
  std::vector<Triple> removed_;
};

template <class F>
void GraphOverlay::for_each_neighbor(RelationId r, EntityId fixed, Slot slot, F&& f,
                                     const std::optional<Triple>& exclude) const {
  const bool head_fixed = slot == Slot::HeadFixed;
  auto run = head_fixed ? base_->tails(fixed, r) : base_->heads(r, fixed);
  for (EntityId e : run) {
    Triple t = head_fixed ? Triple{fixed, r, e} : Triple{e, r, fixed};
    if (exclude && *exclude == t) continue;
    if (!removed_.empty() && in(removed_, t)) continue;
    f(e);
  }
  for (const auto& t : added_) {
    if (t.relation != r) continue;
    if (exclude && *exclude == t) continue;
    if (head_fixed && t.head == fixed) f(t.tail);
    if (!head_fixed && t.tail == fixed) f(t.head);
  }
}

template <class F>
void GraphOverlay::for_each_incident(EntityId e, F&& f) const {
  for (std::uint32_t idx : base_->incident(e)) {
    const Triple& t = base_->triple(idx);
    if (!removed_.empty() && in(removed_, t)) continue;
    f(t);
  }
  for (const auto& t : added_)
    if (t.head == e || t.tail == e) f(t);
}

// Train graph plus held-out evaluation facts over one shared vocabulary.
struct Split {
  Vocabulary vocab;
  KnowledgeGraph train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
};

// Builds a split, checking that train/valid/test are pairwise disjoint.
Split make_split(Vocabulary vocab, std::vector<Triple> train, std::vector<Triple> valid,
                 std::vector<Triple> test);

}  // namespace kgclab
