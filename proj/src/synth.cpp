#include "kgclab/synth.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <unordered_set>

namespace kgclab {

Split gen_zoo(const ZooConfig& cfg) {
  if (cfg.n_students < 3) throw ConfigError("zoo: n_students must be >= 3");
  const int n = cfg.n_students;

  Vocabulary vocab;
  for (int i = 0; i < n; ++i) vocab.entities.intern("s" + std::to_string(i));
  const EntityId zoo = vocab.entities.intern("zoo");
  const RelationId follows = vocab.relations.intern("follows");
  const RelationId visits = vocab.relations.intern("visits");

  auto student = [](int i) { return static_cast<EntityId>(i); };
  std::vector<Triple> train;
  for (int i = 1; i < n; ++i) train.push_back({student(i), follows, student((i + 1) % n)});
  for (int i = 0; i < n; ++i) train.push_back({student(i), visits, zoo});

  std::vector<Triple> test{{student(0), follows, student(1)}};
  return make_split(std::move(vocab), std::move(train), {}, std::move(test));
}

Split gen_uni(const UniConfig& cfg) {
  if (cfg.n_groups < 1 || cfg.k_students < 1)
    throw ConfigError("uni: n_groups and k_students must be >= 1");

  Vocabulary vocab;
  const RelationId asked = vocab.relations.intern("asked");
  const RelationId answered = vocab.relations.intern("answered");
  const RelationId member = vocab.relations.intern("member");

  std::vector<Triple> train;
  std::vector<Triple> test;
  std::vector<EntityId> profs;
  std::vector<EntityId> annas;
  const EntityId uni = vocab.entities.intern("uni");

  for (int g = 0; g < cfg.n_groups; ++g) {
    const std::string gs = std::to_string(g);
    std::vector<EntityId> students;
    for (int i = 1; i <= cfg.k_students; ++i)
      students.push_back(vocab.entities.intern("student_" + gs + "_" + std::to_string(i)));
    const EntityId anna = vocab.entities.intern("anna_" + gs);
    const EntityId bernd = vocab.entities.intern("bernd_" + gs);
    const EntityId prof = vocab.entities.intern("professor_" + gs);

    for (EntityId s : students) {
      train.push_back({s, asked, prof});
      train.push_back({prof, answered, s});
    }
    train.push_back({anna, asked, prof});

    std::vector<EntityId> members = students;
    members.insert(members.end(), {anna, bernd, prof});
    for (EntityId m : members) train.push_back({m, member, uni});
    profs.push_back(prof);
    annas.push_back(anna);
  }

  // answered(professor_g, anna_g) is absent for every group; group 0's is the
  // evaluation fact.
  test.push_back({profs[0], answered, annas[0]});
  return make_split(std::move(vocab), std::move(train), {}, std::move(test));
}

Split gen_pair_disjoint(const PairDisjointConfig& cfg) {
  if (cfg.n_entities < 4 || cfg.n_relations < 2 || cfg.n_train < 1 || cfg.n_test < 1)
    throw ConfigError("pair-disjoint: need >= 4 entities, >= 2 relations, positive sizes");

  Vocabulary vocab;
  for (int i = 0; i < cfg.n_entities; ++i) vocab.entities.intern("e" + std::to_string(i));
  for (int r = 0; r < cfg.n_relations; ++r) vocab.relations.intern("r" + std::to_string(r));

  std::mt19937_64 rng(cfg.seed);
  const auto ne = static_cast<EntityId>(cfg.n_entities);
  const auto nr = static_cast<RelationId>(cfg.n_relations);
  std::uniform_int_distribution<EntityId> pick_e(0, ne - 1);
  std::uniform_int_distribution<RelationId> pick_base(0, nr - 2);
  std::bernoulli_distribution coin(0.5);

  std::unordered_set<Triple, TripleHash> seen;
  std::vector<Triple> facts;
  auto emit = [&](Triple t) {
    if (t.head == t.tail || !seen.insert(t).second) return;
    facts.push_back(t);
  };

  // Base relations are random; the last relation is derived from two-hop
  // chains r0(X,A), r1(A,Y) so that a length-2 path rule carries signal.
  const RelationId derived = nr - 1;
  const int total = cfg.n_train + cfg.n_test * 3;
  while (static_cast<int>(facts.size()) < total) {
    if (coin(rng)) {
      emit({pick_e(rng), pick_base(rng), pick_e(rng)});
    } else {
      EntityId x = pick_e(rng);
      EntityId a = pick_e(rng);
      EntityId y = pick_e(rng);
      if (x == a || a == y || x == y) continue;
      emit({x, 0, a});
      emit({a, nr > 2 ? 1u : 0u, y});
      emit({x, derived, y});
    }
  }

  // Pair-disjoint split: a fact may become test only if no other fact links
  // its two entities (in either direction).
  auto pair_key = [](EntityId a, EntityId b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  std::unordered_map<std::uint64_t, int> pair_count;
  for (const auto& t : facts) ++pair_count[pair_key(t.head, t.tail)];

  std::vector<std::size_t> order(facts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<char> is_test(facts.size(), 0);
  int n_test = 0;
  for (auto i : order) {
    if (n_test >= cfg.n_test) break;
    const Triple& t = facts[i];
    if (pair_count[pair_key(t.head, t.tail)] != 1) continue;
    is_test[i] = 1;
    ++n_test;
  }

  std::vector<Triple> train;
  std::vector<Triple> test;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    if (is_test[i])
      test.push_back(facts[i]);
    else if (static_cast<int>(train.size()) < cfg.n_train)
      train.push_back(facts[i]);
  }
  // A test fact's endpoints must still appear in train, or it is unrankable noise.
  std::unordered_set<EntityId> seen_in_train;
  for (const auto& t : train) {
    seen_in_train.insert(t.head);
    seen_in_train.insert(t.tail);
  }
  std::erase_if(test, [&](const Triple& t) {
    return !seen_in_train.contains(t.head) || !seen_in_train.contains(t.tail);
  });
  return make_split(std::move(vocab), std::move(train), {}, std::move(test));
}

}  // namespace kgclab
