#pragma once

#include <cstdint>

#include "kgclab/graph.hpp"

namespace kgclab {

// Students s0..s{n-1} in a follows-cycle, all visiting one zoo node.
// follows(s0, s1) is held out as the single test fact.
struct ZooConfig {
  int n_students = 100;
};

// n_groups copies of: k students asking and being answered by one professor,
// anna asking without an answer, bernd with no edge to the professor, and all
// of them members of one global uni node.
struct UniConfig {
  int n_groups = 3;
  int k_students = 5;
};

// Random multi-relational graph split so that no test fact's entity pair is
// connected in train, with a few planted path regularities so that rules
// have something to learn.
struct PairDisjointConfig {
  int n_entities = 60;
  int n_relations = 4;
  int n_train = 500;
  int n_test = 40;
  std::uint64_t seed = 7;
};

Split gen_zoo(const ZooConfig& cfg);
Split gen_uni(const UniConfig& cfg);
Split gen_pair_disjoint(const PairDisjointConfig& cfg);

}  // namespace kgclab
