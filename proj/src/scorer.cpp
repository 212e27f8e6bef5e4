#include "kgclab/scorer.hpp"

namespace kgclab {

void Scorer::score_all(const Query& q, const GraphOverlay& graph, std::span<double> scores) const {
  for (std::size_t c = 0; c < scores.size(); ++c)
    scores[c] = score(q.direction, q.with_candidate(static_cast<EntityId>(c)), graph);
}

}  // namespace kgclab
