#include "kgclab/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "kgclab/parallel.hpp"

namespace kgclab {

const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::AddOot: return "add-oot";
    case Protocol::DelOot: return "del-oot";
    case Protocol::AddOol: return "add-ool";
    case Protocol::DelOol: return "del-ool";
  }
  return "?";
}

bool FeatureFlip::rules_changed() const {
  auto is_rule = [](const ActiveFeature& f) { return f.kind == ActiveFeature::Kind::Rule; };
  return std::any_of(gained.begin(), gained.end(), is_rule) ||
         std::any_of(lost.begin(), lost.end(), is_rule);
}

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  double sum = 0;
  for (double x : xs) sum += x;
  s.mean = sum / xs.size();
  double sq = 0;
  for (double x : xs) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / xs.size());
  return s;
}

namespace {

using Rng = std::mt19937_64;

EntityId random_entity(Rng& rng, std::size_t n) {
  return static_cast<EntityId>(std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng));
}

// Uniform relation other than `not_this`; requires at least two relations.
RelationId random_other_relation(Rng& rng, std::size_t n, RelationId not_this) {
  auto r = static_cast<RelationId>(std::uniform_int_distribution<std::uint64_t>(0, n - 2)(rng));
  return r >= not_this ? r + 1 : r;
}

template <class Draw>
std::optional<Triple> sample(Rng& rng, int attempts, Draw&& draw) {
  for (int i = 0; i < attempts; ++i)
    if (auto t = draw(rng)) return t;
  return std::nullopt;
}

struct Arms {
  Triple base;
  Triple influential;
  bool influential_added = true;  // add protocols; deletions otherwise
  std::vector<Triple> random_facts;
  bool random_added = true;
};

// --- samplers, one per protocol ---------------------------------------------

std::optional<Arms> sample_add_oot(const KnowledgeGraph& train, const Triple& f, Rng& rng, int attempts) {
  const std::size_t ne = train.num_entities();
  if (train.num_relations() < 2) return std::nullopt;
  auto infl = sample(rng, attempts, [&](Rng& g) -> std::optional<Triple> {
    EntityId o2 = random_entity(g, ne);
    Triple t{f.head, f.relation, o2};
    if (o2 == f.tail || o2 == f.head || train.contains(t)) return std::nullopt;
    return t;
  });
  if (!infl) return std::nullopt;
  auto rnd = sample(rng, attempts, [&](Rng& g) -> std::optional<Triple> {
    Triple t{f.head, random_other_relation(g, train.num_relations(), f.relation), infl->tail};
    if (train.contains(t)) return std::nullopt;
    return t;
  });
  if (!rnd) return std::nullopt;
  return Arms{f, *infl, true, {*rnd}, true};
}

std::optional<Arms> sample_del_oot(const KnowledgeGraph& train, const Triple& f, Rng& rng, int attempts) {
  auto pool = train.with_relation(f.relation);
  if (pool.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  Triple base{};
  auto infl = sample(rng, attempts, [&](Rng& g) -> std::optional<Triple> {
    const Triple& t = train.triple(pool[pick(g)]);
    // s' must differ from s, and e from o, or the base collapses onto the influential fact.
    if (t.head == f.head || t.tail == f.tail || t.head == f.tail) return std::nullopt;
    Triple b{t.head, f.relation, f.tail};
    if (train.contains(b)) return std::nullopt;
    base = b;
    return t;
  });
  if (!infl) return std::nullopt;
  std::vector<Triple> others;
  for (auto idx : train.incident(infl->head))
    if (train.triple(idx) != *infl) others.push_back(train.triple(idx));
  if (others.empty()) return std::nullopt;
  Triple rnd = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
  return Arms{base, *infl, false, {rnd}, false};
}

std::optional<Arms> sample_add_ool(const KnowledgeGraph& train, const Triple& f, Rng& rng, int attempts) {
  const std::size_t ne = train.num_entities();
  const std::size_t nr = train.num_relations();
  if (nr < 2 || f.head == f.tail) return std::nullopt;
  auto infl = sample(rng, attempts, [&](Rng& g) -> std::optional<Triple> {
    Triple t{f.head, random_other_relation(g, nr, f.relation), f.tail};
    if (train.contains(t)) return std::nullopt;
    return t;
  });
  if (!infl) return std::nullopt;
  auto r1 = sample(rng, attempts, [&](Rng& g) -> std::optional<Triple> {
    Triple t{f.head, random_other_relation(g, nr, f.relation), random_entity(g, ne)};
    if (t.tail == f.tail || t.tail == f.head || train.contains(t)) return std::nullopt;
    return t;
  });
  auto r2 = sample(rng, attempts, [&](Rng& g) -> std::optional<Triple> {
    Triple t{random_entity(g, ne), random_other_relation(g, nr, f.relation), f.tail};
    if (t.head == f.head || t.head == f.tail || train.contains(t)) return std::nullopt;
    return t;
  });
  if (!r1 || !r2) return std::nullopt;
  return Arms{f, *infl, true, {*r1, *r2}, true};
}

std::optional<Arms> sample_del_ool(const KnowledgeGraph& train, const Triple& f, Direction d, Rng& rng,
                                   int attempts) {
  // The candidate side of the base fact is the pivot; the anchor is the other
  // endpoint of the influential fact.
  const EntityId pivot = d == Direction::Tail ? f.tail : f.head;
  auto pool = train.incident(pivot);
  if (pool.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  Triple base{};
  EntityId anchor = 0;
  auto infl = sample(rng, attempts, [&](Rng& g) -> std::optional<Triple> {
    const Triple& t = train.triple(pool[pick(g)]);
    if (t.head == t.tail) return std::nullopt;
    EntityId e = t.head == pivot ? t.tail : t.head;
    Triple b = d == Direction::Tail ? Triple{e, f.relation, pivot} : Triple{pivot, f.relation, e};
    if (train.contains(b)) return std::nullopt;
    base = b;
    anchor = e;
    return t;
  });
  if (!infl) return std::nullopt;
  std::vector<Triple> others;
  for (auto idx : pool) {
    const Triple& t = train.triple(idx);
    if (t != *infl && t.head != anchor && t.tail != anchor) others.push_back(t);
  }
  if (others.empty()) return std::nullopt;
  Triple rnd = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
  return Arms{base, *infl, false, {rnd}, false};
}

std::optional<Arms> sample_arms(Protocol p, const KnowledgeGraph& train, const Triple& f, Direction d,
                                Rng& rng, int attempts) {
  switch (p) {
    case Protocol::AddOot: return sample_add_oot(train, f, rng, attempts);
    case Protocol::DelOot: return sample_del_oot(train, f, rng, attempts);
    case Protocol::AddOol: return sample_add_ool(train, f, rng, attempts);
    case Protocol::DelOol: return sample_del_ool(train, f, d, rng, attempts);
  }
  return std::nullopt;
}

GraphOverlay attack_overlay(const KnowledgeGraph& train, const Arms& a) {
  GraphOverlay o(train);
  if (a.influential_added) o.add(a.influential);
  else o.remove(a.influential);
  return o;
}

GraphOverlay random_overlay(const KnowledgeGraph& train, const Arms& a) {
  GraphOverlay o(train);
  for (const auto& t : a.random_facts) {
    if (a.random_added) o.add(t);
    else o.remove(t);
  }
  return o;
}

std::uint64_t case_seed(const PerturbConfig& cfg, Protocol p, Direction d, std::size_t fact, int c) {
  return mix_seed(cfg.seed, static_cast<std::uint64_t>(p), index_of(d), fact,
                  static_cast<std::uint64_t>(c));
}

FeatureFlip diff(const Explanation& before, const Explanation& after) {
  auto less = [](const ActiveFeature& a, const ActiveFeature& b) {
    return std::pair(a.kind, a.id) < std::pair(b.kind, b.id);
  };
  FeatureFlip f;
  std::set_difference(after.features.begin(), after.features.end(), before.features.begin(),
                      before.features.end(), std::back_inserter(f.gained), less);
  std::set_difference(before.features.begin(), before.features.end(), after.features.begin(),
                      after.features.end(), std::back_inserter(f.lost), less);
  for (const auto& x : f.gained) f.analytic_delta += x.weight;
  for (const auto& x : f.lost) f.analytic_delta -= x.weight;
  return f;
}

enum class Outcome { Case, Skipped, BelowTau };

PerturbationReport run(Protocol protocol, const Scorer& scorer, const Split& split, Direction d,
                       std::optional<RelationId> target, const PerturbConfig& cfg) {
  if (cfg.cases_per_fact < 1) throw ConfigError("cases_per_fact must be >= 1");
  const KnowledgeGraph& train = split.train;
  std::vector<std::size_t> facts;
  for (std::size_t i = 0; i < split.test.size(); ++i)
    if (!target || split.test[i].relation == *target) facts.push_back(i);
  if (facts.empty()) {
    if (target)
      throw ConfigError("relation '" + split.vocab.relations.label(*target) + "' has no test facts");
    throw ConfigError("test set is empty");
  }

  struct Slot {
    Outcome outcome = Outcome::Skipped;
    PerturbationCase pc;
  };
  const std::size_t k = static_cast<std::size_t>(cfg.cases_per_fact);
  std::vector<Slot> slots(facts.size() * k);

  parallel_for(slots.size(), [&](std::size_t s) {
    const std::size_t fact = facts[s / k];
    const int c = static_cast<int>(s % k);
    const Triple& f = split.test[fact];
    Rng rng(case_seed(cfg, protocol, d, fact, c));
    auto arms = sample_arms(protocol, train, f, d, rng, cfg.max_attempts);
    if (!arms) return;

    PerturbationCase& pc = slots[s].pc;
    pc.test_fact = f;
    pc.base_fact = arms->base;
    pc.influential_fact = arms->influential;
    pc.random_facts = arms->random_facts;
    pc.direction = d;
    GraphOverlay original(train);
    pc.score_before = scorer.score(d, arms->base, original);
    if (protocol == Protocol::DelOol && !(pc.score_before > cfg.tau)) {
      slots[s].outcome = Outcome::BelowTau;
      return;
    }
    GraphOverlay attacked = attack_overlay(train, *arms);
    GraphOverlay randomised = random_overlay(train, *arms);
    pc.score_after_attack = scorer.score(d, arms->base, attacked);
    pc.score_after_random = scorer.score(d, arms->base, randomised);
    if (auto before = scorer.explain(d, arms->base, original)) {
      pc.attack_flip = diff(*before, *scorer.explain(d, arms->base, attacked));
      pc.random_flip = diff(*before, *scorer.explain(d, arms->base, randomised));
    }
    slots[s].outcome = Outcome::Case;
  });

  PerturbationReport rep;
  rep.protocol = protocol;
  rep.direction = d;
  rep.scorer = scorer.name();
  rep.target_relation = target;
  rep.tau = cfg.tau;
  rep.seed = cfg.seed;
  rep.mirrored_pattern = (protocol == Protocol::AddOot || protocol == Protocol::DelOot) &&
                         d == Direction::Tail;
  std::vector<double> before, da, dr;
  for (auto& s : slots) {
    switch (s.outcome) {
      case Outcome::Skipped: ++rep.n_skipped; break;
      case Outcome::BelowTau: ++rep.n_below_tau; break;
      case Outcome::Case:
        before.push_back(s.pc.score_before);
        da.push_back(s.pc.delta_attack());
        dr.push_back(s.pc.delta_random());
        rep.cases.push_back(std::move(s.pc));
        break;
    }
  }
  rep.n_cases = rep.cases.size();
  rep.before = summarize(before);
  rep.delta_attack = summarize(da);
  rep.delta_random = summarize(dr);
  return rep;
}

}  // namespace

PerturbationReport run_add_oot(const Scorer& scorer, const Split& split, RelationId target,
                               const PerturbConfig& cfg) {
  return run(Protocol::AddOot, scorer, split, Direction::Head, target, cfg);
}

PerturbationReport run_del_oot(const Scorer& scorer, const Split& split, RelationId target,
                               const PerturbConfig& cfg) {
  if (split.train.with_relation(target).empty())
    throw ConfigError("relation '" + split.vocab.relations.label(target) + "' has no train facts");
  return run(Protocol::DelOot, scorer, split, Direction::Head, target, cfg);
}

PerturbationReport run_add_ool(const Scorer& scorer, const Split& split, Direction direction,
                               const PerturbConfig& cfg) {
  return run(Protocol::AddOol, scorer, split, direction, std::nullopt, cfg);
}

PerturbationReport run_del_ool(const Scorer& scorer, const Split& split, Direction direction,
                               const PerturbConfig& cfg) {
  return run(Protocol::DelOol, scorer, split, direction, std::nullopt, cfg);
}

AddRankResult rank_after_add(const Scorer& scorer, const Split& split, Protocol protocol,
                             std::optional<RelationId> target, const PerturbConfig& cfg,
                             const EvalOptions& opts) {
  if (protocol != Protocol::AddOot && protocol != Protocol::AddOol)
    throw ConfigError("rank_after_add takes add-oot or add-ool");
  if (protocol == Protocol::AddOot && !target) throw ConfigError("add-oot needs a target relation");
  const KnowledgeGraph& train = split.train;
  KnownAnswers known(split);

  struct Row {
    bool perturbed = false;
    bool skipped = false;
    std::vector<Ranking> original, attack, random;
  };
  std::vector<Row> rows(split.test.size());
  parallel_for(split.test.size(), [&](std::size_t i) {
    const Triple& f = split.test[i];
    Row& row = rows[i];
    GraphOverlay original(train);
    std::optional<Arms> arms;
    if (protocol == Protocol::AddOol || f.relation == *target) {
      // Same draw as case 0 of the matching report.
      Rng rng(case_seed(cfg, protocol, protocol == Protocol::AddOot ? Direction::Head : Direction::Tail,
                        i, 0));
      arms = sample_arms(protocol, train, f, Direction::Head, rng, cfg.max_attempts);
      row.skipped = !arms;
    }
    row.perturbed = arms.has_value();
    for (Direction d : opts.directions) {
      Query q = Query::from_triple(f, d);
      Ranking base = rank_query(scorer, q, original, known, opts);
      row.original.push_back(base);
      if (arms) {
        row.attack.push_back(rank_query(scorer, q, attack_overlay(train, *arms), known, opts));
        row.random.push_back(rank_query(scorer, q, random_overlay(train, *arms), known, opts));
      } else {
        row.attack.push_back(base);
        row.random.push_back(base);
      }
    }
  });

  AddRankResult out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string& rel = split.vocab.relations.label(split.test[i].relation);
    for (std::size_t j = 0; j < rows[i].original.size(); ++j) {
      out.original.add(rel, rows[i].original[j]);
      out.attack.add(rel, rows[i].attack[j]);
      out.random.add(rel, rows[i].random[j]);
    }
    out.n_perturbed += rows[i].perturbed;
    out.n_skipped += rows[i].skipped;
  }
  return out;
}

namespace {

nlohmann::json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

nlohmann::json flip_json(const FeatureFlip& f) {
  auto list = [](const std::vector<ActiveFeature>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : v)
      a.push_back({{"kind", x.kind == ActiveFeature::Kind::Rule ? "rule" : "existence"},
                   {"id", x.id},
                   {"weight", x.weight}});
    return a;
  };
  return {{"gained", list(f.gained)}, {"lost", list(f.lost)}, {"analytic_delta", f.analytic_delta}};
}

}  // namespace

nlohmann::json to_json(const PerturbationReport& r, const Vocabulary& vocab, bool with_cases) {
  nlohmann::json j = {{"report", "perturbation"},
                      {"protocol", to_string(r.protocol)},
                      {"direction", to_string(r.direction)},
                      {"scorer", r.scorer},
                      {"seed", r.seed},
                      {"tau", r.tau},
                      {"n_cases", r.n_cases},
                      {"n_skipped", r.n_skipped},
                      {"n_below_tau", r.n_below_tau},
                      {"empty", r.empty()},
                      {"mirrored_pattern", r.mirrored_pattern},
                      {"score_before", summary_json(r.before)},
                      {"delta_attack", summary_json(r.delta_attack)},
                      {"delta_random", summary_json(r.delta_random)}};
  j["target_relation"] =
      r.target_relation ? nlohmann::json(vocab.relations.label(*r.target_relation)) : nlohmann::json();
  if (with_cases) {
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : r.cases) {
      nlohmann::json randoms = nlohmann::json::array();
      for (const auto& t : c.random_facts) randoms.push_back(vocab.format(t));
      nlohmann::json row = {{"test_fact", vocab.format(c.test_fact)},
                            {"base_fact", vocab.format(c.base_fact)},
                            {"influential_fact", vocab.format(c.influential_fact)},
                            {"random_facts", randoms},
                            {"score_before", c.score_before},
                            {"score_after_attack", c.score_after_attack},
                            {"score_after_random", c.score_after_random}};
      if (c.attack_flip) row["attack_flip"] = flip_json(*c.attack_flip);
      if (c.random_flip) row["random_flip"] = flip_json(*c.random_flip);
      cases.push_back(row);
    }
    j["cases"] = cases;
  }
  return j;
}

std::string to_text(const PerturbationReport& r) {
  char buf[256];
  if (r.empty()) {
    std::snprintf(buf, sizeof buf, "%s (%s): no cases (%zu skipped, %zu below tau)\n",
                  to_string(r.protocol), to_string(r.direction), r.n_skipped, r.n_below_tau);
    return buf;
  }
  std::snprintf(buf, sizeof buf,
                "%s (%s) n=%zu  avg score %.2f  attack %.2f +- %.2f  random %.2f +- %.2f\n",
                to_string(r.protocol), to_string(r.direction), r.n_cases, r.before.mean,
                r.delta_attack.mean, r.delta_attack.std, r.delta_random.mean, r.delta_random.std);
  return buf;
}

}  // namespace kgclab
