#include <doctest.h>

#include "kgclab/aggregator.hpp"
#include "kgclab/patterns.hpp"
#include "kgclab/perturb.hpp"
#include "kgclab/synth.hpp"
#include "support/oracles.hpp"

using namespace kgclab;

namespace {

struct ZooModel {
  Split split = gen_zoo({100});
  RuleSet rules = mine_rules(split.train, {});
  RelationId follows = split.vocab.relation("follows");
  FeatureIndex index = FeatureIndex::single(rules, split.vocab.num_relations(),
                                            {{follows, Direction::Head, SlotType::HeadSame, follows}});
  LinearModel model = train(split.train, rules, index, {});
};

const ZooModel& zoo_model() {
  static ZooModel m;
  return m;
}

}  // namespace

TEST_SUITE("perturb") {
  TEST_CASE("add-oot against the penalty scorer") {
    auto s = gen_zoo({100});
    const double eps = 0.1;
    PenaltyScorer sc({PenaltyMode::OOT, eps, 5}, s.train);
    PerturbConfig cfg;
    cfg.cases_per_fact = 20;
    auto rep = run_add_oot(sc, s, s.vocab.relation("follows"), cfg);
    REQUIRE(rep.n_cases == 20);
    for (const auto& c : rep.cases) {
      CHECK(c.delta_attack() <= -1.0);
      CHECK(c.delta_attack() >= -(1.0 + 2 * eps));
      CHECK(c.delta_random() == 0.0);
      CHECK(c.random_facts.at(0).relation != c.influential_fact.relation);
      CHECK(c.base_fact == c.test_fact);
      CHECK_FALSE(s.train.contains(c.influential_fact));
    }
    CHECK(rep.delta_random.mean == 0.0);
  }

  TEST_CASE("add-oot against the aggregator moves the score by beta") {
    const auto& z = zoo_model();
    AggregatorScorer sc(z.rules, z.index, z.model);
    PerturbConfig cfg;
    cfg.cases_per_fact = 25;
    auto rep = run_add_oot(sc, z.split, z.follows, cfg);
    REQUIRE(rep.n_cases == 25);
    std::size_t checked = 0;
    for (const auto& c : rep.cases) {
      REQUIRE(c.attack_flip.has_value());
      if (c.attack_flip->rules_changed()) continue;
      ++checked;
      CHECK(c.delta_attack() == doctest::Approx(z.model.beta[0]).epsilon(1e-12));
      CHECK(c.attack_flip->analytic_delta == doctest::Approx(c.delta_attack()).epsilon(1e-12));
      if (!c.random_flip->any()) CHECK(c.delta_random() == 0.0);
    }
    CHECK(checked > 0);
  }

  TEST_CASE("del-oot against the penalty scorer") {
    auto s = gen_zoo({100});
    const double eps = 0.1;
    PenaltyScorer sc({PenaltyMode::OOT, eps, 5}, s.train);
    PerturbConfig cfg;
    cfg.cases_per_fact = 20;
    auto rep = run_del_oot(sc, s, s.vocab.relation("follows"), cfg);
    REQUIRE(rep.n_cases == 20);
    for (const auto& c : rep.cases) {
      CHECK(c.delta_attack() >= 1.0);
      CHECK(c.delta_attack() <= 1.0 + 2 * eps);
      CHECK(c.delta_random() == 0.0);
      CHECK(c.influential_fact.head != c.test_fact.head);
      CHECK(c.influential_fact.tail != c.test_fact.tail);
      CHECK(c.random_facts.at(0) != c.influential_fact);
      CHECK(s.train.contains(c.random_facts.at(0)));
    }
  }

  TEST_CASE("del-oot against the aggregator removes beta") {
    const auto& z = zoo_model();
    AggregatorScorer sc(z.rules, z.index, z.model);
    PerturbConfig cfg;
    cfg.cases_per_fact = 10;
    auto rep = run_del_oot(sc, z.split, z.follows, cfg);
    std::size_t checked = 0;
    for (const auto& c : rep.cases) {
      if (c.attack_flip->rules_changed()) continue;
      ++checked;
      CHECK(c.delta_attack() == doctest::Approx(-z.model.beta[0]).epsilon(1e-12));
    }
    CHECK(checked > 0);
  }

  TEST_CASE("a second witness keeps the existence feature on") {
    // p(x,a), p(x,b): deleting one leaves z = 1 for base p(x,c).
    Vocabulary v;
    for (auto n : {"x", "a", "b", "c", "s", "o"}) v.entities.intern(n);
    v.relations.intern("p");
    auto s = make_split(v, {{0, 0, 1}, {0, 0, 2}, {4, 0, 3}}, {}, {{4, 0, 5}});
    RuleSet none;
    auto idx = FeatureIndex::single(none, 1, {{0, Direction::Head, SlotType::HeadSame, 0}});
    auto m = LinearModel::zeros(idx);
    m.beta[0] = -3.0;
    AggregatorScorer sc(none, idx, m);
    PerturbConfig cfg;
    cfg.cases_per_fact = 10;
    auto rep = run_del_oot(sc, s, 0, cfg);
    REQUIRE(rep.n_cases > 0);
    for (const auto& c : rep.cases) {
      CHECK(c.base_fact.head == 0);
      CHECK(c.delta_attack() == 0.0);
    }
  }

  TEST_CASE("add-ool against the penalty scorer") {
    // Needs a pair-disjoint split; on uni the test pair is already linked.
    auto s = gen_pair_disjoint({60, 4, 500, 40, 2});
    const double eps = 0.2;
    PenaltyScorer sc({PenaltyMode::OOL, eps, 1}, s.train);
    PerturbConfig cfg;
    for (Direction d : kDirections) {
      auto rep = run_add_ool(sc, s, d, cfg);
      REQUIRE(rep.n_cases == s.test.size());
      for (const auto& c : rep.cases) {
        CHECK(c.delta_attack() <= -1.0);
        CHECK(c.delta_attack() >= -(1.0 + 2 * eps));
        REQUIRE(c.random_facts.size() == 2);
        CHECK(c.random_facts[0].tail != c.test_fact.tail);
        CHECK(c.random_facts[1].head != c.test_fact.head);
        CHECK(c.delta_random() == 0.0);
      }
    }
  }

  TEST_CASE("del-ool with an unreachable threshold yields an empty report") {
    auto s = gen_uni({3, 5});
    PenaltyScorer sc({PenaltyMode::OOL, 0.1, 1}, s.train);
    PerturbConfig cfg;
    cfg.tau = 100.0;
    cfg.cases_per_fact = 5;
    auto rep = run_del_ool(sc, s, Direction::Tail, cfg);
    CHECK(rep.empty());
    CHECK(rep.n_below_tau == 5);
    CHECK(rep.delta_attack.mean == 0.0);
    auto j = to_json(rep, s.vocab);
    CHECK(j["empty"] == true);
    CHECK(to_text(rep).find("no cases") != std::string::npos);
  }

  TEST_CASE("del-ool attack removes the link between base endpoints") {
    auto s = gen_pair_disjoint({60, 4, 500, 40, 3});
    PenaltyScorer sc({PenaltyMode::OOL, 0.1, 1}, s.train);
    PerturbConfig cfg;
    cfg.tau = -10.0;  // keep everything
    for (Direction d : kDirections) {
      auto rep = run_del_ool(sc, s, d, cfg);
      REQUIRE(rep.n_cases > 0);
      for (const auto& c : rep.cases) {
        const auto& i = c.influential_fact;
        const auto& b = c.base_fact;
        CHECK(((i.head == b.head && i.tail == b.tail) || (i.head == b.tail && i.tail == b.head)));
        const auto& r = c.random_facts.at(0);
        EntityId anchor = d == Direction::Tail ? b.head : b.tail;
        CHECK(r.head != anchor);
        CHECK(r.tail != anchor);
        // Single link: removing it lifts the OOL penalty.
        if (!GraphOverlay(s.train).connected(b.head, b.tail, i)) CHECK(c.delta_attack() > 0.9);
      }
    }
  }

  TEST_CASE("isolation and determinism") {
    const auto& z = zoo_model();
    AggregatorScorer sc(z.rules, z.index, z.model);
    PerturbConfig cfg;
    cfg.cases_per_fact = 8;
    auto a = run_add_oot(sc, z.split, z.follows, cfg);
    auto b = run_add_oot(sc, z.split, z.follows, cfg);
    REQUIRE(a.n_cases == b.n_cases);
    GraphOverlay fresh(z.split.train);
    for (std::size_t i = 0; i < a.n_cases; ++i) {
      CHECK(a.cases[i].influential_fact == b.cases[i].influential_fact);
      CHECK(a.cases[i].random_facts == b.cases[i].random_facts);
      CHECK(a.cases[i].score_after_attack == b.cases[i].score_after_attack);
      CHECK(sc.score(Direction::Head, a.cases[i].base_fact, fresh) == a.cases[i].score_before);
    }
    CHECK(to_json(a, z.split.vocab) == to_json(b, z.split.vocab));
  }

  TEST_CASE("summary uses the population deviation") {
    auto s = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == 2.5);
    CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
    CHECK(summarize({}).mean == 0.0);
  }

  TEST_CASE("rank after add") {
    auto s = gen_zoo({100});
    ConstantScorer flat(0.0);
    auto r = rank_after_add(flat, s, Protocol::AddOot, s.vocab.relation("follows"));
    CHECK(r.attack.joint().mrr() == r.original.joint().mrr());
    CHECK(r.n_perturbed == 1);

    const auto& z = zoo_model();
    auto m = z.model;
    m.beta[0] = -12.0;
    AggregatorScorer sc(z.rules, z.index, m);
    auto ra = rank_after_add(sc, z.split, Protocol::AddOot, z.follows);
    CHECK(ra.original.group("follows", Direction::Head).mrr() == 1.0);
    const double attacked = ra.attack.group("follows", Direction::Head).mrr();
    CHECK(attacked < 0.05);
    CHECK(attacked > 1.0 / 101);
    CHECK(ra.random.group("follows", Direction::Head).mrr() == 1.0);
    CHECK_THROWS_AS(rank_after_add(sc, z.split, Protocol::DelOot, z.follows), ConfigError);
  }

  TEST_CASE("protocol preconditions") {
    auto s = gen_zoo({10});
    ConstantScorer flat;
    CHECK_THROWS_AS(run_add_oot(flat, s, s.vocab.relation("visits")), ConfigError);
    PerturbConfig bad;
    bad.cases_per_fact = 0;
    CHECK_THROWS_AS(run_add_oot(flat, s, s.vocab.relation("follows"), bad), ConfigError);
  }
}
