#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "kgclab/io.hpp"
#include "kgclab/synth.hpp"
#include "support/oracles.hpp"

using namespace kgclab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("kgclab_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("load_tsv counts entities and relations") {
    auto d = temp_dir("load");
    write_text(d / "g.txt", "a\tp\tb\nb\tp\tc\na\tq\tc\n");
    auto g = load_tsv(d / "g.txt");
    CHECK(g.graph.size() == 3);
    CHECK(g.vocab.num_entities() == 3);
    CHECK(g.vocab.num_relations() == 2);
    CHECK(g.vocab.entities.label(0) == "a");
    CHECK(g.vocab.entities.label(2) == "c");
    fs::remove_all(d);
  }

  TEST_CASE("load_tsv on an empty file") {
    auto d = temp_dir("empty");
    write_text(d / "g.txt", "");
    auto g = load_tsv(d / "g.txt");
    CHECK(g.graph.empty());
    CHECK(g.vocab.num_entities() == 0);
    CHECK(g.vocab.num_relations() == 0);
    fs::remove_all(d);
  }

  TEST_CASE("malformed line reports its line number") {
    auto d = temp_dir("bad");
    write_text(d / "g.txt", "a\tp\n");
    try {
      load_tsv(d / "g.txt");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
    write_text(d / "h.txt", "a\tp\tb\n\nx\ty\tz\tw\n");
    try {
      load_tsv(d / "h.txt");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(load_tsv(d / "missing.txt"), IoError);
    fs::remove_all(d);
  }

  TEST_CASE("duplicates collapse with a count, CRLF tolerated") {
    auto d = temp_dir("dup");
    write_text(d / "g.txt", "a\tp\tb\r\na\tp\tb\r\nb\tp\ta\r\n");
    auto g = load_tsv(d / "g.txt");
    CHECK(g.graph.size() == 2);
    CHECK(g.stats.duplicates == 1);
    CHECK(g.vocab.entities.find("b").has_value());
    fs::remove_all(d);
  }

  TEST_CASE("interning is bijective") {
    Interner in;
    for (std::string s : {"x", "y", "x", "z", "y"}) in.intern(s);
    CHECK(in.size() == 3);
    for (std::uint32_t i = 0; i < in.size(); ++i) CHECK(in.intern(in.label(i)) == i);
    CHECK_FALSE(in.find("nope").has_value());
  }

  TEST_CASE("connected on the zoo split") {
    auto s = gen_zoo({100});
    GraphOverlay o(s.train);
    auto s0 = s.vocab.entity("s0"), s1 = s.vocab.entity("s1"), zoo = s.vocab.entity("zoo");
    CHECK(o.connected(s0, zoo));
    CHECK_FALSE(o.connected(s0, s1));
    CHECK(o.connected(zoo, s0));
  }

  TEST_CASE("connected respects exclusion and directed mode") {
    KnowledgeGraph g({{0, 0, 1}}, 2, 1);
    GraphOverlay o(g);
    CHECK(o.connected(0, 1));
    CHECK(o.connected(1, 0));
    CHECK_FALSE(o.connected(0, 1, Triple{0, 0, 1}));
    CHECK(o.connected(0, 1, std::nullopt, Connectivity::Directed));
    CHECK_FALSE(o.connected(1, 0, std::nullopt, Connectivity::Directed));
    CHECK_FALSE(o.connected(0, 0));
  }

  TEST_CASE("neighbors on the zoo split") {
    auto s = gen_zoo({100});
    GraphOverlay o(s.train);
    auto follows = s.vocab.relation("follows");
    auto n2 = o.neighbors(follows, s.vocab.entity("s2"), Slot::HeadFixed);
    CHECK(n2 == std::vector<EntityId>{s.vocab.entity("s3")});
    CHECK(o.neighbors(follows, s.vocab.entity("s0"), Slot::HeadFixed).empty());
    GraphOverlay o2 = o;
    o2.add({s.vocab.entity("s0"), follows, s.vocab.entity("s5")});
    CHECK(o2.neighbors(follows, s.vocab.entity("s0"), Slot::HeadFixed) ==
          std::vector<EntityId>{s.vocab.entity("s5")});
    // The original overlay is untouched.
    CHECK(o.neighbors(follows, s.vocab.entity("s0"), Slot::HeadFixed).empty());
  }

  TEST_CASE("overlay matches a naive set rebuild") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      auto rg = oracle::random_graph(seed, 25, 3, 120);
      KnowledgeGraph g(rg.triples, rg.n_entities, rg.n_relations);
      GraphOverlay o(g);
      std::set<Triple> naive(rg.triples.begin(), rg.triples.end());
      std::mt19937_64 rng(seed * 77);
      std::uniform_int_distribution<EntityId> e(0, 24);
      std::uniform_int_distribution<RelationId> r(0, 2);
      for (int step = 0; step < 60; ++step) {
        Triple t{e(rng), r(rng), e(rng)};
        if (rng() % 2) {
          bool changed = o.add(t);
          CHECK(changed == naive.insert(t).second);
        } else {
          bool changed = o.remove(t);
          CHECK(changed == (naive.erase(t) == 1));
        }
      }
      CHECK(o.size() == naive.size());
      auto eff = o.effective_triples();
      CHECK(std::set<Triple>(eff.begin(), eff.end()) == naive);
      // Invariants: added disjoint from base, removed within base.
      for (const auto& t : o.added()) CHECK_FALSE(g.contains(t));
      for (const auto& t : o.removed()) CHECK(g.contains(t));
      std::vector<Triple> nv(naive.begin(), naive.end());
      for (EntityId x = 0; x < 25; ++x) {
        for (RelationId p = 0; p < 3; ++p) {
          for (Slot sl : {Slot::HeadFixed, Slot::TailFixed}) {
            auto got = o.neighbors(p, x, sl);
            CHECK(std::set<EntityId>(got.begin(), got.end()) == oracle::neighbors(nv, p, x, sl));
            CHECK(o.has_neighbor(p, x, sl) == !oracle::neighbors(nv, p, x, sl).empty());
          }
        }
        for (EntityId y = 0; y < 25; ++y) {
          CHECK(o.connected(x, y) == oracle::connected(nv, x, y));
          CHECK(o.connected(x, y) == o.connected(y, x));
        }
      }
    }
  }

  TEST_CASE("index consistency on random graphs") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
      auto rg = oracle::random_graph(seed, 60, 4, 1000);
      KnowledgeGraph g(rg.triples, rg.n_entities, rg.n_relations);
      CHECK(g.size() == rg.triples.size());
      GraphOverlay o(g);
      for (EntityId x = 0; x < 60; ++x)
        for (RelationId p = 0; p < 4; ++p) {
          auto tails = g.tails(x, p);
          CHECK(std::set<EntityId>(tails.begin(), tails.end()) ==
                oracle::neighbors(rg.triples, p, x, Slot::HeadFixed));
          auto heads = g.heads(p, x);
          CHECK(std::set<EntityId>(heads.begin(), heads.end()) ==
                oracle::neighbors(rg.triples, p, x, Slot::TailFixed));
        }
      std::size_t incident_total = 0;
      for (EntityId x = 0; x < 60; ++x)
        for (auto idx : g.incident(x)) {
          const auto& t = g.triple(idx);
          CHECK((t.head == x || t.tail == x));
          ++incident_total;
        }
      std::size_t expect = 0;
      for (const auto& t : rg.triples) expect += t.head == t.tail ? 1 : 2;
      CHECK(incident_total == expect);
    }
  }

  TEST_CASE("out-of-range ids are a defect") {
    CHECK_THROWS_AS(KnowledgeGraph({{0, 0, 5}}, 2, 1), DefectError);
  }

  TEST_CASE("split disjointness is enforced") {
    Vocabulary v;
    v.entities.intern("a");
    v.entities.intern("b");
    v.relations.intern("p");
    CHECK_THROWS_AS(make_split(v, {{0, 0, 1}}, {}, {{0, 0, 1}}), DataError);
    CHECK_THROWS_AS(make_split(v, {}, {{0, 0, 1}}, {{0, 0, 1}}), DataError);
    CHECK_NOTHROW(make_split(v, {{0, 0, 1}}, {}, {{1, 0, 0}}));
  }

  TEST_CASE("split round trip through TSV") {
    auto d = temp_dir("rt");
    auto s = gen_uni({3, 5});
    write_split(d, s);
    auto back = load_split(d);
    auto names = [](const Split& x, std::span<const Triple> ts) {
      std::set<std::string> out;
      for (const auto& t : ts) out.insert(x.vocab.format(t));
      return out;
    };
    CHECK(names(s, s.train.triples()) == names(back, back.train.triples()));
    CHECK(names(s, s.test) == names(back, back.test));
    CHECK(back.valid.empty());
    // Serialising again yields identical bytes.
    auto d2 = temp_dir("rt2");
    write_split(d2, back);
    CHECK(read_file(d / "train.txt") == read_file(d2 / "train.txt"));
    fs::remove_all(d);
    fs::remove_all(d2);
  }
}
