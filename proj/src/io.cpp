#include "kgclab/io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

namespace kgclab {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return ss.str();
}

std::vector<Triple> read_triples(const fs::path& path, Vocabulary& vocab, TsvStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());

  TsvStats local;
  std::vector<Triple> out;
  std::unordered_set<Triple, TripleHash> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++local.lines;

    std::string_view fields[3];
    std::size_t count = 0, start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      std::string_view field(line.data() + start, (tab == std::string::npos ? line.size() : tab) - start);
      if (count < 3) fields[count] = field;
      ++count;
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (count != 3)
      throw ParseError(path.string(), lineno,
                       "expected 3 tab-separated fields, found " + std::to_string(count));
    for (auto& f : fields)
      if (f.empty()) throw ParseError(path.string(), lineno, "empty field");

    Triple t{vocab.entities.intern(fields[0]), vocab.relations.intern(fields[1]),
             vocab.entities.intern(fields[2])};
    if (seen.insert(t).second)
      out.push_back(t);
    else
      ++local.duplicates;
  }
  if (in.bad()) throw IoError("read failed for " + path.string());

  local.triples = out.size();
  if (local.duplicates > 0)
    spdlog::warn("{}: collapsed {} duplicate triple(s)", path.string(), local.duplicates);
  if (stats) *stats = local;
  return out;
}

LoadedGraph load_tsv(const fs::path& path) {
  LoadedGraph g;
  auto triples = read_triples(path, g.vocab, &g.stats);
  g.graph = KnowledgeGraph(std::move(triples), g.vocab.num_entities(), g.vocab.num_relations());
  return g;
}

Split load_split(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  Vocabulary vocab;
  auto train = read_triples(dir / "train.txt", vocab);
  std::vector<Triple> valid;
  if (fs::exists(dir / "valid.txt")) valid = read_triples(dir / "valid.txt", vocab);
  auto test = read_triples(dir / "test.txt", vocab);
  return make_split(std::move(vocab), std::move(train), std::move(valid), std::move(test));
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

void write_triples(const fs::path& path, std::span<const Triple> triples, const Vocabulary& vocab) {
  std::string out;
  for (const auto& t : triples) {
    out += vocab.entities.label(t.head);
    out += '\t';
    out += vocab.relations.label(t.relation);
    out += '\t';
    out += vocab.entities.label(t.tail);
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_split(const fs::path& dir, const Split& split) {
  fs::create_directories(dir);
  write_triples(dir / "train.txt", split.train.triples(), split.vocab);
  write_triples(dir / "valid.txt", split.valid, split.vocab);
  write_triples(dir / "test.txt", split.test, split.vocab);
}

}  // namespace kgclab
