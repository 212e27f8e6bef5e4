#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kgclab/graph.hpp"

namespace kgclab {

struct TsvStats {
  std::size_t lines = 0;
  std::size_t triples = 0;
  std::size_t duplicates = 0;
};

// Reads head<TAB>relation<TAB>tail lines, interning labels into `vocab` in
// first-appearance order. Blank lines are skipped; a trailing CR is tolerated.
// Duplicate lines are returned once and counted in `stats`.
std::vector<Triple> read_triples(const std::filesystem::path& path, Vocabulary& vocab,
                                 TsvStats* stats = nullptr);

struct LoadedGraph {
  Vocabulary vocab;
  KnowledgeGraph graph;
  TsvStats stats;
};

LoadedGraph load_tsv(const std::filesystem::path& path);

// Loads train.txt, valid.txt and test.txt from `dir`. valid.txt may be absent.
Split load_split(const std::filesystem::path& dir);

void write_triples(const std::filesystem::path& path, std::span<const Triple> triples,
                   const Vocabulary& vocab);
void write_split(const std::filesystem::path& dir, const Split& split);

// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace kgclab
