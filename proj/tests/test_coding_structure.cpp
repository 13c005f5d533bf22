#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "lfc/coding_structure.hpp"

using namespace lfc;

TEST_CASE("reference layout of the 8x8 grid") {
  const auto refs = reference_layout(8, 8);
  CHECK(refs.size() == 16);
  std::set<AngularPos> unique(refs.begin(), refs.end());
  CHECK(unique.size() == 16);
  const std::set<int> expect = {0, 3, 4, 7};
  for (AngularPos p : refs) {
    CHECK(expect.count(p.u) == 1);
    CHECK(expect.count(p.v) == 1);
  }
  CHECK(central_view(8, 8) == AngularPos{3, 3});
}

TEST_CASE("reference layout of the degenerate 4x4 grid is every cell") {
  const auto refs = reference_layout(4, 4);
  CHECK(refs.size() == 16);
  std::set<AngularPos> unique(refs.begin(), refs.end());
  CHECK(unique.size() == 16);
}

TEST_CASE("reference layout rejects odd or small grids") {
  CHECK_THROWS_AS(reference_layout(7, 8), InvalidArgument);
  CHECK_THROWS_AS(reference_layout(2, 2), InvalidArgument);
}

TEST_CASE("8x8 sequence structure") {
  const CodingStructure cs = build_sequence(8, 8);
  const PseudoVideoSequence& seq = cs.sequence;
  CHECK(seq.view_count() == 64);
  CHECK(seq.gop_size == 16);
  CHECK(seq.gop_count() == 4);

  // POCs dense 0..63, bijection with positions.
  std::set<AngularPos> seen;
  for (int poc = 0; poc < 64; ++poc) {
    const SequenceEntry& e = seq.by_poc(poc);
    CHECK(e.poc == poc);
    seen.insert(e.pos);
    CHECK(seq.poc_of(e.pos) == poc);
  }
  CHECK(seen.size() == 64);

  // Per-GOP temporal layer histogram (1,1,2,4,8).
  for (int g = 0; g < 4; ++g) {
    std::map<int, int> histogram;
    for (int s = 0; s < 16; ++s) histogram[seq.by_poc(g * 16 + s).tl]++;
    CHECK(histogram[0] == 1);
    CHECK(histogram[1] == 1);
    CHECK(histogram[2] == 2);
    CHECK(histogram[3] == 4);
    CHECK(histogram[4] == 8);
  }

  // 48 non-reference entries, all at TL 3 or 4.
  int nonref = 0;
  for (const SequenceEntry& e : seq.entries) {
    if (e.role == ViewRole::kNonReference) {
      ++nonref;
      CHECK(e.tl >= 3);
    } else {
      CHECK(e.tl <= 2);
    }
  }
  CHECK(nonref == 48);

  // Reference positions coincide with the corner layout.
  const auto layout = reference_layout(8, 8);
  for (const SequenceEntry& e : seq.entries) {
    const bool in_layout = std::find(layout.begin(), layout.end(), e.pos) != layout.end();
    CHECK(in_layout == (e.role == ViewRole::kReference));
  }
}

TEST_CASE("top-layer views depend on both immediate neighbours") {
  const CodingStructure cs = build_sequence(8, 8);
  for (const SequenceEntry& e : cs.sequence.entries) {
    if (e.tl != 4) continue;
    const auto& refs = cs.deps.refs(e.poc);
    CHECK(refs.count(e.poc - 1) == 1);
    if (e.poc + 1 < 64) {
      CHECK(refs.count(e.poc + 1) == 1);
    } else {
      CHECK(refs.size() == 1);  // final view leans on its left neighbour only
    }
    for (int r : refs) CHECK(cs.sequence.by_poc(r).tl <= 3);
  }
}

TEST_CASE("dependency edges strictly decrease the temporal layer and form a DAG") {
  for (auto [rows, cols] : {std::pair{4, 4}, std::pair{8, 8}}) {
    const CodingStructure cs = build_sequence(rows, cols);
    const int n = cs.sequence.view_count();
    // Edge property.
    for (const auto& [poc, refs] : cs.deps.edges) {
      for (int r : refs) {
        CHECK(cs.sequence.by_poc(r).tl < cs.sequence.by_poc(poc).tl);
      }
    }
    // Kahn toposort must consume every node.
    std::map<int, int> indegree;
    std::map<int, std::vector<int>> fwd;
    for (int poc = 0; poc < n; ++poc) indegree[poc] = 0;
    for (const auto& [poc, refs] : cs.deps.edges) {
      for (int r : refs) {
        fwd[r].push_back(poc);
        indegree[poc]++;
      }
    }
    std::vector<int> queue;
    for (const auto& [poc, deg] : indegree) {
      if (deg == 0) queue.push_back(poc);
    }
    int visited = 0;
    while (!queue.empty()) {
      const int poc = queue.back();
      queue.pop_back();
      ++visited;
      for (int next : fwd[poc]) {
        if (--indegree[next] == 0) queue.push_back(next);
      }
    }
    CHECK(visited == n);
    // Coding order is consistent with the dependencies.
    std::map<int, int> order_index;
    const auto order = cs.sequence.coding_order();
    for (size_t i = 0; i < order.size(); ++i) order_index[order[i]] = static_cast<int>(i);
    for (const auto& [poc, refs] : cs.deps.edges) {
      for (int r : refs) CHECK(order_index[r] < order_index[poc]);
    }
  }
}

TEST_CASE("build_sequence rejects unsupported grids") {
  CHECK_THROWS_AS(build_sequence(6, 6), InvalidArgument);
  CHECK_THROWS_AS(build_sequence(8, 4), InvalidArgument);
}

TEST_CASE("rdo triples partition the non-reference views") {
  const CodingStructure cs = build_sequence(8, 8);
  const auto triples = rdo_triples(cs.sequence);
  CHECK(triples.size() == 16);
  std::set<int> covered;
  for (const RdoTriple& t : triples) {
    CHECK(cs.sequence.by_poc(t.poc_tl4_a).tl == 4);
    CHECK(cs.sequence.by_poc(t.poc_tl3).tl == 3);
    CHECK(cs.sequence.by_poc(t.poc_tl4_b).tl == 4);
    for (int poc : {t.poc_tl4_a, t.poc_tl3, t.poc_tl4_b}) {
      CHECK(covered.insert(poc).second);  // no overlap
    }
  }
  CHECK(covered.size() == 48);
  for (const SequenceEntry& e : cs.sequence.entries) {
    if (e.tl >= 3) CHECK(covered.count(e.poc) == 1);
  }
}

TEST_CASE("triples are empty for the degenerate grid") {
  const CodingStructure cs = build_sequence(4, 4);
  CHECK(rdo_triples(cs.sequence).empty());
}

TEST_CASE("detect_missing recovers drop sets") {
  const CodingStructure cs = build_sequence(8, 8);
  const PseudoVideoSequence& seq = cs.sequence;

  std::set<int> all;
  for (int poc = 0; poc < 64; ++poc) all.insert(poc);
  CHECK(detect_missing(all, seq).empty());

  std::set<int> no_tl4 = all;
  for (const SequenceEntry& e : seq.entries) {
    if (e.tl == 4) no_tl4.erase(e.poc);
  }
  const auto missing = detect_missing(no_tl4, seq);
  CHECK(missing.size() == 32);
  // POC order and position mapping.
  int prev = -1;
  for (AngularPos pos : missing) {
    const int poc = seq.poc_of(pos);
    CHECK(seq.by_poc(poc).tl == 4);
    CHECK(poc > prev);
    prev = poc;
  }

  std::set<int> missing_ref = all;
  missing_ref.erase(0);  // TL0 anchor
  CHECK_THROWS_AS(detect_missing(missing_ref, seq), CorruptStream);
}

TEST_CASE("sequence csv dump") {
  namespace fs = std::filesystem;
  const CodingStructure cs = build_sequence(8, 8);
  const fs::path path = fs::temp_directory_path() / "seq_dump.csv";
  dump_sequence_csv(cs.sequence, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "poc,u,v,tl,role");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == 64);
  fs::remove(path);
}
