#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "lfc/image.hpp"

namespace lfc {

enum class ViewRole { kReference, kNonReference };

/// One entry of the pseudo-video sequence.
struct SequenceEntry {
  int poc = 0;
  AngularPos pos;
  int tl = 0;  // temporal layer, 0..4
  ViewRole role = ViewRole::kReference;
};

/// poc -> set of reference POCs. Every edge points to a strictly lower
/// temporal layer, so the graph is acyclic and any prefix of layers is
/// independently decodable.
struct DependencyGraph {
  std::map<int, std::set<int>> edges;

  const std::set<int>& refs(int poc) const {
    static const std::set<int> kEmpty;
    auto it = edges.find(poc);
    return it == edges.end() ? kEmpty : it->second;
  }
};

/// Views of one light field arranged as a pseudo-video sequence, one GOP per
/// quadrant. Slot k of GOP g has POC g*gop_size + k.
struct PseudoVideoSequence {
  int grid_rows = 0;
  int grid_cols = 0;
  int gop_size = 0;
  std::vector<SequenceEntry> entries;  // sorted by POC, 0..N-1

  int view_count() const { return static_cast<int>(entries.size()); }
  int gop_count() const { return view_count() / gop_size; }

  const SequenceEntry& by_poc(int poc) const { return entries[static_cast<size_t>(poc)]; }
  int poc_of(AngularPos pos) const;

  /// Global coding order: ascending (temporal layer, POC). Lower layers are
  /// always reconstructed before anything that references them.
  std::vector<int> coding_order() const;
};

struct CodingStructure {
  PseudoVideoSequence sequence;
  DependencyGraph deps;
};

/// A (TL4, TL3, TL4) slot group subject to a joint keep/drop decision.
struct RdoTriple {
  int poc_tl4_a = 0;
  int poc_tl3 = 0;
  int poc_tl4_b = 0;
};

/// The four corner positions of each grid quadrant (16 for an 8x8 grid). The
/// inner corner of the top-left quadrant is the central view. Requires even
/// grid dimensions >= 4.
std::vector<AngularPos> reference_layout(int grid_rows, int grid_cols);

/// Central reference view position for the given grid.
AngularPos central_view(int grid_rows, int grid_cols);

/// Build the pseudo-video sequence and its dependency graph. Supported grids:
/// 4x4 (degenerate, all views are reference) and 8x8.
CodingStructure build_sequence(int grid_rows, int grid_cols);

/// The per-GOP (TL4, TL3, TL4) groups, in POC order. Empty for grids without
/// TL3/TL4 layers.
std::vector<RdoTriple> rdo_triples(const PseudoVideoSequence& seq);

/// Angular positions of sequence entries whose POC is absent from the
/// bitstream, in POC order. A missing reference-role POC raises CorruptStream.
std::vector<AngularPos> detect_missing(const std::set<int>& bitstream_pocs,
                                       const PseudoVideoSequence& seq);

/// Debug/fixture dump: CSV with poc,u,v,tl,role.
void dump_sequence_csv(const PseudoVideoSequence& seq, const std::filesystem::path& path);

}  // namespace lfc
