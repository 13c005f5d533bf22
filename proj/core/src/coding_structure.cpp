#include "lfc/coding_structure.hpp"

#include <algorithm>
#include <fstream>

namespace lfc {

namespace {

// Quadrants in GOP order: top-left, top-right, bottom-left, bottom-right.
struct Quadrant {
  int row0, col0, rows, cols;

  AngularPos outer_corner(int grid_rows, int grid_cols) const {
    // The quadrant corner that is also a corner of the full grid.
    const int u = row0 == 0 ? 0 : grid_rows - 1;
    const int v = col0 == 0 ? 0 : grid_cols - 1;
    return {u, v};
  }
  AngularPos inner_corner(int grid_rows, int grid_cols) const {
    const int u = row0 == 0 ? row0 + rows - 1 : row0;
    const int v = col0 == 0 ? col0 + cols - 1 : col0;
    (void)grid_rows;
    (void)grid_cols;
    return {u, v};
  }
  std::vector<AngularPos> corners() const {
    return {{row0, col0},
            {row0, col0 + cols - 1},
            {row0 + rows - 1, col0},
            {row0 + rows - 1, col0 + cols - 1}};
  }
  bool contains(AngularPos p) const {
    return p.u >= row0 && p.u < row0 + rows && p.v >= col0 && p.v < col0 + cols;
  }
};

std::vector<Quadrant> quadrants(int grid_rows, int grid_cols) {
  const int qr = grid_rows / 2;
  const int qc = grid_cols / 2;
  return {{0, 0, qr, qc}, {0, qc, qr, qc}, {qr, 0, qr, qc}, {qr, qc, qr, qc}};
}

void check_grid(int grid_rows, int grid_cols) {
  if (grid_rows < 4 || grid_cols < 4 || grid_rows % 2 != 0 || grid_cols % 2 != 0) {
    throw InvalidArgument("grid dimensions must be even and >= 4");
  }
}

// Ring cells of a square block in clockwise cyclic order starting from the
// given corner of the ring.
std::vector<AngularPos> ring_clockwise_from(int top, int left, int size, AngularPos start) {
  std::vector<AngularPos> ring;
  if (size == 1) {
    ring.push_back({top, left});
    return ring;
  }
  const int bottom = top + size - 1;
  const int right = left + size - 1;
  for (int v = left; v < right; ++v) ring.push_back({top, v});
  for (int u = top; u < bottom; ++u) ring.push_back({u, right});
  for (int v = right; v > left; --v) ring.push_back({bottom, v});
  for (int u = bottom; u > top; --u) ring.push_back({u, left});
  auto it = std::find(ring.begin(), ring.end(), start);
  std::rotate(ring.begin(), it, ring.end());
  return ring;
}

// Clockwise spiral of a square quadrant, ring by ring from the outside in.
// Each ring starts at its corner nearest the quadrant's outer corner, so the
// first non-corner cell is adjacent to the outer corner.
std::vector<AngularPos> spiral_clockwise(const Quadrant& q, AngularPos outer) {
  std::vector<AngularPos> order;
  int top = q.row0, left = q.col0, size = q.rows;  // square quadrants only
  // Direction of the outer corner relative to the quadrant.
  const bool at_bottom = outer.u != q.row0;
  const bool at_right = outer.v != q.col0;
  while (size > 0) {
    AngularPos start{at_bottom ? top + size - 1 : top, at_right ? left + size - 1 : left};
    auto ring = ring_clockwise_from(top, left, size, start);
    order.insert(order.end(), ring.begin(), ring.end());
    ++top;
    ++left;
    size -= 2;
  }
  return order;
}

// Temporal layer of a GOP slot: TL(0) = 0, otherwise depth minus the number
// of trailing zero bits, yielding the usual hierarchical-B layering.
int slot_tl(int slot, int gop_size) {
  int depth = 0;
  while ((1 << depth) < gop_size) ++depth;
  if (slot == 0) return 0;
  int tz = 0;
  while ((slot & (1 << tz)) == 0) ++tz;
  return depth - tz;
}

}  // namespace

std::vector<AngularPos> reference_layout(int grid_rows, int grid_cols) {
  check_grid(grid_rows, grid_cols);
  std::vector<AngularPos> refs;
  for (const Quadrant& q : quadrants(grid_rows, grid_cols)) {
    for (AngularPos c : q.corners()) {
      if (std::find(refs.begin(), refs.end(), c) == refs.end()) refs.push_back(c);
    }
  }
  return refs;
}

AngularPos central_view(int grid_rows, int grid_cols) {
  check_grid(grid_rows, grid_cols);
  return quadrants(grid_rows, grid_cols)[0].inner_corner(grid_rows, grid_cols);
}

CodingStructure build_sequence(int grid_rows, int grid_cols) {
  check_grid(grid_rows, grid_cols);
  const auto quads = quadrants(grid_rows, grid_cols);
  const int gop = quads[0].rows * quads[0].cols;
  if (quads[0].rows != quads[0].cols || (gop != 4 && gop != 16)) {
    throw InvalidArgument("unsupported grid dimensions: quadrants must be 2x2 or 4x4");
  }

  CodingStructure cs;
  PseudoVideoSequence& seq = cs.sequence;
  seq.grid_rows = grid_rows;
  seq.grid_cols = grid_cols;
  seq.gop_size = gop;
  seq.entries.resize(static_cast<size_t>(grid_rows) * grid_cols);

  const auto ref_positions = reference_layout(grid_rows, grid_cols);
  const auto is_reference = [&](AngularPos p) {
    return std::find(ref_positions.begin(), ref_positions.end(), p) != ref_positions.end();
  };

  for (int g = 0; g < 4; ++g) {
    const Quadrant& q = quads[g];
    const AngularPos outer = q.outer_corner(grid_rows, grid_cols);
    const AngularPos inner = q.inner_corner(grid_rows, grid_cols);

    // Corner slots: outer corner, inner corner, then the remaining two
    // corners in row-major order.
    std::vector<AngularPos> rest;
    for (AngularPos c : q.corners()) {
      if (c != outer && c != inner) rest.push_back(c);
    }
    std::sort(rest.begin(), rest.end());
    std::vector<std::pair<int, AngularPos>> slot_map = {
        {0, outer}, {gop / 2, inner}, {gop / 4, rest[0]}, {3 * gop / 4, rest[1]}};

    // Non-corner views on the remaining slots, in clockwise-spiral order
    // starting adjacent to the outer corner.
    std::vector<int> open_slots;
    for (int s = 0; s < gop; ++s) {
      if (s != 0 && s != gop / 2 && s != gop / 4 && s != 3 * gop / 4) open_slots.push_back(s);
    }
    const auto corner_set = q.corners();
    std::vector<AngularPos> walk;
    for (AngularPos p : spiral_clockwise(q, outer)) {
      if (std::find(corner_set.begin(), corner_set.end(), p) == corner_set.end()) walk.push_back(p);
    }
    for (size_t i = 0; i < open_slots.size(); ++i) slot_map.emplace_back(open_slots[i], walk[i]);

    for (const auto& [slot, pos] : slot_map) {
      SequenceEntry e;
      e.poc = g * gop + slot;
      e.pos = pos;
      e.tl = slot_tl(slot, gop);
      e.role = is_reference(pos) ? ViewRole::kReference : ViewRole::kNonReference;
      seq.entries[static_cast<size_t>(e.poc)] = e;
    }
  }

  // Dependency graph. The top layer of each GOP leans on both immediate
  // neighbours; the final slot resolves its right neighbour to the next
  // GOP's anchor. All other slots reference the nearest lower layer on each
  // side within their GOP. Anchor slots are intra.
  DependencyGraph& dg = cs.deps;
  const int n = seq.view_count();
  const int top_tl = slot_tl(1, gop);
  for (int poc = 0; poc < n; ++poc) {
    const SequenceEntry& e = seq.entries[static_cast<size_t>(poc)];
    const int g = poc / gop;
    const int slot = poc % gop;
    std::set<int> refs;
    if (slot == 0) {
      dg.edges[poc] = {};
      continue;
    }
    if (e.tl == top_tl) {
      refs.insert(poc - 1);
      if (slot + 1 < gop) {
        refs.insert(poc + 1);
      } else if ((g + 1) * gop < n) {
        refs.insert((g + 1) * gop);
      }
    } else {
      for (int s = slot - 1; s >= 0; --s) {
        if (slot_tl(s, gop) < e.tl) {
          refs.insert(g * gop + s);
          break;
        }
      }
      for (int s = slot + 1; s < gop; ++s) {
        if (slot_tl(s, gop) < e.tl) {
          refs.insert(g * gop + s);
          break;
        }
      }
    }
    dg.edges[poc] = std::move(refs);
  }
  return cs;
}

int PseudoVideoSequence::poc_of(AngularPos pos) const {
  for (const SequenceEntry& e : entries) {
    if (e.pos == pos) return e.poc;
  }
  throw InvalidArgument("position not in sequence");
}

std::vector<int> PseudoVideoSequence::coding_order() const {
  std::vector<int> order(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ea = entries[static_cast<size_t>(a)];
    const auto& eb = entries[static_cast<size_t>(b)];
    if (ea.tl != eb.tl) return ea.tl < eb.tl;
    return ea.poc < eb.poc;
  });
  return order;
}

std::vector<RdoTriple> rdo_triples(const PseudoVideoSequence& seq) {
  std::vector<RdoTriple> triples;
  if (seq.gop_size < 16) return triples;
  for (int g = 0; g < seq.gop_count(); ++g) {
    for (int k = 0; k < seq.gop_size / 4; ++k) {
      const int base = g * seq.gop_size + 4 * k;
      triples.push_back({base + 1, base + 2, base + 3});
    }
  }
  return triples;
}

std::vector<AngularPos> detect_missing(const std::set<int>& bitstream_pocs,
                                       const PseudoVideoSequence& seq) {
  std::vector<AngularPos> missing;
  for (const SequenceEntry& e : seq.entries) {
    if (bitstream_pocs.count(e.poc)) continue;
    if (e.role == ViewRole::kReference) {
      throw CorruptStream("reference view POC " + std::to_string(e.poc) + " absent from bitstream");
    }
    missing.push_back(e.pos);
  }
  return missing;
}

void dump_sequence_csv(const PseudoVideoSequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "poc,u,v,tl,role\n";
  for (const SequenceEntry& e : seq.entries) {
    out << e.poc << "," << e.pos.u << "," << e.pos.v << "," << e.tl << ","
        << (e.role == ViewRole::kReference ? "reference" : "nonreference") << "\n";
  }
}

}  // namespace lfc
