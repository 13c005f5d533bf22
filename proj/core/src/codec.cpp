#include "lfc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "lfc/bits.hpp"
#include "lfc/dct.hpp"

namespace lfc {

namespace {

constexpr int kBlock = kDctSize;
constexpr uint32_t kEobRun = 64;  // valid runs are 0..63
constexpr char kMagic[4] = {'L', 'F', 'D', '2'};

const std::array<int, 64>& zigzag_order() {
  static const std::array<int, 64> order = [] {
    std::array<int, 64> o{};
    int idx = 0;
    for (int s = 0; s < 15; ++s) {
      if (s % 2 == 0) {  // up-right
        for (int y = std::min(s, 7); y >= std::max(0, s - 7); --y) o[idx++] = y * 8 + (s - y);
      } else {  // down-left
        for (int y = std::max(0, s - 7); y <= std::min(s, 7); ++y) o[idx++] = y * 8 + (s - y);
      }
    }
    return o;
  }();
  return order;
}

Plane8 pad_to_block_grid(const Plane8& p) {
  const int w8 = (p.width + kBlock - 1) / kBlock * kBlock;
  const int h8 = (p.height + kBlock - 1) / kBlock * kBlock;
  if (w8 == p.width && h8 == p.height) return p;
  Plane8 out(w8, h8);
  for (int y = 0; y < h8; ++y) {
    const int sy = std::min(y, p.height - 1);
    for (int x = 0; x < w8; ++x) out.at(x, y) = p.at(std::min(x, p.width - 1), sy);
  }
  return out;
}

uint8_t sample_clamped(const Plane8& p, int x, int y) {
  x = std::clamp(x, 0, p.width - 1);
  y = std::clamp(y, 0, p.height - 1);
  return p.at(x, y);
}

struct Mv {
  int x = 0;
  int y = 0;
};

void fetch_block(const Plane8& ref, int bx, int by, Mv mv, int out[kBlock * kBlock]) {
  for (int y = 0; y < kBlock; ++y) {
    for (int x = 0; x < kBlock; ++x) {
      out[y * kBlock + x] = sample_clamped(ref, bx + x + mv.x, by + y + mv.y);
    }
  }
}

long block_sad(const int a[kBlock * kBlock], const int b[kBlock * kBlock]) {
  long sad = 0;
  for (int i = 0; i < kBlock * kBlock; ++i) sad += std::abs(a[i] - b[i]);
  return sad;
}

// Full-pel search, zero vector first; any other vector must strictly improve.
Mv motion_search(const int cur[kBlock * kBlock], const Plane8& ref, int bx, int by, int range) {
  int cand[kBlock * kBlock];
  fetch_block(ref, bx, by, {0, 0}, cand);
  long best_sad = block_sad(cur, cand);
  Mv best{0, 0};
  for (int my = -range; my <= range; ++my) {
    for (int mx = -range; mx <= range; ++mx) {
      if (mx == 0 && my == 0) continue;
      fetch_block(ref, bx, by, {mx, my}, cand);
      const long sad = block_sad(cur, cand);
      if (sad < best_sad) {
        best_sad = sad;
        best = {mx, my};
      }
    }
  }
  return best;
}

struct BlockPrediction {
  int mode = 0;  // with 2 refs: 0 = first ref, 1 = second ref, 2 = average
  std::vector<Mv> mvs;
  int pred[kBlock * kBlock] = {};
};

BlockPrediction predict_inter(const int cur[kBlock * kBlock], const std::vector<const Plane8*>& refs,
                              int bx, int by, int range) {
  BlockPrediction out;
  std::vector<Mv> mvs(refs.size());
  std::vector<std::array<int, kBlock * kBlock>> blocks(refs.size());
  for (size_t r = 0; r < refs.size(); ++r) {
    mvs[r] = motion_search(cur, *refs[r], bx, by, range);
    fetch_block(*refs[r], bx, by, mvs[r], blocks[r].data());
  }
  // Candidates in preference order; strict improvement required to switch.
  long best_sad = block_sad(cur, blocks[0].data());
  int best_mode = 0;
  if (refs.size() == 2) {
    const long sad1 = block_sad(cur, blocks[1].data());
    if (sad1 < best_sad) {
      best_sad = sad1;
      best_mode = 1;
    }
    std::array<int, kBlock * kBlock> avg{};
    for (int i = 0; i < kBlock * kBlock; ++i) {
      avg[i] = (blocks[0][i] + blocks[1][i] + 1) / 2;
    }
    if (block_sad(cur, avg.data()) < best_sad) {
      best_mode = 2;
      std::copy(avg.begin(), avg.end(), out.pred);
    }
  }
  out.mode = best_mode;
  if (best_mode == 0) {
    out.mvs = {mvs[0]};
    std::copy(blocks[0].begin(), blocks[0].end(), out.pred);
  } else if (best_mode == 1) {
    out.mvs = {mvs[1]};
    std::copy(blocks[1].begin(), blocks[1].end(), out.pred);
  } else {
    out.mvs = {mvs[0], mvs[1]};
  }
  return out;
}

void code_residual(const int cur[kBlock * kBlock], const int pred[kBlock * kBlock], double qstep,
                   BitWriter& bw, int recon[kBlock * kBlock]) {
  Block residual{};
  for (int i = 0; i < kBlock * kBlock; ++i) residual[i] = cur[i] - pred[i];
  const Block freq = dct8x8_forward(residual);

  std::array<int32_t, 64> levels{};
  bool any = false;
  for (int i = 0; i < 64; ++i) {
    levels[i] = static_cast<int32_t>(std::lround(freq[i] / qstep));
    any = any || levels[i] != 0;
  }
  bw.put_bit(any ? 1 : 0);
  Block recon_freq{};
  if (any) {
    const auto& zz = zigzag_order();
    uint32_t run = 0;
    for (int i = 0; i < 64; ++i) {
      const int32_t level = levels[zz[i]];
      if (level == 0) {
        ++run;
        continue;
      }
      bw.put_ue(run);
      bw.put_se(level);
      run = 0;
      recon_freq[zz[i]] = level * qstep;
    }
    bw.put_ue(kEobRun);
  }
  const Block rec = dct8x8_inverse(recon_freq);
  for (int i = 0; i < kBlock * kBlock; ++i) {
    recon[i] = std::clamp(pred[i] + static_cast<int>(std::lround(rec[i])), 0, 255);
  }
}

void decode_residual(BitReader& br, const int pred[kBlock * kBlock], double qstep,
                     int recon[kBlock * kBlock]) {
  Block recon_freq{};
  if (br.get_bit()) {
    const auto& zz = zigzag_order();
    int i = 0;
    while (true) {
      const uint32_t run = br.get_ue();
      if (run == kEobRun) break;
      if (run > 63 || i + static_cast<int>(run) > 63) {
        throw MalformedPayload("coefficient run out of range");
      }
      i += static_cast<int>(run);
      const int32_t level = br.get_se();
      if (level == 0) throw MalformedPayload("zero coefficient level");
      recon_freq[zz[i]] = level * qstep;
      ++i;
    }
  }
  const Block rec = dct8x8_inverse(recon_freq);
  for (int i = 0; i < kBlock * kBlock; ++i) {
    recon[i] = std::clamp(pred[i] + static_cast<int>(std::lround(rec[i])), 0, 255);
  }
}

Plane8 encode_plane(const Plane8& plane, const std::vector<const Plane8*>& refs_raw, int qp,
                    int range, BitWriter& bw) {
  const Plane8 cur = pad_to_block_grid(plane);
  std::vector<Plane8> padded_refs;
  std::vector<const Plane8*> refs;
  padded_refs.reserve(refs_raw.size());
  for (const Plane8* r : refs_raw) {
    padded_refs.push_back(pad_to_block_grid(*r));
    refs.push_back(&padded_refs.back());
  }
  const double qstep = qstep_for_qp(qp);
  Plane8 recon_padded(cur.width, cur.height);
  int cur_blk[kBlock * kBlock];
  int recon_blk[kBlock * kBlock];
  for (int by = 0; by < cur.height; by += kBlock) {
    for (int bx = 0; bx < cur.width; bx += kBlock) {
      for (int y = 0; y < kBlock; ++y) {
        for (int x = 0; x < kBlock; ++x) cur_blk[y * kBlock + x] = cur.at(bx + x, by + y);
      }
      if (refs.empty()) {
        int pred[kBlock * kBlock];
        std::fill(pred, pred + kBlock * kBlock, 128);
        code_residual(cur_blk, pred, qstep, bw, recon_blk);
      } else {
        BlockPrediction bp = predict_inter(cur_blk, refs, bx, by, range);
        if (refs.size() == 2) bw.put_ue(static_cast<uint32_t>(bp.mode));
        for (const Mv& mv : bp.mvs) {
          bw.put_se(mv.x);
          bw.put_se(mv.y);
        }
        code_residual(cur_blk, bp.pred, qstep, bw, recon_blk);
      }
      for (int y = 0; y < kBlock; ++y) {
        for (int x = 0; x < kBlock; ++x) recon_padded.at(bx + x, by + y) = static_cast<uint8_t>(recon_blk[y * kBlock + x]);
      }
    }
  }
  if (recon_padded.width == plane.width && recon_padded.height == plane.height) return recon_padded;
  Plane8 recon(plane.width, plane.height);
  for (int y = 0; y < plane.height; ++y) {
    for (int x = 0; x < plane.width; ++x) recon.at(x, y) = recon_padded.at(x, y);
  }
  return recon;
}

Plane8 decode_plane(BitReader& br, int width, int height, const std::vector<const Plane8*>& refs_raw,
                    int qp) {
  const int w8 = (width + kBlock - 1) / kBlock * kBlock;
  const int h8 = (height + kBlock - 1) / kBlock * kBlock;
  std::vector<Plane8> padded_refs;
  std::vector<const Plane8*> refs;
  padded_refs.reserve(refs_raw.size());
  for (const Plane8* r : refs_raw) {
    padded_refs.push_back(pad_to_block_grid(*r));
    refs.push_back(&padded_refs.back());
  }
  const double qstep = qstep_for_qp(qp);
  Plane8 recon_padded(w8, h8);
  int pred[kBlock * kBlock];
  int recon_blk[kBlock * kBlock];
  for (int by = 0; by < h8; by += kBlock) {
    for (int bx = 0; bx < w8; bx += kBlock) {
      if (refs.empty()) {
        std::fill(pred, pred + kBlock * kBlock, 128);
      } else {
        int mode = 0;
        if (refs.size() == 2) {
          mode = static_cast<int>(br.get_ue());
          if (mode > 2) throw MalformedPayload("prediction mode out of range");
        }
        auto read_mv = [&] {
          Mv mv;
          mv.x = br.get_se();
          mv.y = br.get_se();
          return mv;
        };
        if (mode == 2) {
          const Mv mv0 = read_mv();
          const Mv mv1 = read_mv();
          int b0[kBlock * kBlock], b1[kBlock * kBlock];
          fetch_block(*refs[0], bx, by, mv0, b0);
          fetch_block(*refs[1], bx, by, mv1, b1);
          for (int i = 0; i < kBlock * kBlock; ++i) pred[i] = (b0[i] + b1[i] + 1) / 2;
        } else {
          const Mv mv = read_mv();
          fetch_block(*refs[static_cast<size_t>(mode)], bx, by, mv, pred);
        }
      }
      decode_residual(br, pred, qstep, recon_blk);
      for (int y = 0; y < kBlock; ++y) {
        for (int x = 0; x < kBlock; ++x) recon_padded.at(bx + x, by + y) = static_cast<uint8_t>(recon_blk[y * kBlock + x]);
      }
    }
  }
  if (w8 == width && h8 == height) return recon_padded;
  Plane8 recon(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) recon.at(x, y) = recon_padded.at(x, y);
  }
  return recon;
}

void append_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;

  uint8_t u8() {
    if (pos >= bytes.size()) throw CorruptStream("container truncated");
    return bytes[pos++];
  }
  uint16_t u16() {
    const uint16_t lo = u8();
    return static_cast<uint16_t>(lo | (static_cast<uint16_t>(u8()) << 8));
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
    return v;
  }
};

}  // namespace

int CodecConfig::qp_for_tl(int tl) const {
  const int idx = std::clamp(tl, 0, static_cast<int>(tl_qp_offsets.size()) - 1);
  return std::clamp(base_qp + tl_qp_offsets[static_cast<size_t>(idx)], 0, 51);
}

void CodecConfig::validate() const {
  if (base_qp < 0 || base_qp > 51) throw InvalidArgument("base_qp out of [0,51]");
  const int max_off = *std::max_element(tl_qp_offsets.begin(), tl_qp_offsets.end());
  if (base_qp + max_off > 51) throw InvalidArgument("base_qp plus layer offset exceeds 51");
}

RdPoint make_rd_point(double rate_bpp, double mse_luma) {
  RdPoint p;
  p.rate_bpp = rate_bpp;
  p.mse = mse_luma;
  p.psnr_db = mse_luma <= 0.0 ? std::numeric_limits<double>::infinity()
                              : 10.0 * std::log10(255.0 * 255.0 / mse_luma);
  return p;
}

double qstep_for_qp(int qp) {
  if (qp < 0 || qp > 51) throw InvalidArgument("qp out of [0,51]");
  return std::pow(2.0, (qp - 4) / 6.0);
}

ViewEncodeResult encode_view(const View& view, const std::vector<const View*>& refs, int qp,
                             int search_range) {
  if (qp < 0 || qp > 51) throw InvalidArgument("qp out of [0,51]");
  if (refs.size() > 2) throw InvalidArgument("encode_view supports at most two references");
  if (search_range < 0) throw InvalidArgument("negative motion search range");
  view.validate();
  BitWriter bw;
  ViewEncodeResult result;
  auto plane_refs = [&](auto accessor) {
    std::vector<const Plane8*> out;
    for (const View* r : refs) out.push_back(accessor(r));
    return out;
  };
  const int range = search_range;
  result.reconstruction.y =
      encode_plane(view.y, plane_refs([](const View* v) { return &v->y; }), qp, range, bw);
  result.reconstruction.cb =
      encode_plane(view.cb, plane_refs([](const View* v) { return &v->cb; }), qp, range, bw);
  result.reconstruction.cr =
      encode_plane(view.cr, plane_refs([](const View* v) { return &v->cr; }), qp, range, bw);
  result.encoded.payload = bw.flush();
  return result;
}

View decode_view(const EncodedView& encoded, int width, int height,
                 const std::vector<const View*>& refs, int qp) {
  if (qp < 0 || qp > 51) throw InvalidArgument("qp out of [0,51]");
  BitReader br(encoded.payload);
  View out;
  auto plane_refs = [&](auto accessor) {
    std::vector<const Plane8*> planes;
    for (const View* r : refs) planes.push_back(accessor(r));
    return planes;
  };
  out.y = decode_plane(br, width, height, plane_refs([](const View* v) { return &v->y; }), qp);
  out.cb = decode_plane(br, ceil_div2(width), ceil_div2(height),
                        plane_refs([](const View* v) { return &v->cb; }), qp);
  out.cr = decode_plane(br, ceil_div2(width), ceil_div2(height),
                        plane_refs([](const View* v) { return &v->cr; }), qp);
  return out;
}

std::vector<int> ordered_refs(int poc, const DependencyGraph& deps) {
  std::vector<int> refs(deps.refs(poc).begin(), deps.refs(poc).end());
  std::sort(refs.begin(), refs.end(), [poc](int a, int b) {
    const int da = std::abs(a - poc);
    const int db = std::abs(b - poc);
    if (da != db) return da < db;
    return a < b;
  });
  return refs;
}

LfBitstream encode_sequence(const LightField& lf, const CodingStructure& cs,
                            const CodecConfig& config, const KeepCallback& keep) {
  config.validate();
  const PseudoVideoSequence& seq = cs.sequence;
  if (lf.grid_rows != seq.grid_rows || lf.grid_cols != seq.grid_cols) {
    throw InvalidArgument("light field grid does not match sequence");
  }
  LfBitstream bs;
  bs.header.grid_rows = static_cast<uint8_t>(seq.grid_rows);
  bs.header.grid_cols = static_cast<uint8_t>(seq.grid_cols);
  bs.header.gop_size = static_cast<uint8_t>(seq.gop_size);
  bs.header.codec_id = config.codec_id;
  bs.header.base_qp = static_cast<uint8_t>(config.base_qp);
  bs.header.view_width = static_cast<uint16_t>(lf.views.front().width());
  bs.header.view_height = static_cast<uint16_t>(lf.views.front().height());
  bs.header.reference_positions = reference_layout(seq.grid_rows, seq.grid_cols);

  std::map<int, View> recon;
  for (int poc : seq.coding_order()) {
    const SequenceEntry& entry = seq.by_poc(poc);
    if (entry.role == ViewRole::kNonReference && keep && !keep(entry)) continue;
    std::vector<const View*> refs;
    for (int ref_poc : ordered_refs(poc, cs.deps)) {
      auto it = recon.find(ref_poc);
      if (it == recon.end()) {
        throw InvalidArgument("kept view " + std::to_string(poc) + " references dropped view " +
                              std::to_string(ref_poc));
      }
      refs.push_back(&it->second);
    }
    ViewEncodeResult res =
        encode_view(lf.at(entry.pos), refs, config.qp_for_tl(entry.tl), config.motion_search_range);
    res.encoded.poc = poc;
    res.encoded.tl = entry.tl;
    bs.records.push_back(std::move(res.encoded));
    recon.emplace(poc, std::move(res.reconstruction));
  }
  std::sort(bs.records.begin(), bs.records.end(),
            [](const EncodedView& a, const EncodedView& b) { return a.poc < b.poc; });
  return bs;
}

std::map<int, View> decode_present_views(const LfBitstream& bs, const CodingStructure& cs,
                                         const CodecConfig& config) {
  const PseudoVideoSequence& seq = cs.sequence;
  const std::set<int> present = bs.present_pocs();
  std::map<int, View> decoded;
  for (int poc : seq.coding_order()) {
    const EncodedView* record = bs.find(poc);
    if (!record) continue;
    const SequenceEntry& entry = seq.by_poc(poc);
    std::vector<const View*> refs;
    for (int ref_poc : ordered_refs(poc, cs.deps)) {
      if (!present.count(ref_poc)) {
        throw CorruptStream("record " + std::to_string(poc) + " references absent POC " +
                            std::to_string(ref_poc));
      }
      refs.push_back(&decoded.at(ref_poc));
    }
    decoded.emplace(poc, decode_view(*record, bs.header.view_width, bs.header.view_height, refs,
                                     config.qp_for_tl(entry.tl)));
  }
  return decoded;
}

std::set<int> LfBitstream::present_pocs() const {
  std::set<int> pocs;
  for (const EncodedView& r : records) pocs.insert(r.poc);
  return pocs;
}

const EncodedView* LfBitstream::find(int poc) const {
  for (const EncodedView& r : records) {
    if (r.poc == poc) return &r;
  }
  return nullptr;
}

size_t LfBitstream::payload_bits() const {
  size_t bits = 0;
  for (const EncodedView& r : records) bits += r.bit_count();
  return bits;
}

double LfBitstream::bpp() const {
  const double pixels = static_cast<double>(header.grid_rows) * header.grid_cols *
                        header.view_width * header.view_height;
  return pixels > 0 ? static_cast<double>(payload_bits()) / pixels : 0.0;
}

std::vector<uint8_t> LfBitstream::serialize() const {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  append_u16(out, header.version);
  out.push_back(header.grid_rows);
  out.push_back(header.grid_cols);
  out.push_back(header.gop_size);
  out.push_back(static_cast<uint8_t>(header.codec_id));
  out.push_back(header.base_qp);
  append_u16(out, header.view_width);
  append_u16(out, header.view_height);
  out.push_back(static_cast<uint8_t>(header.reference_positions.size()));
  for (AngularPos p : header.reference_positions) {
    out.push_back(static_cast<uint8_t>(p.u));
    out.push_back(static_cast<uint8_t>(p.v));
  }
  for (const EncodedView& r : records) {
    append_u16(out, static_cast<uint16_t>(r.poc));
    out.push_back(static_cast<uint8_t>(r.tl));
    append_u32(out, static_cast<uint32_t>(r.payload.size()));
    out.insert(out.end(), r.payload.begin(), r.payload.end());
  }
  return out;
}

LfBitstream LfBitstream::parse(const std::vector<uint8_t>& bytes) {
  ByteReader rd{bytes};
  for (char c : kMagic) {
    if (rd.u8() != static_cast<uint8_t>(c)) throw CorruptStream("bad container magic");
  }
  LfBitstream bs;
  bs.header.version = rd.u16();
  if (bs.header.version != 1) throw CorruptStream("unsupported container version");
  bs.header.grid_rows = rd.u8();
  bs.header.grid_cols = rd.u8();
  bs.header.gop_size = rd.u8();
  const uint8_t codec = rd.u8();
  if (codec > 1) throw CorruptStream("unknown codec id");
  bs.header.codec_id = static_cast<CodecId>(codec);
  bs.header.base_qp = rd.u8();
  bs.header.view_width = rd.u16();
  bs.header.view_height = rd.u16();
  const int ref_count = rd.u8();
  for (int i = 0; i < ref_count; ++i) {
    const int u = rd.u8();
    const int v = rd.u8();
    bs.header.reference_positions.push_back({u, v});
  }
  while (rd.pos < bytes.size()) {
    EncodedView r;
    r.poc = rd.u16();
    r.tl = rd.u8();
    const uint32_t len = rd.u32();
    if (rd.pos + len > bytes.size()) throw CorruptStream("record payload truncated");
    r.payload.assign(bytes.begin() + static_cast<long>(rd.pos),
                     bytes.begin() + static_cast<long>(rd.pos + len));
    rd.pos += len;
    bs.records.push_back(std::move(r));
  }
  if (!std::is_sorted(bs.records.begin(), bs.records.end(),
                      [](const EncodedView& a, const EncodedView& b) { return a.poc < b.poc; })) {
    throw CorruptStream("records not sorted by POC");
  }
  return bs;
}

void LfBitstream::save(const std::filesystem::path& path) const {
  const std::vector<uint8_t> bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LfBitstream LfBitstream::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

}  // namespace lfc
