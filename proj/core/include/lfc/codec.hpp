#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lfc/coding_structure.hpp"
#include "lfc/image.hpp"

namespace lfc {

enum class CodecId : uint8_t { kBuiltin = 0, kExternal = 1 };

struct CodecConfig {
  int base_qp = 28;                             // [0, 51]
  std::array<int, 5> tl_qp_offsets{0, 1, 2, 3, 4};  // per temporal layer
  int block_size = 8;
  int motion_search_range = 8;  // full-pel, +/- range
  CodecId codec_id = CodecId::kBuiltin;
  std::string external_command;  // template, see external_codec.hpp

  int qp_for_tl(int tl) const;
  void validate() const;
};

/// Quantizer step for a QP, doubling every 6 steps.
double qstep_for_qp(int qp);

struct EncodedView {
  int poc = 0;
  int tl = 0;
  std::vector<uint8_t> payload;

  size_t bit_count() const { return payload.size() * 8; }
};

struct LfBitstreamHeader {
  uint16_t version = 1;
  uint8_t grid_rows = 0;
  uint8_t grid_cols = 0;
  uint8_t gop_size = 0;
  CodecId codec_id = CodecId::kBuiltin;
  uint8_t base_qp = 0;
  uint16_t view_width = 0;
  uint16_t view_height = 0;
  std::vector<AngularPos> reference_positions;

  friend bool operator==(const LfBitstreamHeader&, const LfBitstreamHeader&) = default;
};

/// Container for one coded light field. Views dropped by the encoder are
/// simply absent from the record list; the decoder detects them from the POC
/// gaps.
struct LfBitstream {
  LfBitstreamHeader header;
  std::vector<EncodedView> records;  // sorted by POC

  std::set<int> present_pocs() const;
  const EncodedView* find(int poc) const;
  size_t payload_bits() const;
  double bpp() const;  // payload bits / (grid views * view pixels)

  std::vector<uint8_t> serialize() const;
  static LfBitstream parse(const std::vector<uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static LfBitstream load(const std::filesystem::path& path);
};

/// Rate/distortion sample of one full light-field encode.
struct RdPoint {
  double rate_bpp = 0.0;
  double mse = 0.0;
  double psnr_db = 0.0;  // +infinity when mse == 0
};

struct ViewEncodeResult {
  EncodedView encoded;
  View reconstruction;
};

/// Encode one view with the built-in hybrid codec. With no references the
/// view is intra coded (flat 128 predictor); otherwise each block runs a
/// full-pel motion search against every reference, choosing between the
/// per-reference predictors and their rounded average by SAD. References
/// must be listed in preference order (nearest POC first, then earlier POC);
/// SAD ties keep the earlier candidate. Returns the payload and the exact
/// reconstruction the decoder will produce.
ViewEncodeResult encode_view(const View& view, const std::vector<const View*>& refs, int qp,
                             int search_range = 8);

/// Exact inverse of encode_view's reconstruction path.
View decode_view(const EncodedView& encoded, int width, int height,
                 const std::vector<const View*>& refs, int qp);

/// RdPoint with the PSNR derived from the MSE (+inf sentinel at zero MSE).
RdPoint make_rd_point(double rate_bpp, double mse_luma);

/// Keep/drop decision for non-reference sequence entries. Reference views
/// are always encoded.
using KeepCallback = std::function<bool(const SequenceEntry&)>;

/// Encode a light field along its pseudo-video sequence (lower temporal
/// layers first). Dropped views are omitted from the record list. Throws
/// InvalidArgument if a kept view references a dropped one.
LfBitstream encode_sequence(const LightField& lf, const CodingStructure& cs,
                            const CodecConfig& config, const KeepCallback& keep = {});

/// Decode every record of a built-in stream. Returns reconstructions keyed
/// by POC; missing views are left to the synthesis stage.
std::map<int, View> decode_present_views(const LfBitstream& bs, const CodingStructure& cs,
                                         const CodecConfig& config);

/// Reference POCs of `poc` ordered by preference: temporally nearest first,
/// then earlier POC.
std::vector<int> ordered_refs(int poc, const DependencyGraph& deps);

}  // namespace lfc
