#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "lfc/codec.hpp"
#include "lfc/enhance.hpp"
#include "lfc/metrics.hpp"
#include "lfc/rdo.hpp"
#include "lfc/synthesis.hpp"

namespace lfc {

enum class DropPolicy {
  kRdo,     // Lagrangian decision per triple (needs a synthesis model)
  kNone,    // keep every view
  kAllTl4,  // drop the whole top layer unconditionally
};

struct PipelineConfig {
  std::filesystem::path manifest;
  int base_qp = 28;
  // Per-layer QP cascade. Not carried in the bitstream header; decode must
  // use the offsets the encoder used.
  std::array<int, 5> tl_qp_offsets{0, 1, 2, 3, 4};
  double lambda = 0.1;
  CodecId codec = CodecId::kBuiltin;
  std::string external_command;
  std::filesystem::path synth_model_path;
  std::filesystem::path qe_model_path;
  std::string rvs_policy = "sharpness";
  std::filesystem::path out_dir = ".";
  uint64_t seed = 1;
  int jobs = 1;
  bool enhance = true;       // decoder-side enhancement stage
  bool synthesize = true;    // decoder-side synthesis of missing views
  DropPolicy drop = DropPolicy::kRdo;
  D2GanConfig gan;           // synthesis hyper-parameters (must match the model)
};

struct EncodeResult {
  LfBitstream stream;
  std::vector<RdoDecision> decisions;  // empty unless drop == kRdo
  double bpp = 0.0;
};

/// Encoder pipeline: coding structure, reference encode, candidate costs,
/// drop decisions, final stream.
EncodeResult run_encode(const LightField& lf, const PipelineConfig& config);

struct DecodeResult {
  LightField light_field;
  std::vector<AngularPos> synthesized;  // positions reconstructed by the model
  FluctuationStats stats_available = {};
};

/// Decoder pipeline: decode present views, detect the dropped ones from POC
/// gaps, synthesize them (or copy the nearest present view when synthesis is
/// off), then optionally enhance the non-reference views.
DecodeResult run_decode(const LfBitstream& stream, const PipelineConfig& config);

/// Synthesize the view at `target` from the four decoded corner references
/// of its quadrant; chroma is the sample average of those references.
View synthesize_full_view(const std::map<int, View>& decoded, const PseudoVideoSequence& seq,
                          AngularPos target, const GeneratorPair& gen, const D2GanConfig& gan,
                          int jobs);

/// Training-set construction for the synthesis model: co-located patches from
/// every non-reference view of the light field.
std::vector<SynthSample> build_synth_dataset(const LightField& lf, const CodingStructure& cs,
                                             const D2GanConfig& gan);

/// Training-set construction for the enhancement model from an original /
/// degraded light-field pair. `include` filters the contributing
/// non-reference views (defaults to all), e.g. to hold out part of the grid.
std::vector<QeSample> build_qe_dataset(const LightField& original, const LightField& degraded,
                                       const PseudoVideoSequence& seq, const RvsPolicy& policy,
                                       int patch_size, int stride,
                                       const std::function<bool(AngularPos)>& include = {});

struct EvalRow {
  int poc = 0;
  AngularPos pos;
  double psnr_db = 0.0;
  double ssim_score = 0.0;
};

struct EvalResult {
  std::vector<EvalRow> per_view;
  double mean_psnr = 0.0;  // +inf when every view is lossless
  double mean_ssim = 0.0;
};

EvalResult evaluate_reconstruction(const LightField& original, const LightField& reconstructed,
                                   const PseudoVideoSequence& seq);

void save_eval_csv(const EvalResult& eval, const std::filesystem::path& path);

// RD curve CSV: rate_bpp,psnr_db,ssim rows in rate order.
void save_rd_curve_csv(const std::vector<std::array<double, 3>>& rows,
                       const std::filesystem::path& path);
std::vector<std::array<double, 3>> load_rd_curve_csv(const std::filesystem::path& path);

}  // namespace lfc
