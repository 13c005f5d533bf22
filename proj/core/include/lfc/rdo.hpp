#pragma once

#include <functional>
#include <map>

#include "lfc/codec.hpp"
#include "lfc/coding_structure.hpp"
#include "lfc/synthesis.hpp"

namespace lfc {

struct RdoConfig {
  double lambda = 0.1;  // Lagrangian multiplier against luma MSE distortion
};

enum class RdoMode { kEncode, kSynthesize };

struct RdoDecision {
  int poc = 0;
  RdoMode mode = RdoMode::kEncode;
  double j_encode = 0.0;
  double j_synth = 0.0;
  double rate_encode_bpp = 0.0;
};

/// J = D + lambda * R. Inputs must be non-negative.
double lagrangian_cost(double distortion_mse, double rate_bpp, double lambda);

struct ViewCosts {
  double j_encode = 0.0;
  double j_synth = 0.0;
  double rate_encode_bpp = 0.0;
};

using CostTable = std::map<int, ViewCosts>;

/// Greedy per-triple decision: first every TL4 view is encoded iff its encode
/// cost is at most its synthesis cost; then a TL3 view is synthesized only
/// when synthesis is strictly cheaper AND both dependent TL4 views of its
/// triple were synthesized. Ties resolve to encode.
std::vector<RdoDecision> decide_gop(const std::vector<RdoTriple>& triples, const CostTable& costs);

/// Abstract synthesizer so cost evaluation can run against the trained model
/// or a test double.
using SynthFn = std::function<PlaneF(AngularPos q)>;

/// Trial-encode every TL3/TL4 view at its layer QP against the decoded
/// references and synthesize it from the decoded corner views, producing the
/// cost table for decide_gop. `decoded_refs` must contain every reference
/// (TL 0-2) reconstruction; trial TL3 reconstructions are used as references
/// for the TL4 trials of the same GOP.
CostTable evaluate_candidates(const LightField& lf, const CodingStructure& cs,
                              const CodecConfig& codec_config, const RdoConfig& rdo_config,
                              std::map<int, View>& decoded_refs, const SynthFn& synthesize);

/// Decision report CSV: poc,u,v,tl,mode,j_encode,j_synth,rate_encode_bpp.
void save_decisions_csv(const std::vector<RdoDecision>& decisions, const PseudoVideoSequence& seq,
                        const std::filesystem::path& path);

}  // namespace lfc
