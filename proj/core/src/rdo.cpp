#include "lfc/rdo.hpp"

#include <algorithm>
#include <fstream>

#include "lfc/metrics.hpp"

namespace lfc {

double lagrangian_cost(double distortion_mse, double rate_bpp, double lambda) {
  if (distortion_mse < 0 || rate_bpp < 0 || lambda < 0) {
    throw InvalidArgument("lagrangian_cost: inputs must be non-negative");
  }
  return distortion_mse + lambda * rate_bpp;
}

std::vector<RdoDecision> decide_gop(const std::vector<RdoTriple>& triples, const CostTable& costs) {
  auto costs_of = [&](int poc) -> const ViewCosts& {
    auto it = costs.find(poc);
    if (it == costs.end()) {
      throw InvalidArgument("missing cost entry for POC " + std::to_string(poc));
    }
    return it->second;
  };
  std::vector<RdoDecision> decisions;
  for (const RdoTriple& t : triples) {
    const ViewCosts& a = costs_of(t.poc_tl4_a);
    const ViewCosts& b = costs_of(t.poc_tl4_b);
    const ViewCosts& mid = costs_of(t.poc_tl3);

    auto tl4_mode = [](const ViewCosts& c) {
      return c.j_encode <= c.j_synth ? RdoMode::kEncode : RdoMode::kSynthesize;
    };
    const RdoMode mode_a = tl4_mode(a);
    const RdoMode mode_b = tl4_mode(b);
    const bool both_synth = mode_a == RdoMode::kSynthesize && mode_b == RdoMode::kSynthesize;
    const RdoMode mode_mid = (mid.j_encode > mid.j_synth && both_synth) ? RdoMode::kSynthesize
                                                                        : RdoMode::kEncode;

    decisions.push_back({t.poc_tl4_a, mode_a, a.j_encode, a.j_synth, a.rate_encode_bpp});
    decisions.push_back({t.poc_tl3, mode_mid, mid.j_encode, mid.j_synth, mid.rate_encode_bpp});
    decisions.push_back({t.poc_tl4_b, mode_b, b.j_encode, b.j_synth, b.rate_encode_bpp});
  }
  std::sort(decisions.begin(), decisions.end(),
            [](const RdoDecision& x, const RdoDecision& y) { return x.poc < y.poc; });
  return decisions;
}

CostTable evaluate_candidates(const LightField& lf, const CodingStructure& cs,
                              const CodecConfig& codec_config, const RdoConfig& rdo_config,
                              std::map<int, View>& decoded_refs, const SynthFn& synthesize) {
  if (rdo_config.lambda < 0) throw InvalidArgument("lambda must be non-negative");
  const PseudoVideoSequence& seq = cs.sequence;
  CostTable table;
  std::map<int, View> trial_recon;  // TL3 trial reconstructions, fed to TL4 trials
  auto ref_view = [&](int poc) -> const View* {
    if (auto it = decoded_refs.find(poc); it != decoded_refs.end()) return &it->second;
    if (auto it = trial_recon.find(poc); it != trial_recon.end()) return &it->second;
    throw InvalidArgument("evaluate_candidates: reference POC " + std::to_string(poc) +
                          " not decoded");
  };
  for (int poc : seq.coding_order()) {
    const SequenceEntry& entry = seq.by_poc(poc);
    if (entry.role != ViewRole::kNonReference) continue;
    const View& original = lf.at(entry.pos);
    std::vector<const View*> refs;
    for (int ref_poc : ordered_refs(poc, cs.deps)) refs.push_back(ref_view(ref_poc));
    const int qp = codec_config.qp_for_tl(entry.tl);
    ViewEncodeResult trial = encode_view(original, refs, qp);
    const double pixels = static_cast<double>(original.width()) * original.height();
    const double rate_bpp = static_cast<double>(trial.encoded.bit_count()) / pixels;
    const double d_encode = mse(trial.reconstruction.y, original.y);

    const PlaneF synth_luma = synthesize(entry.pos);
    const double d_synth = mse(to_plane8(synth_luma), original.y);

    ViewCosts costs;
    costs.rate_encode_bpp = rate_bpp;
    costs.j_encode = lagrangian_cost(d_encode, rate_bpp, rdo_config.lambda);
    costs.j_synth = lagrangian_cost(d_synth, 0.0, rdo_config.lambda);
    table[poc] = costs;
    trial_recon.emplace(poc, std::move(trial.reconstruction));
  }
  return table;
}

void save_decisions_csv(const std::vector<RdoDecision>& decisions, const PseudoVideoSequence& seq,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "poc,u,v,tl,mode,j_encode,j_synth,rate_encode_bpp\n";
  for (const RdoDecision& d : decisions) {
    const SequenceEntry& e = seq.by_poc(d.poc);
    out << d.poc << "," << e.pos.u << "," << e.pos.v << "," << e.tl << ","
        << (d.mode == RdoMode::kEncode ? "encode" : "synthesize") << "," << d.j_encode << ","
        << d.j_synth << "," << d.rate_encode_bpp << "\n";
  }
}

}  // namespace lfc
