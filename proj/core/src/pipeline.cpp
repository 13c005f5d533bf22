#include "lfc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lfc/external_codec.hpp"
#include "lfc/parallel.hpp"

namespace lfc {

namespace {

std::array<PlaneF, 4> corner_lumas(const std::map<int, View>& decoded,
                                   const PseudoVideoSequence& seq,
                                   const std::array<AngularPos, 4>& corners) {
  std::array<PlaneF, 4> out;
  for (size_t i = 0; i < 4; ++i) {
    const int poc = seq.poc_of(corners[i]);
    auto it = decoded.find(poc);
    if (it == decoded.end()) {
      throw CorruptStream("corner reference POC " + std::to_string(poc) + " not decoded");
    }
    out[i] = to_unit(it->second.y);
  }
  return out;
}

}  // namespace

View synthesize_full_view(const std::map<int, View>& decoded, const PseudoVideoSequence& seq,
                          AngularPos target, const GeneratorPair& gen, const D2GanConfig& gan,
                          int jobs) {
  const auto corners = quadrant_corners(seq.grid_rows, seq.grid_cols, target);
  const auto refs = corner_lumas(decoded, seq, corners);
  const SynthesizedView synth =
      synthesize_view(refs, corners, target, gen, gan, seq.grid_rows, seq.grid_cols, jobs);

  View out(refs[0].width, refs[0].height);
  out.y = to_plane8(synth.luma);
  // Chroma is not synthesized; use the sample average of the corner refs.
  for (int cy = 0; cy < out.cb.height; ++cy) {
    for (int cx = 0; cx < out.cb.width; ++cx) {
      int sum_cb = 0, sum_cr = 0;
      for (size_t i = 0; i < 4; ++i) {
        const View& ref = decoded.at(seq.poc_of(corners[i]));
        sum_cb += ref.cb.at(cx, cy);
        sum_cr += ref.cr.at(cx, cy);
      }
      out.cb.at(cx, cy) = static_cast<uint8_t>((sum_cb + 2) / 4);
      out.cr.at(cx, cy) = static_cast<uint8_t>((sum_cr + 2) / 4);
    }
  }
  return out;
}

EncodeResult run_encode(const LightField& lf, const PipelineConfig& config) {
  CodecConfig codec_config;
  codec_config.base_qp = config.base_qp;
  codec_config.tl_qp_offsets = config.tl_qp_offsets;
  codec_config.codec_id = config.codec;
  codec_config.external_command = config.external_command;
  codec_config.validate();

  const CodingStructure cs = build_sequence(lf.grid_rows, lf.grid_cols);

  EncodeResult result;
  if (config.codec == CodecId::kExternal) {
    ExternalEncodeResult ext = external_encode(lf, cs, codec_config, config.out_dir / "ext");
    result.stream = std::move(ext.bitstream);
    result.bpp = result.stream.bpp();
    return result;
  }

  KeepCallback keep;
  if (config.drop == DropPolicy::kNone) {
    keep = {};
  } else if (config.drop == DropPolicy::kAllTl4) {
    keep = [](const SequenceEntry& e) { return e.tl != 4; };
  } else {
    // Reference pass: encode TL0-2 only, decode them back for the cost
    // evaluation and the synthesis inputs.
    const LfBitstream ref_stream = encode_sequence(
        lf, cs, codec_config, [](const SequenceEntry&) { return false; });
    std::map<int, View> decoded_refs = decode_present_views(ref_stream, cs, codec_config);

    const GeneratorPair gen = load_synthesis_model(config.synth_model_path, config.gan);
    SynthFn synth = [&](AngularPos q) {
      const auto corners = quadrant_corners(lf.grid_rows, lf.grid_cols, q);
      const auto refs = corner_lumas(decoded_refs, cs.sequence, corners);
      return synthesize_view(refs, corners, q, gen, config.gan, lf.grid_rows, lf.grid_cols,
                             config.jobs)
          .luma;
    };
    RdoConfig rdo_config;
    rdo_config.lambda = config.lambda;
    const CostTable costs =
        evaluate_candidates(lf, cs, codec_config, rdo_config, decoded_refs, synth);
    result.decisions = decide_gop(rdo_triples(cs.sequence), costs);
    std::map<int, RdoMode> mode_by_poc;
    for (const RdoDecision& d : result.decisions) mode_by_poc[d.poc] = d.mode;
    keep = [mode_by_poc](const SequenceEntry& e) {
      auto it = mode_by_poc.find(e.poc);
      return it == mode_by_poc.end() || it->second == RdoMode::kEncode;
    };
  }

  result.stream = encode_sequence(lf, cs, codec_config, keep);
  result.bpp = result.stream.bpp();
  return result;
}

DecodeResult run_decode(const LfBitstream& stream, const PipelineConfig& config) {
  if (stream.header.codec_id != CodecId::kBuiltin) {
    throw InvalidArgument("decoding is only supported for built-in streams");
  }
  const CodingStructure cs = build_sequence(stream.header.grid_rows, stream.header.grid_cols);
  if (stream.header.reference_positions !=
      reference_layout(stream.header.grid_rows, stream.header.grid_cols)) {
    throw CorruptStream("header reference map does not match the grid layout");
  }
  CodecConfig codec_config;
  codec_config.base_qp = stream.header.base_qp;
  codec_config.tl_qp_offsets = config.tl_qp_offsets;

  std::map<int, View> decoded = decode_present_views(stream, cs, codec_config);
  const std::vector<AngularPos> missing = detect_missing(stream.present_pocs(), cs.sequence);

  DecodeResult result;
  if (!missing.empty() && config.synthesize) {
    const GeneratorPair gen = load_synthesis_model(config.synth_model_path, config.gan);
    for (AngularPos pos : missing) {
      decoded.emplace(cs.sequence.poc_of(pos),
                      synthesize_full_view(decoded, cs.sequence, pos, gen, config.gan, config.jobs));
      result.synthesized.push_back(pos);
    }
  } else if (!missing.empty()) {
    // Synthesis disabled: hold the nearest present view (by POC distance,
    // earlier on ties).
    for (AngularPos pos : missing) {
      const int poc = cs.sequence.poc_of(pos);
      int best = -1;
      for (const auto& [p, v] : decoded) {
        (void)v;
        if (best < 0 || std::abs(p - poc) < std::abs(best - poc)) best = p;
      }
      decoded.emplace(poc, decoded.at(best));
    }
  }

  LightField lf(stream.header.grid_rows, stream.header.grid_cols);
  for (const SequenceEntry& e : cs.sequence.entries) lf.at(e.pos) = decoded.at(e.poc);

  if (config.enhance && !config.qe_model_path.empty()) {
    QeNet qenet = load_qenet_model(config.qe_model_path);
    const RvsPolicy policy = make_policy(config.rvs_policy, {0, 0});
    lf = enhance_decoded_lf(lf, cs.sequence, qenet, policy, config.jobs);
  }
  result.light_field = std::move(lf);
  return result;
}

std::vector<SynthSample> build_synth_dataset(const LightField& lf, const CodingStructure& cs,
                                             const D2GanConfig& gan) {
  gan.validate();
  std::vector<SynthSample> samples;
  const int margin = GeneratorStack::kShrink;
  const int out_size = gan.output_size();
  const int w = lf.views.front().width();
  const int h = lf.views.front().height();
  if (w < out_size || h < out_size) {
    throw InvalidArgument("views smaller than the synthesis output tile");
  }
  for (const SequenceEntry& e : cs.sequence.entries) {
    if (e.role != ViewRole::kNonReference) continue;
    const auto corners = quadrant_corners(lf.grid_rows, lf.grid_cols, e.pos);
    // References padded exactly as synthesize_view pads them, so training
    // patches anchored at the borders carry the same replicated margins the
    // inference tiles will see.
    std::array<PlaneF, 4> padded;
    for (size_t i = 0; i < 4; ++i) {
      const PlaneF ref = to_unit(lf.at(corners[i]).y);
      PlaneF p(w + 2 * margin, h + 2 * margin);
      for (int y = 0; y < p.height; ++y) {
        const int sy = std::clamp(y - margin, 0, h - 1);
        for (int x = 0; x < p.width; ++x) {
          p.at(x, y) = ref.at(std::clamp(x - margin, 0, w - 1), sy);
        }
      }
      padded[i] = std::move(p);
    }
    const PlaneF target_luma = to_unit(lf.at(e.pos).y);

    // Origins in output-tile coordinates; the input patch at origin o covers
    // view rows [o - margin, o - margin + patch).
    for (int oy : patch_origins(h, out_size, gan.patch_stride)) {
      for (int ox : patch_origins(w, out_size, gan.patch_stride)) {
        SynthSample s;
        s.positions = corners;
        s.q = e.pos;
        for (size_t i = 0; i < 4; ++i) {
          PlaneF rp(gan.patch_size, gan.patch_size);
          for (int y = 0; y < gan.patch_size; ++y) {
            for (int x = 0; x < gan.patch_size; ++x) {
              rp.at(x, y) = padded[i].at(ox + x, oy + y);
            }
          }
          s.ref_patches[i] = std::move(rp);
        }
        PlaneF target(out_size, out_size);
        for (int y = 0; y < out_size; ++y) {
          for (int x = 0; x < out_size; ++x) {
            target.at(x, y) = target_luma.at(ox + x, oy + y);
          }
        }
        s.target = std::move(target);
        samples.push_back(std::move(s));
      }
    }
  }
  return samples;
}

std::vector<QeSample> build_qe_dataset(const LightField& original, const LightField& degraded,
                                       const PseudoVideoSequence& seq, const RvsPolicy& policy,
                                       int patch_size, int stride,
                                       const std::function<bool(AngularPos)>& include) {
  if (original.grid_rows != degraded.grid_rows || original.grid_cols != degraded.grid_cols) {
    throw InvalidArgument("build_qe_dataset: grid mismatch");
  }
  const AngularPos central_pos = central_view(seq.grid_rows, seq.grid_cols);
  std::vector<RvsCandidate> candidates;
  for (const SequenceEntry& e : seq.entries) {
    if (e.role == ViewRole::kReference && e.pos != central_pos) {
      candidates.push_back({e.pos, e.tl, &degraded.at(e.pos)});
    }
  }
  const PlaneF central_luma = to_unit(degraded.at(central_pos).y);

  std::vector<QeSample> samples;
  for (const SequenceEntry& e : seq.entries) {
    if (e.role != ViewRole::kNonReference) continue;
    if (include && !include(e.pos)) continue;
    const AngularPos picked_pos = select_reference(e.pos, candidates, policy);
    const PlaneF target_luma = to_unit(degraded.at(e.pos).y);
    const PlaneF picked_luma = to_unit(degraded.at(picked_pos).y);
    const PlaneF original_luma = to_unit(original.at(e.pos).y);

    for (int oy : patch_origins(target_luma.height, patch_size, stride)) {
      for (int ox : patch_origins(target_luma.width, patch_size, stride)) {
        QeSample s;
        auto crop = [&](const PlaneF& src) {
          PlaneF p(patch_size, patch_size);
          for (int y = 0; y < patch_size; ++y) {
            for (int x = 0; x < patch_size; ++x) p.at(x, y) = src.at(ox + x, oy + y);
          }
          return p;
        };
        s.target = crop(target_luma);
        s.central = crop(central_luma);
        s.picked = crop(picked_luma);
        s.original = crop(original_luma);
        samples.push_back(std::move(s));
      }
    }
  }
  return samples;
}

EvalResult evaluate_reconstruction(const LightField& original, const LightField& reconstructed,
                                   const PseudoVideoSequence& seq) {
  if (original.grid_rows != reconstructed.grid_rows ||
      original.grid_cols != reconstructed.grid_cols) {
    throw InvalidArgument("evaluate: grid mismatch");
  }
  EvalResult result;
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  bool any_finite = false;
  for (const SequenceEntry& e : seq.entries) {
    EvalRow row;
    row.poc = e.poc;
    row.pos = e.pos;
    row.psnr_db = psnr(reconstructed.at(e.pos).y, original.at(e.pos).y);
    row.ssim_score = ssim(reconstructed.at(e.pos).y, original.at(e.pos).y);
    ssim_sum += row.ssim_score;
    if (std::isfinite(row.psnr_db)) {
      psnr_sum += row.psnr_db;
      any_finite = true;
    }
    result.per_view.push_back(row);
  }
  const double n = static_cast<double>(result.per_view.size());
  result.mean_ssim = ssim_sum / n;
  result.mean_psnr = any_finite ? psnr_sum / n : std::numeric_limits<double>::infinity();
  return result;
}

void save_eval_csv(const EvalResult& eval, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "poc,u,v,psnr_db,ssim\n";
  for (const EvalRow& r : eval.per_view) {
    out << r.poc << "," << r.pos.u << "," << r.pos.v << "," << r.psnr_db << "," << r.ssim_score
        << "\n";
  }
}

void save_rd_curve_csv(const std::vector<std::array<double, 3>>& rows,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "rate_bpp,psnr_db,ssim\n";
  for (const auto& r : rows) out << r[0] << "," << r[1] << "," << r[2] << "\n";
}

std::vector<std::array<double, 3>> load_rd_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::array<double, 3>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 3> row{};
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i < 3 && std::getline(ss, cell, ','); ++i) row[static_cast<size_t>(i)] = std::stod(cell);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lfc
