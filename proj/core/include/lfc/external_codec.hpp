#pragma once

#include <string>

#include "lfc/codec.hpp"

namespace lfc {

/// Rate accounting of an external encode: bits attributed to each POC, from
/// encoder logs when parsable, otherwise a proportional split.
struct ExternalRateReport {
  std::vector<double> bits_per_poc;
  bool from_logs = false;
};

struct ExternalEncodeResult {
  LfBitstream bitstream;  // single opaque record carrying the encoder output
  ExternalRateReport rates;
};

/// Export the pseudo-video sequence as planar 8-bit 4:2:0 raw video in POC
/// order, run the external encoder command template ({input_yuv} {width}
/// {height} {frames} {qp} {output} placeholders) and wrap its output as an
/// opaque payload record. Per-view bits come from "POC <n> ... <bits> bits"
/// log lines when present.
ExternalEncodeResult external_encode(const LightField& lf, const CodingStructure& cs,
                                     const CodecConfig& config,
                                     const std::filesystem::path& work_dir);

/// Write the light field as raw planar 4:2:0 video in POC order.
void write_yuv420(const LightField& lf, const PseudoVideoSequence& seq,
                  const std::filesystem::path& path);

std::string expand_command_template(const std::string& tmpl, const std::string& input_yuv,
                                    int width, int height, int frames, int qp,
                                    const std::string& output);

}  // namespace lfc
