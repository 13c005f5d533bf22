#include "lfc/external_codec.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <regex>

namespace lfc {

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string run_and_capture(const std::string& command) {
  std::array<char, 4096> buffer;
  std::string output;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) throw ProcessError("failed to launch external encoder");
  while (fgets(buffer.data(), static_cast<int>(buffer.size()), pipe)) output += buffer.data();
  const int status = pclose(pipe);
  if (status != 0) {
    throw ProcessError("external encoder exited with status " + std::to_string(status) + ": " +
                       output.substr(0, 500));
  }
  return output;
}

}  // namespace

std::string expand_command_template(const std::string& tmpl, const std::string& input_yuv,
                                    int width, int height, int frames, int qp,
                                    const std::string& output) {
  std::string cmd = replace_all(tmpl, "{input_yuv}", input_yuv);
  cmd = replace_all(cmd, "{width}", std::to_string(width));
  cmd = replace_all(cmd, "{height}", std::to_string(height));
  cmd = replace_all(cmd, "{frames}", std::to_string(frames));
  cmd = replace_all(cmd, "{qp}", std::to_string(qp));
  cmd = replace_all(cmd, "{output}", output);
  return cmd;
}

void write_yuv420(const LightField& lf, const PseudoVideoSequence& seq,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const SequenceEntry& e : seq.entries) {
    const View& v = lf.at(e.pos);
    out.write(reinterpret_cast<const char*>(v.y.data.data()), static_cast<std::streamsize>(v.y.data.size()));
    out.write(reinterpret_cast<const char*>(v.cb.data.data()), static_cast<std::streamsize>(v.cb.data.size()));
    out.write(reinterpret_cast<const char*>(v.cr.data.data()), static_cast<std::streamsize>(v.cr.data.size()));
  }
}

ExternalEncodeResult external_encode(const LightField& lf, const CodingStructure& cs,
                                     const CodecConfig& config,
                                     const std::filesystem::path& work_dir) {
  if (config.external_command.empty()) {
    throw InvalidArgument("external codec selected but no command template configured");
  }
  std::filesystem::create_directories(work_dir);
  const std::filesystem::path yuv = work_dir / "sequence.yuv";
  const std::filesystem::path packed = work_dir / "encoded.bin";
  write_yuv420(lf, cs.sequence, yuv);

  const int width = lf.views.front().width();
  const int height = lf.views.front().height();
  const int frames = cs.sequence.view_count();
  const std::string cmd = expand_command_template(config.external_command, yuv.string(), width,
                                                  height, frames, config.base_qp, packed.string());
  const std::string log = run_and_capture(cmd);

  std::ifstream in(packed, std::ios::binary);
  if (!in) throw ProcessError("external encoder produced no output file");
  std::vector<uint8_t> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.empty()) throw ProcessError("external encoder produced an empty output");

  ExternalEncodeResult result;
  result.bitstream.header.grid_rows = static_cast<uint8_t>(lf.grid_rows);
  result.bitstream.header.grid_cols = static_cast<uint8_t>(lf.grid_cols);
  result.bitstream.header.gop_size = static_cast<uint8_t>(cs.sequence.gop_size);
  result.bitstream.header.codec_id = CodecId::kExternal;
  result.bitstream.header.base_qp = static_cast<uint8_t>(config.base_qp);
  result.bitstream.header.view_width = static_cast<uint16_t>(width);
  result.bitstream.header.view_height = static_cast<uint16_t>(height);
  result.bitstream.header.reference_positions = reference_layout(lf.grid_rows, lf.grid_cols);
  EncodedView record;
  record.poc = 0;
  record.tl = 0;
  record.payload = std::move(payload);
  result.bitstream.records.push_back(std::move(record));

  // Per-view accounting: "POC <n> ... <bits> bits" lines when the encoder
  // reports them, else an even split of the container payload.
  const double total_bits = static_cast<double>(result.bitstream.payload_bits());
  result.rates.bits_per_poc.assign(static_cast<size_t>(frames), 0.0);
  std::regex poc_line(R"(POC\s+(\d+)\D.*?(\d+)\s+bits)");
  auto begin = std::sregex_iterator(log.begin(), log.end(), poc_line);
  int matched = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const int poc = std::stoi((*it)[1]);
    if (poc >= 0 && poc < frames) {
      result.rates.bits_per_poc[static_cast<size_t>(poc)] = std::stod((*it)[2]);
      ++matched;
    }
  }
  if (matched == frames) {
    result.rates.from_logs = true;
    // Normalize so the accounting sums to the container payload size.
    double sum = 0.0;
    for (double b : result.rates.bits_per_poc) sum += b;
    if (sum > 0) {
      for (double& b : result.rates.bits_per_poc) b *= total_bits / sum;
    }
  } else {
    result.rates.from_logs = false;
    for (double& b : result.rates.bits_per_poc) b = total_bits / frames;
  }
  return result;
}

}  // namespace lfc
