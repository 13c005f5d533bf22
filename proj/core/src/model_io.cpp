#include "lfc/nn/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace lfc::nn {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'N', 'N'};
constexpr uint16_t kVersion = 1;

void write_u16(std::ostream& out, uint16_t v) {
  const uint8_t b[2] = {static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& out, uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& out, const std::vector<double>& values) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts need byte swapping here");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

struct Reader {
  std::istream& in;

  uint8_t u8() {
    char c;
    if (!in.get(c)) throw FormatError("model file truncated");
    return static_cast<uint8_t>(c);
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
  std::vector<double> f64(size_t count) {
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw FormatError("model file truncated in payload");
    return values;
  }
};

size_t payload_count(const LayerBlob& b) {
  switch (b.type) {
    case LayerBlob::Type::kConv:
      return static_cast<size_t>(b.out) * b.in * b.k * b.k + static_cast<size_t>(b.out);
    case LayerBlob::Type::kBatchNorm:
      return static_cast<size_t>(b.out) * 4;  // gamma, beta, running mean, running var
    case LayerBlob::Type::kPrelu:
      return static_cast<size_t>(b.out);
    case LayerBlob::Type::kDense:
      return static_cast<size_t>(b.out) * b.in + static_cast<size_t>(b.out);
  }
  throw FormatError("unknown layer type");
}

}  // namespace

void save_model_file(const std::vector<NetBlob>& nets, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write model file " + path.string());
  out.write(kMagic, 4);
  write_u16(out, kVersion);
  out.put(static_cast<char>(nets.size()));
  for (const NetBlob& net : nets) {
    out.put(static_cast<char>(net.role.size()));
    out.write(net.role.data(), static_cast<std::streamsize>(net.role.size()));
    write_u16(out, static_cast<uint16_t>(net.layers.size()));
    for (const LayerBlob& l : net.layers) {
      out.put(static_cast<char>(l.type));
      write_u16(out, static_cast<uint16_t>(l.out));
      write_u16(out, static_cast<uint16_t>(l.in));
      out.put(static_cast<char>(l.k));
      out.put(static_cast<char>(l.stride));
      out.put(static_cast<char>(l.padding));
    }
    for (const LayerBlob& l : net.layers) {
      if (l.payload.size() != payload_count(l)) throw FormatError("layer payload size mismatch on save");
      write_f64(out, l.payload);
    }
  }
  write_u32(out, 0);  // reserved trailer
}

std::vector<NetBlob> load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  Reader rd{in};
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad model file magic");
  if (rd.u16() != kVersion) throw FormatError("unsupported model file version");
  const int net_count = rd.u8();
  std::vector<NetBlob> nets;
  for (int ni = 0; ni < net_count; ++ni) {
    NetBlob net;
    const int role_len = rd.u8();
    net.role.resize(static_cast<size_t>(role_len));
    in.read(net.role.data(), role_len);
    if (!in) throw FormatError("model file truncated in role");
    const int layer_count = rd.u16();
    for (int li = 0; li < layer_count; ++li) {
      LayerBlob b;
      const uint8_t t = rd.u8();
      if (t < 1 || t > 4) throw FormatError("unknown layer type in model file");
      b.type = static_cast<LayerBlob::Type>(t);
      b.out = rd.u16();
      b.in = rd.u16();
      b.k = rd.u8();
      b.stride = rd.u8();
      const uint8_t pad = rd.u8();
      if (pad > 1) throw FormatError("unknown padding mode in model file");
      b.padding = static_cast<Padding>(pad);
      net.layers.push_back(b);
    }
    for (LayerBlob& b : net.layers) b.payload = rd.f64(payload_count(b));
    nets.push_back(std::move(net));
  }
  return nets;
}

const NetBlob& find_net(const std::vector<NetBlob>& nets, const std::string& role) {
  for (const NetBlob& n : nets) {
    if (n.role == role) return n;
  }
  throw FormatError("model file has no net tagged '" + role + "'");
}

LayerBlob to_blob(const ConvLayer& l) {
  LayerBlob b;
  b.type = LayerBlob::Type::kConv;
  b.out = l.out_ch;
  b.in = l.in_ch;
  b.k = l.k;
  b.stride = l.stride;
  b.padding = l.padding;
  b.payload = l.kernel.value.v;
  b.payload.insert(b.payload.end(), l.bias.value.v.begin(), l.bias.value.v.end());
  return b;
}

LayerBlob to_blob(const BatchNormLayer& l) {
  LayerBlob b;
  b.type = LayerBlob::Type::kBatchNorm;
  b.out = l.channels;
  b.in = l.channels;
  b.payload = l.gamma.value.v;
  b.payload.insert(b.payload.end(), l.beta.value.v.begin(), l.beta.value.v.end());
  b.payload.insert(b.payload.end(), l.running_mean.v.begin(), l.running_mean.v.end());
  b.payload.insert(b.payload.end(), l.running_var.v.begin(), l.running_var.v.end());
  return b;
}

LayerBlob to_blob(const PreluLayer& l) {
  LayerBlob b;
  b.type = LayerBlob::Type::kPrelu;
  b.out = l.channels;
  b.in = l.channels;
  b.payload = l.slope.value.v;
  return b;
}

LayerBlob to_blob(const DenseLayer& l) {
  LayerBlob b;
  b.type = LayerBlob::Type::kDense;
  b.out = l.out;
  b.in = l.in;
  b.payload = l.weight.value.v;
  b.payload.insert(b.payload.end(), l.bias.value.v.begin(), l.bias.value.v.end());
  return b;
}

void from_blob(const LayerBlob& blob, ConvLayer& l) {
  if (blob.type != LayerBlob::Type::kConv || blob.out != l.out_ch || blob.in != l.in_ch ||
      blob.k != l.k || blob.stride != l.stride || blob.padding != l.padding) {
    throw FormatError("conv layer descriptor does not match architecture");
  }
  const size_t ksz = l.kernel.value.size();
  std::copy(blob.payload.begin(), blob.payload.begin() + static_cast<long>(ksz), l.kernel.value.v.begin());
  std::copy(blob.payload.begin() + static_cast<long>(ksz), blob.payload.end(), l.bias.value.v.begin());
}

void from_blob(const LayerBlob& blob, BatchNormLayer& l) {
  if (blob.type != LayerBlob::Type::kBatchNorm || blob.out != l.channels) {
    throw FormatError("batchnorm layer descriptor does not match architecture");
  }
  const size_t c = static_cast<size_t>(l.channels);
  std::copy_n(blob.payload.begin(), c, l.gamma.value.v.begin());
  std::copy_n(blob.payload.begin() + static_cast<long>(c), c, l.beta.value.v.begin());
  std::copy_n(blob.payload.begin() + static_cast<long>(2 * c), c, l.running_mean.v.begin());
  std::copy_n(blob.payload.begin() + static_cast<long>(3 * c), c, l.running_var.v.begin());
}

void from_blob(const LayerBlob& blob, PreluLayer& l) {
  if (blob.type != LayerBlob::Type::kPrelu || blob.out != l.channels) {
    throw FormatError("prelu layer descriptor does not match architecture");
  }
  l.slope.value.v = blob.payload;
}

void from_blob(const LayerBlob& blob, DenseLayer& l) {
  if (blob.type != LayerBlob::Type::kDense || blob.out != l.out || blob.in != l.in) {
    throw FormatError("dense layer descriptor does not match architecture");
  }
  const size_t wsz = l.weight.value.size();
  std::copy(blob.payload.begin(), blob.payload.begin() + static_cast<long>(wsz), l.weight.value.v.begin());
  std::copy(blob.payload.begin() + static_cast<long>(wsz), blob.payload.end(), l.bias.value.v.begin());
}

}  // namespace lfc::nn
