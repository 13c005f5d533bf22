#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lfc/nn/layers.hpp"

namespace lfc::nn {

/// Serialized form of one parameterized layer: a typed descriptor plus its
/// raw parameter payload in a fixed per-type order.
struct LayerBlob {
  enum class Type : uint8_t { kConv = 1, kBatchNorm = 2, kPrelu = 3, kDense = 4 };
  Type type = Type::kConv;
  int out = 0, in = 0, k = 0, stride = 1;
  Padding padding = Padding::kValid;
  std::vector<double> payload;
};

/// One named network inside a model file.
struct NetBlob {
  std::string role;
  std::vector<LayerBlob> layers;
};

/// Model file: magic "LFNN", version, then a list of role-tagged nets, each a
/// layer-descriptor list followed by little-endian float64 payloads in
/// descriptor order.
void save_model_file(const std::vector<NetBlob>& nets, const std::filesystem::path& path);
std::vector<NetBlob> load_model_file(const std::filesystem::path& path);

const NetBlob& find_net(const std::vector<NetBlob>& nets, const std::string& role);

// Conversions between live layers and blobs. Loading validates the
// descriptor against the layer's constructed shape.
LayerBlob to_blob(const ConvLayer& l);
LayerBlob to_blob(const BatchNormLayer& l);
LayerBlob to_blob(const PreluLayer& l);
LayerBlob to_blob(const DenseLayer& l);
void from_blob(const LayerBlob& blob, ConvLayer& l);
void from_blob(const LayerBlob& blob, BatchNormLayer& l);
void from_blob(const LayerBlob& blob, PreluLayer& l);
void from_blob(const LayerBlob& blob, DenseLayer& l);

}  // namespace lfc::nn
