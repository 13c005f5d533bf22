#pragma once

#include <random>

#include "lfc/nn/tensor.hpp"

namespace lfc::nn {

enum class Padding : uint8_t { kValid = 0, kSame = 1 };

using Rng = std::mt19937_64;

/// 2D cross-correlation with odd square kernels. Same padding replicates the
/// nearest edge sample rather than zero-filling.
struct ConvLayer {
  int in_ch = 0, out_ch = 0, k = 1, stride = 1;
  Padding padding = Padding::kValid;
  Param kernel;  // (out_ch, in_ch, k, k)
  Param bias;    // (out_ch, 1, 1, 1)

  ConvLayer() = default;
  ConvLayer(int in, int out, int kernel_size, Padding pad, int stride_ = 1);

  void init_he_uniform(Rng& rng);
  void init_zero();
  int out_extent(int extent) const;
};

struct ConvCache {
  Tensor4 padded;  // input after padding (or the input itself for valid)
  int in_h = 0, in_w = 0;
  int pad_top = 0, pad_left = 0;
};

Tensor4 conv2d_forward(const Tensor4& x, const ConvLayer& layer, ConvCache* cache = nullptr);
/// Returns grad wrt the layer input and accumulates kernel/bias grads.
Tensor4 conv2d_backward(const Tensor4& grad_out, ConvLayer& layer, const ConvCache& cache);

/// Per-channel batch normalization over (batch, height, width).
struct BatchNormLayer {
  int channels = 0;
  double momentum = 0.9;
  double eps = 1e-5;
  Param gamma;  // (c,1,1,1)
  Param beta;
  Tensor4 running_mean;
  Tensor4 running_var;

  BatchNormLayer() = default;
  explicit BatchNormLayer(int ch);
};

struct BnCache {
  Tensor4 x_hat;
  std::vector<double> inv_std;  // per channel
};

/// In training mode normalizes by batch statistics and updates the running
/// estimates; in inference mode uses the running estimates.
Tensor4 batchnorm_forward(const Tensor4& x, BatchNormLayer& layer, bool training,
                          BnCache* cache = nullptr);
Tensor4 batchnorm_backward(const Tensor4& grad_out, BatchNormLayer& layer, const BnCache& cache);

/// PReLU with one learnable slope per channel (init 0.25).
struct PreluLayer {
  int channels = 0;
  Param slope;  // (c,1,1,1)

  PreluLayer() = default;
  explicit PreluLayer(int ch);
};

struct PreluCache {
  Tensor4 input;
};

Tensor4 prelu_forward(const Tensor4& x, const PreluLayer& layer, PreluCache* cache = nullptr);
Tensor4 prelu_backward(const Tensor4& grad_out, PreluLayer& layer, const PreluCache& cache);

/// Fully connected layer over the channel dimension of (n, in, 1, 1) tensors.
struct DenseLayer {
  int in = 0, out = 0;
  Param weight;  // (out, in, 1, 1)
  Param bias;    // (out, 1, 1, 1)

  DenseLayer() = default;
  DenseLayer(int in_, int out_);

  void init_he_uniform(Rng& rng);
};

struct DenseCache {
  Tensor4 input;
};

Tensor4 dense_forward(const Tensor4& x, const DenseLayer& layer, DenseCache* cache = nullptr);
Tensor4 dense_backward(const Tensor4& grad_out, DenseLayer& layer, const DenseCache& cache);

// Parameter-free activations and reductions. Each forward keeps what its
// backward needs in the returned cache tensor.

double softplus_scalar(double x);
Tensor4 softplus_forward(const Tensor4& x, Tensor4* cache_input = nullptr);
Tensor4 softplus_backward(const Tensor4& grad_out, const Tensor4& input);

Tensor4 sigmoid_forward(const Tensor4& x, Tensor4* cache_output = nullptr);
Tensor4 sigmoid_backward(const Tensor4& grad_out, const Tensor4& output);

Tensor4 global_avg_pool_forward(const Tensor4& x);
Tensor4 global_avg_pool_backward(const Tensor4& grad_out, int in_h, int in_w);

/// Mean squared error over all elements; grad is wrt `pred`.
double mse_loss(const Tensor4& pred, const Tensor4& target, Tensor4* grad_pred = nullptr);

/// Concatenate along channels. split_channels is its exact inverse.
Tensor4 concat_channels(const std::vector<const Tensor4*>& parts);
std::vector<Tensor4> split_channels(const Tensor4& x, const std::vector<int>& channel_counts);

}  // namespace lfc::nn
