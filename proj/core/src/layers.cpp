#include "lfc/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lfc::nn {

namespace {

struct PadSpec {
  int top = 0, bottom = 0, left = 0, right = 0;
};

PadSpec pad_spec(const ConvLayer& layer, int h, int w) {
  PadSpec p;
  if (layer.padding == Padding::kValid) return p;
  const int out_h = (h + layer.stride - 1) / layer.stride;
  const int out_w = (w + layer.stride - 1) / layer.stride;
  const int need_h = std::max(0, (out_h - 1) * layer.stride + layer.k - h);
  const int need_w = std::max(0, (out_w - 1) * layer.stride + layer.k - w);
  p.top = need_h / 2;
  p.bottom = need_h - p.top;
  p.left = need_w / 2;
  p.right = need_w - p.left;
  return p;
}

// Edge-replicated padding.
Tensor4 pad_replicate(const Tensor4& x, const PadSpec& p) {
  if (p.top == 0 && p.bottom == 0 && p.left == 0 && p.right == 0) return x;
  Tensor4 out(x.n, x.c, x.h + p.top + p.bottom, x.w + p.left + p.right);
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      const double* src = x.plane(in, ic);
      double* dst = out.plane(in, ic);
      for (int y = 0; y < out.h; ++y) {
        const int sy = std::clamp(y - p.top, 0, x.h - 1);
        for (int x2 = 0; x2 < out.w; ++x2) {
          const int sx = std::clamp(x2 - p.left, 0, x.w - 1);
          dst[static_cast<size_t>(y) * out.w + x2] = src[static_cast<size_t>(sy) * x.w + sx];
        }
      }
    }
  }
  return out;
}

Tensor4 pad_replicate_backward(const Tensor4& grad_padded, const PadSpec& p, int h, int w) {
  if (p.top == 0 && p.bottom == 0 && p.left == 0 && p.right == 0) return grad_padded;
  Tensor4 out(grad_padded.n, grad_padded.c, h, w);
  for (int in = 0; in < grad_padded.n; ++in) {
    for (int ic = 0; ic < grad_padded.c; ++ic) {
      const double* src = grad_padded.plane(in, ic);
      double* dst = out.plane(in, ic);
      for (int y = 0; y < grad_padded.h; ++y) {
        const int sy = std::clamp(y - p.top, 0, h - 1);
        for (int x2 = 0; x2 < grad_padded.w; ++x2) {
          const int sx = std::clamp(x2 - p.left, 0, w - 1);
          dst[static_cast<size_t>(sy) * w + sx] += src[static_cast<size_t>(y) * grad_padded.w + x2];
        }
      }
    }
  }
  return out;
}

}  // namespace

ConvLayer::ConvLayer(int in, int out, int kernel_size, Padding pad, int stride_)
    : in_ch(in), out_ch(out), k(kernel_size), stride(stride_), padding(pad),
      kernel(Tensor4(out, in, kernel_size, kernel_size)), bias(Tensor4(out, 1, 1, 1)) {
  if (kernel_size % 2 == 0) throw InvalidArgument("conv kernel size must be odd");
  if (stride_ < 1) throw InvalidArgument("conv stride must be >= 1");
}

void ConvLayer::init_he_uniform(Rng& rng) {
  const double limit = std::sqrt(6.0 / (static_cast<double>(in_ch) * k * k));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : kernel.value.v) v = dist(rng);
  std::fill(bias.value.v.begin(), bias.value.v.end(), 0.0);
}

void ConvLayer::init_zero() {
  std::fill(kernel.value.v.begin(), kernel.value.v.end(), 0.0);
  std::fill(bias.value.v.begin(), bias.value.v.end(), 0.0);
}

int ConvLayer::out_extent(int extent) const {
  if (padding == Padding::kSame) return (extent + stride - 1) / stride;
  return (extent - k) / stride + 1;
}

Tensor4 conv2d_forward(const Tensor4& x, const ConvLayer& layer, ConvCache* cache) {
  if (x.c != layer.in_ch) throw InvalidArgument("conv2d: channel mismatch");
  if (layer.padding == Padding::kValid && (x.h < layer.k || x.w < layer.k)) {
    throw InvalidArgument("conv2d: input smaller than kernel");
  }
  const PadSpec p = pad_spec(layer, x.h, x.w);
  Tensor4 padded = pad_replicate(x, p);
  const int s = layer.stride;
  const int out_h = (padded.h - layer.k) / s + 1;
  const int out_w = (padded.w - layer.k) / s + 1;
  Tensor4 out(x.n, layer.out_ch, out_h, out_w);
  const Tensor4& w = layer.kernel.value;
  for (int in = 0; in < x.n; ++in) {
    for (int oc = 0; oc < layer.out_ch; ++oc) {
      double* __restrict dst = out.plane(in, oc);
      const double b = layer.bias.value.v[static_cast<size_t>(oc)];
      std::fill(dst, dst + out.plane_size(), b);
      for (int ic = 0; ic < layer.in_ch; ++ic) {
        const double* __restrict src = padded.plane(in, ic);
        const double* wk = w.plane(oc, ic);
        for (int ky = 0; ky < layer.k; ++ky) {
          for (int kx = 0; kx < layer.k; ++kx) {
            const double wv = wk[static_cast<size_t>(ky) * layer.k + kx];
            for (int oy = 0; oy < out_h; ++oy) {
              const double* __restrict row = src + static_cast<size_t>(oy * s + ky) * padded.w + kx;
              double* __restrict orow = dst + static_cast<size_t>(oy) * out_w;
              if (s == 1) {
                for (int ox = 0; ox < out_w; ++ox) orow[ox] += wv * row[ox];
              } else {
                for (int ox = 0; ox < out_w; ++ox) orow[ox] += wv * row[static_cast<size_t>(ox) * s];
              }
            }
          }
        }
      }
    }
  }
  if (cache) {
    cache->padded = std::move(padded);
    cache->in_h = x.h;
    cache->in_w = x.w;
    cache->pad_top = p.top;
    cache->pad_left = p.left;
  }
  return out;
}

Tensor4 conv2d_backward(const Tensor4& grad_out, ConvLayer& layer, const ConvCache& cache) {
  const Tensor4& padded = cache.padded;
  const int s = layer.stride;
  const int out_h = grad_out.h;
  const int out_w = grad_out.w;
  Tensor4 grad_padded(padded.n, padded.c, padded.h, padded.w);
  Tensor4& gk = layer.kernel.grad;
  Tensor4& gb = layer.bias.grad;
  const Tensor4& w = layer.kernel.value;

  for (int in = 0; in < grad_out.n; ++in) {
    for (int oc = 0; oc < layer.out_ch; ++oc) {
      const double* g = grad_out.plane(in, oc);
      double bsum = 0.0;
      for (size_t i = 0; i < grad_out.plane_size(); ++i) bsum += g[i];
      gb.v[static_cast<size_t>(oc)] += bsum;
      for (int ic = 0; ic < layer.in_ch; ++ic) {
        const double* __restrict src = padded.plane(in, ic);
        double* __restrict gsrc = grad_padded.plane(in, ic);
        const double* wk = w.plane(oc, ic);
        double* gwk = gk.plane(oc, ic);
        for (int ky = 0; ky < layer.k; ++ky) {
          for (int kx = 0; kx < layer.k; ++kx) {
            const double wv = wk[static_cast<size_t>(ky) * layer.k + kx];
            double acc = 0.0;
            for (int oy = 0; oy < out_h; ++oy) {
              const double* __restrict grow = g + static_cast<size_t>(oy) * out_w;
              const double* __restrict row = src + static_cast<size_t>(oy * s + ky) * padded.w + kx;
              double* __restrict grad_row = gsrc + static_cast<size_t>(oy * s + ky) * padded.w + kx;
              if (s == 1) {
                double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                int ox = 0;
                for (; ox + 4 <= out_w; ox += 4) {
                  a0 += grow[ox] * row[ox];
                  a1 += grow[ox + 1] * row[ox + 1];
                  a2 += grow[ox + 2] * row[ox + 2];
                  a3 += grow[ox + 3] * row[ox + 3];
                }
                for (; ox < out_w; ++ox) a0 += grow[ox] * row[ox];
                acc += (a0 + a1) + (a2 + a3);
                for (int ox = 0; ox < out_w; ++ox) grad_row[ox] += wv * grow[ox];
              } else {
                for (int ox = 0; ox < out_w; ++ox) {
                  acc += grow[ox] * row[static_cast<size_t>(ox) * s];
                  grad_row[static_cast<size_t>(ox) * s] += wv * grow[ox];
                }
              }
            }
            gwk[static_cast<size_t>(ky) * layer.k + kx] += acc;
          }
        }
      }
    }
  }
  PadSpec p;
  p.top = cache.pad_top;
  p.left = cache.pad_left;
  p.bottom = padded.h - cache.in_h - p.top;
  p.right = padded.w - cache.in_w - p.left;
  return pad_replicate_backward(grad_padded, p, cache.in_h, cache.in_w);
}

BatchNormLayer::BatchNormLayer(int ch)
    : channels(ch), gamma(Tensor4(ch, 1, 1, 1, 1.0)), beta(Tensor4(ch, 1, 1, 1, 0.0)),
      running_mean(ch, 1, 1, 1, 0.0), running_var(ch, 1, 1, 1, 1.0) {}

Tensor4 batchnorm_forward(const Tensor4& x, BatchNormLayer& layer, bool training, BnCache* cache) {
  if (x.c != layer.channels) throw InvalidArgument("batchnorm: channel mismatch");
  Tensor4 out(x.n, x.c, x.h, x.w);
  Tensor4 x_hat(x.n, x.c, x.h, x.w);
  std::vector<double> inv_std(static_cast<size_t>(x.c));
  const double count = static_cast<double>(x.n) * x.h * x.w;
  for (int ic = 0; ic < x.c; ++ic) {
    double mean, var;
    if (training) {
      double sum = 0.0, sq = 0.0;
      for (int in = 0; in < x.n; ++in) {
        const double* src = x.plane(in, ic);
        for (size_t i = 0; i < x.plane_size(); ++i) {
          sum += src[i];
          sq += src[i] * src[i];
        }
      }
      mean = sum / count;
      var = std::max(0.0, sq / count - mean * mean);
      layer.running_mean.v[static_cast<size_t>(ic)] =
          layer.momentum * layer.running_mean.v[static_cast<size_t>(ic)] + (1 - layer.momentum) * mean;
      layer.running_var.v[static_cast<size_t>(ic)] =
          layer.momentum * layer.running_var.v[static_cast<size_t>(ic)] + (1 - layer.momentum) * var;
    } else {
      mean = layer.running_mean.v[static_cast<size_t>(ic)];
      var = layer.running_var.v[static_cast<size_t>(ic)];
    }
    const double istd = 1.0 / std::sqrt(var + layer.eps);
    inv_std[static_cast<size_t>(ic)] = istd;
    const double g = layer.gamma.value.v[static_cast<size_t>(ic)];
    const double b = layer.beta.value.v[static_cast<size_t>(ic)];
    for (int in = 0; in < x.n; ++in) {
      const double* src = x.plane(in, ic);
      double* xh = x_hat.plane(in, ic);
      double* dst = out.plane(in, ic);
      for (size_t i = 0; i < x.plane_size(); ++i) {
        xh[i] = (src[i] - mean) * istd;
        dst[i] = g * xh[i] + b;
      }
    }
  }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

Tensor4 batchnorm_backward(const Tensor4& grad_out, BatchNormLayer& layer, const BnCache& cache) {
  const Tensor4& x_hat = cache.x_hat;
  Tensor4 grad_x(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  const double count = static_cast<double>(grad_out.n) * grad_out.h * grad_out.w;
  for (int ic = 0; ic < grad_out.c; ++ic) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int in = 0; in < grad_out.n; ++in) {
      const double* g = grad_out.plane(in, ic);
      const double* xh = x_hat.plane(in, ic);
      for (size_t i = 0; i < grad_out.plane_size(); ++i) {
        sum_g += g[i];
        sum_gx += g[i] * xh[i];
      }
    }
    layer.beta.grad.v[static_cast<size_t>(ic)] += sum_g;
    layer.gamma.grad.v[static_cast<size_t>(ic)] += sum_gx;
    const double gamma = layer.gamma.value.v[static_cast<size_t>(ic)];
    const double istd = cache.inv_std[static_cast<size_t>(ic)];
    for (int in = 0; in < grad_out.n; ++in) {
      const double* g = grad_out.plane(in, ic);
      const double* xh = x_hat.plane(in, ic);
      double* gx = grad_x.plane(in, ic);
      for (size_t i = 0; i < grad_out.plane_size(); ++i) {
        gx[i] = gamma * istd * (g[i] - sum_g / count - xh[i] * sum_gx / count);
      }
    }
  }
  return grad_x;
}

PreluLayer::PreluLayer(int ch) : channels(ch), slope(Tensor4(ch, 1, 1, 1, 0.25)) {}

Tensor4 prelu_forward(const Tensor4& x, const PreluLayer& layer, PreluCache* cache) {
  if (x.c != layer.channels) throw InvalidArgument("prelu: channel mismatch");
  Tensor4 out(x.n, x.c, x.h, x.w);
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      const double a = layer.slope.value.v[static_cast<size_t>(ic)];
      const double* src = x.plane(in, ic);
      double* dst = out.plane(in, ic);
      for (size_t i = 0; i < x.plane_size(); ++i) dst[i] = src[i] >= 0 ? src[i] : a * src[i];
    }
  }
  if (cache) cache->input = x;
  return out;
}

Tensor4 prelu_backward(const Tensor4& grad_out, PreluLayer& layer, const PreluCache& cache) {
  const Tensor4& x = cache.input;
  Tensor4 grad_x(x.n, x.c, x.h, x.w);
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      const double a = layer.slope.value.v[static_cast<size_t>(ic)];
      double ga = 0.0;
      const double* src = x.plane(in, ic);
      const double* g = grad_out.plane(in, ic);
      double* gx = grad_x.plane(in, ic);
      for (size_t i = 0; i < x.plane_size(); ++i) {
        if (src[i] >= 0) {
          gx[i] = g[i];
        } else {
          gx[i] = a * g[i];
          ga += g[i] * src[i];
        }
      }
      layer.slope.grad.v[static_cast<size_t>(ic)] += ga;
    }
  }
  return grad_x;
}

DenseLayer::DenseLayer(int in_, int out_)
    : in(in_), out(out_), weight(Tensor4(out_, in_, 1, 1)), bias(Tensor4(out_, 1, 1, 1)) {}

void DenseLayer::init_he_uniform(Rng& rng) {
  const double limit = std::sqrt(6.0 / in);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : weight.value.v) v = dist(rng);
  std::fill(bias.value.v.begin(), bias.value.v.end(), 0.0);
}

Tensor4 dense_forward(const Tensor4& x, const DenseLayer& layer, DenseCache* cache) {
  if (x.c != layer.in || x.h != 1 || x.w != 1) throw InvalidArgument("dense: expects (n, in, 1, 1)");
  Tensor4 out(x.n, layer.out, 1, 1);
  for (int in_i = 0; in_i < x.n; ++in_i) {
    const double* src = x.v.data() + static_cast<size_t>(in_i) * layer.in;
    double* dst = out.v.data() + static_cast<size_t>(in_i) * layer.out;
    for (int o = 0; o < layer.out; ++o) {
      const double* w = layer.weight.value.v.data() + static_cast<size_t>(o) * layer.in;
      double acc = layer.bias.value.v[static_cast<size_t>(o)];
      for (int i = 0; i < layer.in; ++i) acc += w[i] * src[i];
      dst[o] = acc;
    }
  }
  if (cache) cache->input = x;
  return out;
}

Tensor4 dense_backward(const Tensor4& grad_out, DenseLayer& layer, const DenseCache& cache) {
  const Tensor4& x = cache.input;
  Tensor4 grad_x(x.n, layer.in, 1, 1);
  for (int in_i = 0; in_i < x.n; ++in_i) {
    const double* src = x.v.data() + static_cast<size_t>(in_i) * layer.in;
    const double* g = grad_out.v.data() + static_cast<size_t>(in_i) * layer.out;
    double* gx = grad_x.v.data() + static_cast<size_t>(in_i) * layer.in;
    for (int o = 0; o < layer.out; ++o) {
      layer.bias.grad.v[static_cast<size_t>(o)] += g[o];
      double* gw = layer.weight.grad.v.data() + static_cast<size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        gw[i] += g[o] * src[i];
        gx[i] += g[o] * layer.weight.value.v[static_cast<size_t>(o) * layer.in + i];
      }
    }
  }
  return grad_x;
}

double softplus_scalar(double x) {
  double y;
  if (x > 30.0) {
    y = x;
  } else {
    y = std::log1p(std::exp(x));
  }
  return std::max(y, std::numeric_limits<double>::min());
}

Tensor4 softplus_forward(const Tensor4& x, Tensor4* cache_input) {
  Tensor4 out(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) out.v[i] = softplus_scalar(x.v[i]);
  if (cache_input) *cache_input = x;
  return out;
}

Tensor4 softplus_backward(const Tensor4& grad_out, const Tensor4& input) {
  Tensor4 grad(input.n, input.c, input.h, input.w);
  for (size_t i = 0; i < input.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-input.v[i]));
    grad.v[i] = grad_out.v[i] * s;
  }
  return grad;
}

Tensor4 sigmoid_forward(const Tensor4& x, Tensor4* cache_output) {
  Tensor4 out(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) out.v[i] = 1.0 / (1.0 + std::exp(-x.v[i]));
  if (cache_output) *cache_output = out;
  return out;
}

Tensor4 sigmoid_backward(const Tensor4& grad_out, const Tensor4& output) {
  Tensor4 grad(output.n, output.c, output.h, output.w);
  for (size_t i = 0; i < output.size(); ++i) {
    grad.v[i] = grad_out.v[i] * output.v[i] * (1.0 - output.v[i]);
  }
  return grad;
}

Tensor4 global_avg_pool_forward(const Tensor4& x) {
  Tensor4 out(x.n, x.c, 1, 1);
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      const double* src = x.plane(in, ic);
      double sum = 0.0;
      for (size_t i = 0; i < x.plane_size(); ++i) sum += src[i];
      out.at(in, ic, 0, 0) = sum / static_cast<double>(x.plane_size());
    }
  }
  return out;
}

Tensor4 global_avg_pool_backward(const Tensor4& grad_out, int in_h, int in_w) {
  Tensor4 grad(grad_out.n, grad_out.c, in_h, in_w);
  const double scale = 1.0 / (static_cast<double>(in_h) * in_w);
  for (int in = 0; in < grad_out.n; ++in) {
    for (int ic = 0; ic < grad_out.c; ++ic) {
      const double g = grad_out.at(in, ic, 0, 0) * scale;
      double* dst = grad.plane(in, ic);
      for (size_t i = 0; i < grad.plane_size(); ++i) dst[i] = g;
    }
  }
  return grad;
}

double mse_loss(const Tensor4& pred, const Tensor4& target, Tensor4* grad_pred) {
  if (!pred.same_shape(target)) throw InvalidArgument("mse_loss: shape mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    sum += d * d;
  }
  const double count = static_cast<double>(pred.size());
  if (grad_pred) {
    *grad_pred = Tensor4(pred.n, pred.c, pred.h, pred.w);
    for (size_t i = 0; i < pred.size(); ++i) {
      grad_pred->v[i] = 2.0 * (pred.v[i] - target.v[i]) / count;
    }
  }
  return sum / count;
}

Tensor4 concat_channels(const std::vector<const Tensor4*>& parts) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  int channels = 0;
  for (const Tensor4* p : parts) {
    if (p->n != parts[0]->n || p->h != parts[0]->h || p->w != parts[0]->w) {
      throw InvalidArgument("concat: spatial/batch mismatch");
    }
    channels += p->c;
  }
  Tensor4 out(parts[0]->n, channels, parts[0]->h, parts[0]->w);
  for (int in = 0; in < out.n; ++in) {
    int oc = 0;
    for (const Tensor4* p : parts) {
      for (int ic = 0; ic < p->c; ++ic, ++oc) {
        const double* src = p->plane(in, ic);
        std::copy(src, src + p->plane_size(), out.plane(in, oc));
      }
    }
  }
  return out;
}

std::vector<Tensor4> split_channels(const Tensor4& x, const std::vector<int>& channel_counts) {
  int total = 0;
  for (int c : channel_counts) total += c;
  if (total != x.c) throw InvalidArgument("split: channel counts do not sum to input channels");
  std::vector<Tensor4> parts;
  int start = 0;
  for (int c : channel_counts) {
    Tensor4 part(x.n, c, x.h, x.w);
    for (int in = 0; in < x.n; ++in) {
      for (int ic = 0; ic < c; ++ic) {
        const double* src = x.plane(in, start + ic);
        std::copy(src, src + x.plane_size(), part.plane(in, ic));
      }
    }
    parts.push_back(std::move(part));
    start += c;
  }
  return parts;
}

}  // namespace lfc::nn
