#include "lfc/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "lfc/parallel.hpp"

namespace lfc {

using nn::Tensor4;

namespace {

struct BilinearTaps {
  int x0, x1, y0, y1;
  double wx, wy;
};

BilinearTaps taps(double fx, double fy, int w, int h) {
  BilinearTaps t;
  const double xf = std::floor(fx);
  const double yf = std::floor(fy);
  t.wx = fx - xf;
  t.wy = fy - yf;
  t.x0 = std::clamp(static_cast<int>(xf), 0, w - 1);
  t.x1 = std::clamp(static_cast<int>(xf) + 1, 0, w - 1);
  t.y0 = std::clamp(static_cast<int>(yf), 0, h - 1);
  t.y1 = std::clamp(static_cast<int>(yf) + 1, 0, h - 1);
  return t;
}

double levels_step(const D2GanConfig& c) {
  return c.disparity_levels > 1 ? 2.0 * c.d_max / (c.disparity_levels - 1) : 0.0;
}

Tensor4 plane_tensor(const PlaneF& p) { return Tensor4::from_plane(p); }

}  // namespace

void D2GanConfig::validate() const {
  if (!(alpha > 0 && alpha <= 1) || !(beta > 0 && beta <= 1)) {
    throw InvalidArgument("alpha and beta must lie in (0, 1]");
  }
  if (disparity_levels < 2) throw InvalidArgument("need at least 2 disparity levels");
  if (!(d_max > 0)) throw InvalidArgument("d_max must be positive");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (patch_size < 25) throw InvalidArgument("patch size must be >= 25");
  if (adv_weight < 0) throw InvalidArgument("adversarial weight must be >= 0");
}

PlaneF warp_window(const PlaneF& ref, AngularPos p, AngularPos q, const PlaneF& disparity,
                   int origin_x, int origin_y) {
  const double du = p.u - q.u;
  const double dv = p.v - q.v;
  PlaneF out(disparity.width, disparity.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double d = disparity.at(x, y);
      const double fx = origin_x + x + dv * d;
      const double fy = origin_y + y + du * d;
      const BilinearTaps t = taps(fx, fy, ref.width, ref.height);
      const double top = (1 - t.wx) * ref.at(t.x0, t.y0) + t.wx * ref.at(t.x1, t.y0);
      const double bot = (1 - t.wx) * ref.at(t.x0, t.y1) + t.wx * ref.at(t.x1, t.y1);
      out.at(x, y) = (1 - t.wy) * top + t.wy * bot;
    }
  }
  return out;
}

PlaneF warp_view(const PlaneF& ref, AngularPos p, AngularPos q, const PlaneF& disparity) {
  if (disparity.width != ref.width || disparity.height != ref.height) {
    throw InvalidArgument("warp_view: disparity dims must match the reference");
  }
  return warp_window(ref, p, q, disparity, 0, 0);
}

void warp_backward(const PlaneF& ref, AngularPos p, AngularPos q, const PlaneF& disparity,
                   int origin_x, int origin_y, const PlaneF& grad_out, PlaneF* grad_ref,
                   PlaneF* grad_disparity) {
  const double du = p.u - q.u;
  const double dv = p.v - q.v;
  for (int y = 0; y < disparity.height; ++y) {
    for (int x = 0; x < disparity.width; ++x) {
      const double g = grad_out.at(x, y);
      if (g == 0.0) continue;
      const double d = disparity.at(x, y);
      const double fx = origin_x + x + dv * d;
      const double fy = origin_y + y + du * d;
      const BilinearTaps t = taps(fx, fy, ref.width, ref.height);
      const double v00 = ref.at(t.x0, t.y0);
      const double v10 = ref.at(t.x1, t.y0);
      const double v01 = ref.at(t.x0, t.y1);
      const double v11 = ref.at(t.x1, t.y1);
      if (grad_ref) {
        grad_ref->at(t.x0, t.y0) += g * (1 - t.wx) * (1 - t.wy);
        grad_ref->at(t.x1, t.y0) += g * t.wx * (1 - t.wy);
        grad_ref->at(t.x0, t.y1) += g * (1 - t.wx) * t.wy;
        grad_ref->at(t.x1, t.y1) += g * t.wx * t.wy;
      }
      if (grad_disparity) {
        const double dfx = (1 - t.wy) * (v10 - v00) + t.wy * (v11 - v01);
        const double dfy = (1 - t.wx) * (v01 - v00) + t.wx * (v11 - v10);
        grad_disparity->at(x, y) += g * (dv * dfx + du * dfy);
      }
    }
  }
}

std::array<AngularPos, 4> quadrant_corners(int grid_rows, int grid_cols, AngularPos q) {
  if (grid_rows < 4 || grid_cols < 4 || grid_rows % 2 || grid_cols % 2) {
    throw InvalidArgument("quadrant_corners: grid dimensions must be even and >= 4");
  }
  if (q.u < 0 || q.u >= grid_rows || q.v < 0 || q.v >= grid_cols) {
    throw InvalidArgument("quadrant_corners: position outside grid");
  }
  const int qr = grid_rows / 2;
  const int qc = grid_cols / 2;
  const int row0 = (q.u / qr) * qr;
  const int col0 = (q.v / qc) * qc;
  return {AngularPos{row0, col0}, AngularPos{row0, col0 + qc - 1},
          AngularPos{row0 + qr - 1, col0}, AngularPos{row0 + qr - 1, col0 + qc - 1}};
}

namespace {

void check_quadrant_refs(const std::array<AngularPos, 4>& positions, AngularPos q, int grid_rows,
                         int grid_cols) {
  auto expected = quadrant_corners(grid_rows, grid_cols, q);
  auto sorted_positions = positions;
  std::sort(sorted_positions.begin(), sorted_positions.end());
  std::sort(expected.begin(), expected.end());
  if (sorted_positions != expected) {
    throw InvalidArgument("reference positions are not the corner set of the target's quadrant");
  }
}

}  // namespace

Tensor4 build_features(const std::array<PlaneF, 4>& refs,
                       const std::array<AngularPos, 4>& positions, AngularPos q,
                       const D2GanConfig& config, int grid_rows, int grid_cols) {
  config.validate();
  check_quadrant_refs(positions, q, grid_rows, grid_cols);
  const int w = refs[0].width;
  const int h = refs[0].height;
  for (const PlaneF& r : refs) {
    if (r.width != w || r.height != h) throw InvalidArgument("reference planes differ in size");
  }
  const int levels = config.disparity_levels;
  const double step = levels_step(config);
  Tensor4 out(1, 2 * levels, h, w);
  PlaneF level_map(w, h);
  for (int l = 0; l < levels; ++l) {
    const double d = -config.d_max + l * step;
    std::fill(level_map.data.begin(), level_map.data.end(), d);
    std::array<PlaneF, 4> warped;
    for (size_t i = 0; i < refs.size(); ++i) {
      warped[i] = warp_window(refs[i], positions[i], q, level_map, 0, 0);
    }
    double* mean_plane = out.plane(0, 2 * l);
    double* std_plane = out.plane(0, 2 * l + 1);
    for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i) {
      double sum = 0.0, sq = 0.0;
      for (const PlaneF& wp : warped) {
        sum += wp.data[i];
        sq += wp.data[i] * wp.data[i];
      }
      const double mean = sum / 4.0;
      mean_plane[i] = mean;
      std_plane[i] = std::sqrt(std::max(0.0, sq / 4.0 - mean * mean));
    }
  }
  return out;
}

std::array<PlaneF, 4> build_features_backward(const std::array<PlaneF, 4>& refs,
                                              const std::array<AngularPos, 4>& positions,
                                              AngularPos q, const D2GanConfig& config,
                                              int grid_rows, int grid_cols,
                                              const Tensor4& grad_features) {
  check_quadrant_refs(positions, q, grid_rows, grid_cols);
  const int w = refs[0].width;
  const int h = refs[0].height;
  const int levels = config.disparity_levels;
  const double step = levels_step(config);
  std::array<PlaneF, 4> grad_refs;
  for (PlaneF& g : grad_refs) g = PlaneF(w, h);
  PlaneF level_map(w, h);
  for (int l = 0; l < levels; ++l) {
    const double d = -config.d_max + l * step;
    std::fill(level_map.data.begin(), level_map.data.end(), d);
    std::array<PlaneF, 4> warped;
    for (size_t i = 0; i < refs.size(); ++i) {
      warped[i] = warp_window(refs[i], positions[i], q, level_map, 0, 0);
    }
    const double* g_mean = grad_features.plane(0, 2 * l);
    const double* g_std = grad_features.plane(0, 2 * l + 1);
    for (size_t i = 0; i < refs.size(); ++i) {
      PlaneF grad_warped(w, h);
      for (size_t px = 0; px < static_cast<size_t>(w) * h; ++px) {
        double sum = 0.0, sq = 0.0;
        for (const PlaneF& wp : warped) {
          sum += wp.data[px];
          sq += wp.data[px] * wp.data[px];
        }
        const double mean = sum / 4.0;
        const double sd = std::sqrt(std::max(0.0, sq / 4.0 - mean * mean));
        double g = g_mean[px] / 4.0;
        if (sd > 1e-12) g += g_std[px] * (warped[i].data[px] - mean) / (4.0 * sd);
        grad_warped.data[px] = g;
      }
      warp_backward(refs[i], positions[i], q, level_map, 0, 0, grad_warped, &grad_refs[i], nullptr);
    }
  }
  return grad_refs;
}

GeneratorStack::GeneratorStack(int in_channels, bool sigmoid)
    : c1(in_channels, 32, 7, nn::Padding::kValid),
      c2(32, 64, 5, nn::Padding::kValid),
      c3(64, 32, 3, nn::Padding::kValid),
      c4(32, 1, 1, nn::Padding::kValid),
      a1(32), a2(64), a3(32),
      sigmoid_head(sigmoid) {}

Tensor4 GeneratorStack::forward(const Tensor4& x, Cache* cache) const {
  Cache local;
  Cache* c = cache ? cache : &local;
  Tensor4 t = nn::conv2d_forward(x, c1, &c->cc1);
  t = nn::prelu_forward(t, a1, &c->pc1);
  t = nn::conv2d_forward(t, c2, &c->cc2);
  t = nn::prelu_forward(t, a2, &c->pc2);
  t = nn::conv2d_forward(t, c3, &c->cc3);
  t = nn::prelu_forward(t, a3, &c->pc3);
  t = nn::conv2d_forward(t, c4, &c->cc4);
  if (sigmoid_head) t = nn::sigmoid_forward(t, &c->sigmoid_out);
  return t;
}

Tensor4 GeneratorStack::backward(const Tensor4& grad_out, const Cache& cache) {
  Tensor4 g = grad_out;
  if (sigmoid_head) g = nn::sigmoid_backward(g, cache.sigmoid_out);
  g = nn::conv2d_backward(g, c4, cache.cc4);
  g = nn::prelu_backward(g, a3, cache.pc3);
  g = nn::conv2d_backward(g, c3, cache.cc3);
  g = nn::prelu_backward(g, a2, cache.pc2);
  g = nn::conv2d_backward(g, c2, cache.cc2);
  g = nn::prelu_backward(g, a1, cache.pc1);
  g = nn::conv2d_backward(g, c1, cache.cc1);
  return g;
}

std::vector<nn::Param*> GeneratorStack::params() {
  return {&c1.kernel, &c1.bias, &a1.slope, &c2.kernel, &c2.bias, &a2.slope,
          &c3.kernel, &c3.bias, &a3.slope, &c4.kernel, &c4.bias};
}

void GeneratorStack::init(nn::Rng& rng) {
  c1.init_he_uniform(rng);
  c2.init_he_uniform(rng);
  c3.init_he_uniform(rng);
  // The 1x1 head starts at zero: the disparity net then begins at zero
  // disparity and the color net at mid-gray, keeping the warp gradients
  // alive. He-init heads start the disparity far outside [-d_max, d_max],
  // which saturates the color sigmoid and kills training.
  c4.init_zero();
}

GeneratorPair::GeneratorPair(const D2GanConfig& config)
    : disparity_net(config.feature_channels(), false), color_net(7, true) {}

std::vector<nn::Param*> GeneratorPair::params() {
  std::vector<nn::Param*> ps = disparity_net.params();
  const std::vector<nn::Param*> cs = color_net.params();
  ps.insert(ps.end(), cs.begin(), cs.end());
  return ps;
}

void GeneratorPair::init(nn::Rng& rng) {
  disparity_net.init(rng);
  color_net.init(rng);
}

Discriminator::Discriminator()
    : c1(1, 32, 3, nn::Padding::kSame, 2),
      c2(32, 64, 3, nn::Padding::kSame, 2),
      c3(64, 64, 3, nn::Padding::kSame, 2),
      a1(32), a2(64), a3(64),
      fc(64, 1) {}

Tensor4 Discriminator::forward(const Tensor4& x, Cache* cache) const {
  Cache local;
  Cache* c = cache ? cache : &local;
  Tensor4 t = nn::conv2d_forward(x, c1, &c->cc1);
  t = nn::prelu_forward(t, a1, &c->pc1);
  t = nn::conv2d_forward(t, c2, &c->cc2);
  t = nn::prelu_forward(t, a2, &c->pc2);
  t = nn::conv2d_forward(t, c3, &c->cc3);
  t = nn::prelu_forward(t, a3, &c->pc3);
  c->pre_pool = t;
  t = nn::global_avg_pool_forward(t);
  t = nn::dense_forward(t, fc, &c->dc);
  t = nn::softplus_forward(t, &c->softplus_in);
  return t;
}

Tensor4 Discriminator::backward(const Tensor4& grad_out, const Cache& cache) {
  Tensor4 g = nn::softplus_backward(grad_out, cache.softplus_in);
  g = nn::dense_backward(g, fc, cache.dc);
  g = nn::global_avg_pool_backward(g, cache.pre_pool.h, cache.pre_pool.w);
  g = nn::prelu_backward(g, a3, cache.pc3);
  g = nn::conv2d_backward(g, c3, cache.cc3);
  g = nn::prelu_backward(g, a2, cache.pc2);
  g = nn::conv2d_backward(g, c2, cache.cc2);
  g = nn::prelu_backward(g, a1, cache.pc1);
  g = nn::conv2d_backward(g, c1, cache.cc1);
  return g;
}

std::vector<nn::Param*> Discriminator::params() {
  return {&c1.kernel, &c1.bias, &a1.slope, &c2.kernel, &c2.bias, &a2.slope,
          &c3.kernel, &c3.bias, &a3.slope, &fc.weight, &fc.bias};
}

void Discriminator::init(nn::Rng& rng) {
  c1.init_he_uniform(rng);
  c2.init_he_uniform(rng);
  c3.init_he_uniform(rng);
  fc.init_he_uniform(rng);
}

namespace {

void check_scores_positive(const std::vector<double>& scores) {
  for (double s : scores) {
    if (!(s > 0.0)) throw std::domain_error("discriminator score must be strictly positive");
  }
}

}  // namespace

D2GanLosses d2gan_losses(const ScoreBatch& scores, const D2GanConfig& config) {
  if (scores.d1_real.size() != scores.d1_fake.size() ||
      scores.d2_real.size() != scores.d2_fake.size() ||
      scores.d1_real.size() != scores.d2_real.size() || scores.d1_real.empty()) {
    throw InvalidArgument("score batch sizes must match and be non-empty");
  }
  check_scores_positive(scores.d1_real);
  check_scores_positive(scores.d1_fake);
  check_scores_positive(scores.d2_real);
  check_scores_positive(scores.d2_fake);
  const double m = static_cast<double>(scores.d1_real.size());
  D2GanLosses out;
  for (size_t i = 0; i < scores.d1_real.size(); ++i) {
    out.d1 += config.alpha * std::log(scores.d1_real[i]) - scores.d1_fake[i];
    out.d2 += config.beta * std::log(scores.d2_fake[i]) - scores.d2_real[i];
    out.generator += config.beta * std::log(scores.d2_fake[i]) - scores.d1_fake[i];
  }
  out.d1 /= m;
  out.d2 /= m;
  out.generator /= m;
  return out;
}

double d2gan_objective(const ScoreBatch& scores, const D2GanConfig& config) {
  const D2GanLosses l = d2gan_losses(scores, config);
  // alpha E[log D1(x)] - E[D1(G)] - E[D2(x)] + beta E[log D2(G)]
  double real_d2 = 0.0;
  for (double s : scores.d2_real) real_d2 += s;
  real_d2 /= static_cast<double>(scores.d2_real.size());
  double fake_d2_log = 0.0;
  for (double s : scores.d2_fake) fake_d2_log += config.beta * std::log(s);
  fake_d2_log /= static_cast<double>(scores.d2_fake.size());
  return l.d1 - real_d2 + fake_d2_log;
}

Tensor4 generator_forward(const GeneratorPair& gen, const SynthSample& sample,
                          const D2GanConfig& config, int grid_rows, int grid_cols,
                          GenForwardCache* cache) {
  GenForwardCache local;
  GenForwardCache* c = cache ? cache : &local;
  c->features = build_features(sample.ref_patches, sample.positions, sample.q, config, grid_rows,
                               grid_cols);
  c->disparity = gen.disparity_net.forward(c->features, &c->gd_cache);
  const PlaneF dmap = c->disparity.to_plane();
  const int margin = GeneratorStack::kShrink / 2;
  std::vector<const Tensor4*> parts;
  std::vector<Tensor4> warped_tensors(4);
  for (size_t i = 0; i < 4; ++i) {
    c->warped[i] = warp_window(sample.ref_patches[i], sample.positions[i], sample.q, dmap, margin,
                               margin);
    warped_tensors[i] = plane_tensor(c->warped[i]);
  }
  for (const Tensor4& t : warped_tensors) parts.push_back(&t);
  parts.push_back(&c->disparity);
  const double u_norm = grid_rows > 1 ? static_cast<double>(sample.q.u) / (grid_rows - 1) : 0.0;
  const double v_norm = grid_cols > 1 ? static_cast<double>(sample.q.v) / (grid_cols - 1) : 0.0;
  Tensor4 pos_u(1, 1, c->disparity.h, c->disparity.w, u_norm);
  Tensor4 pos_v(1, 1, c->disparity.h, c->disparity.w, v_norm);
  parts.push_back(&pos_u);
  parts.push_back(&pos_v);
  c->color_in = nn::concat_channels(parts);
  return gen.color_net.forward(c->color_in, &c->gc_cache);
}

void generator_backward(GeneratorPair& gen, const SynthSample& sample, const D2GanConfig& config,
                        const GenForwardCache& cache, const Tensor4& grad_out) {
  (void)config;
  const Tensor4 grad_color_in = gen.color_net.backward(grad_out, cache.gc_cache);
  const std::vector<Tensor4> parts = nn::split_channels(grad_color_in, {1, 1, 1, 1, 1, 1, 1});
  const PlaneF dmap = cache.disparity.to_plane();
  PlaneF grad_d = parts[4].to_plane();  // direct path into the color net
  const int margin = GeneratorStack::kShrink / 2;
  for (size_t i = 0; i < 4; ++i) {
    warp_backward(sample.ref_patches[i], sample.positions[i], sample.q, dmap, margin, margin,
                  parts[i].to_plane(), nullptr, &grad_d);
  }
  gen.disparity_net.backward(plane_tensor(grad_d), cache.gd_cache);
}

namespace {

double psnr_unit(double mse_value) {
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse_value);
}

double validation_psnr(const GeneratorPair& gen, const std::vector<SynthSample>& val,
                       const SynthTrainConfig& cfg) {
  if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const SynthSample& s : val) {
    const Tensor4 out = generator_forward(gen, s, cfg.gan, cfg.grid_rows, cfg.grid_cols, nullptr);
    const Tensor4 target = plane_tensor(s.target);
    total += psnr_unit(nn::mse_loss(out, target));
  }
  return total / static_cast<double>(val.size());
}

}  // namespace

SynthTrainResult train_d2gan(const std::vector<SynthSample>& train,
                             const std::vector<SynthSample>& val, const SynthTrainConfig& config,
                             uint64_t seed) {
  config.gan.validate();
  if (train.empty()) throw InvalidArgument("train_d2gan: empty training set");
  const int out_size = config.gan.output_size();
  for (const SynthSample& s : train) {
    if (s.ref_patches[0].width != config.gan.patch_size || s.target.width != out_size ||
        s.target.height != out_size) {
      throw InvalidArgument("train_d2gan: sample dims do not match the configured patch size");
    }
  }

  nn::Rng rng(seed);
  SynthTrainResult result;
  result.generator = GeneratorPair(config.gan);
  result.generator.init(rng);
  result.d1.init(rng);
  result.d2.init(rng);

  nn::AdamConfig adam_cfg;
  adam_cfg.lr = config.gan.learning_rate;
  nn::Adam opt_g(adam_cfg, result.generator.params());
  nn::Adam opt_d1(adam_cfg, result.d1.params());
  nn::Adam opt_d2(adam_cfg, result.d2.params());

  const int jobs = std::max(1, config.jobs);
  std::vector<GeneratorPair> workers(static_cast<size_t>(jobs), result.generator);

  std::uniform_int_distribution<size_t> pick(0, train.size() - 1);
  const int m = config.gan.batch_size;

  for (int step = 1; step <= config.steps; ++step) {
    std::vector<size_t> batch(static_cast<size_t>(m));
    for (size_t& b : batch) b = pick(rng);

    // Generator forward for the whole batch (read-only on the model).
    std::vector<GenForwardCache> caches(static_cast<size_t>(m));
    std::vector<Tensor4> fakes(static_cast<size_t>(m));
    parallel_chunks(m, jobs, [&](int begin, int end, int) {
      for (int i = begin; i < end; ++i) {
        fakes[static_cast<size_t>(i)] =
            generator_forward(result.generator, train[batch[static_cast<size_t>(i)]], config.gan,
                              config.grid_rows, config.grid_cols, &caches[static_cast<size_t>(i)]);
      }
    });

    std::vector<const Tensor4*> fake_parts;
    std::vector<Tensor4> real_parts(static_cast<size_t>(m));
    std::vector<const Tensor4*> real_ptrs;
    for (int i = 0; i < m; ++i) {
      fake_parts.push_back(&fakes[static_cast<size_t>(i)]);
      real_parts[static_cast<size_t>(i)] = plane_tensor(train[batch[static_cast<size_t>(i)]].target);
      real_ptrs.push_back(&real_parts[static_cast<size_t>(i)]);
    }
    // Stack the batch along n for the discriminators.
    auto stack_batch = [m](const std::vector<const Tensor4*>& parts) {
      Tensor4 out(m, 1, parts[0]->h, parts[0]->w);
      for (int i = 0; i < m; ++i) {
        std::copy(parts[static_cast<size_t>(i)]->v.begin(), parts[static_cast<size_t>(i)]->v.end(),
                  out.plane(i, 0));
      }
      return out;
    };
    const Tensor4 fake_batch = stack_batch(fake_parts);
    const Tensor4 real_batch = stack_batch(real_ptrs);

    TrainLogRow row;
    row.step = step;
    row.val_psnr = std::numeric_limits<double>::quiet_NaN();

    // D1 ascent: mean(alpha log D1(real) - D1(fake)).
    {
      nn::zero_grads(result.d1.params());
      Discriminator::Cache cr, cf;
      const Tensor4 sr = result.d1.forward(real_batch, &cr);
      const Tensor4 sf = result.d1.forward(fake_batch, &cf);
      Tensor4 gr(m, 1, 1, 1), gf(m, 1, 1, 1);
      double loss = 0.0;
      for (int i = 0; i < m; ++i) {
        const double r = sr.at(i, 0, 0, 0);
        const double f = sf.at(i, 0, 0, 0);
        loss += config.gan.alpha * std::log(r) - f;
        gr.at(i, 0, 0, 0) = config.gan.alpha / (r * m);
        gf.at(i, 0, 0, 0) = -1.0 / m;
      }
      row.l_d1 = loss / m;
      result.d1.backward(gr, cr);
      result.d1.backward(gf, cf);
      opt_d1.step_ascend(result.d1.params());
    }

    // D2 ascent: mean(beta log D2(fake) - D2(real)).
    {
      nn::zero_grads(result.d2.params());
      Discriminator::Cache cr, cf;
      const Tensor4 sr = result.d2.forward(real_batch, &cr);
      const Tensor4 sf = result.d2.forward(fake_batch, &cf);
      Tensor4 gr(m, 1, 1, 1), gf(m, 1, 1, 1);
      double loss = 0.0;
      for (int i = 0; i < m; ++i) {
        const double r = sr.at(i, 0, 0, 0);
        const double f = sf.at(i, 0, 0, 0);
        loss += config.gan.beta * std::log(f) - r;
        gr.at(i, 0, 0, 0) = -1.0 / m;
        gf.at(i, 0, 0, 0) = config.gan.beta / (f * m);
      }
      row.l_d2 = loss / m;
      result.d2.backward(gr, cr);
      result.d2.backward(gf, cf);
      opt_d2.step_ascend(result.d2.params());
    }

    // Generator descent: MSE + adv_weight * mean(beta log D2(fake) - D1(fake)),
    // scored against the just-updated discriminators.
    Tensor4 grad_fake_batch(m, 1, out_size, out_size);
    {
      double adv_loss = 0.0;
      double mse_total = 0.0;
      Tensor4 adv_grad(m, 1, out_size, out_size);
      if (config.gan.adv_weight > 0) {
        nn::zero_grads(result.d1.params());
        nn::zero_grads(result.d2.params());
        Discriminator::Cache c1f, c2f;
        const Tensor4 s1 = result.d1.forward(fake_batch, &c1f);
        const Tensor4 s2 = result.d2.forward(fake_batch, &c2f);
        Tensor4 g1(m, 1, 1, 1), g2(m, 1, 1, 1);
        for (int i = 0; i < m; ++i) {
          adv_loss += config.gan.beta * std::log(s2.at(i, 0, 0, 0)) - s1.at(i, 0, 0, 0);
          g1.at(i, 0, 0, 0) = -1.0 / m;
          g2.at(i, 0, 0, 0) = config.gan.beta / (s2.at(i, 0, 0, 0) * m);
        }
        adv_loss /= m;
        const Tensor4 adv1 = result.d1.backward(g1, c1f);
        const Tensor4 adv2 = result.d2.backward(g2, c2f);
        for (size_t i = 0; i < adv_grad.size(); ++i) adv_grad.v[i] = adv1.v[i] + adv2.v[i];
        nn::zero_grads(result.d1.params());
        nn::zero_grads(result.d2.params());
      }
      for (int i = 0; i < m; ++i) {
        Tensor4 mse_grad;
        const Tensor4 target = plane_tensor(train[batch[static_cast<size_t>(i)]].target);
        mse_total += nn::mse_loss(fakes[static_cast<size_t>(i)], target, &mse_grad);
        for (int y = 0; y < out_size; ++y) {
          for (int x = 0; x < out_size; ++x) {
            grad_fake_batch.at(i, 0, y, x) =
                mse_grad.at(0, 0, y, x) + config.gan.adv_weight * adv_grad.at(i, 0, y, x);
          }
        }
      }
      row.l_g_adv = adv_loss;
      row.l_mse = mse_total / m;
      if (!std::isfinite(row.l_mse)) throw TrainingDiverged("non-finite generator loss");
    }

    // Per-sample backward on worker clones, reduced in worker order.
    for (GeneratorPair& w : workers) {
      w = result.generator;
      nn::zero_grads(w.params());
    }
    parallel_chunks(m, jobs, [&](int begin, int end, int worker) {
      for (int i = begin; i < end; ++i) {
        Tensor4 g(1, 1, out_size, out_size);
        const double* src = grad_fake_batch.plane(i, 0);
        std::copy(src, src + g.size(), g.v.begin());
        generator_backward(workers[static_cast<size_t>(worker)],
                           train[batch[static_cast<size_t>(i)]], config.gan, caches[static_cast<size_t>(i)], g);
      }
    });
    nn::zero_grads(result.generator.params());
    const std::vector<nn::Param*> main_params = result.generator.params();
    for (GeneratorPair& w : workers) {
      const std::vector<nn::Param*> wp = w.params();
      for (size_t pi = 0; pi < main_params.size(); ++pi) {
        for (size_t vi = 0; vi < main_params[pi]->grad.size(); ++vi) {
          main_params[pi]->grad.v[vi] += wp[pi]->grad.v[vi];
        }
      }
    }
    opt_g.step(main_params);

    if (step % config.val_every == 0 || step == config.steps) {
      row.val_psnr = validation_psnr(result.generator, val, config);
    }
    if (step % config.log_every == 0 || step == 1 || step == config.steps) {
      result.log.push_back(row);
    }
  }
  return result;
}

SynthesizedView synthesize_view(const std::array<PlaneF, 4>& refs,
                                const std::array<AngularPos, 4>& positions, AngularPos q,
                                const GeneratorPair& gen, const D2GanConfig& config, int grid_rows,
                                int grid_cols, int jobs) {
  config.validate();
  check_quadrant_refs(positions, q, grid_rows, grid_cols);
  const int w = refs[0].width;
  const int h = refs[0].height;
  const int out_tile = config.output_size();
  if (w < out_tile || h < out_tile) {
    throw InvalidArgument("view smaller than the synthesis output tile");
  }
  const int margin = GeneratorStack::kShrink;  // input support beyond the output tile
  // Edge-replicated padded copies of the references.
  std::array<PlaneF, 4> padded;
  for (size_t i = 0; i < 4; ++i) {
    PlaneF p(w + 2 * margin, h + 2 * margin);
    for (int y = 0; y < p.height; ++y) {
      const int sy = std::clamp(y - margin, 0, h - 1);
      for (int x = 0; x < p.width; ++x) {
        p.at(x, y) = refs[i].at(std::clamp(x - margin, 0, w - 1), sy);
      }
    }
    padded[i] = std::move(p);
  }
  const std::vector<int> xs = patch_origins(w, out_tile, out_tile);
  const std::vector<int> ys = patch_origins(h, out_tile, out_tile);
  SynthesizedView out;
  out.luma = PlaneF(w, h);
  out.disparity = PlaneF(w, h);
  // Tiles may overlap where the last row/column is anchored to the border;
  // each pixel is owned by the last tile covering it so concurrent tiles
  // write disjoint regions.
  struct Tile {
    int ox, oy;        // output origin
    int x0, x1, y0, y1;  // owned sub-range within the tile
  };
  std::vector<Tile> tiles;
  for (size_t iy = 0; iy < ys.size(); ++iy) {
    for (size_t ix = 0; ix < xs.size(); ++ix) {
      Tile t;
      t.ox = xs[ix];
      t.oy = ys[iy];
      t.x0 = 0;
      t.y0 = 0;
      t.x1 = ix + 1 < xs.size() ? std::min(out_tile, xs[ix + 1] - t.ox) : out_tile;
      t.y1 = iy + 1 < ys.size() ? std::min(out_tile, ys[iy + 1] - t.oy) : out_tile;
      tiles.push_back(t);
    }
  }
  parallel_chunks(static_cast<int>(tiles.size()), jobs, [&](int begin, int end, int) {
    for (int t = begin; t < end; ++t) {
      const auto [ox, oy, tx0, tx1, ty0, ty1] = tiles[static_cast<size_t>(t)];
      SynthSample sample;
      sample.positions = positions;
      sample.q = q;
      for (size_t i = 0; i < 4; ++i) {
        PlaneF patch(config.patch_size, config.patch_size);
        for (int y = 0; y < config.patch_size; ++y) {
          for (int x = 0; x < config.patch_size; ++x) {
            patch.at(x, y) = padded[i].at(ox + x, oy + y);
          }
        }
        sample.ref_patches[i] = std::move(patch);
      }
      GenForwardCache cache;
      const Tensor4 tile_out =
          generator_forward(gen, sample, config, grid_rows, grid_cols, &cache);
      const int half = GeneratorStack::kShrink / 2;
      for (int y = ty0; y < ty1; ++y) {
        for (int x = tx0; x < tx1; ++x) {
          out.luma.at(ox + x, oy + y) = std::clamp(tile_out.at(0, 0, y, x), 0.0, 1.0);
          out.disparity.at(ox + x, oy + y) =
              std::clamp(cache.disparity.at(0, 0, y + half, x + half), -config.d_max, config.d_max);
        }
      }
    }
  });
  return out;
}

void save_synthesis_model(const GeneratorPair& gen, const Discriminator* d1,
                          const Discriminator* d2, const std::filesystem::path& path) {
  auto stack_blobs = [](const GeneratorStack& s) {
    return std::vector<nn::LayerBlob>{nn::to_blob(s.c1), nn::to_blob(s.a1), nn::to_blob(s.c2),
                                      nn::to_blob(s.a2), nn::to_blob(s.c3), nn::to_blob(s.a3),
                                      nn::to_blob(s.c4)};
  };
  auto disc_blobs = [](const Discriminator& d) {
    return std::vector<nn::LayerBlob>{nn::to_blob(d.c1), nn::to_blob(d.a1), nn::to_blob(d.c2),
                                      nn::to_blob(d.a2), nn::to_blob(d.c3), nn::to_blob(d.a3),
                                      nn::to_blob(d.fc)};
  };
  std::vector<nn::NetBlob> nets;
  nets.push_back({"g_d", stack_blobs(gen.disparity_net)});
  nets.push_back({"g_c", stack_blobs(gen.color_net)});
  if (d1) nets.push_back({"D1", disc_blobs(*d1)});
  if (d2) nets.push_back({"D2", disc_blobs(*d2)});
  nn::save_model_file(nets, path);
}

GeneratorPair load_synthesis_model(const std::filesystem::path& path, const D2GanConfig& config) {
  const std::vector<nn::NetBlob> nets = nn::load_model_file(path);
  GeneratorPair gen(config);
  auto load_stack = [](const nn::NetBlob& blob, GeneratorStack& s) {
    if (blob.layers.size() != 7) throw FormatError("generator stack expects 7 layer records");
    nn::from_blob(blob.layers[0], s.c1);
    nn::from_blob(blob.layers[1], s.a1);
    nn::from_blob(blob.layers[2], s.c2);
    nn::from_blob(blob.layers[3], s.a2);
    nn::from_blob(blob.layers[4], s.c3);
    nn::from_blob(blob.layers[5], s.a3);
    nn::from_blob(blob.layers[6], s.c4);
  };
  load_stack(nn::find_net(nets, "g_d"), gen.disparity_net);
  load_stack(nn::find_net(nets, "g_c"), gen.color_net);
  return gen;
}

void save_training_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "step,l_d1,l_d2,l_g_adv,l_mse,val_psnr\n";
  for (const TrainLogRow& r : log) {
    out << r.step << "," << r.l_d1 << "," << r.l_d2 << "," << r.l_g_adv << "," << r.l_mse << ","
        << r.val_psnr << "\n";
  }
}

}  // namespace lfc
