#pragma once

#include <array>
#include <optional>

#include "lfc/coding_structure.hpp"
#include "lfc/image.hpp"
#include "lfc/nn/adam.hpp"
#include "lfc/nn/layers.hpp"
#include "lfc/nn/model_io.hpp"

namespace lfc {

struct D2GanConfig {
  double alpha = 0.2;        // weight of the log D1(real) term
  double beta = 0.2;         // weight of the log D2(fake) term
  double adv_weight = 0.01;  // adversarial weight relative to the MSE content loss
  int disparity_levels = 9;  // L, feature volume has 2L channels
  double d_max = 4.0;        // disparity range [-d_max, d_max]
  int batch_size = 10;
  double learning_rate = 2e-4;
  int patch_size = 60;    // generator input patch edge
  int patch_stride = 16;  // dataset extraction stride

  void validate() const;
  int feature_channels() const { return 2 * disparity_levels; }
  /// Each of the two valid-padding stacks removes 12 samples per axis.
  int output_size() const { return patch_size - 24; }
};

/// Warp `ref` toward view q: out(s) = ref[s + (p - q) * D(s)], (u, v)
/// differences displacing (y, x), bilinear sampling, edge clamping. The
/// disparity map may cover a window of the reference; `origin` locates its
/// top-left corner inside the reference frame.
PlaneF warp_window(const PlaneF& ref, AngularPos p, AngularPos q, const PlaneF& disparity,
                   int origin_x, int origin_y);

/// Full-plane warp; disparity dims must equal ref dims.
PlaneF warp_view(const PlaneF& ref, AngularPos p, AngularPos q, const PlaneF& disparity);

/// Backward pass of warp_window: accumulates into grad_ref and/or
/// grad_disparity (either may be null).
void warp_backward(const PlaneF& ref, AngularPos p, AngularPos q, const PlaneF& disparity,
                   int origin_x, int origin_y, const PlaneF& grad_out, PlaneF* grad_ref,
                   PlaneF* grad_disparity);

/// Corner positions of the quadrant containing q, in row-major order.
std::array<AngularPos, 4> quadrant_corners(int grid_rows, int grid_cols, AngularPos q);

/// Per-disparity-level mean and population standard deviation over the four
/// reference planes warped toward q by each constant level. Channel layout:
/// (mean, std) per level, levels ascending over [-d_max, d_max]. Throws when
/// the positions are not the corner set of q's quadrant.
nn::Tensor4 build_features(const std::array<PlaneF, 4>& refs,
                           const std::array<AngularPos, 4>& positions, AngularPos q,
                           const D2GanConfig& config, int grid_rows, int grid_cols);

/// Gradient of build_features wrt the reference planes.
std::array<PlaneF, 4> build_features_backward(const std::array<PlaneF, 4>& refs,
                                              const std::array<AngularPos, 4>& positions,
                                              AngularPos q, const D2GanConfig& config,
                                              int grid_rows, int grid_cols,
                                              const nn::Tensor4& grad_features);

/// Four-layer valid-padding conv stack k7(32) / k5(64) / k3(32) / k1(out),
/// PReLU between, optional sigmoid head. Shrinks 12 samples per axis.
struct GeneratorStack {
  nn::ConvLayer c1, c2, c3, c4;
  nn::PreluLayer a1, a2, a3;
  bool sigmoid_head = false;

  GeneratorStack() = default;
  GeneratorStack(int in_channels, bool sigmoid);

  struct Cache {
    nn::ConvCache cc1, cc2, cc3, cc4;
    nn::PreluCache pc1, pc2, pc3;
    nn::Tensor4 sigmoid_out;
  };

  nn::Tensor4 forward(const nn::Tensor4& x, Cache* cache = nullptr) const;
  nn::Tensor4 backward(const nn::Tensor4& grad_out, const Cache& cache);
  std::vector<nn::Param*> params();
  void init(nn::Rng& rng);
  static constexpr int kShrink = 12;
};

/// Disparity net g_d (linear output) and color net g_c (sigmoid output).
struct GeneratorPair {
  GeneratorStack disparity_net;
  GeneratorStack color_net;

  GeneratorPair() = default;
  explicit GeneratorPair(const D2GanConfig& config);

  std::vector<nn::Param*> params();
  void init(nn::Rng& rng);
};

/// Patch critic: three stride-2 same-padding convs with PReLU, global average
/// pool, affine to a scalar, softplus. Output is strictly positive.
struct Discriminator {
  nn::ConvLayer c1, c2, c3;
  nn::PreluLayer a1, a2, a3;
  nn::DenseLayer fc;

  Discriminator();

  struct Cache {
    nn::ConvCache cc1, cc2, cc3;
    nn::PreluCache pc1, pc2, pc3;
    nn::DenseCache dc;
    nn::Tensor4 pre_pool;
    nn::Tensor4 softplus_in;
  };

  nn::Tensor4 forward(const nn::Tensor4& x, Cache* cache = nullptr) const;
  nn::Tensor4 backward(const nn::Tensor4& grad_out, const Cache& cache);
  std::vector<nn::Param*> params();
  void init(nn::Rng& rng);
};

/// Discriminator scores for one batch; all entries must be strictly positive.
struct ScoreBatch {
  std::vector<double> d1_real;
  std::vector<double> d1_fake;
  std::vector<double> d2_real;
  std::vector<double> d2_fake;
};

struct D2GanLosses {
  double d1 = 0.0;         // ascended by the first discriminator
  double d2 = 0.0;         // ascended by the second discriminator
  double generator = 0.0;  // descended by the generator (adversarial part)
};

/// Batch means of the three adversarial objectives. Throws std::domain_error
/// on a non-positive score.
D2GanLosses d2gan_losses(const ScoreBatch& scores, const D2GanConfig& config);

/// Value of the full three-player objective for one batch.
double d2gan_objective(const ScoreBatch& scores, const D2GanConfig& config);

/// One synthesis training example: four co-located reference patches and the
/// center crop of the true target view patch.
struct SynthSample {
  std::array<PlaneF, 4> ref_patches;  // patch_size x patch_size
  std::array<AngularPos, 4> positions;
  AngularPos q;
  PlaneF target;  // output_size x output_size
};

/// Full generator forward for one sample: features -> g_d -> warp -> g_c.
struct GenForwardCache {
  nn::Tensor4 features;
  GeneratorStack::Cache gd_cache;
  nn::Tensor4 disparity;  // (1,1,s-12,s-12), raw net output
  std::array<PlaneF, 4> warped;
  nn::Tensor4 color_in;
  GeneratorStack::Cache gc_cache;
};

nn::Tensor4 generator_forward(const GeneratorPair& gen, const SynthSample& sample,
                              const D2GanConfig& config, int grid_rows, int grid_cols,
                              GenForwardCache* cache);

/// Backpropagates grad_out through g_c, the warp and g_d, accumulating
/// parameter gradients in `gen`.
void generator_backward(GeneratorPair& gen, const SynthSample& sample, const D2GanConfig& config,
                        const GenForwardCache& cache, const nn::Tensor4& grad_out);

struct SynthTrainConfig {
  D2GanConfig gan;
  int steps = 2000;
  int log_every = 25;
  int val_every = 250;
  int jobs = 1;
  int grid_rows = 8;
  int grid_cols = 8;
};

struct TrainLogRow {
  int step = 0;
  double l_d1 = 0.0;
  double l_d2 = 0.0;
  double l_g_adv = 0.0;
  double l_mse = 0.0;
  double val_psnr = 0.0;  // NaN when not evaluated at this step
};

struct SynthTrainResult {
  GeneratorPair generator;
  Discriminator d1;
  Discriminator d2;
  std::vector<TrainLogRow> log;
};

/// Alternating dual-discriminator training: one ascent step each on D1 and
/// D2, then one descent step on the generator with loss
/// MSE + adv_weight * adversarial. Setting adv_weight to 0 reduces to plain
/// MSE regression.
SynthTrainResult train_d2gan(const std::vector<SynthSample>& train,
                             const std::vector<SynthSample>& val, const SynthTrainConfig& config,
                             uint64_t seed);

struct SynthesizedView {
  PlaneF luma;       // [0,1]
  PlaneF disparity;  // clamped to [-d_max, d_max]
};

/// Synthesize the full view at q from the four decoded corner references of
/// its quadrant, tiling patch-size inputs with edge-replicated margins so the
/// valid-padding outputs tile the view exactly. Views must be at least
/// output_size() on each axis.
SynthesizedView synthesize_view(const std::array<PlaneF, 4>& refs,
                                const std::array<AngularPos, 4>& positions, AngularPos q,
                                const GeneratorPair& gen, const D2GanConfig& config, int grid_rows,
                                int grid_cols, int jobs = 1);

// Model file round trip (roles "g_d", "g_c", "D1", "D2").
void save_synthesis_model(const GeneratorPair& gen, const Discriminator* d1, const Discriminator* d2,
                          const std::filesystem::path& path);
GeneratorPair load_synthesis_model(const std::filesystem::path& path, const D2GanConfig& config);

/// Write the training log as CSV (step, l_d1, l_d2, l_g_adv, l_mse, val_psnr).
void save_training_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

}  // namespace lfc
