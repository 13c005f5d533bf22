#pragma once

#include <functional>
#include <optional>
#include <string>

#include "lfc/coding_structure.hpp"
#include "lfc/image.hpp"
#include "lfc/nn/adam.hpp"
#include "lfc/nn/layers.hpp"
#include "lfc/nn/model_io.hpp"
#include "lfc/rdo.hpp"

namespace lfc {

/// Residual-predicting enhancement network. Three input branches (target,
/// central, picked reference), each filtered at three scales (3x3, 5x5, 7x7,
/// 32 filters, conv+BN+PReLU, same padding); the 288-channel concatenation
/// feeds a five-layer densely connected 3x3 block whose outputs concatenate
/// into a linear 3x3 head emitting the residual. The head starts at zero so
/// an untrained net is an exact identity.
struct QeNet {
  struct Stage {
    nn::ConvLayer conv;
    nn::BatchNormLayer bn;
    nn::PreluLayer act;

    Stage() = default;
    Stage(int in, int out, int k);
  };

  std::array<std::array<Stage, 3>, 3> branches;  // [branch][scale], kernels 3/5/7
  std::array<Stage, 5> dense;                    // inputs 288, 32, 64, 96, 128
  nn::ConvLayer head;                            // 160 -> 1, linear

  QeNet();

  struct Cache;

  /// Residual prediction r(target, central, picked); all inputs (n,1,h,w).
  nn::Tensor4 forward(const nn::Tensor4& target, const nn::Tensor4& central,
                      const nn::Tensor4& picked, bool training, Cache* cache = nullptr);
  /// Returns the gradient wrt the target branch input (the central/picked
  /// gradients are discarded) and accumulates parameter gradients.
  nn::Tensor4 backward(const nn::Tensor4& grad_residual, const Cache& cache);

  std::vector<nn::Param*> params();
  void init(nn::Rng& rng);  // He-uniform everywhere, zero head
};

struct QeNet::Cache {
  std::array<std::array<nn::ConvCache, 3>, 3> branch_conv;
  std::array<std::array<nn::BnCache, 3>, 3> branch_bn;
  std::array<std::array<nn::PreluCache, 3>, 3> branch_act;
  std::array<nn::ConvCache, 5> dense_conv;
  std::array<nn::BnCache, 5> dense_bn;
  std::array<nn::PreluCache, 5> dense_act;
  nn::ConvCache head_conv;
};

/// Scores one candidate reference view; higher is better.
using RvsScorer = std::function<double(const View& candidate, AngularPos pos, int tl)>;

struct RvsPolicy {
  std::string name;
  RvsScorer scorer;
};

/// Variance-of-Laplacian sharpness divided by (1 + blockiness), where
/// blockiness is the mean absolute gradient across 8-pixel block boundaries
/// minus the mean elsewhere (clamped at zero).
RvsPolicy make_sharpness_policy();

/// Deterministic fallback: negated Chebyshev distance to the target with the
/// temporal layer as a minor tie-break term.
RvsPolicy make_nearest_policy(AngularPos target);

RvsPolicy make_policy(const std::string& name, AngularPos target);

struct RvsCandidate {
  AngularPos pos;
  int tl = 0;
  const View* view = nullptr;
};

/// Picks the candidate with the highest policy score; ties break by smaller
/// Chebyshev distance to the target, then row-major order. Throws on an
/// empty candidate set.
AngularPos select_reference(AngularPos target, const std::vector<RvsCandidate>& candidates,
                            const RvsPolicy& policy);

/// V-hat = clamp(target + residual); luma only, whole view, same padding.
PlaneF enhance_view(const PlaneF& target, const PlaneF& central, const PlaneF& picked, QeNet& model);

struct QeSample {
  PlaneF target;   // degraded target patch
  PlaneF central;  // co-located central-view patch
  PlaneF picked;   // co-located picked-reference patch
  PlaneF original; // ground-truth target patch
};

struct QeTrainConfig {
  int steps = 400;
  int batch_size = 128;
  double learning_rate = 2e-4;
  int log_every = 20;
  int val_every = 100;
  int jobs = 1;
};

struct QeTrainLogRow {
  int step = 0;
  double loss = 0.0;
  double val_loss = 0.0;  // NaN when not evaluated
};

struct QeTrainResult {
  QeNet model;
  std::vector<QeTrainLogRow> log;
};

/// Minimizes ||original - enhanced||^2 with Adam.
QeTrainResult train_qenet(const std::vector<QeSample>& train, const std::vector<QeSample>& val,
                          const QeTrainConfig& config, uint64_t seed);

/// Applies enhancement to every non-reference view of a decoded light field;
/// reference views and all chroma pass through untouched.
LightField enhance_decoded_lf(const LightField& decoded, const PseudoVideoSequence& seq,
                              QeNet& model, const RvsPolicy& policy, int jobs = 1);

/// Per-view quality report CSV (poc, u, v, psnr_before, psnr_after) for an
/// enhancement pass, measured against the original views.
void save_enhancement_report(const LightField& original, const LightField& before,
                             const LightField& after, const PseudoVideoSequence& seq,
                             const std::filesystem::path& path);

// Model file round trip (role "qenet").
void save_qenet_model(const QeNet& model, const std::filesystem::path& path);
QeNet load_qenet_model(const std::filesystem::path& path);

void save_qe_training_log(const std::vector<QeTrainLogRow>& log, const std::filesystem::path& path);

}  // namespace lfc
