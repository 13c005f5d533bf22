#pragma once

#include <vector>

#include "lfc/nn/tensor.hpp"

namespace lfc::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed set of parameter tensors.
class Adam {
public:
  Adam() = default;
  Adam(AdamConfig cfg, const std::vector<Param*>& params);

  /// One update from the accumulated gradients. Throws TrainingDiverged on a
  /// non-finite gradient. Does not clear the gradients.
  void step(const std::vector<Param*>& params);

  /// Gradient-ascent variant (used by the discriminator updates).
  void step_ascend(const std::vector<Param*>& params);

  long step_count() const { return t_; }
  AdamConfig& config() { return cfg_; }

private:
  void update(const std::vector<Param*>& params, double direction);

  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

void zero_grads(const std::vector<Param*>& params);

}  // namespace lfc::nn
