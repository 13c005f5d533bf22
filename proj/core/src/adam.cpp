#include "lfc/nn/adam.hpp"

#include <cmath>

namespace lfc::nn {

Adam::Adam(AdamConfig cfg, const std::vector<Param*>& params) : cfg_(cfg) {
  if (!(cfg.beta1 > 0 && cfg.beta1 < 1 && cfg.beta2 > 0 && cfg.beta2 < 1)) {
    throw InvalidArgument("adam: betas must lie in (0,1)");
  }
  for (const Param* p : params) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Adam::update(const std::vector<Param*>& params, double direction) {
  if (params.size() != m_.size()) throw InvalidArgument("adam: parameter set changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    std::vector<double>& m = m_[pi];
    std::vector<double>& v = v_[pi];
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.v[i];
      if (!std::isfinite(g)) throw TrainingDiverged("non-finite gradient in adam step");
      m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value.v[i] -= direction * cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

void Adam::step(const std::vector<Param*>& params) { update(params, 1.0); }

void Adam::step_ascend(const std::vector<Param*>& params) { update(params, -1.0); }

void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace lfc::nn
