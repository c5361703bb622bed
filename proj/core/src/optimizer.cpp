#include "dapolab/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace dapolab {

OptimizerState OptimizerState::zeros(std::size_t param_count) {
  return OptimizerState{std::vector<double>(param_count, 0.0),
                        std::vector<double>(param_count, 0.0), 0};
}

double lr_at(int rollout_step, int warmup_steps, double base_lr) {
  if (rollout_step < 1) throw std::invalid_argument("lr_at: rollout_step counts from 1");
  if (warmup_steps <= 0) return base_lr;
  const double frac = static_cast<double>(rollout_step) / static_cast<double>(warmup_steps);
  return base_lr * (frac < 1.0 ? frac : 1.0);
}

void adamw_step(std::span<double> params, std::span<const double> grad_of_maximized,
                OptimizerState& state, double lr, const AdamConfig& cfg) {
  const std::size_t n = params.size();
  if (grad_of_maximized.size() != n || state.m.size() != n || state.v.size() != n) {
    throw std::invalid_argument("adamw_step: vector length mismatch");
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  for (std::size_t i = 0; i < n; ++i) {
    const double g = -grad_of_maximized[i];  // descend on the negated objective
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    const double update = lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * params[i]);
    if (!std::isfinite(update)) throw std::runtime_error("adamw_step: non-finite update");
    params[i] -= update;
  }
}

}  // namespace dapolab
