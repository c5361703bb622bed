#pragma once

#include <span>
#include <vector>

namespace dapolab {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled: applied to params, not moments
};

struct OptimizerState {
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment, elementwise >= 0
  long long t = 0;        // completed steps

  static OptimizerState zeros(std::size_t param_count);
};

// Linear warmup over `warmup_steps` rollout steps, constant base_lr after.
// rollout_step counts from 1.
double lr_at(int rollout_step, int warmup_steps, double base_lr);

// One decoupled-weight-decay adaptive step. The gradient argument is the
// gradient of the objective being MAXIMIZED; the update descends on its
// negation. Updates params and state in place.
void adamw_step(std::span<double> params, std::span<const double> grad_of_maximized,
                OptimizerState& state, double lr, const AdamConfig& cfg);

}  // namespace dapolab
