#include "dapolab/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace dapolab {

std::vector<double> group_advantages(std::span<const double> rewards, double eps_guard) {
  const std::size_t g = rewards.size();
  if (g < 2) throw std::invalid_argument("group_advantages: need a group of at least 2 rewards");

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);

  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);
  const double std_dev = std::sqrt(var);

  std::vector<double> out(g, 0.0);
  if (std_dev < eps_guard) return out;  // degenerate group: no signal
  for (std::size_t i = 0; i < g; ++i) out[i] = (rewards[i] - mean) / std_dev;
  return out;
}

void GaeInput::validate() const {
  if (values.size() != rewards.size() + 1) {
    throw std::invalid_argument("GaeInput: values must be exactly one longer than rewards");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("GaeInput: gamma and lambda must lie in [0, 1]");
  }
}

std::vector<double> gae(const GaeInput& input) {
  input.validate();
  const std::size_t t_max = input.rewards.size();
  std::vector<double> adv(t_max, 0.0);
  double next = 0.0;
  for (std::size_t i = t_max; i-- > 0;) {
    const double delta = input.rewards[i] + input.gamma * input.values[i + 1] - input.values[i];
    next = delta + input.gamma * input.lambda * next;
    adv[i] = next;
  }
  return adv;
}

}  // namespace dapolab
