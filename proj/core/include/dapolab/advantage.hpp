#pragma once

#include <span>
#include <vector>

#include "dapolab/policy.hpp"
#include "dapolab/reward.hpp"

namespace dapolab {

// The G responses sampled for one prompt, with their shaped rewards and
// group-normalized advantages. Every token of response i carries the same
// advantage (outcome reward).
struct Group {
  int prompt_id = -1;
  std::vector<int> prompt_tokens;
  long long gold = 0;
  std::vector<Response> responses;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;     // breakdown totals
  std::vector<double> advantages;  // group z-scores of rewards
  int correct_count = 0;

  int size() const { return static_cast<int>(responses.size()); }
};

// Z-scores against the group's own mean and population (1/G) standard
// deviation. A degenerate group (std below eps_guard) gets all-zero
// advantages, which in turn produces no gradient.
std::vector<double> group_advantages(std::span<const double> rewards, double eps_guard = 1e-8);

struct GaeInput {
  std::vector<double> rewards;  // R_0..R_{T-1}
  std::vector<double> values;   // V(s_0)..V(s_T), one longer than rewards
  double gamma = 1.0;
  double lambda = 1.0;

  void validate() const;
};

// Generalized advantage estimation by the standard backward recursion
// A_t = delta_t + gamma*lambda*A_{t+1}, with
// delta_t = R_t + gamma*V(s_{t+1}) - V(s_t).
std::vector<double> gae(const GaeInput& input);

}  // namespace dapolab
