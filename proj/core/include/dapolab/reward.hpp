#pragma once

#include <optional>
#include <string_view>

#include "dapolab/policy.hpp"

namespace dapolab {

// none: plain correctness reward. overlong_filter: same totals, but
// truncated responses have their loss tokens masked out. soft_punish: a
// piecewise-linear length penalty over (l_max - l_cache, l_max] is added to
// the correctness reward, unconditionally.
enum class ShapingMode { none, overlong_filter, soft_punish };

const char* shaping_mode_name(ShapingMode m);
std::optional<ShapingMode> shaping_mode_from_name(std::string_view name);

struct RewardShapingConfig {
  ShapingMode mode = ShapingMode::none;
  int l_max = 48;    // hard generation budget the penalty saturates at
  int l_cache = 16;  // width of the punish interval; ignored unless soft_punish

  void validate() const;
};

struct RewardBreakdown {
  double correctness = -1.0;     // +1 or -1
  double length_penalty = 0.0;   // in [-1, 0]
  double total = -1.0;           // correctness + length_penalty
  double loss_mask_weight = 1.0; // 0 or 1, broadcast to the response's tokens
};

// True iff a decoded answer is present and numerically equals gold.
bool is_equivalent(const std::optional<long long>& predicted, long long gold);

// +1 for an equivalent decoded answer, -1 otherwise (truncated responses
// carry no answer and always score -1).
double correctness_reward(const Response& resp, long long gold);

// 0 for len <= l_max - l_cache, linear down to -1 at l_max, clamped at -1
// beyond. Requires soft_punish mode.
double length_penalty(int len, const RewardShapingConfig& cfg);

RewardBreakdown shape(const Response& resp, long long gold, const RewardShapingConfig& cfg);

}  // namespace dapolab
