#include "dapolab/reward.hpp"

#include <stdexcept>

namespace dapolab {

const char* shaping_mode_name(ShapingMode m) {
  switch (m) {
    case ShapingMode::none: return "none";
    case ShapingMode::overlong_filter: return "overlong_filter";
    case ShapingMode::soft_punish: return "soft_punish";
  }
  return "unknown";
}

std::optional<ShapingMode> shaping_mode_from_name(std::string_view name) {
  if (name == "none") return ShapingMode::none;
  if (name == "overlong_filter") return ShapingMode::overlong_filter;
  if (name == "soft_punish") return ShapingMode::soft_punish;
  return std::nullopt;
}

void RewardShapingConfig::validate() const {
  if (mode != ShapingMode::soft_punish) return;  // l_cache unused otherwise
  if (l_cache <= 0 || l_cache >= l_max) {
    throw std::invalid_argument("RewardShapingConfig: need 0 < l_cache < l_max");
  }
}

bool is_equivalent(const std::optional<long long>& predicted, long long gold) {
  return predicted.has_value() && *predicted == gold;
}

double correctness_reward(const Response& resp, long long gold) {
  return is_equivalent(resp.decoded_answer, gold) ? 1.0 : -1.0;
}

double length_penalty(int len, const RewardShapingConfig& cfg) {
  if (cfg.mode != ShapingMode::soft_punish) {
    throw std::logic_error("length_penalty: only defined in soft_punish mode");
  }
  if (len < 0) throw std::invalid_argument("length_penalty: negative length");
  cfg.validate();
  const int start = cfg.l_max - cfg.l_cache;
  if (len <= start) return 0.0;
  if (len <= cfg.l_max) {
    return static_cast<double>(start - len) / static_cast<double>(cfg.l_cache);
  }
  return -1.0;
}

RewardBreakdown shape(const Response& resp, long long gold, const RewardShapingConfig& cfg) {
  RewardBreakdown out;
  out.correctness = correctness_reward(resp, gold);
  out.length_penalty = 0.0;
  out.loss_mask_weight = 1.0;
  switch (cfg.mode) {
    case ShapingMode::none:
      break;
    case ShapingMode::overlong_filter:
      if (resp.truncated) out.loss_mask_weight = 0.0;
      break;
    case ShapingMode::soft_punish:
      out.length_penalty = length_penalty(resp.length(), cfg);
      break;
  }
  out.total = out.correctness + out.length_penalty;
  return out;
}

}  // namespace dapolab
