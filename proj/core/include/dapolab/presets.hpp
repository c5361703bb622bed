#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dapolab/trainer.hpp"

namespace dapolab {

// The progressive ablation ladder. Each preset toggles exactly one of the
// four technique fields relative to its predecessor:
//   grpo-naive        symmetric clip 0.2, sample-level loss, no shaping,
//                     sampling filter off
//   +overlong-filter  shaping -> overlong_filter
//   +clip-higher      eps_high -> 0.28
//   +soft-punish      shaping -> soft_punish (replaces the filter)
//   +token-level      aggregation -> token_level
//   dapo              dynamic sampling on
const std::vector<std::string>& preset_names();

bool is_preset_name(const std::string& name);

// Desk-scale defaults with the naive-GRPO technique settings.
TrainConfig default_config();

// Applies a named preset on top of default technique settings. Throws on
// unknown names.
void apply_preset(TrainConfig& cfg, const std::string& name);

// The four technique fields, for chain introspection.
struct TechniqueFields {
  ShapingMode shaping_mode;
  double eps_high;
  Aggregation aggregation;
  bool dynamic_sampling;

  bool operator==(const TechniqueFields&) const = default;
};
TechniqueFields technique_fields(const TrainConfig& cfg);

// Line-based key=value snapshot of a full run configuration. The snapshot
// determines the run: parsing it back and re-training reproduces the
// metrics file byte for byte.
std::string config_snapshot(const TrainConfig& cfg, const std::string& preset,
                            const std::string& task, const std::string& dataset_path,
                            std::size_t dataset_size);

struct SnapshotContents {
  TrainConfig config;
  std::string preset;
  std::string task;
  std::string dataset_path;
  std::size_t dataset_size = 0;
};

SnapshotContents parse_config_snapshot(const std::string& text);

}  // namespace dapolab
