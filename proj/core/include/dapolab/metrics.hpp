#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dapolab/objective.hpp"
#include "dapolab/sampling.hpp"

namespace dapolab {

// One rollout step's monitoring values. The report passed to collect()
// covers the whole batch: the trainer merges the per-mini-batch loss
// reports, so clipping and entropy reflect the updates actually taken.
struct MetricsRow {
  int rollout_step = 0;
  double mean_response_length = 0.0;
  double mean_reward = 0.0;
  double mean_token_entropy = 0.0;          // nats, in [0, ln V]
  double mean_generation_probability = 0.0; // prob the policy gave its own token
  double clip_fraction = 0.0;
  std::optional<double> max_clipped_probability;
  double accuracy1_group_proportion = 0.0;  // groups with every response correct
  double accuracy0_group_proportion = 0.0;  // groups with every response wrong
  SamplingStats sampling_stats;
  double lr = 0.0;
  std::optional<double> eval_accuracy;      // greedy accuracy, at eval cadence
};

MetricsRow collect(const TrainBatch& batch, const LossReport& report, int rollout_step, double lr);

// Comma-separated file: fixed header, one row per rollout step, numbers
// printed with 9 significant digits. Byte-deterministic for equal input.
void write_metrics(std::span<const MetricsRow> rows, const std::string& path);

std::string metrics_header();
std::string metrics_line(const MetricsRow& row);

// Shared 9-significant-digit number formatting.
std::string format_g9(double value);

}  // namespace dapolab
