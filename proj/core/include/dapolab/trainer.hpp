#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dapolab/metrics.hpp"
#include "dapolab/objective.hpp"
#include "dapolab/optimizer.hpp"
#include "dapolab/sampling.hpp"
#include "dapolab/tasks.hpp"

namespace dapolab {

// The full recipe for a run. Defaults are the desk-scale preset: every
// structural ratio of a large-scale setup (warmup in rollout steps,
// updates_per_step * mini_batch_groups = batch_groups) at toy sizes.
struct TrainConfig {
  std::string vocab_symbols = "0123456789-+$";
  int embed_dim = 8;
  int hidden_dim = 32;
  int window = 4;  // generated-token context window

  int total_steps = 100;        // M rollout steps
  int updates_per_step = 4;     // mu gradient updates per rollout step
  int mini_batch_groups = 4;    // groups per update; mu * this = batch_groups
  int max_gen_tokens = 16;      // L_gen

  double base_lr = 3e-3;
  int warmup_steps = 20;
  AdamConfig adam;

  ObjectiveConfig objective;
  RewardShapingConfig shaping;
  DynamicSamplingConfig sampling;  // also carries N (batch_groups) and G (group_size)

  int eval_every = 5;     // rollout steps between evaluations; 0 disables
  int eval_repeats = 8;   // sampled-evaluation repetitions
  int eval_set_size = 64;

  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
  PolicyShape policy_shape() const;
};

struct EvalEntry {
  int rollout_step = 0;
  double greedy_accuracy = 0.0;
  double sampled_accuracy = 0.0;  // mean over eval_repeats sampled passes
};

struct TrainResult {
  std::vector<MetricsRow> rows;    // one per completed rollout step
  std::vector<EvalEntry> evals;
  PolicyParams final_params;
  OptimizerState final_opt;
  // Per rollout step: max |ratio - 1| over the first mini-batch, taken
  // before any update; stays at rounding level because the snapshot is
  // fresh.
  std::vector<double> first_minibatch_ratio_dev;
  bool aborted = false;
  std::string abort_reason;
};

// Greedy accuracy plus sampled accuracy averaged over `repeats` passes.
EvalEntry evaluate_policy(const PolicyParams& params, const Vocab& vocab, const Dataset& eval_set,
                          int max_gen_tokens, int repeats, std::uint64_t seed, int rollout_step,
                          int threads);

// The outer training loop: snapshot the behavior policy, fill a batch,
// run mu mini-batch updates against the fixed snapshot, log one metrics
// row per rollout step and evaluate at the configured cadence. A failed
// fill aborts and returns the log gathered so far.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& eval_set);

}  // namespace dapolab
