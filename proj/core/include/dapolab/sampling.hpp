#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dapolab/advantage.hpp"
#include "dapolab/reward.hpp"
#include "dapolab/tasks.hpp"

namespace dapolab {

// Over-sample prompts and keep only groups whose correctness count is
// strictly between 0 and G, so every retained group carries gradient
// signal. Disabled, the first N groups are kept unconditionally.
struct DynamicSamplingConfig {
  bool enabled = false;
  int batch_groups = 16;      // N: groups per training batch
  int group_size = 8;         // G: responses per prompt
  int max_refill_rounds = 64; // each round draws up to N prompts

  void validate() const;
};

struct SamplingStats {
  long long prompts_drawn = 0;
  long long groups_kept = 0;
  long long filtered_acc0 = 0;  // every response wrong
  long long filtered_acc1 = 0;  // every response correct
  int refill_rounds_used = 0;

  std::string summary() const;
};

struct TrainBatch {
  std::vector<Group> groups;
  SamplingStats stats;
};

// Raised when the filter cannot fill a batch within the round budget; the
// dataset is too easy or too hard for the current policy.
class BatchExhausted : public std::runtime_error {
 public:
  BatchExhausted(const std::string& what, SamplingStats stats)
      : std::runtime_error(what), stats(std::move(stats)) {}
  SamplingStats stats;
};

// Shuffled epoch iterator over dataset indices; reshuffles from its own
// stream at every epoch boundary.
class PromptStream {
 public:
  PromptStream(std::size_t dataset_size, std::uint64_t seed);
  std::size_t next();

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  RandomStream rng_;
};

// Everything a rollout needs besides the prompt itself. Response rng
// streams are derived from (global_seed, prompt id, rollout step, draw
// index, response index), so rollouts are reproducible under any
// scheduling and repeated draws of one prompt stay distinct.
struct RolloutContext {
  const Vocab* vocab = nullptr;
  const PolicyParams* params = nullptr;
  RewardShapingConfig shaping;
  int max_tokens = 16;
  std::uint64_t global_seed = 0;
  int rollout_step = 1;
  int threads = 1;
};

// Samples G responses for one prompt, decodes answers, shapes rewards and
// normalizes advantages.
Group rollout_group(const RolloutContext& ctx, const TaskInstance& task, int prompt_id,
                    int group_size, long long draw_index);

// Fills a batch of N groups from the prompt stream. With dynamic sampling
// enabled, degenerate-accuracy groups are discarded and refill rounds of up
// to N draws each continue until N groups pass or the round budget runs
// out (BatchExhausted).
TrainBatch fill_batch(const RolloutContext& ctx, const Dataset& dataset, PromptStream& stream,
                      const DynamicSamplingConfig& cfg);

}  // namespace dapolab
