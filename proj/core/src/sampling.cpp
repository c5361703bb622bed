#include "dapolab/sampling.hpp"

#include <numeric>

#include "dapolab/parallel.hpp"

namespace dapolab {

void DynamicSamplingConfig::validate() const {
  if (batch_groups < 1) throw std::invalid_argument("DynamicSamplingConfig: batch_groups must be >= 1");
  if (group_size < 2) throw std::invalid_argument("DynamicSamplingConfig: group_size must be >= 2");
  if (max_refill_rounds < 1) {
    throw std::invalid_argument("DynamicSamplingConfig: max_refill_rounds must be >= 1");
  }
}

std::string SamplingStats::summary() const {
  return "prompts_drawn=" + std::to_string(prompts_drawn) +
         " groups_kept=" + std::to_string(groups_kept) +
         " filtered_acc0=" + std::to_string(filtered_acc0) +
         " filtered_acc1=" + std::to_string(filtered_acc1) +
         " refill_rounds_used=" + std::to_string(refill_rounds_used);
}

PromptStream::PromptStream(std::size_t dataset_size, std::uint64_t seed)
    : order_(dataset_size), rng_(seed) {
  if (dataset_size == 0) throw std::invalid_argument("PromptStream: empty dataset");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  rng_.shuffle(order_);
}

std::size_t PromptStream::next() {
  if (pos_ == order_.size()) {
    rng_.shuffle(order_);
    pos_ = 0;
  }
  return order_[pos_++];
}

Group rollout_group(const RolloutContext& ctx, const TaskInstance& task, int prompt_id,
                    int group_size, long long draw_index) {
  if (group_size < 2) throw std::invalid_argument("rollout_group: group_size must be >= 2");
  ctx.shaping.validate();

  Group group;
  group.prompt_id = prompt_id;
  group.prompt_tokens = task.prompt_tokens;
  group.gold = task.gold;
  group.responses.resize(group_size);

  const int eos = ctx.vocab->eos_id();
  parallel_for(static_cast<std::size_t>(group_size), ctx.threads, [&](std::size_t i) {
    RandomStream rng(derive_seed(ctx.global_seed, stream_tag::rollout,
                                 static_cast<std::uint64_t>(prompt_id),
                                 static_cast<std::uint64_t>(ctx.rollout_step),
                                 static_cast<std::uint64_t>(draw_index), i));
    Response resp = sample_response(*ctx.params, prompt_id, task.prompt_tokens, ctx.max_tokens,
                                    eos, rng);
    if (!resp.truncated) resp.decoded_answer = decode_answer(resp.tokens, *ctx.vocab);
    group.responses[i] = std::move(resp);
  });

  group.breakdowns.reserve(group_size);
  group.rewards.reserve(group_size);
  for (const Response& resp : group.responses) {
    group.breakdowns.push_back(shape(resp, task.gold, ctx.shaping));
    group.rewards.push_back(group.breakdowns.back().total);
    if (is_equivalent(resp.decoded_answer, task.gold)) ++group.correct_count;
  }
  group.advantages = group_advantages(group.rewards);
  return group;
}

TrainBatch fill_batch(const RolloutContext& ctx, const Dataset& dataset, PromptStream& stream,
                      const DynamicSamplingConfig& cfg) {
  cfg.validate();
  if (dataset.instances.empty()) throw std::invalid_argument("fill_batch: empty dataset");

  TrainBatch batch;
  batch.groups.reserve(cfg.batch_groups);
  SamplingStats& stats = batch.stats;

  const int rounds = cfg.enabled ? cfg.max_refill_rounds : 1;
  for (int round = 1; round <= rounds; ++round) {
    stats.refill_rounds_used = round;
    for (int j = 0; j < cfg.batch_groups; ++j) {
      if (static_cast<int>(batch.groups.size()) == cfg.batch_groups) break;
      const std::size_t idx = stream.next();
      const TaskInstance& task = dataset.instances[idx];
      Group group = rollout_group(ctx, task, static_cast<int>(idx), cfg.group_size,
                                  stats.prompts_drawn);
      ++stats.prompts_drawn;
      if (cfg.enabled && group.correct_count == 0) {
        ++stats.filtered_acc0;
        continue;
      }
      if (cfg.enabled && group.correct_count == cfg.group_size) {
        ++stats.filtered_acc1;
        continue;
      }
      batch.groups.push_back(std::move(group));
      ++stats.groups_kept;
    }
    if (static_cast<int>(batch.groups.size()) == cfg.batch_groups) break;
  }

  if (static_cast<int>(batch.groups.size()) != cfg.batch_groups) {
    throw BatchExhausted(
        "fill_batch: could not keep " + std::to_string(cfg.batch_groups) + " groups within " +
            std::to_string(cfg.max_refill_rounds) +
            " rounds (dataset too easy or too hard at the current policy); " + stats.summary(),
        stats);
  }
  return batch;
}

}  // namespace dapolab
