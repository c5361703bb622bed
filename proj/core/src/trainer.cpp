#include "dapolab/trainer.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "dapolab/parallel.hpp"

namespace dapolab {

void TrainConfig::validate() const {
  if (total_steps < 1) throw std::invalid_argument("TrainConfig: total_steps must be >= 1");
  if (updates_per_step < 1 || mini_batch_groups < 1) {
    throw std::invalid_argument("TrainConfig: updates_per_step and mini_batch_groups must be >= 1");
  }
  if (updates_per_step * mini_batch_groups != sampling.batch_groups) {
    throw std::invalid_argument(
        "TrainConfig: updates_per_step * mini_batch_groups must equal batch_groups so every "
        "group is used exactly once per rollout step");
  }
  if (max_gen_tokens < 1) throw std::invalid_argument("TrainConfig: max_gen_tokens must be >= 1");
  if (!(base_lr > 0.0)) throw std::invalid_argument("TrainConfig: base_lr must be positive");
  if (warmup_steps < 0) throw std::invalid_argument("TrainConfig: warmup_steps must be >= 0");
  if (eval_every < 0 || eval_repeats < 1 || eval_set_size < 1) {
    throw std::invalid_argument("TrainConfig: bad evaluation settings");
  }
  if (threads < 1) throw std::invalid_argument("TrainConfig: threads must be >= 1");
  sampling.validate();
  objective.validate();
  shaping.validate();
  policy_shape().validate();
}

PolicyShape TrainConfig::policy_shape() const {
  PolicyShape shape;
  shape.vocab_size = static_cast<int>(vocab_symbols.size());
  shape.embed_dim = embed_dim;
  shape.hidden_dim = hidden_dim;
  shape.window = window;
  return shape;
}

EvalEntry evaluate_policy(const PolicyParams& params, const Vocab& vocab, const Dataset& eval_set,
                          int max_gen_tokens, int repeats, std::uint64_t seed, int rollout_step,
                          int threads) {
  if (eval_set.instances.empty()) throw std::invalid_argument("evaluate_policy: empty eval set");
  const std::size_t n = eval_set.instances.size();
  std::vector<int> greedy_hits(n, 0);
  std::vector<int> sampled_hits(n, 0);
  const int eos = vocab.eos_id();

  parallel_for(n, threads, [&](std::size_t i) {
    const TaskInstance& task = eval_set.instances[i];
    const auto tokens = greedy_decode(params, task.prompt_tokens, max_gen_tokens, eos);
    if (is_equivalent(decode_answer(tokens, vocab), task.gold)) greedy_hits[i] = 1;
    for (int r = 0; r < repeats; ++r) {
      RandomStream rng(derive_seed(seed, stream_tag::eval_sampling,
                                   static_cast<std::uint64_t>(rollout_step), i,
                                   static_cast<std::uint64_t>(r)));
      const Response resp =
          sample_response(params, static_cast<int>(i), task.prompt_tokens, max_gen_tokens, eos, rng);
      if (!resp.truncated && is_equivalent(decode_answer(resp.tokens, vocab), task.gold)) {
        ++sampled_hits[i];
      }
    }
  });

  EvalEntry entry;
  entry.rollout_step = rollout_step;
  entry.greedy_accuracy =
      static_cast<double>(std::accumulate(greedy_hits.begin(), greedy_hits.end(), 0)) /
      static_cast<double>(n);
  entry.sampled_accuracy =
      static_cast<double>(std::accumulate(sampled_hits.begin(), sampled_hits.end(), 0)) /
      static_cast<double>(n * static_cast<std::size_t>(repeats));
  return entry;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& eval_set) {
  cfg.validate();
  if (train_set.instances.empty()) throw std::invalid_argument("train: empty training dataset");

  const Vocab vocab(cfg.vocab_symbols);
  const PolicyShape shape = cfg.policy_shape();

  RandomStream init_rng(derive_seed(cfg.seed, stream_tag::init_params));
  PolicyParams params = PolicyParams::init_uniform(shape, init_rng);

  // The reference policy for the KL term is the frozen initial policy.
  std::optional<PolicyParams> ref_params;
  if (cfg.objective.algorithm == Algorithm::grpo) ref_params = params;

  OptimizerState opt = OptimizerState::zeros(shape.param_count());
  PromptStream stream(train_set.size(), derive_seed(cfg.seed, stream_tag::prompt_order));

  TrainResult result;
  result.rows.reserve(cfg.total_steps);

  for (int step = 1; step <= cfg.total_steps; ++step) {
    const PolicyParams old_params = params;  // behavior-policy snapshot

    RolloutContext ctx;
    ctx.vocab = &vocab;
    ctx.params = &old_params;
    ctx.shaping = cfg.shaping;
    ctx.max_tokens = cfg.max_gen_tokens;
    ctx.global_seed = cfg.seed;
    ctx.rollout_step = step;
    ctx.threads = cfg.threads;

    TrainBatch batch;
    try {
      batch = fill_batch(ctx, train_set, stream, cfg.sampling);
    } catch (const BatchExhausted& e) {
      result.aborted = true;
      result.abort_reason = e.what();
      break;
    }

    // Seeded shuffle, then contiguous mini-batches of the reordered groups.
    {
      std::vector<std::size_t> perm(batch.groups.size());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      RandomStream part_rng(derive_seed(cfg.seed, stream_tag::partition,
                                        static_cast<std::uint64_t>(step)));
      part_rng.shuffle(perm);
      std::vector<Group> reordered;
      reordered.reserve(batch.groups.size());
      for (std::size_t idx : perm) reordered.push_back(std::move(batch.groups[idx]));
      batch.groups = std::move(reordered);
    }

    const double lr = lr_at(step, cfg.warmup_steps, cfg.base_lr);
    LossReport step_report;
    double first_ratio_dev = 0.0;

    for (int b = 0; b < cfg.updates_per_step; ++b) {
      const std::span<const Group> slice(batch.groups.data() +
                                             static_cast<std::size_t>(b) * cfg.mini_batch_groups,
                                         static_cast<std::size_t>(cfg.mini_batch_groups));
      LossReport report = objective_and_gradient(params, old_params,
                                                 ref_params ? &*ref_params : nullptr, slice,
                                                 cfg.objective, cfg.threads);
      if (b == 0) {
        for (const auto& per_resp : report.ratios) {
          for (const auto& per_tok : per_resp) {
            for (double r : per_tok) first_ratio_dev = std::max(first_ratio_dev, std::abs(r - 1.0));
          }
        }
      }
      adamw_step(params.values, report.gradient, opt, lr, cfg.adam);
      step_report.merge_from(report);
    }

    MetricsRow row = collect(batch, step_report, step, lr);
    if (cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.total_steps)) {
      EvalEntry entry = evaluate_policy(params, vocab, eval_set, cfg.max_gen_tokens,
                                        cfg.eval_repeats, cfg.seed, step, cfg.threads);
      row.eval_accuracy = entry.greedy_accuracy;
      result.evals.push_back(entry);
    }
    result.rows.push_back(std::move(row));
    result.first_minibatch_ratio_dev.push_back(first_ratio_dev);
  }

  result.final_params = std::move(params);
  result.final_opt = std::move(opt);
  return result;
}

}  // namespace dapolab
