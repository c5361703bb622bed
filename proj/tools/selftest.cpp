#include "selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "dapolab/advantage.hpp"
#include "dapolab/metrics.hpp"
#include "dapolab/objective.hpp"
#include "dapolab/policy.hpp"
#include "dapolab/presets.hpp"
#include "dapolab/reward.hpp"
#include "dapolab/sampling.hpp"
#include "dapolab/trainer.hpp"

namespace dapolab_cli {

namespace {

using namespace dapolab;

struct Check {
  const char* name;
  std::function<bool(std::string&)> fn;
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

PolicyShape tiny_shape(int vocab_size) {
  PolicyShape s;
  s.vocab_size = vocab_size;
  s.embed_dim = 3;
  s.hidden_dim = 4;
  s.window = 2;
  return s;
}

bool check_softmax_normalization(std::string&) {
  const Vocab vocab = Vocab::arithmetic();
  PolicyShape s;
  s.vocab_size = vocab.size();
  RandomStream rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const PolicyParams p = PolicyParams::init_uniform(s, rng);
    const auto probs = token_distribution(p, vocab.encode("12+7"), {});
    double sum = 0.0;
    for (double pk : probs) sum += pk;
    if (!near(sum, 1.0, 1e-12)) return false;
  }
  return true;
}

bool check_replay_determinism(std::string&) {
  const Vocab vocab = Vocab::arithmetic();
  PolicyShape s;
  s.vocab_size = vocab.size();
  RandomStream init(2);
  const PolicyParams p = PolicyParams::init_uniform(s, init);
  RandomStream r1(1234), r2(1234);
  const Response a = sample_response(p, 0, vocab.encode("5+5"), 10, vocab.eos_id(), r1);
  const Response b = sample_response(p, 0, vocab.encode("5+5"), 10, vocab.eos_id(), r2);
  if (a.tokens != b.tokens || a.truncated != b.truncated) return false;
  for (std::size_t i = 0; i < a.logprobs.size(); ++i) {
    if (a.logprobs[i] != b.logprobs[i]) return false;
  }
  return true;
}

bool check_logprob_consistency(std::string&) {
  const Vocab vocab = Vocab::arithmetic();
  PolicyShape s;
  s.vocab_size = vocab.size();
  RandomStream init(3);
  const PolicyParams p = PolicyParams::init_uniform(s, init);
  RandomStream rng(77);
  const Response resp = sample_response(p, 0, vocab.encode("81-9"), 10, vocab.eos_id(), rng);
  const auto lps = response_logprobs(p, vocab.encode("81-9"), resp);
  for (std::size_t t = 0; t < lps.size(); ++t) {
    if (!near(lps[t], resp.logprobs[t], 1e-12)) return false;
  }
  return true;
}

bool check_entropy(std::string&) {
  if (!near(step_entropy(std::vector<double>(10, 0.1)), std::log(10.0), 1e-12)) return false;
  if (step_entropy(std::vector<double>{1.0, 0.0}) != 0.0) return false;
  const Vocab vocab = Vocab::arithmetic();
  PolicyShape s;
  s.vocab_size = vocab.size();
  const auto probs = token_distribution(PolicyParams::zeros(s), vocab.encode("1+1"), {});
  return near(step_entropy(probs), std::log(13.0), 1e-12);
}

bool check_kl(std::string&) {
  const Vocab pair_vocab("0$");
  const PolicyShape s = tiny_shape(2);
  const PolicyParams p = PolicyParams::zeros(s);
  PolicyParams q = PolicyParams::zeros(s);
  q.values[s.b2_offset() + 0] = std::log(0.9);
  q.values[s.b2_offset() + 1] = std::log(0.1);
  const double want = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  if (!near(exact_kl(p, q, pair_vocab.encode("0"), {}), want, 1e-12)) return false;
  if (exact_kl(p, p, pair_vocab.encode("0"), {}) != 0.0) return false;

  const Vocab vocab = Vocab::arithmetic();
  PolicyShape full;
  full.vocab_size = vocab.size();
  RandomStream rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const PolicyParams a = PolicyParams::init_uniform(full, rng);
    const PolicyParams b = PolicyParams::init_uniform(full, rng);
    if (exact_kl(a, b, vocab.encode("2+2"), {}) < -1e-12) return false;
  }
  return true;
}

bool check_group_advantages(std::string&) {
  const auto two = group_advantages(std::vector<double>{1.0, -1.0});
  if (two[0] != 1.0 || two[1] != -1.0) return false;
  const auto flat = group_advantages(std::vector<double>(6, 0.25));
  for (double a : flat) {
    if (a != 0.0) return false;
  }
  RandomStream rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> rewards(8);
    for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
    const auto adv = group_advantages(rewards);
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= 8.0;
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    if (!near(mean, 0.0, 1e-12) || !near(std::sqrt(var / 8.0), 1.0, 1e-9)) return false;
  }
  return true;
}

bool check_gae(std::string&) {
  RandomStream rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    GaeInput in;
    const std::size_t t_max = 1 + rng.below(10);
    in.rewards.resize(t_max);
    in.values.resize(t_max + 1);
    for (double& r : in.rewards) r = rng.uniform(-2.0, 2.0);
    for (double& v : in.values) v = rng.uniform(-1.0, 1.0);
    in.gamma = rng.uniform01();
    in.lambda = rng.uniform01();
    const auto fast = gae(in);
    for (std::size_t t = 0; t < t_max; ++t) {
      double want = 0.0;
      double factor = 1.0;
      for (std::size_t l = 0; t + l < t_max; ++l) {
        want += factor * (in.rewards[t + l] + in.gamma * in.values[t + l + 1] - in.values[t + l]);
        factor *= in.gamma * in.lambda;
      }
      if (!near(fast[t], want, 1e-12)) return false;
    }
  }
  return true;
}

bool check_clip(std::string&) {
  if (!near(0.01 * 1.2, 0.012, 1e-12)) return false;
  if (!near(0.9 * 1.2, 1.08, 1e-12)) return false;
  const ClipConfig clip{0.2, 0.28};
  if (!near(clipped_term(1.5, 1.0, clip), 1.28, 1e-12)) return false;
  if (clipped_term(1.0, -0.7, clip) != -0.7) return false;
  if (!near(clipped_term(0.5, -1.0, clip), -0.8, 1e-12)) return false;
  if (!clip_dead_zone(1.28, 1.0, clip) || clip_active(1.28, 1.0, clip)) return false;
  return true;
}

bool check_aggregation(std::string&) {
  const double a = 0.5, b = -0.25;
  const std::vector<double> terms = {a, b, b, b};
  const std::vector<double> masks(4, 1.0);
  const std::vector<int> lengths = {1, 3};
  if (aggregate(terms, masks, lengths, Aggregation::sample_level) != (a + b) / 2.0) return false;
  if (aggregate(terms, masks, lengths, Aggregation::token_level) != (a + 3.0 * b) / 4.0) return false;

  RandomStream rng(7);
  std::vector<double> t12(12);
  for (double& t : t12) t = rng.uniform(-1.0, 1.0);
  const std::vector<double> m12(12, 1.0);
  const std::vector<int> l12 = {3, 3, 3, 3};
  return near(aggregate(t12, m12, l12, Aggregation::sample_level),
              aggregate(t12, m12, l12, Aggregation::token_level), 1e-12);
}

bool check_gradient(std::string& detail) {
  const Vocab vocab("012345-$");
  const PolicyShape s = tiny_shape(vocab.size());
  const auto prompt = vocab.encode("3-2");

  for (int instance = 0; instance < 10; ++instance) {
    RandomStream init(derive_seed(900, instance));
    const PolicyParams old_params = PolicyParams::init_uniform(s, init);
    PolicyParams params = old_params;
    RandomStream jitter(derive_seed(901, instance));
    for (double& v : params.values) v += jitter.uniform(-0.1, 0.1);

    Group g;
    g.prompt_tokens = prompt;
    const std::vector<double> rewards = {1.0, -1.0, 1.0, -1.0};
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      RandomStream rng(derive_seed(902, instance, i));
      g.responses.push_back(sample_response(old_params, 0, prompt, 6, vocab.eos_id(), rng));
      g.breakdowns.push_back(RewardBreakdown{rewards[i], 0.0, rewards[i], 1.0});
      g.rewards.push_back(rewards[i]);
    }
    g.advantages = group_advantages(g.rewards);

    ObjectiveConfig cfg;
    cfg.algorithm = instance % 2 == 0 ? Algorithm::dapo : Algorithm::grpo;
    cfg.clip = instance % 2 == 0 ? ClipConfig{0.2, 0.28} : ClipConfig::symmetric(0.2);
    cfg.aggregation = instance % 3 == 0 ? Aggregation::sample_level : Aggregation::token_level;
    cfg.kl_beta = cfg.algorithm == Algorithm::grpo ? 0.04 : 0.0;
    const PolicyParams* ref = cfg.algorithm == Algorithm::grpo ? &old_params : nullptr;

    const std::vector<Group> groups = {g};
    const LossReport report = objective_and_gradient(params, old_params, ref, groups, cfg);

    PolicyParams probe = params;
    const double h = 1e-5;
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      probe.values[i] = params.values[i] + h;
      const double hi = objective_and_gradient(probe, old_params, ref, groups, cfg).objective;
      probe.values[i] = params.values[i] - h;
      const double lo = objective_and_gradient(probe, old_params, ref, groups, cfg).objective;
      probe.values[i] = params.values[i];
      const double fd = (hi - lo) / (2.0 * h);
      const double denom = std::max(std::abs(fd), std::abs(report.gradient[i]));
      if (denom <= 1e-8) continue;
      if (std::abs(fd - report.gradient[i]) / denom >= 1e-4) {
        detail = "instance " + std::to_string(instance) + " coordinate " + std::to_string(i);
        return false;
      }
    }
  }
  return true;
}

bool check_reward_shaping(std::string&) {
  RewardShapingConfig cfg;
  cfg.mode = ShapingMode::soft_punish;
  cfg.l_max = 20480;
  cfg.l_cache = 4096;
  if (length_penalty(16384, cfg) != 0.0) return false;
  if (length_penalty(20480, cfg) != -1.0) return false;
  if (length_penalty(18432, cfg) != -0.5) return false;

  Response truncated;
  truncated.tokens.assign(8, 0);
  truncated.logprobs.assign(8, -1.0);
  truncated.truncated = true;
  RewardShapingConfig filter;
  filter.mode = ShapingMode::overlong_filter;
  const RewardBreakdown b = shape(truncated, 5, filter);
  return b.total == -1.0 && b.loss_mask_weight == 0.0;
}

bool check_dynamic_filter(std::string&) {
  const Vocab vocab = Vocab::arithmetic();
  PolicyShape s;
  s.vocab_size = vocab.size();
  RandomStream init(8);
  PolicyParams params = PolicyParams::init_uniform(s, init);
  params.values[s.b2_offset() + *vocab.token_of('7')] += 2.0;
  params.values[s.b2_offset() + vocab.eos_id()] += 2.0;

  Dataset ds;
  ds.instances.push_back(make_binary_task(vocab, 3, '+', 4, Difficulty::add1));
  PromptStream stream(ds.size(), 7);

  RolloutContext ctx;
  ctx.vocab = &vocab;
  ctx.params = &params;
  ctx.max_tokens = 8;
  ctx.global_seed = 99;
  ctx.rollout_step = 1;

  DynamicSamplingConfig cfg;
  cfg.enabled = true;
  cfg.batch_groups = 4;
  cfg.group_size = 8;
  const TrainBatch batch = fill_batch(ctx, ds, stream, cfg);
  for (const Group& g : batch.groups) {
    if (g.correct_count == 0 || g.correct_count == cfg.group_size) return false;
  }
  return batch.stats.prompts_drawn ==
         batch.stats.groups_kept + batch.stats.filtered_acc0 + batch.stats.filtered_acc1;
}

bool check_train_determinism(std::string&) {
  TrainConfig cfg = default_config();
  cfg.embed_dim = 4;
  cfg.hidden_dim = 8;
  cfg.total_steps = 3;
  cfg.sampling.batch_groups = 4;
  cfg.sampling.group_size = 4;
  cfg.updates_per_step = 2;
  cfg.mini_batch_groups = 2;
  cfg.max_gen_tokens = 8;
  cfg.shaping.l_max = 8;
  cfg.shaping.l_cache = 2;
  cfg.eval_every = 0;
  cfg.seed = 11;

  const Vocab vocab(cfg.vocab_symbols);
  RandomStream gen(derive_seed(cfg.seed, stream_tag::dataset));
  const Dataset ds = generate_dataset(vocab, gen, Difficulty::add1, 16);

  const TrainResult a = train(cfg, ds, ds);
  const TrainResult b = train(cfg, ds, ds);
  if (a.aborted || b.aborted || a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (metrics_line(a.rows[i]) != metrics_line(b.rows[i])) return false;
  }
  for (std::size_t i = 0; i < a.final_params.values.size(); ++i) {
    if (a.final_params.values[i] != b.final_params.values[i]) return false;
  }
  return true;
}

}  // namespace

int run_selftest() {
  const std::vector<Check> checks = {
      {"softmax normalization", check_softmax_normalization},
      {"sampling replay determinism", check_replay_determinism},
      {"stored log-prob consistency", check_logprob_consistency},
      {"entropy values and bounds", check_entropy},
      {"exact KL identity and hand value", check_kl},
      {"group advantage statistics", check_group_advantages},
      {"gae recursion vs double sum", check_gae},
      {"clip caps and dead zones", check_clip},
      {"aggregation identities", check_aggregation},
      {"analytic gradient vs finite differences", check_gradient},
      {"overlong reward shaping", check_reward_shaping},
      {"dynamic sampling filter soundness", check_dynamic_filter},
      {"training determinism", check_train_determinism},
  };

  int failures = 0;
  for (const Check& check : checks) {
    std::string detail;
    bool ok = false;
    try {
      ok = check.fn(detail);
    } catch (const std::exception& e) {
      detail = e.what();
    }
    if (ok) {
      std::printf("ok   %s\n", check.name);
    } else {
      ++failures;
      std::printf("FAIL %s%s%s\n", check.name, detail.empty() ? "" : ": ", detail.c_str());
    }
  }
  std::printf("%d/%zu checks passed\n", static_cast<int>(checks.size()) - failures, checks.size());
  return failures == 0 ? 0 : 1;
}

}  // namespace dapolab_cli
