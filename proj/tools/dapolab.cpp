#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dapolab/checkpoint.hpp"
#include "dapolab/metrics.hpp"
#include "dapolab/presets.hpp"
#include "dapolab/trainer.hpp"
#include "selftest.hpp"

namespace {

using namespace dapolab;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Difficulty task_difficulty(const std::string& task) {
  const auto difficulty = difficulty_from_name(task);
  if (!difficulty || *difficulty == Difficulty::file) {
    throw std::runtime_error("unknown task \"" + task + "\" (use add1, add2 or addsub2)");
  }
  return *difficulty;
}

int run_train(const TrainConfig& cfg, const std::string& preset, const std::string& task,
              const std::string& dataset_path, std::size_t dataset_size,
              const std::string& out_dir) {
  cfg.validate();
  const Vocab vocab(cfg.vocab_symbols);

  Dataset train_set;
  Dataset eval_set;
  if (!dataset_path.empty()) {
    train_set = load_dataset(dataset_path, vocab);
    eval_set = train_set;
    const auto cap = static_cast<std::size_t>(cfg.eval_set_size);
    if (eval_set.instances.size() > cap) eval_set.instances.resize(cap);
  } else {
    const Difficulty difficulty = task_difficulty(task);
    RandomStream train_rng(derive_seed(cfg.seed, stream_tag::dataset));
    train_set = generate_dataset(vocab, train_rng, difficulty, dataset_size);
    RandomStream eval_rng(derive_seed(cfg.seed, stream_tag::eval_set));
    eval_set = generate_dataset(vocab, eval_rng, difficulty,
                                static_cast<std::size_t>(cfg.eval_set_size));
  }

  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  const std::string snapshot =
      config_snapshot(cfg, preset, task, dataset_path, train_set.size());
  {
    std::ofstream snap_out(out / "config.txt", std::ios::binary);
    if (!snap_out) throw std::runtime_error("cannot write " + (out / "config.txt").string());
    snap_out << snapshot;
  }

  const TrainResult result = train(cfg, train_set, eval_set);

  write_metrics(result.rows, (out / "metrics.csv").string());
  save_checkpoint((out / "checkpoint.bin").string(), result.final_params, fnv1a64(snapshot));

  for (const EvalEntry& e : result.evals) {
    std::printf("step %d: greedy accuracy %.4f, sampled avg@%d %.4f\n", e.rollout_step,
                e.greedy_accuracy, cfg.eval_repeats, e.sampled_accuracy);
  }
  std::printf("wrote %s (%zu rows), config.txt, checkpoint.bin\n",
              (out / "metrics.csv").string().c_str(), result.rows.size());

  if (result.aborted) {
    std::fprintf(stderr, "error: %s\n", result.abort_reason.c_str());
    return 1;
  }
  return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& task,
             const std::string& dataset_path, std::size_t dataset_size, std::uint64_t seed,
             int repeats, int max_tokens, int threads) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const Vocab vocab = Vocab::arithmetic();
  if (ck.params.shape.vocab_size != vocab.size()) {
    throw std::runtime_error("checkpoint vocabulary size does not match the arithmetic alphabet");
  }

  Dataset ds;
  if (!dataset_path.empty()) {
    ds = load_dataset(dataset_path, vocab);
  } else {
    RandomStream rng(derive_seed(seed, stream_tag::eval_set));
    ds = generate_dataset(vocab, rng, task_difficulty(task), dataset_size);
  }

  const EvalEntry entry = evaluate_policy(ck.params, vocab, ds, max_tokens, repeats, seed,
                                          /*rollout_step=*/0, threads);
  std::printf("instances: %zu\n", ds.size());
  std::printf("greedy accuracy: %.6f\n", entry.greedy_accuracy);
  std::printf("sampled avg@%d: %.6f\n", repeats, entry.sampled_accuracy);
  std::printf("config fingerprint: %016llx\n",
              static_cast<unsigned long long>(ck.config_fingerprint));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dapolab: a desk-scale policy-gradient laboratory"};
  app.require_subcommand(1);

  // Flag values land in `flags`; the effective config is assembled after
  // parsing as snapshot -> preset -> explicit flags.
  TrainConfig flags = default_config();
  std::string preset = "dapo";
  std::string task = "add1";
  std::string dataset_path;
  std::string out_dir = "dapolab-out";
  std::string config_path;
  std::size_t dataset_size = 256;
  std::string algorithm_arg;
  std::string aggregation_arg;
  std::string shaping_arg;

  std::vector<std::pair<CLI::Option*, std::function<void(TrainConfig&)>>> overrides;
  auto on = [&](CLI::Option* opt, std::function<void(TrainConfig&)> apply) {
    overrides.emplace_back(opt, std::move(apply));
  };

  auto* train_cmd = app.add_subcommand("train", "Train a policy and write metrics/checkpoint");
  auto* preset_opt = train_cmd->add_option("--preset", preset, "Technique ladder preset")
                         ->check(CLI::IsMember(preset_names()));
  auto* config_opt = train_cmd->add_option("--config", config_path,
                                           "Replay a config snapshot (flags still override)");
  auto* task_opt = train_cmd->add_option("--task", task, "Synthetic task (add1, add2, addsub2)");
  auto* dataset_opt =
      train_cmd->add_option("--dataset", dataset_path, "Dataset file (JSON lines) instead of --task");
  auto* dataset_size_opt =
      train_cmd->add_option("--dataset-size", dataset_size, "Synthetic dataset size");
  train_cmd->add_option("--out", out_dir, "Output directory");

  on(train_cmd->add_option("--seed", flags.seed, "Global seed"),
     [&](TrainConfig& c) { c.seed = flags.seed; });
  on(train_cmd->add_option("--steps", flags.total_steps, "Rollout steps to run"),
     [&](TrainConfig& c) { c.total_steps = flags.total_steps; });
  on(train_cmd->add_option("--threads", flags.threads, "Worker threads (1 = serial)"),
     [&](TrainConfig& c) { c.threads = flags.threads; });
  on(train_cmd->add_option("--embed-dim", flags.embed_dim, "Prompt embedding width"),
     [&](TrainConfig& c) { c.embed_dim = flags.embed_dim; });
  on(train_cmd->add_option("--hidden-dim", flags.hidden_dim, "Hidden layer width"),
     [&](TrainConfig& c) { c.hidden_dim = flags.hidden_dim; });
  on(train_cmd->add_option("--window", flags.window, "Generated-token context window"),
     [&](TrainConfig& c) { c.window = flags.window; });
  on(train_cmd->add_option("--group-size", flags.sampling.group_size,
                           "Responses sampled per prompt (G)"),
     [&](TrainConfig& c) { c.sampling.group_size = flags.sampling.group_size; });
  on(train_cmd->add_option("--batch-groups", flags.sampling.batch_groups,
                           "Groups per training batch (N)"),
     [&](TrainConfig& c) { c.sampling.batch_groups = flags.sampling.batch_groups; });
  on(train_cmd->add_option("--updates-per-step", flags.updates_per_step,
                           "Gradient updates per rollout step"),
     [&](TrainConfig& c) { c.updates_per_step = flags.updates_per_step; });
  on(train_cmd->add_option("--mini-batch-groups", flags.mini_batch_groups,
                           "Groups per gradient update"),
     [&](TrainConfig& c) { c.mini_batch_groups = flags.mini_batch_groups; });
  on(train_cmd->add_option("--max-tokens", flags.max_gen_tokens,
                           "Generation budget per response"),
     [&](TrainConfig& c) { c.max_gen_tokens = flags.max_gen_tokens; });
  on(train_cmd->add_option("--lr", flags.base_lr, "Base learning rate"),
     [&](TrainConfig& c) { c.base_lr = flags.base_lr; });
  on(train_cmd->add_option("--warmup", flags.warmup_steps, "Linear warmup rollout steps"),
     [&](TrainConfig& c) { c.warmup_steps = flags.warmup_steps; });
  on(train_cmd->add_option("--beta1", flags.adam.beta1, "First-moment decay"),
     [&](TrainConfig& c) { c.adam.beta1 = flags.adam.beta1; });
  on(train_cmd->add_option("--beta2", flags.adam.beta2, "Second-moment decay"),
     [&](TrainConfig& c) { c.adam.beta2 = flags.adam.beta2; });
  on(train_cmd->add_option("--adam-eps", flags.adam.eps, "Adam epsilon"),
     [&](TrainConfig& c) { c.adam.eps = flags.adam.eps; });
  on(train_cmd->add_option("--weight-decay", flags.adam.weight_decay, "Decoupled weight decay"),
     [&](TrainConfig& c) { c.adam.weight_decay = flags.adam.weight_decay; });
  on(train_cmd->add_option("--algorithm", algorithm_arg, "ppo, grpo or dapo")
         ->check(CLI::IsMember({"ppo", "grpo", "dapo"})),
     [&](TrainConfig& c) { c.objective.algorithm = *algorithm_from_name(algorithm_arg); });
  on(train_cmd->add_option("--eps-low", flags.objective.clip.eps_low, "Lower clip range"),
     [&](TrainConfig& c) { c.objective.clip.eps_low = flags.objective.clip.eps_low; });
  on(train_cmd->add_option("--eps-high", flags.objective.clip.eps_high, "Upper clip range"),
     [&](TrainConfig& c) { c.objective.clip.eps_high = flags.objective.clip.eps_high; });
  on(train_cmd->add_option("--aggregation", aggregation_arg, "sample_level or token_level")
         ->check(CLI::IsMember({"sample_level", "token_level"})),
     [&](TrainConfig& c) { c.objective.aggregation = *aggregation_from_name(aggregation_arg); });
  on(train_cmd->add_option("--kl-beta", flags.objective.kl_beta,
                           "Reference-policy KL weight (grpo)"),
     [&](TrainConfig& c) { c.objective.kl_beta = flags.objective.kl_beta; });
  on(train_cmd->add_option("--shaping", shaping_arg, "none, overlong_filter or soft_punish")
         ->check(CLI::IsMember({"none", "overlong_filter", "soft_punish"})),
     [&](TrainConfig& c) { c.shaping.mode = *shaping_mode_from_name(shaping_arg); });
  on(train_cmd->add_option("--l-max", flags.shaping.l_max, "Penalty hard cap (tokens)"),
     [&](TrainConfig& c) { c.shaping.l_max = flags.shaping.l_max; });
  on(train_cmd->add_option("--l-cache", flags.shaping.l_cache, "Punish interval width (tokens)"),
     [&](TrainConfig& c) { c.shaping.l_cache = flags.shaping.l_cache; });
  on(train_cmd->add_flag("--dynamic-sampling,!--no-dynamic-sampling", flags.sampling.enabled,
                         "Filter degenerate-accuracy groups"),
     [&](TrainConfig& c) { c.sampling.enabled = flags.sampling.enabled; });
  on(train_cmd->add_option("--max-refill-rounds", flags.sampling.max_refill_rounds,
                           "Refill rounds before giving up"),
     [&](TrainConfig& c) { c.sampling.max_refill_rounds = flags.sampling.max_refill_rounds; });
  on(train_cmd->add_option("--eval-every", flags.eval_every,
                           "Evaluation cadence in rollout steps (0 = off)"),
     [&](TrainConfig& c) { c.eval_every = flags.eval_every; });
  on(train_cmd->add_option("--eval-repeats", flags.eval_repeats,
                           "Sampled evaluation repetitions"),
     [&](TrainConfig& c) { c.eval_repeats = flags.eval_repeats; });
  on(train_cmd->add_option("--eval-set-size", flags.eval_set_size, "Evaluation set size"),
     [&](TrainConfig& c) { c.eval_set_size = flags.eval_set_size; });

  // --- eval ---
  std::string eval_checkpoint;
  std::string eval_task = "add1";
  std::string eval_dataset;
  std::size_t eval_dataset_size = 64;
  std::uint64_t eval_seed = 1;
  int eval_repeats = 8;
  int eval_max_tokens = 16;
  int eval_threads = 1;
  auto* eval_cmd = app.add_subcommand("eval", "Report accuracy of a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--task", eval_task, "Synthetic task (add1, add2, addsub2)");
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset file (JSON lines) instead of --task");
  eval_cmd->add_option("--dataset-size", eval_dataset_size, "Synthetic dataset size");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
  eval_cmd->add_option("--repeats", eval_repeats, "Sampled evaluation repetitions");
  eval_cmd->add_option("--max-tokens", eval_max_tokens, "Generation budget per response");
  eval_cmd->add_option("--threads", eval_threads, "Worker threads");

  auto* selftest_cmd = app.add_subcommand("selftest", "Run built-in invariant and oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) {
      TrainConfig cfg = default_config();
      if (*config_opt) {
        const SnapshotContents snap = parse_config_snapshot(read_text_file(config_path));
        cfg = snap.config;
        if (!*preset_opt) preset = snap.preset;
        if (!*task_opt) task = snap.task;
        if (!*dataset_opt) dataset_path = snap.dataset_path;
        if (!*dataset_size_opt && snap.dataset_size > 0) dataset_size = snap.dataset_size;
      }
      if (*preset_opt || !*config_opt) apply_preset(cfg, preset);
      for (const auto& [opt, apply] : overrides) {
        if (opt->count() > 0) apply(cfg);
      }
      return run_train(cfg, preset, task, dataset_path, dataset_size, out_dir);
    }
    if (eval_cmd->parsed()) {
      return run_eval(eval_checkpoint, eval_task, eval_dataset, eval_dataset_size, eval_seed,
                      eval_repeats, eval_max_tokens, eval_threads);
    }
    if (selftest_cmd->parsed()) {
      return dapolab_cli::run_selftest();
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
