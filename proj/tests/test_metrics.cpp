#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dapolab/checkpoint.hpp"
#include "dapolab/metrics.hpp"
#include "dapolab/presets.hpp"

using namespace dapolab;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrainBatch uniform_policy_batch(const Vocab& vocab, const PolicyParams& params, int groups,
                                int group_size) {
  RolloutContext ctx;
  ctx.vocab = &vocab;
  ctx.params = &params;
  ctx.max_tokens = 8;
  ctx.global_seed = 5;
  ctx.rollout_step = 1;

  TrainBatch batch;
  for (int k = 0; k < groups; ++k) {
    const TaskInstance task = make_binary_task(vocab, 1 + k % 8, '+', 2, Difficulty::add1);
    batch.groups.push_back(rollout_group(ctx, task, k, group_size, k));
  }
  batch.stats.prompts_drawn = groups;
  batch.stats.groups_kept = groups;
  batch.stats.refill_rounds_used = 1;
  return batch;
}

}  // namespace

TEST_CASE("collect on an unchanged policy: no clipping, uniform entropy") {
  const Vocab vocab = Vocab::arithmetic();
  PolicyShape shape;
  shape.vocab_size = vocab.size();
  const PolicyParams params = PolicyParams::zeros(shape);  // exactly uniform

  TrainBatch batch = uniform_policy_batch(vocab, params, 4, 4);
  ObjectiveConfig cfg;
  cfg.algorithm = Algorithm::dapo;
  const LossReport report =
      objective_and_gradient(params, params, nullptr, batch.groups, cfg);

  const MetricsRow row = collect(batch, report, 3, 1e-3);
  CHECK(row.rollout_step == 3);
  CHECK(row.clip_fraction == 0.0);
  CHECK_FALSE(row.max_clipped_probability.has_value());
  CHECK(row.mean_token_entropy == doctest::Approx(std::log(13.0)).epsilon(1e-9));
  CHECK(row.mean_generation_probability == doctest::Approx(1.0 / 13.0).epsilon(1e-9));
  CHECK(row.lr == 1e-3);

  // Field invariants.
  CHECK(row.accuracy0_group_proportion >= 0.0);
  CHECK(row.accuracy0_group_proportion <= 1.0);
  CHECK(row.accuracy1_group_proportion >= 0.0);
  CHECK(row.accuracy1_group_proportion <= 1.0);
  CHECK(row.mean_token_entropy <= std::log(13.0) + 1e-12);
  CHECK(row.mean_generation_probability > 0.0);
  CHECK(row.mean_generation_probability <= 1.0);
  CHECK(row.mean_response_length > 0.0);
}

TEST_CASE("accuracy proportions count degenerate groups") {
  const Vocab vocab = Vocab::arithmetic();
  PolicyShape shape;
  shape.vocab_size = vocab.size();
  const PolicyParams params = PolicyParams::zeros(shape);

  TrainBatch batch = uniform_policy_batch(vocab, params, 16, 2);
  // Rewrite correctness by hand: 2 groups all-correct, 3 all-wrong.
  for (int k = 0; k < 16; ++k) {
    Group& g = batch.groups[k];
    g.correct_count = k < 2 ? g.size() : (k < 5 ? 0 : 1);
  }

  LossReport report;
  report.token_count = 1;
  report.entropy_sum = 1.0;
  report.token_prob_sum = 0.5;

  const MetricsRow row = collect(batch, report, 1, 1e-3);
  CHECK(row.accuracy1_group_proportion == 0.125);  // 2 of 16
  CHECK(row.accuracy0_group_proportion == doctest::Approx(3.0 / 16.0));
}

TEST_CASE("metrics files have a header, one line per row, deterministic bytes") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "dapolab_metrics_test.csv";

  SUBCASE("empty log is header-only") {
    write_metrics({}, path.string());
    const std::string text = read_file(path);
    CHECK(text == metrics_header() + "\n");
  }

  SUBCASE("three rows, four lines, rewrite is byte-identical") {
    std::vector<MetricsRow> rows(3);
    rows[0].rollout_step = 1;
    rows[0].mean_reward = -1.0;
    rows[0].lr = 5e-8;
    rows[1].rollout_step = 2;
    rows[1].max_clipped_probability = 0.125;
    rows[1].eval_accuracy = 0.5;
    rows[2].rollout_step = 3;
    rows[2].mean_token_entropy = 2.56494935746153673;  // ln 13

    write_metrics(rows, path.string());
    const std::string first = read_file(path);
    CHECK(std::count(first.begin(), first.end(), '\n') == 4);

    write_metrics(rows, path.string());
    CHECK(read_file(path) == first);

    // Optional fields are empty cells, not zeros.
    std::istringstream lines(first);
    std::string header, line1;
    std::getline(lines, header);
    std::getline(lines, line1);
    CHECK(header == metrics_header());
    CHECK(line1.find(",,") != std::string::npos);
    CHECK(line1.find("5e-08") != std::string::npos);
  }

  std::filesystem::remove(path);
}

TEST_CASE("nine significant digits in the number format") {
  CHECK(format_g9(0.0) == "0");
  CHECK(format_g9(1.0 / 3.0) == "0.333333333");
  CHECK(format_g9(5e-8) == "5e-08");
  CHECK(format_g9(2.56494935746153673) == "2.56494936");
}

TEST_CASE("write failures surface the path") {
  try {
    write_metrics({}, "/nonexistent-dir/metrics.csv");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("/nonexistent-dir/metrics.csv") != std::string::npos);
  }
}

TEST_CASE("preset chain toggles exactly one technique per stage") {
  const auto& names = preset_names();
  REQUIRE(names.size() == 6);
  CHECK(names.front() == "grpo-naive");
  CHECK(names.back() == "dapo");

  std::vector<TechniqueFields> fields;
  for (const auto& name : names) {
    TrainConfig cfg = default_config();
    apply_preset(cfg, name);
    cfg.validate();
    fields.push_back(technique_fields(cfg));
  }

  for (std::size_t k = 0; k + 1 < fields.size(); ++k) {
    int diffs = 0;
    if (fields[k].shaping_mode != fields[k + 1].shaping_mode) ++diffs;
    if (fields[k].eps_high != fields[k + 1].eps_high) ++diffs;
    if (fields[k].aggregation != fields[k + 1].aggregation) ++diffs;
    if (fields[k].dynamic_sampling != fields[k + 1].dynamic_sampling) ++diffs;
    CHECK(diffs == 1);
  }

  // Naive baseline: no technique active.
  CHECK(fields.front() == TechniqueFields{ShapingMode::none, 0.2, Aggregation::sample_level, false});
  // Full stack: all four active.
  CHECK(fields.back() ==
        TechniqueFields{ShapingMode::soft_punish, 0.28, Aggregation::token_level, true});

  TrainConfig cfg = default_config();
  CHECK_THROWS(apply_preset(cfg, "unknown"));
  CHECK(is_preset_name("+clip-higher"));
  CHECK_FALSE(is_preset_name("clip-higher"));
}

TEST_CASE("the naive preset's snapshot shows the baseline settings") {
  TrainConfig cfg = default_config();
  apply_preset(cfg, "grpo-naive");
  const std::string snap = config_snapshot(cfg, "grpo-naive", "add1", "", 256);
  CHECK(snap.find("eps_low=0.2\n") != std::string::npos);
  CHECK(snap.find("eps_high=0.2\n") != std::string::npos);
  CHECK(snap.find("aggregation=sample_level\n") != std::string::npos);
  CHECK(snap.find("shaping_mode=none\n") != std::string::npos);
  CHECK(snap.find("dynamic_sampling=false\n") != std::string::npos);
  CHECK(snap.find("kl_beta=0\n") != std::string::npos);
  CHECK(snap.find("algorithm=grpo\n") != std::string::npos);
}

TEST_CASE("config snapshots round-trip") {
  TrainConfig cfg = default_config();
  apply_preset(cfg, "dapo");
  cfg.seed = 17;
  cfg.total_steps = 42;
  cfg.base_lr = 1.5e-3;
  cfg.threads = 2;

  const std::string snap = config_snapshot(cfg, "dapo", "addsub2", "data.jsonl", 128);
  const SnapshotContents parsed = parse_config_snapshot(snap);
  CHECK(parsed.preset == "dapo");
  CHECK(parsed.task == "addsub2");
  CHECK(parsed.dataset_path == "data.jsonl");
  CHECK(parsed.dataset_size == 128);
  CHECK(config_snapshot(parsed.config, parsed.preset, parsed.task, parsed.dataset_path,
                        parsed.dataset_size) == snap);

  CHECK_THROWS(parse_config_snapshot("seed=1\n"));          // missing keys
  CHECK_THROWS(parse_config_snapshot("not a snapshot\n"));  // no key=value shape
}

TEST_CASE("checkpoints round-trip bitwise") {
  PolicyShape shape;
  shape.vocab_size = 13;
  shape.embed_dim = 4;
  shape.hidden_dim = 8;
  shape.window = 3;
  RandomStream rng(1);
  const PolicyParams params = PolicyParams::init_uniform(shape, rng);

  const auto path = std::filesystem::temp_directory_path() / "dapolab_ckpt_test.bin";
  save_checkpoint(path.string(), params, 0xDEADBEEFCAFEF00DULL);
  const Checkpoint ck = load_checkpoint(path.string());
  CHECK(ck.config_fingerprint == 0xDEADBEEFCAFEF00DULL);
  CHECK(ck.params.shape == shape);
  REQUIRE(ck.params.values.size() == params.values.size());
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    CHECK(ck.params.values[i] == params.values[i]);
  }

  // Same inputs, same bytes.
  const auto path2 = std::filesystem::temp_directory_path() / "dapolab_ckpt_test2.bin";
  save_checkpoint(path2.string(), params, 0xDEADBEEFCAFEF00DULL);
  CHECK(read_file(path) == read_file(path2));

  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto path = std::filesystem::temp_directory_path() / "dapolab_ckpt_bad.bin";

  PolicyShape shape;
  shape.vocab_size = 4;
  shape.embed_dim = 2;
  shape.hidden_dim = 2;
  shape.window = 1;
  const PolicyParams params = PolicyParams::zeros(shape);
  save_checkpoint(path.string(), params, 1);

  std::string blob = read_file(path);

  SUBCASE("bad magic") {
    blob[0] = 'X';
    std::ofstream(path, std::ios::binary) << blob;
    CHECK_THROWS(load_checkpoint(path.string()));
  }
  SUBCASE("bad version") {
    blob[8] = 9;
    std::ofstream(path, std::ios::binary) << blob;
    CHECK_THROWS(load_checkpoint(path.string()));
  }
  SUBCASE("truncated") {
    std::ofstream(path, std::ios::binary) << blob.substr(0, blob.size() - 3);
    CHECK_THROWS(load_checkpoint(path.string()));
  }
  SUBCASE("trailing bytes") {
    std::ofstream(path, std::ios::binary) << (blob + "xx");
    CHECK_THROWS(load_checkpoint(path.string()));
  }
  SUBCASE("missing file") { CHECK_THROWS(load_checkpoint("/nonexistent/ckpt.bin")); }

  std::filesystem::remove(path);
}

TEST_CASE("fnv1a64 matches its reference offset basis") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") != fnv1a64("b"));
}
