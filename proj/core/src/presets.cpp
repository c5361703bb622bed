#include "dapolab/presets.hpp"

#include <cstdio>
#include <cstring>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dapolab {

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "grpo-naive", "+overlong-filter", "+clip-higher", "+soft-punish", "+token-level", "dapo"};
  return names;
}

bool is_preset_name(const std::string& name) {
  for (const auto& n : preset_names()) {
    if (n == name) return true;
  }
  return false;
}

TrainConfig default_config() {
  TrainConfig cfg;
  cfg.sampling.batch_groups = 16;
  cfg.sampling.group_size = 8;
  cfg.sampling.enabled = false;
  cfg.updates_per_step = 4;
  cfg.mini_batch_groups = 4;
  cfg.max_gen_tokens = 16;

  cfg.objective.algorithm = Algorithm::grpo;
  cfg.objective.clip = ClipConfig::symmetric(0.2);
  cfg.objective.aggregation = Aggregation::sample_level;
  cfg.objective.kl_beta = 0.0;

  cfg.shaping.mode = ShapingMode::none;
  // Align the penalty scale with the generation budget: the hard cap is
  // the budget itself and the punish interval covers its last quarter.
  cfg.shaping.l_max = cfg.max_gen_tokens;
  cfg.shaping.l_cache = std::max(1, cfg.max_gen_tokens / 4);
  return cfg;
}

void apply_preset(TrainConfig& cfg, const std::string& name) {
  int stage = -1;
  const auto& names = preset_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) stage = static_cast<int>(i);
  }
  if (stage < 0) throw std::invalid_argument("apply_preset: unknown preset \"" + name + "\"");

  cfg.objective.algorithm = Algorithm::grpo;
  cfg.objective.clip = ClipConfig::symmetric(0.2);
  cfg.objective.aggregation = Aggregation::sample_level;
  cfg.objective.kl_beta = 0.0;
  cfg.shaping.mode = ShapingMode::none;
  cfg.sampling.enabled = false;

  if (stage >= 1) cfg.shaping.mode = ShapingMode::overlong_filter;
  if (stage >= 2) cfg.objective.clip.eps_high = 0.28;
  if (stage >= 3) cfg.shaping.mode = ShapingMode::soft_punish;
  if (stage >= 4) cfg.objective.aggregation = Aggregation::token_level;
  if (stage >= 5) {
    cfg.sampling.enabled = true;
    cfg.objective.algorithm = Algorithm::dapo;
  }
}

TechniqueFields technique_fields(const TrainConfig& cfg) {
  return TechniqueFields{cfg.shaping.mode, cfg.objective.clip.eps_high, cfg.objective.aggregation,
                         cfg.sampling.enabled};
}

namespace {

// Shortest decimal form that parses back to the same double.
std::string num(double v) {
  char buf[48];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace

std::string config_snapshot(const TrainConfig& cfg, const std::string& preset,
                            const std::string& task, const std::string& dataset_path,
                            std::size_t dataset_size) {
  std::ostringstream out;
  out << "preset=" << preset << '\n';
  out << "task=" << task << '\n';
  out << "dataset=" << dataset_path << '\n';
  out << "dataset_size=" << dataset_size << '\n';
  out << "seed=" << cfg.seed << '\n';
  out << "threads=" << cfg.threads << '\n';
  out << "vocab=" << cfg.vocab_symbols << '\n';
  out << "embed_dim=" << cfg.embed_dim << '\n';
  out << "hidden_dim=" << cfg.hidden_dim << '\n';
  out << "window=" << cfg.window << '\n';
  out << "total_steps=" << cfg.total_steps << '\n';
  out << "batch_groups=" << cfg.sampling.batch_groups << '\n';
  out << "group_size=" << cfg.sampling.group_size << '\n';
  out << "updates_per_step=" << cfg.updates_per_step << '\n';
  out << "mini_batch_groups=" << cfg.mini_batch_groups << '\n';
  out << "max_gen_tokens=" << cfg.max_gen_tokens << '\n';
  out << "base_lr=" << num(cfg.base_lr) << '\n';
  out << "warmup_steps=" << cfg.warmup_steps << '\n';
  out << "adam_beta1=" << num(cfg.adam.beta1) << '\n';
  out << "adam_beta2=" << num(cfg.adam.beta2) << '\n';
  out << "adam_eps=" << num(cfg.adam.eps) << '\n';
  out << "weight_decay=" << num(cfg.adam.weight_decay) << '\n';
  out << "algorithm=" << algorithm_name(cfg.objective.algorithm) << '\n';
  out << "eps_low=" << num(cfg.objective.clip.eps_low) << '\n';
  out << "eps_high=" << num(cfg.objective.clip.eps_high) << '\n';
  out << "aggregation=" << aggregation_name(cfg.objective.aggregation) << '\n';
  out << "kl_beta=" << num(cfg.objective.kl_beta) << '\n';
  out << "shaping_mode=" << shaping_mode_name(cfg.shaping.mode) << '\n';
  out << "l_max=" << cfg.shaping.l_max << '\n';
  out << "l_cache=" << cfg.shaping.l_cache << '\n';
  out << "dynamic_sampling=" << (cfg.sampling.enabled ? "true" : "false") << '\n';
  out << "max_refill_rounds=" << cfg.sampling.max_refill_rounds << '\n';
  out << "eval_every=" << cfg.eval_every << '\n';
  out << "eval_repeats=" << cfg.eval_repeats << '\n';
  out << "eval_set_size=" << cfg.eval_set_size << '\n';
  return out.str();
}

namespace {

class KeyValues {
 public:
  explicit KeyValues(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("config snapshot line " + std::to_string(lineno) +
                                 ": expected key=value");
      }
      map_[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }

  const std::string& get(const std::string& key) const {
    const auto it = map_.find(key);
    if (it == map_.end()) throw std::runtime_error("config snapshot: missing key \"" + key + "\"");
    return it->second;
  }

  long long get_int(const std::string& key) const {
    const std::string& s = get(key);
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::runtime_error("config snapshot: bad integer for \"" + key + "\"");
    return v;
  }

  double get_double(const std::string& key) const {
    const std::string& s = get(key);
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::runtime_error("config snapshot: bad number for \"" + key + "\"");
    return v;
  }

  bool get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true") return true;
    if (s == "false") return false;
    throw std::runtime_error("config snapshot: bad boolean for \"" + key + "\"");
  }

 private:
  std::map<std::string, std::string> map_;
};

}  // namespace

SnapshotContents parse_config_snapshot(const std::string& text) {
  const KeyValues kv(text);
  SnapshotContents out;
  out.preset = kv.get("preset");
  out.task = kv.get("task");
  out.dataset_path = kv.get("dataset");
  out.dataset_size = static_cast<std::size_t>(kv.get_int("dataset_size"));

  TrainConfig& cfg = out.config;
  cfg = default_config();
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
  cfg.threads = static_cast<int>(kv.get_int("threads"));
  cfg.vocab_symbols = kv.get("vocab");
  cfg.embed_dim = static_cast<int>(kv.get_int("embed_dim"));
  cfg.hidden_dim = static_cast<int>(kv.get_int("hidden_dim"));
  cfg.window = static_cast<int>(kv.get_int("window"));
  cfg.total_steps = static_cast<int>(kv.get_int("total_steps"));
  cfg.sampling.batch_groups = static_cast<int>(kv.get_int("batch_groups"));
  cfg.sampling.group_size = static_cast<int>(kv.get_int("group_size"));
  cfg.updates_per_step = static_cast<int>(kv.get_int("updates_per_step"));
  cfg.mini_batch_groups = static_cast<int>(kv.get_int("mini_batch_groups"));
  cfg.max_gen_tokens = static_cast<int>(kv.get_int("max_gen_tokens"));
  cfg.base_lr = kv.get_double("base_lr");
  cfg.warmup_steps = static_cast<int>(kv.get_int("warmup_steps"));
  cfg.adam.beta1 = kv.get_double("adam_beta1");
  cfg.adam.beta2 = kv.get_double("adam_beta2");
  cfg.adam.eps = kv.get_double("adam_eps");
  cfg.adam.weight_decay = kv.get_double("weight_decay");
  const auto algo = algorithm_from_name(kv.get("algorithm"));
  if (!algo) throw std::runtime_error("config snapshot: unknown algorithm");
  cfg.objective.algorithm = *algo;
  cfg.objective.clip.eps_low = kv.get_double("eps_low");
  cfg.objective.clip.eps_high = kv.get_double("eps_high");
  const auto agg = aggregation_from_name(kv.get("aggregation"));
  if (!agg) throw std::runtime_error("config snapshot: unknown aggregation");
  cfg.objective.aggregation = *agg;
  cfg.objective.kl_beta = kv.get_double("kl_beta");
  const auto mode = shaping_mode_from_name(kv.get("shaping_mode"));
  if (!mode) throw std::runtime_error("config snapshot: unknown shaping_mode");
  cfg.shaping.mode = *mode;
  cfg.shaping.l_max = static_cast<int>(kv.get_int("l_max"));
  cfg.shaping.l_cache = static_cast<int>(kv.get_int("l_cache"));
  cfg.sampling.enabled = kv.get_bool("dynamic_sampling");
  cfg.sampling.max_refill_rounds = static_cast<int>(kv.get_int("max_refill_rounds"));
  cfg.eval_every = static_cast<int>(kv.get_int("eval_every"));
  cfg.eval_repeats = static_cast<int>(kv.get_int("eval_repeats"));
  cfg.eval_set_size = static_cast<int>(kv.get_int("eval_set_size"));
  return out;
}

}  // namespace dapolab
