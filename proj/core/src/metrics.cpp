#include "dapolab/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dapolab {

std::string format_g9(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

MetricsRow collect(const TrainBatch& batch, const LossReport& report, int rollout_step, double lr) {
  MetricsRow row;
  row.rollout_step = rollout_step;

  long long responses = 0;
  long long length_sum = 0;
  double reward_sum = 0.0;
  long long acc1 = 0;
  long long acc0 = 0;
  for (const Group& g : batch.groups) {
    for (const Response& r : g.responses) {
      ++responses;
      length_sum += r.length();
    }
    for (double total : g.rewards) reward_sum += total;
    if (g.correct_count == g.size()) ++acc1;
    if (g.correct_count == 0) ++acc0;
  }
  if (responses > 0) {
    row.mean_response_length = static_cast<double>(length_sum) / static_cast<double>(responses);
    row.mean_reward = reward_sum / static_cast<double>(responses);
  }
  if (!batch.groups.empty()) {
    row.accuracy1_group_proportion = static_cast<double>(acc1) / static_cast<double>(batch.groups.size());
    row.accuracy0_group_proportion = static_cast<double>(acc0) / static_cast<double>(batch.groups.size());
  }

  row.mean_token_entropy = report.mean_entropy();
  row.mean_generation_probability = report.mean_token_prob();
  row.clip_fraction = report.clip_fraction();
  row.max_clipped_probability = report.max_clipped_probability;
  row.sampling_stats = batch.stats;
  row.lr = lr;
  return row;
}

std::string metrics_header() {
  return "rollout_step,mean_response_length,mean_reward,mean_token_entropy,"
         "mean_generation_probability,clip_fraction,max_clipped_probability,"
         "accuracy1_group_proportion,accuracy0_group_proportion,prompts_drawn,"
         "groups_kept,groups_filtered_acc0,groups_filtered_acc1,refill_rounds_used,"
         "lr,eval_accuracy";
}

std::string metrics_line(const MetricsRow& r) {
  std::string line;
  line += std::to_string(r.rollout_step);
  line += ',';
  line += format_g9(r.mean_response_length);
  line += ',';
  line += format_g9(r.mean_reward);
  line += ',';
  line += format_g9(r.mean_token_entropy);
  line += ',';
  line += format_g9(r.mean_generation_probability);
  line += ',';
  line += format_g9(r.clip_fraction);
  line += ',';
  if (r.max_clipped_probability) line += format_g9(*r.max_clipped_probability);
  line += ',';
  line += format_g9(r.accuracy1_group_proportion);
  line += ',';
  line += format_g9(r.accuracy0_group_proportion);
  line += ',';
  line += std::to_string(r.sampling_stats.prompts_drawn);
  line += ',';
  line += std::to_string(r.sampling_stats.groups_kept);
  line += ',';
  line += std::to_string(r.sampling_stats.filtered_acc0);
  line += ',';
  line += std::to_string(r.sampling_stats.filtered_acc1);
  line += ',';
  line += std::to_string(r.sampling_stats.refill_rounds_used);
  line += ',';
  line += format_g9(r.lr);
  line += ',';
  if (r.eval_accuracy) line += format_g9(*r.eval_accuracy);
  return line;
}

void write_metrics(std::span<const MetricsRow> rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps \n exact on all hosts
  if (!out) throw std::runtime_error("write_metrics: cannot open " + path + " for writing");
  out << metrics_header() << '\n';
  for (const MetricsRow& row : rows) out << metrics_line(row) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write_metrics: write failed for " + path);
}

}  // namespace dapolab
