#include "dapolab/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dapolab/parallel.hpp"

namespace dapolab {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::ppo: return "ppo";
    case Algorithm::grpo: return "grpo";
    case Algorithm::dapo: return "dapo";
  }
  return "unknown";
}

std::optional<Algorithm> algorithm_from_name(std::string_view name) {
  if (name == "ppo") return Algorithm::ppo;
  if (name == "grpo") return Algorithm::grpo;
  if (name == "dapo") return Algorithm::dapo;
  return std::nullopt;
}

const char* aggregation_name(Aggregation a) {
  return a == Aggregation::sample_level ? "sample_level" : "token_level";
}

std::optional<Aggregation> aggregation_from_name(std::string_view name) {
  if (name == "sample_level") return Aggregation::sample_level;
  if (name == "token_level") return Aggregation::token_level;
  return std::nullopt;
}

void ClipConfig::validate() const {
  if (!(eps_low > 0.0) || !(eps_high > 0.0)) {
    throw std::invalid_argument("ClipConfig: clip ranges must be positive");
  }
  if (!(1.0 - eps_low > 0.0)) {
    throw std::invalid_argument("ClipConfig: eps_low must keep 1 - eps_low positive");
  }
}

void ObjectiveConfig::validate() const {
  clip.validate();
  if (kl_beta < 0.0) throw std::invalid_argument("ObjectiveConfig: kl_beta must be >= 0");
  if (algorithm == Algorithm::dapo && kl_beta != 0.0) {
    throw std::invalid_argument("ObjectiveConfig: dapo runs without a KL term");
  }
  if (algorithm == Algorithm::ppo && clip.eps_low != clip.eps_high) {
    throw std::invalid_argument("ObjectiveConfig: ppo uses a symmetric clip");
  }
}

double importance_ratio(double new_lp, double old_lp) {
  if (!std::isfinite(new_lp) || !std::isfinite(old_lp)) {
    throw std::invalid_argument("importance_ratio: log-probs must be finite");
  }
  return std::exp(new_lp - old_lp);
}

double clipped_term(double ratio, double advantage, const ClipConfig& clip) {
  const double clamped = std::clamp(ratio, 1.0 - clip.eps_low, 1.0 + clip.eps_high);
  return std::min(ratio * advantage, clamped * advantage);
}

bool clip_active(double ratio, double advantage, const ClipConfig& clip) {
  if (advantage > 0.0) return ratio > 1.0 + clip.eps_high;
  if (advantage < 0.0) return ratio < 1.0 - clip.eps_low;
  return false;
}

bool clip_dead_zone(double ratio, double advantage, const ClipConfig& clip) {
  if (advantage > 0.0) return ratio >= 1.0 + clip.eps_high;
  if (advantage < 0.0) return ratio <= 1.0 - clip.eps_low;
  return true;  // zero advantage contributes nothing either way
}

namespace {

void check_span_shapes(std::span<const double> terms, std::span<const double> masks,
                       std::span<const int> lengths) {
  if (terms.size() != masks.size()) throw std::invalid_argument("aggregate: term/mask length mismatch");
  std::size_t total = 0;
  for (int len : lengths) {
    if (len <= 0) throw std::invalid_argument("aggregate: response lengths must be positive");
    total += static_cast<std::size_t>(len);
  }
  if (total != masks.size()) throw std::invalid_argument("aggregate: lengths do not cover the token spans");
  for (double m : masks) {
    if (m != 0.0 && m != 1.0) throw std::invalid_argument("aggregate: masks must be 0 or 1");
  }
}

// Per-token weight denominators: the weight of an unmasked token in
// response i is 1/denom[i], zero for a fully masked response. aggregate()
// equals the weighted sum of masked terms under these denominators.
std::vector<double> aggregation_denominators(std::span<const double> masks,
                                             std::span<const int> lengths, Aggregation mode) {
  std::vector<double> unmasked(lengths.size(), 0.0);
  std::size_t pos = 0;
  double total_unmasked = 0.0;
  std::size_t active_responses = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    for (int t = 0; t < lengths[i]; ++t, ++pos) unmasked[i] += masks[pos];
    total_unmasked += unmasked[i];
    if (unmasked[i] > 0.0) ++active_responses;
  }
  if (total_unmasked == 0.0) throw std::runtime_error("aggregate: empty effective batch");

  std::vector<double> denom(lengths.size(), 0.0);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (unmasked[i] == 0.0) continue;
    denom[i] = mode == Aggregation::token_level
                   ? total_unmasked
                   : unmasked[i] * static_cast<double>(active_responses);
  }
  return denom;
}

}  // namespace

double aggregate(std::span<const double> terms, std::span<const double> masks,
                 std::span<const int> lengths, Aggregation mode) {
  check_span_shapes(terms, masks, lengths);

  if (mode == Aggregation::token_level) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t pos = 0; pos < terms.size(); ++pos) {
      num += terms[pos] * masks[pos];
      den += masks[pos];
    }
    if (den == 0.0) throw std::runtime_error("aggregate: empty effective batch");
    return num / den;
  }

  // Mean over responses of each response's masked token mean; fully masked
  // responses drop out of the outer mean.
  double sum_of_means = 0.0;
  std::size_t active = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    double num = 0.0;
    double den = 0.0;
    for (int t = 0; t < lengths[i]; ++t, ++pos) {
      num += terms[pos] * masks[pos];
      den += masks[pos];
    }
    if (den > 0.0) {
      sum_of_means += num / den;
      ++active;
    }
  }
  if (active == 0) throw std::runtime_error("aggregate: empty effective batch");
  return sum_of_means / static_cast<double>(active);
}

void LossReport::merge_from(const LossReport& other) {
  const long long combined = token_count + other.token_count;
  if (combined > 0) {
    objective = (objective * token_count + other.objective * other.token_count) / combined;
  }
  if (gradient.empty()) {
    gradient = other.gradient;
  } else if (!other.gradient.empty()) {
    if (gradient.size() != other.gradient.size()) {
      throw std::invalid_argument("LossReport::merge_from: gradient length mismatch");
    }
    for (std::size_t i = 0; i < gradient.size(); ++i) gradient[i] += other.gradient[i];
  }
  ratios.insert(ratios.end(), other.ratios.begin(), other.ratios.end());
  clip_active_flags.insert(clip_active_flags.end(), other.clip_active_flags.begin(),
                           other.clip_active_flags.end());
  token_probs.insert(token_probs.end(), other.token_probs.begin(), other.token_probs.end());
  token_count = combined;
  clip_active_count += other.clip_active_count;
  entropy_sum += other.entropy_sum;
  token_prob_sum += other.token_prob_sum;
  if (other.max_clipped_probability) {
    max_clipped_probability = max_clipped_probability
                                  ? std::max(*max_clipped_probability, *other.max_clipped_probability)
                                  : *other.max_clipped_probability;
  }
}

namespace {

// Scratch produced by one group's forward/backward pass.
struct GroupWork {
  std::vector<std::vector<double>> ratios;
  std::vector<std::vector<std::uint8_t>> clip_flags;
  std::vector<std::vector<double>> token_probs;
  std::vector<double> terms;  // flat, response-major
  std::vector<double> gradient;
  double entropy_sum = 0.0;
  double token_prob_sum = 0.0;
  long long token_count = 0;
  long long clip_count = 0;
  std::optional<double> max_clipped_prob;
};

}  // namespace

LossReport objective_and_gradient(const PolicyParams& params, const PolicyParams& old_params,
                                  const PolicyParams* ref_params, std::span<const Group> groups,
                                  const ObjectiveConfig& cfg, int threads) {
  cfg.validate();
  if (groups.empty()) throw std::invalid_argument("objective_and_gradient: empty batch");
  if (params.shape != old_params.shape) {
    throw std::invalid_argument("objective_and_gradient: new/old parameter shapes differ");
  }
  const bool use_kl = cfg.algorithm == Algorithm::grpo;
  if (use_kl && ref_params == nullptr) {
    throw std::invalid_argument("objective_and_gradient: grpo requires a reference policy");
  }
  if (use_kl && ref_params->shape != params.shape) {
    throw std::invalid_argument("objective_and_gradient: reference parameter shape differs");
  }

  // Batch-wide mask layout first: the per-token gradient weights need the
  // pooled denominators before any per-group pass runs.
  std::vector<double> masks;
  std::vector<int> lengths;
  std::vector<std::size_t> response_base(groups.size(), 0);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const Group& g = groups[gi];
    if (g.size() < 2) throw std::invalid_argument("objective_and_gradient: group smaller than 2");
    if (g.advantages.size() != static_cast<std::size_t>(g.size()) ||
        g.breakdowns.size() != static_cast<std::size_t>(g.size())) {
      throw std::invalid_argument("objective_and_gradient: group fields out of sync");
    }
    response_base[gi] = lengths.size();
    for (int i = 0; i < g.size(); ++i) {
      const int len = g.responses[i].length();
      if (len <= 0) throw std::invalid_argument("objective_and_gradient: empty response");
      lengths.push_back(len);
      for (int t = 0; t < len; ++t) masks.push_back(g.breakdowns[i].loss_mask_weight);
    }
  }
  const std::vector<double> denom = aggregation_denominators(masks, lengths, cfg.aggregation);

  const std::size_t param_count = params.shape.param_count();
  const double beta = use_kl ? cfg.kl_beta : 0.0;
  const int vocab = params.shape.vocab_size;

  std::vector<GroupWork> work(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t gi) {
    const Group& group = groups[gi];
    GroupWork& out = work[gi];
    out.gradient.assign(param_count, 0.0);
    out.ratios.resize(group.size());
    out.clip_flags.resize(group.size());
    out.token_probs.resize(group.size());

    SequenceEvaluator new_eval(params, group.prompt_tokens);
    SequenceEvaluator old_eval(old_params, group.prompt_tokens);
    std::optional<SequenceEvaluator> ref_eval;
    if (use_kl) ref_eval.emplace(*ref_params, group.prompt_tokens);

    std::vector<double> dlogits(vocab, 0.0);

    for (int i = 0; i < group.size(); ++i) {
      const Response& resp = group.responses[i];
      const double advantage = group.advantages[i];
      const double resp_denom = denom[response_base[gi] + i];
      const double mask = group.breakdowns[i].loss_mask_weight;
      const double weight = (mask != 0.0 && resp_denom > 0.0) ? 1.0 / resp_denom : 0.0;
      const int len = resp.length();
      out.ratios[i].resize(len);
      out.clip_flags[i].resize(len);
      out.token_probs[i].resize(len);

      for (int t = 0; t < len; ++t) {
        const std::span<const int> prefix(resp.tokens.data(), static_cast<std::size_t>(t));
        const int token = resp.tokens[t];
        const StepTrace new_tr = new_eval.step(prefix);
        const StepTrace old_tr = old_eval.step(prefix);

        const double new_lp = new_tr.logprob(token);
        const double old_lp = old_tr.logprob(token);
        const double ratio = importance_ratio(new_lp, old_lp);
        const double token_prob = std::exp(new_lp);

        out.ratios[i][t] = ratio;
        out.token_probs[i][t] = token_prob;
        out.entropy_sum += new_tr.entropy();
        out.token_prob_sum += token_prob;
        ++out.token_count;
        const bool clipped = clip_active(ratio, advantage, cfg.clip);
        out.clip_flags[i][t] = clipped ? 1 : 0;
        if (clipped) {
          ++out.clip_count;
          out.max_clipped_prob = out.max_clipped_prob ? std::max(*out.max_clipped_prob, token_prob)
                                                      : token_prob;
        }

        double term = clipped_term(ratio, advantage, cfg.clip);
        double kl = 0.0;
        std::optional<StepTrace> ref_tr;
        if (use_kl) {
          ref_tr = ref_eval->step(prefix);
          for (int k = 0; k < vocab; ++k) {
            if (new_tr.probs[k] > 0.0) kl += new_tr.probs[k] * (new_tr.logprob(k) - ref_tr->logprob(k));
          }
          term -= beta * kl;
        }
        if (!std::isfinite(term)) {
          throw std::runtime_error("objective_and_gradient: non-finite term at group " +
                                   std::to_string(gi) + ", response " + std::to_string(i) +
                                   ", token " + std::to_string(t));
        }
        out.terms.push_back(term);
        if (weight == 0.0) continue;

        // d(term)/d(logit_k). The clipped surrogate contributes
        // r*A*(1[k=token] - p_k) unless the clamp is binding; the KL part
        // contributes -beta * p_k (ln p_k - ln q_k - KL).
        const bool dead = clip_dead_zone(ratio, advantage, cfg.clip);
        const double surrogate_coeff = dead ? 0.0 : ratio * advantage;
        if (surrogate_coeff == 0.0 && beta == 0.0) continue;
        for (int k = 0; k < vocab; ++k) {
          double d = surrogate_coeff * ((k == token ? 1.0 : 0.0) - new_tr.probs[k]);
          if (beta != 0.0 && new_tr.probs[k] > 0.0) {
            d -= beta * new_tr.probs[k] * (new_tr.logprob(k) - ref_tr->logprob(k) - kl);
          }
          dlogits[k] = weight * d;
        }
        accumulate_step_gradient(params, group.prompt_tokens, new_tr, dlogits, out.gradient);
      }
    }
  });

  // Merge per-group results in batch order: bitwise identical for any
  // thread count or schedule.
  LossReport report;
  report.gradient.assign(param_count, 0.0);
  std::vector<double> terms;
  terms.reserve(masks.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    GroupWork& w = work[gi];
    terms.insert(terms.end(), w.terms.begin(), w.terms.end());
    for (std::size_t p = 0; p < param_count; ++p) report.gradient[p] += w.gradient[p];
    report.ratios.push_back(std::move(w.ratios));
    report.clip_active_flags.push_back(std::move(w.clip_flags));
    report.token_probs.push_back(std::move(w.token_probs));
    report.token_count += w.token_count;
    report.clip_active_count += w.clip_count;
    report.entropy_sum += w.entropy_sum;
    report.token_prob_sum += w.token_prob_sum;
    if (w.max_clipped_prob) {
      report.max_clipped_probability =
          report.max_clipped_probability
              ? std::max(*report.max_clipped_probability, *w.max_clipped_prob)
              : *w.max_clipped_prob;
    }
  }
  report.objective = aggregate(terms, masks, lengths, cfg.aggregation);
  if (!std::isfinite(report.objective)) {
    throw std::runtime_error("objective_and_gradient: non-finite objective");
  }
  return report;
}

}  // namespace dapolab
