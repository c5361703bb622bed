#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dapolab/advantage.hpp"
#include "dapolab/policy.hpp"

namespace dapolab {

enum class Algorithm { ppo, grpo, dapo };
enum class Aggregation { sample_level, token_level };

const char* algorithm_name(Algorithm a);
std::optional<Algorithm> algorithm_from_name(std::string_view name);
const char* aggregation_name(Aggregation a);
std::optional<Aggregation> aggregation_from_name(std::string_view name);

// Decoupled clipping range. eps_high > eps_low leaves more headroom for
// boosting low-probability tokens; both orderings are legal.
struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.2;

  static ClipConfig symmetric(double eps) { return ClipConfig{eps, eps}; }
  void validate() const;
};

struct ObjectiveConfig {
  Algorithm algorithm = Algorithm::dapo;
  ClipConfig clip;
  Aggregation aggregation = Aggregation::token_level;
  double kl_beta = 0.0;  // reference-policy KL weight; grpo only

  void validate() const;
};

// pi_theta(token) / pi_theta_old(token) from the two log-probs.
double importance_ratio(double new_lp, double old_lp);

// min(r*A, clamp(r, 1-eps_low, 1+eps_high)*A). With a symmetric clip this
// is the classic clipped surrogate term.
double clipped_term(double ratio, double advantage, const ClipConfig& clip);

// True iff the clipped branch is selected with a strictly binding clamp:
// the token contributes a constant to the objective.
bool clip_active(double ratio, double advantage, const ClipConfig& clip);

// Zero-gradient region of the clipped term. Boundary points (ratio exactly
// at a clip edge) are treated as dead so their analytic contribution is
// exactly zero.
bool clip_dead_zone(double ratio, double advantage, const ClipConfig& clip);

// sample_level: mean over responses of each response's masked token mean;
// responses with every token masked are dropped from the outer mean.
// token_level: sum of masked terms over the total masked-token count,
// pooled across all responses. `lengths` partitions the flat spans.
double aggregate(std::span<const double> terms, std::span<const double> masks,
                 std::span<const int> lengths, Aggregation mode);

// Everything the trainer and the metrics need from one objective
// evaluation. Diagnostics are indexed [group][response][token] in the
// order the groups were supplied.
struct LossReport {
  double objective = 0.0;        // value of the maximized objective
  std::vector<double> gradient;  // d objective / d params, length P

  std::vector<std::vector<std::vector<double>>> ratios;
  std::vector<std::vector<std::vector<std::uint8_t>>> clip_active_flags;
  std::vector<std::vector<std::vector<double>>> token_probs;  // new-policy prob of emitted token

  long long token_count = 0;
  long long clip_active_count = 0;
  double entropy_sum = 0.0;     // sum of per-position entropies
  double token_prob_sum = 0.0;  // sum of per-position emitted-token probs
  std::optional<double> max_clipped_probability;

  double mean_entropy() const { return token_count > 0 ? entropy_sum / token_count : 0.0; }
  double mean_token_prob() const { return token_count > 0 ? token_prob_sum / token_count : 0.0; }
  double clip_fraction() const {
    return token_count > 0 ? static_cast<double>(clip_active_count) / token_count : 0.0;
  }

  // Appends another report's diagnostics. The merged objective is the
  // token-count-weighted mean; gradients add.
  void merge_from(const LossReport& other);
};

// The clipped policy-gradient objective over a set of groups, with its
// exact reverse-mode gradient. Old log-probs are recomputed under
// old_params; ref_params is required for grpo (per-token exact KL, weighted
// by kl_beta). Per-group work may run on `threads` workers; accumulation
// order is fixed, so results are bitwise-independent of scheduling.
LossReport objective_and_gradient(const PolicyParams& params, const PolicyParams& old_params,
                                  const PolicyParams* ref_params,
                                  std::span<const Group> groups,
                                  const ObjectiveConfig& cfg, int threads = 1);

}  // namespace dapolab
