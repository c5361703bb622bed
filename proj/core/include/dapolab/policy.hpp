#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dapolab/rng.hpp"
#include "dapolab/vocab.hpp"

namespace dapolab {

// Dimensions of the toy autoregressive policy. The per-step input is the
// mean of the prompt-token embeddings (embed_dim) concatenated with a
// window of the last `window` generated tokens, one-hot each. One tanh
// hidden layer maps that to vocab_size logits.
struct PolicyShape {
  int vocab_size = 13;
  int embed_dim = 8;
  int hidden_dim = 32;
  int window = 4;

  int input_dim() const { return embed_dim + window * vocab_size; }

  // Flat layout: embedding [V][E], hidden weights [D][H], hidden bias [H],
  // output weights [H][V], output bias [V], with D = input_dim().
  std::size_t embed_offset() const { return 0; }
  std::size_t w1_offset() const { return static_cast<std::size_t>(vocab_size) * embed_dim; }
  std::size_t b1_offset() const { return w1_offset() + static_cast<std::size_t>(input_dim()) * hidden_dim; }
  std::size_t w2_offset() const { return b1_offset() + static_cast<std::size_t>(hidden_dim); }
  std::size_t b2_offset() const { return w2_offset() + static_cast<std::size_t>(hidden_dim) * vocab_size; }
  std::size_t param_count() const { return b2_offset() + static_cast<std::size_t>(vocab_size); }

  void validate() const;
  bool operator==(const PolicyShape&) const = default;
};

// All differentiable parameters as one flat vector of length
// shape.param_count(). Old/reference policies are frozen copies.
struct PolicyParams {
  PolicyShape shape;
  std::vector<double> values;

  static PolicyParams zeros(const PolicyShape& shape);
  // Uniform in [-0.1, 0.1]; keeps the initial policy near-uniform.
  static PolicyParams init_uniform(const PolicyShape& shape, RandomStream& rng);

  double embed(int token, int e) const { return values[shape.embed_offset() + static_cast<std::size_t>(token) * shape.embed_dim + e]; }
  double w1(int d, int h) const { return values[shape.w1_offset() + static_cast<std::size_t>(d) * shape.hidden_dim + h]; }
  double b1(int h) const { return values[shape.b1_offset() + h]; }
  double w2(int h, int v) const { return values[shape.w2_offset() + static_cast<std::size_t>(h) * shape.vocab_size + v]; }
  double b2(int v) const { return values[shape.b2_offset() + v]; }
};

// One sampled token sequence. Log-probs are the behavior policy's, in nats,
// stored at sampling time. `truncated` is set iff generation hit the length
// cap without emitting end-of-sequence; a truncated response never carries
// a decoded answer.
struct Response {
  int prompt_id = -1;
  std::vector<int> tokens;
  std::vector<double> logprobs;
  bool truncated = false;
  std::optional<long long> decoded_answer;

  int length() const { return static_cast<int>(tokens.size()); }
};

// Cached forward pass for one generation step; reused by the backward pass.
struct StepTrace {
  std::vector<double> input;   // D
  std::vector<double> hidden;  // H, post-tanh
  std::vector<double> logits;  // V
  std::vector<double> probs;   // V, softmax
  double max_logit = 0.0;
  double log_z = 0.0;  // log sum exp(logit - max_logit)

  double logprob(int token) const { return logits[token] - max_logit - log_z; }
  double entropy() const;
};

// Evaluates one prompt's per-step distributions. The prompt context (mean
// embedding) is computed once and shared across steps.
class SequenceEvaluator {
 public:
  SequenceEvaluator(const PolicyParams& params, std::span<const int> prompt);

  // Distribution over the next token after `prefix` tokens were generated.
  StepTrace step(std::span<const int> prefix) const;

  const std::vector<double>& context() const { return context_; }

 private:
  const PolicyParams& params_;
  std::vector<double> context_;  // E, mean of prompt-token embeddings
};

// dJ/dlogits at one step -> accumulated into dJ/dparams. `prompt` must be
// the prompt the trace was computed with.
void accumulate_step_gradient(const PolicyParams& params, std::span<const int> prompt,
                              const StepTrace& trace, std::span<const double> dlogits,
                              std::span<double> grad);

// Next-token distribution; softmax of the V logits. Sums to 1 within 1e-12.
std::vector<double> token_distribution(const PolicyParams& params, std::span<const int> prompt,
                                       std::span<const int> prefix);

// Sequential inverse-CDF sampling on `rng`, stopping at end-of-sequence or
// after max_tokens. Stored log-probs are exactly the log-probabilities the
// sampling distribution assigned to the emitted tokens.
Response sample_response(const PolicyParams& params, int prompt_id, std::span<const int> prompt,
                         int max_tokens, int eos_token, RandomStream& rng);

// Per-token log pi(o_t | prompt, o_<t) for a stored response. Evaluating
// with the parameters that sampled the response reproduces its stored
// log-probs to 1e-12.
std::vector<double> response_logprobs(const PolicyParams& params, std::span<const int> prompt,
                                      const Response& response);

// -sum p ln p in nats, with 0 ln 0 := 0. Lies in [0, ln V].
double step_entropy(std::span<const double> p);

// sum_k p_k ln(p_k / q_k) over the full vocabulary, computed in log space.
double exact_kl(const PolicyParams& params, const PolicyParams& ref_params,
                std::span<const int> prompt, std::span<const int> prefix);

// Argmax decoding (ties -> lowest token id); used for evaluation accuracy.
std::vector<int> greedy_decode(const PolicyParams& params, std::span<const int> prompt,
                               int max_tokens, int eos_token);

}  // namespace dapolab
