#include "dapolab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dapolab {

namespace {

void check_tokens(std::span<const int> tokens, int vocab_size, const char* what) {
  for (int t : tokens) {
    if (t < 0 || t >= vocab_size) {
      throw std::invalid_argument(std::string(what) + ": token id " + std::to_string(t) +
                                  " outside vocabulary of size " + std::to_string(vocab_size));
    }
  }
}

// Names the parameter block containing non-finite values, for diagnostics.
const char* nonfinite_block(const PolicyParams& p) {
  const auto& s = p.shape;
  auto scan = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      if (!std::isfinite(p.values[i])) return true;
    }
    return false;
  };
  if (scan(s.embed_offset(), s.w1_offset())) return "prompt embedding";
  if (scan(s.w1_offset(), s.b1_offset())) return "hidden weights";
  if (scan(s.b1_offset(), s.w2_offset())) return "hidden bias";
  if (scan(s.w2_offset(), s.b2_offset())) return "output weights";
  if (scan(s.b2_offset(), s.param_count())) return "output bias";
  return nullptr;
}

}  // namespace

void PolicyShape::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("PolicyShape: vocab_size must be >= 2");
  if (embed_dim < 1 || hidden_dim < 1 || window < 1) {
    throw std::invalid_argument("PolicyShape: embed_dim, hidden_dim and window must be positive");
  }
}

PolicyParams PolicyParams::zeros(const PolicyShape& shape) {
  shape.validate();
  return PolicyParams{shape, std::vector<double>(shape.param_count(), 0.0)};
}

PolicyParams PolicyParams::init_uniform(const PolicyShape& shape, RandomStream& rng) {
  PolicyParams p = zeros(shape);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    // Embeddings start at unit scale so the prompt features match the
    // one-hot window features in magnitude; everything downstream starts
    // small, which keeps the initial policy near-uniform either way.
    const double scale = i < shape.w1_offset() ? 1.0 : 0.1;
    p.values[i] = rng.uniform(-scale, scale);
  }
  return p;
}

double StepTrace::entropy() const {
  double h = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] > 0.0) h -= probs[k] * (logits[k] - max_logit - log_z);
  }
  return h;
}

SequenceEvaluator::SequenceEvaluator(const PolicyParams& params, std::span<const int> prompt)
    : params_(params), context_(params.shape.embed_dim, 0.0) {
  check_tokens(prompt, params.shape.vocab_size, "SequenceEvaluator");
  if (prompt.empty()) return;
  for (int t : prompt) {
    for (int e = 0; e < params.shape.embed_dim; ++e) context_[e] += params.embed(t, e);
  }
  const double inv = 1.0 / static_cast<double>(prompt.size());
  for (double& c : context_) c *= inv;
}

StepTrace SequenceEvaluator::step(std::span<const int> prefix) const {
  const auto& s = params_.shape;
  check_tokens(prefix, s.vocab_size, "SequenceEvaluator::step");

  StepTrace tr;
  tr.input.assign(s.input_dim(), 0.0);
  std::copy(context_.begin(), context_.end(), tr.input.begin());
  // Window slot j holds the one-hot of prefix[T - window + j]; slots before
  // the start of the sequence stay zero.
  const int T = static_cast<int>(prefix.size());
  for (int j = 0; j < s.window; ++j) {
    const int pos = T - s.window + j;
    if (pos >= 0) tr.input[s.embed_dim + j * s.vocab_size + prefix[pos]] = 1.0;
  }

  tr.hidden.assign(s.hidden_dim, 0.0);
  for (int h = 0; h < s.hidden_dim; ++h) {
    double z = params_.b1(h);
    for (int e = 0; e < s.embed_dim; ++e) z += tr.input[e] * params_.w1(e, h);
    for (int j = 0; j < s.window; ++j) {
      const int pos = T - s.window + j;
      if (pos >= 0) z += params_.w1(s.embed_dim + j * s.vocab_size + prefix[pos], h);
    }
    tr.hidden[h] = std::tanh(z);
  }

  tr.logits.assign(s.vocab_size, 0.0);
  for (int v = 0; v < s.vocab_size; ++v) tr.logits[v] = params_.b2(v);
  for (int h = 0; h < s.hidden_dim; ++h) {
    const double a = tr.hidden[h];
    for (int v = 0; v < s.vocab_size; ++v) tr.logits[v] += a * params_.w2(h, v);
  }

  for (double l : tr.logits) {
    if (!std::isfinite(l)) {
      const char* block = nonfinite_block(params_);
      throw std::runtime_error(std::string("policy: non-finite logit; offending parameter block: ") +
                               (block ? block : "none (overflow in output projection)"));
    }
  }

  tr.max_logit = *std::max_element(tr.logits.begin(), tr.logits.end());
  double z = 0.0;
  for (double l : tr.logits) z += std::exp(l - tr.max_logit);
  tr.log_z = std::log(z);
  tr.probs.assign(s.vocab_size, 0.0);
  const double inv_z = 1.0 / z;
  for (int v = 0; v < s.vocab_size; ++v) tr.probs[v] = std::exp(tr.logits[v] - tr.max_logit) * inv_z;
  return tr;
}

void accumulate_step_gradient(const PolicyParams& params, std::span<const int> prompt,
                              const StepTrace& trace, std::span<const double> dlogits,
                              std::span<double> grad) {
  const auto& s = params.shape;
  if (grad.size() != s.param_count()) {
    throw std::invalid_argument("accumulate_step_gradient: gradient buffer length mismatch");
  }

  // Output layer.
  for (int v = 0; v < s.vocab_size; ++v) grad[s.b2_offset() + v] += dlogits[v];
  std::vector<double> dh(s.hidden_dim, 0.0);
  for (int h = 0; h < s.hidden_dim; ++h) {
    const double a = trace.hidden[h];
    double acc = 0.0;
    const std::size_t row = s.w2_offset() + static_cast<std::size_t>(h) * s.vocab_size;
    for (int v = 0; v < s.vocab_size; ++v) {
      grad[row + v] += a * dlogits[v];
      acc += params.values[row + v] * dlogits[v];
    }
    dh[h] = acc;
  }

  // Hidden layer; tanh'(z) = 1 - tanh(z)^2.
  std::vector<double> dz(s.hidden_dim);
  for (int h = 0; h < s.hidden_dim; ++h) dz[h] = dh[h] * (1.0 - trace.hidden[h] * trace.hidden[h]);
  for (int h = 0; h < s.hidden_dim; ++h) grad[s.b1_offset() + h] += dz[h];
  for (int d = 0; d < s.input_dim(); ++d) {
    const double x = trace.input[d];
    if (x == 0.0) continue;
    const std::size_t row = s.w1_offset() + static_cast<std::size_t>(d) * s.hidden_dim;
    for (int h = 0; h < s.hidden_dim; ++h) grad[row + h] += x * dz[h];
  }

  // Context part of the input is the mean of prompt-token embeddings. The
  // window one-hots are constants of the trajectory and carry no gradient.
  if (!prompt.empty()) {
    std::vector<double> dx(s.embed_dim, 0.0);
    for (int e = 0; e < s.embed_dim; ++e) {
      double acc = 0.0;
      const std::size_t row = s.w1_offset() + static_cast<std::size_t>(e) * s.hidden_dim;
      for (int h = 0; h < s.hidden_dim; ++h) acc += params.values[row + h] * dz[h];
      dx[e] = acc;
    }
    const double inv = 1.0 / static_cast<double>(prompt.size());
    for (int t : prompt) {
      const std::size_t row = s.embed_offset() + static_cast<std::size_t>(t) * s.embed_dim;
      for (int e = 0; e < s.embed_dim; ++e) grad[row + e] += dx[e] * inv;
    }
  }
}

std::vector<double> token_distribution(const PolicyParams& params, std::span<const int> prompt,
                                       std::span<const int> prefix) {
  SequenceEvaluator eval(params, prompt);
  return eval.step(prefix).probs;
}

Response sample_response(const PolicyParams& params, int prompt_id, std::span<const int> prompt,
                         int max_tokens, int eos_token, RandomStream& rng) {
  if (max_tokens < 1) throw std::invalid_argument("sample_response: max_tokens must be >= 1");
  if (eos_token < 0 || eos_token >= params.shape.vocab_size) {
    throw std::invalid_argument("sample_response: eos token outside vocabulary");
  }

  SequenceEvaluator eval(params, prompt);
  Response resp;
  resp.prompt_id = prompt_id;
  resp.tokens.reserve(max_tokens);
  resp.logprobs.reserve(max_tokens);
  resp.truncated = true;

  for (int t = 0; t < max_tokens; ++t) {
    const StepTrace tr = eval.step(resp.tokens);
    const double u = rng.uniform01();
    // Inverse CDF over the vocabulary; the float sum can fall a hair short
    // of 1, in which case the last token absorbs the remainder.
    int pick = params.shape.vocab_size - 1;
    double cum = 0.0;
    for (int v = 0; v < params.shape.vocab_size; ++v) {
      cum += tr.probs[v];
      if (u < cum) {
        pick = v;
        break;
      }
    }
    resp.tokens.push_back(pick);
    resp.logprobs.push_back(tr.logprob(pick));
    if (pick == eos_token) {
      resp.truncated = false;
      break;
    }
  }
  return resp;
}

std::vector<double> response_logprobs(const PolicyParams& params, std::span<const int> prompt,
                                      const Response& response) {
  if (response.tokens.size() != response.logprobs.size()) {
    throw std::invalid_argument("response_logprobs: token/log-prob length mismatch");
  }
  check_tokens(response.tokens, params.shape.vocab_size, "response_logprobs");
  SequenceEvaluator eval(params, prompt);
  std::vector<double> out(response.tokens.size());
  for (std::size_t t = 0; t < response.tokens.size(); ++t) {
    const StepTrace tr = eval.step(std::span<const int>(response.tokens.data(), t));
    out[t] = tr.logprob(response.tokens[t]);
  }
  return out;
}

double step_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double pk : p) {
    if (pk > 0.0) h -= pk * std::log(pk);
  }
  return h;
}

double exact_kl(const PolicyParams& params, const PolicyParams& ref_params,
                std::span<const int> prompt, std::span<const int> prefix) {
  if (params.shape != ref_params.shape) {
    throw std::invalid_argument("exact_kl: parameter shapes differ");
  }
  SequenceEvaluator pe(params, prompt);
  SequenceEvaluator qe(ref_params, prompt);
  const StepTrace pt = pe.step(prefix);
  const StepTrace qt = qe.step(prefix);
  // log(p_k/q_k) evaluated in logit space stays finite even where exp
  // underflows, so the q_k = 0 failure mode cannot arise under softmax.
  double kl = 0.0;
  for (int k = 0; k < params.shape.vocab_size; ++k) {
    if (pt.probs[k] > 0.0) kl += pt.probs[k] * (pt.logprob(k) - qt.logprob(k));
  }
  return kl;
}

std::vector<int> greedy_decode(const PolicyParams& params, std::span<const int> prompt,
                               int max_tokens, int eos_token) {
  if (max_tokens < 1) throw std::invalid_argument("greedy_decode: max_tokens must be >= 1");
  SequenceEvaluator eval(params, prompt);
  std::vector<int> tokens;
  tokens.reserve(max_tokens);
  for (int t = 0; t < max_tokens; ++t) {
    const StepTrace tr = eval.step(tokens);
    int best = 0;
    for (int v = 1; v < params.shape.vocab_size; ++v) {
      if (tr.probs[v] > tr.probs[best]) best = v;
    }
    tokens.push_back(best);
    if (best == eos_token) break;
  }
  return tokens;
}

}  // namespace dapolab
