#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dapolab/rng.hpp"
#include "dapolab/vocab.hpp"

namespace dapolab {

enum class Difficulty { add1, add2, addsub2, file };

const char* difficulty_name(Difficulty d);
std::optional<Difficulty> difficulty_from_name(std::string_view name);

// One verifiable prompt: an encoded arithmetic expression whose gold answer
// is the integer value of that expression.
struct TaskInstance {
  std::string prompt_text;
  std::vector<int> prompt_tokens;
  long long gold = 0;
  Difficulty difficulty = Difficulty::add1;
};

enum class Provenance { synthetic, file };

struct Dataset {
  std::vector<TaskInstance> instances;
  Provenance provenance = Provenance::synthetic;

  std::size_t size() const { return instances.size(); }
};

// Builds "a<op>b" from explicit operands; used by the generator and by
// tests that need forced draws.
TaskInstance make_binary_task(const Vocab& vocab, long long a, char op, long long b,
                              Difficulty difficulty);

// add1: single-digit a+b. add2: a+b with a,b in [0,99]. addsub2 adds
// subtraction, so answers may be negative.
TaskInstance gen_arithmetic(const Vocab& vocab, RandomStream& rng, Difficulty difficulty);

Dataset generate_dataset(const Vocab& vocab, RandomStream& rng, Difficulty difficulty,
                         std::size_t count);

// Parses an optional single leading minus, then 1..6 digit tokens, then
// end-of-sequence as the final token. Leading zeros are stripped
// numerically ("007" -> 7, "-0" -> 0). Any other shape yields nullopt.
std::optional<long long> decode_answer(std::span<const int> tokens, const Vocab& vocab);

// Canonical token encoding of an integer answer, end-of-sequence included.
std::vector<int> encode_answer(long long value, const Vocab& vocab);

// Line-delimited records, one JSON object per line with fields `prompt`
// (string over the vocabulary alphabet) and `answer` (integer). Any
// malformed line rejects the whole file with its line number.
Dataset load_dataset(const std::string& path, const Vocab& vocab);

}  // namespace dapolab
