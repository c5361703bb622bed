#include "dapolab/tasks.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dapolab {

namespace {
constexpr long long kMaxAnswerMagnitude = 999999;  // 6 digits
}

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::add1: return "add1";
    case Difficulty::add2: return "add2";
    case Difficulty::addsub2: return "addsub2";
    case Difficulty::file: return "file";
  }
  return "unknown";
}

std::optional<Difficulty> difficulty_from_name(std::string_view name) {
  if (name == "add1") return Difficulty::add1;
  if (name == "add2") return Difficulty::add2;
  if (name == "addsub2") return Difficulty::addsub2;
  if (name == "file") return Difficulty::file;
  return std::nullopt;
}

TaskInstance make_binary_task(const Vocab& vocab, long long a, char op, long long b,
                              Difficulty difficulty) {
  if (op != '+' && op != '-') throw std::invalid_argument("make_binary_task: operator must be + or -");
  if (a < 0 || b < 0) throw std::invalid_argument("make_binary_task: operands must be non-negative");
  TaskInstance inst;
  inst.prompt_text = std::to_string(a) + op + std::to_string(b);
  inst.prompt_tokens = vocab.encode(inst.prompt_text);
  inst.gold = (op == '+') ? a + b : a - b;
  inst.difficulty = difficulty;
  return inst;
}

TaskInstance gen_arithmetic(const Vocab& vocab, RandomStream& rng, Difficulty difficulty) {
  switch (difficulty) {
    case Difficulty::add1: {
      const long long a = static_cast<long long>(rng.below(10));
      const long long b = static_cast<long long>(rng.below(10));
      return make_binary_task(vocab, a, '+', b, difficulty);
    }
    case Difficulty::add2: {
      const long long a = static_cast<long long>(rng.below(100));
      const long long b = static_cast<long long>(rng.below(100));
      return make_binary_task(vocab, a, '+', b, difficulty);
    }
    case Difficulty::addsub2: {
      const long long a = static_cast<long long>(rng.below(100));
      const long long b = static_cast<long long>(rng.below(100));
      const char op = rng.below(2) == 0 ? '+' : '-';
      return make_binary_task(vocab, a, op, b, difficulty);
    }
    case Difficulty::file:
      break;
  }
  throw std::invalid_argument("gen_arithmetic: no generator for this difficulty");
}

Dataset generate_dataset(const Vocab& vocab, RandomStream& rng, Difficulty difficulty,
                         std::size_t count) {
  Dataset ds;
  ds.provenance = Provenance::synthetic;
  ds.instances.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ds.instances.push_back(gen_arithmetic(vocab, rng, difficulty));
  return ds;
}

std::optional<long long> decode_answer(std::span<const int> tokens, const Vocab& vocab) {
  std::size_t i = 0;
  bool negative = false;
  if (i < tokens.size() && tokens[i] >= 0 && tokens[i] < vocab.size() && vocab.is_minus(tokens[i])) {
    negative = true;
    ++i;
  }
  long long value = 0;
  std::size_t digits = 0;
  while (i < tokens.size() && tokens[i] >= 0 && tokens[i] < vocab.size() && vocab.is_digit(tokens[i])) {
    value = value * 10 + vocab.digit_value(tokens[i]);
    ++digits;
    ++i;
    if (digits > 6) return std::nullopt;
  }
  if (digits == 0) return std::nullopt;
  if (i >= tokens.size() || tokens[i] < 0 || tokens[i] >= vocab.size() || !vocab.is_eos(tokens[i])) {
    return std::nullopt;
  }
  if (i + 1 != tokens.size()) return std::nullopt;
  return negative ? -value : value;  // "-0" normalizes to 0
}

std::vector<int> encode_answer(long long value, const Vocab& vocab) {
  if (value > kMaxAnswerMagnitude || value < -kMaxAnswerMagnitude) {
    throw std::invalid_argument("encode_answer: magnitude beyond 6 digits");
  }
  std::vector<int> out = vocab.encode(std::to_string(value));
  out.push_back(vocab.eos_id());
  return out;
}

Dataset load_dataset(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);

  Dataset ds;
  ds.provenance = Provenance::file;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + why);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) fail("not a JSON object");
    if (!rec.contains("prompt")) fail("missing field \"prompt\"");
    if (!rec.contains("answer")) fail("missing field \"answer\"");
    if (!rec["prompt"].is_string()) fail("field \"prompt\" must be a string");
    if (!rec["answer"].is_number_integer()) fail("field \"answer\" must be an integer");

    TaskInstance inst;
    inst.prompt_text = rec["prompt"].get<std::string>();
    if (inst.prompt_text.empty()) fail("field \"prompt\" must be non-empty");
    try {
      inst.prompt_tokens = vocab.encode(inst.prompt_text);
    } catch (const std::exception& e) {
      fail(e.what());
    }
    inst.gold = rec["answer"].get<long long>();
    inst.difficulty = Difficulty::file;
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

}  // namespace dapolab
