#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dapolab {

// Token alphabet for the toy autoregressive policy. Symbols are single
// characters; '$' marks end-of-sequence and must appear exactly once.
// Token ids are dense 0..size()-1 in symbol order.
class Vocab {
 public:
  explicit Vocab(std::string symbols);

  // Digits 0-9, '-' (minus), '+' (operator/separator), '$' (end of
  // sequence): the 13-symbol alphabet used by the arithmetic tasks.
  static Vocab arithmetic();

  int size() const { return static_cast<int>(symbols_.size()); }
  int eos_id() const { return eos_id_; }

  char symbol(int id) const;
  std::optional<int> token_of(char c) const;

  bool is_eos(int id) const { return id == eos_id_; }
  bool is_digit(int id) const;
  bool is_minus(int id) const;

  // 0-9 for digit tokens; throws otherwise.
  int digit_value(int id) const;

  // Throws on characters outside the alphabet, naming the offender.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> tokens) const;

  const std::string& symbols() const { return symbols_; }

 private:
  std::string symbols_;
  int eos_id_ = -1;
};

}  // namespace dapolab
