#include "dapolab/vocab.hpp"

#include <stdexcept>
#include <unordered_set>

namespace dapolab {

Vocab::Vocab(std::string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2) {
    throw std::invalid_argument("Vocab: need at least 2 symbols");
  }
  std::unordered_set<char> seen;
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const char c = symbols_[i];
    if (!seen.insert(c).second) {
      throw std::invalid_argument(std::string("Vocab: duplicate symbol '") + c + "'");
    }
    if (c == '$') {
      if (eos_id_ >= 0) throw std::invalid_argument("Vocab: more than one end-of-sequence symbol");
      eos_id_ = static_cast<int>(i);
    }
  }
  if (eos_id_ < 0) throw std::invalid_argument("Vocab: missing end-of-sequence symbol '$'");
}

Vocab Vocab::arithmetic() { return Vocab("0123456789-+$"); }

char Vocab::symbol(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("Vocab::symbol: token id out of range");
  return symbols_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocab::token_of(char c) const {
  const auto pos = symbols_.find(c);
  if (pos == std::string::npos) return std::nullopt;
  return static_cast<int>(pos);
}

bool Vocab::is_digit(int id) const {
  const char c = symbol(id);
  return c >= '0' && c <= '9';
}

bool Vocab::is_minus(int id) const { return symbol(id) == '-'; }

int Vocab::digit_value(int id) const {
  const char c = symbol(id);
  if (c < '0' || c > '9') throw std::invalid_argument("Vocab::digit_value: not a digit token");
  return c - '0';
}

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) {
    const auto id = token_of(c);
    if (!id) throw std::invalid_argument(std::string("Vocab::encode: unknown symbol '") + c + "'");
    out.push_back(*id);
  }
  return out;
}

std::string Vocab::decode(std::span<const int> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (int id : tokens) out.push_back(symbol(id));
  return out;
}

}  // namespace dapolab
