#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "erp/errors.hpp"

namespace erp {

using TokenId = std::int32_t;

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr const char* kBosText = "<s>";
inline constexpr const char* kEosText = "</s>";

struct Token {
  TokenId id;
  std::string text;
};

enum class TokenMode { chars, smiles };

/// Splits a line into surface units. Any split round-trips: concatenating the
/// units restores the input byte-for-byte.
///   chars : one unit per byte.
///   smiles: "[...]" bracket atoms, Cl/Br, "%NN" ring labels are one unit each,
///           everything else one character. Unclosed '[' swallows the rest.
inline std::vector<std::string> split_units(const std::string& text, TokenMode mode) {
  std::vector<std::string> units;
  if (mode == TokenMode::chars) {
    units.reserve(text.size());
    for (char c : text) units.emplace_back(1, c);
    return units;
  }
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    char c = text[i];
    if (c == '[') {
      std::size_t close = text.find(']', i);
      std::size_t end = (close == std::string::npos) ? n : close + 1;
      units.push_back(text.substr(i, end - i));
      i = end;
    } else if (c == '%' && i + 2 < n &&
               std::isdigit(static_cast<unsigned char>(text[i + 1])) &&
               std::isdigit(static_cast<unsigned char>(text[i + 2]))) {
      units.push_back(text.substr(i, 3));
      i += 3;
    } else if ((c == 'C' && i + 1 < n && text[i + 1] == 'l') ||
               (c == 'B' && i + 1 < n && text[i + 1] == 'r')) {
      units.push_back(text.substr(i, 2));
      i += 2;
    } else {
      units.emplace_back(1, c);
      ++i;
    }
  }
  return units;
}

/// Dense token table. Ids 0 and 1 are reserved for the begin/end markers; the
/// remaining ids follow in lexicographic order of their surface form.
class Vocabulary {
 public:
  Vocabulary() {
    tokens_.push_back({kBos, kBosText});
    tokens_.push_back({kEos, kEosText});
    index_[kBosText] = kBos;
    index_[kEosText] = kEos;
  }

  /// Units must be unique and must not collide with the marker texts.
  explicit Vocabulary(const std::vector<std::string>& units) : Vocabulary() {
    for (const auto& u : units) {
      if (index_.count(u)) throw Error("duplicate surface form '" + u + "'");
      TokenId id = static_cast<TokenId>(tokens_.size());
      tokens_.push_back({id, u});
      index_[u] = id;
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }

  const std::string& text(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
      throw UnknownToken("#" + std::to_string(id), 0);
    return tokens_[static_cast<std::size_t>(id)].text;
  }

  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  /// Returns the id for a surface form, or -1 if absent.
  TokenId find(const std::string& text) const noexcept {
    auto it = index_.find(text);
    return it == index_.end() ? TokenId{-1} : it->second;
  }

  const std::vector<Token>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<Token> tokens_;
  std::map<std::string, TokenId> index_;
};

/// Builds a vocabulary from corpus lines: markers first, then every distinct
/// unit in lexicographic order.
inline Vocabulary build_vocab(const std::vector<std::string>& corpus_lines, TokenMode mode) {
  if (corpus_lines.empty()) throw CorpusEmpty();
  std::set<std::string> seen;
  for (const auto& line : corpus_lines)
    for (auto& u : split_units(line, mode)) seen.insert(std::move(u));
  return Vocabulary(std::vector<std::string>(seen.begin(), seen.end()));
}

/// A (possibly partial) token sequence. ids[0] is always the begin marker;
/// the end marker, if present, is the last element. terminal is maintained by
/// the factories below, not recomputed on field access.
struct SequenceState {
  std::vector<TokenId> ids;
  bool terminal = false;

  bool has_eos() const noexcept { return !ids.empty() && ids.back() == kEos; }

  /// Token count excluding the begin marker and any end marker.
  std::size_t interior_length() const noexcept {
    if (ids.empty()) return 0;
    return ids.size() - 1 - (has_eos() ? 1 : 0);
  }

  bool operator==(const SequenceState& o) const noexcept { return ids == o.ids; }
};

/// Fresh generation root: just the begin marker.
inline SequenceState make_root() { return SequenceState{{kBos}, false}; }

/// True iff the sequence can grow no further under horizon H: it either ends
/// with the end marker or has already used up all H interior slots.
inline bool is_terminal(const SequenceState& state, int H) {
  return state.has_eos() || state.interior_length() >= static_cast<std::size_t>(H);
}

/// Appends one token and refreshes the terminal flag under horizon H.
inline SequenceState extend(const SequenceState& state, TokenId token, int H) {
  SequenceState next;
  next.ids = state.ids;
  next.ids.push_back(token);
  next.terminal = is_terminal(next, H);
  return next;
}

/// Full encode: begin marker, one id per unit, end marker. Terminal.
inline SequenceState tokenize(const Vocabulary& vocab, const std::string& text, TokenMode mode) {
  SequenceState state;
  state.ids.push_back(kBos);
  auto units = split_units(text, mode);
  for (std::size_t pos = 0; pos < units.size(); ++pos) {
    TokenId id = vocab.find(units[pos]);
    if (id < 0) throw UnknownToken(units[pos], pos);
    state.ids.push_back(id);
  }
  state.ids.push_back(kEos);
  state.terminal = true;
  return state;
}

/// Inverse of tokenize over the interior: concatenates surface forms,
/// excluding both markers wherever they appear.
inline std::string detokenize(const Vocabulary& vocab, const SequenceState& state) {
  std::string out;
  for (std::size_t pos = 0; pos < state.ids.size(); ++pos) {
    TokenId id = state.ids[pos];
    if (!vocab.contains(id)) throw UnknownToken("#" + std::to_string(id), pos);
    if (id == kBos || id == kEos) continue;
    out += vocab.text(id);
  }
  return out;
}

}  // namespace erp
