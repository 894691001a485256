#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "erp/errors.hpp"
#include "erp/vocab.hpp"

namespace erp {

enum class Direction { maximize, minimize };

/// One scored property: a raw evaluator plus the [bound_min, bound_max] range
/// and direction that map raw values onto [0, 1].
struct CriticSpec {
  std::string name;
  Direction direction = Direction::maximize;
  double bound_min = 0.0;
  double bound_max = 1.0;
  std::function<double(const std::string&)> evaluator;
};

/// Min-max normalization with direction, clamped to [0, 1]. A minimized raw
/// value at bound_min maps to 1; a maximized one at bound_max maps to 1.
inline double normalize(double raw, const CriticSpec& critic) {
  double span = critic.bound_max - critic.bound_min;
  double x = critic.direction == Direction::maximize
                 ? (raw - critic.bound_min) / span
                 : (critic.bound_max - raw) / span;
  return std::clamp(x, 0.0, 1.0);
}

/// Structural well-formedness proxy for generated strings:
///   - non-empty
///   - '(' / ')' balanced, depth never negative
///   - every '[' has a matching ']' with non-empty content, no nesting
///   - every ring label (bare digit or %NN, outside brackets) appears exactly
///     twice; '%' not followed by two digits is malformed
/// Strings without ring digits, brackets, or parens pass trivially.
inline bool validity_check(const std::string& s) {
  if (s.empty()) return false;
  int paren_depth = 0;
  std::map<int, int> ring_counts;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    char c = s[i];
    if (c == '(') {
      ++paren_depth;
      ++i;
    } else if (c == ')') {
      if (--paren_depth < 0) return false;
      ++i;
    } else if (c == '[') {
      std::size_t close = s.find(']', i);
      if (close == std::string::npos || close == i + 1) return false;
      if (s.find('[', i + 1) < close) return false;
      i = close + 1;
    } else if (c == ']') {
      return false;
    } else if (c == '%') {
      if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s[i + 2])))
        return false;
      ++ring_counts[(s[i + 1] - '0') * 10 + (s[i + 2] - '0')];
      i += 3;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      ++ring_counts[c - '0'];
      ++i;
    } else {
      ++i;
    }
  }
  if (paren_depth != 0) return false;
  for (const auto& [label, count] : ring_counts)
    if (count != 2) return false;
  return true;
}

/// Critic list plus the validity gate applied before any critic runs.
struct RewardSpec {
  std::vector<CriticSpec> critics;
  std::function<bool(const std::string&)> validator = validity_check;

  void validate() const {
    std::set<std::string> names;
    for (const auto& c : critics) {
      if (c.name.empty()) throw InvalidCritic("critic name must be non-empty");
      if (!names.insert(c.name).second)
        throw InvalidCritic("duplicate critic name '" + c.name + "'");
      if (!(c.bound_min < c.bound_max))
        throw InvalidCritic("critic '" + c.name + "' needs bound_min < bound_max");
      if (!c.evaluator) throw InvalidCritic("critic '" + c.name + "' has no evaluator");
    }
  }
};

/// Everything observed while scoring one terminal sequence. A critic that
/// throws contributes 0 and leaves its raw score as NaN, with the message
/// kept in critic_errors.
struct RewardOutcome {
  double value = 0.0;
  bool valid = false;
  std::vector<double> raw_scores;
  std::vector<std::string> critic_errors;
};

/// Scores an already-detokenized sequence. has_eos distinguishes properly
/// finished sequences from horizon truncations; truncations are always
/// rejected, then the validator gets its say.
inline RewardOutcome score_string(const std::string& text, bool has_eos,
                                  const RewardSpec& spec) {
  RewardOutcome out;
  if (!has_eos || !spec.validator(text)) return out;
  out.valid = true;
  out.raw_scores.reserve(spec.critics.size());
  for (const auto& critic : spec.critics) {
    try {
      double raw = critic.evaluator(text);
      out.raw_scores.push_back(raw);
      out.value += normalize(raw, critic);
    } catch (const std::exception& e) {
      out.raw_scores.push_back(std::numeric_limits<double>::quiet_NaN());
      out.critic_errors.push_back(critic.name + ": " + e.what());
    }
  }
  return out;
}

inline RewardOutcome score_sequence(const SequenceState& state, const RewardSpec& spec,
                                    const Vocabulary& vocab) {
  return score_string(detokenize(vocab, state), state.has_eos(), spec);
}

/// Sum of normalized critic scores, 0 for anything the gate rejects.
inline double combined_reward(const SequenceState& state, const RewardSpec& spec,
                              const Vocabulary& vocab) {
  return score_sequence(state, spec, vocab).value;
}

/// Bounds applied when a critic config names one of the stock properties
/// without giving explicit bounds.
struct DefaultBounds {
  Direction direction;
  double lo;
  double hi;
};
inline const std::map<std::string, DefaultBounds>& default_bounds_table() {
  static const std::map<std::string, DefaultBounds> table = {
      {"docking", {Direction::minimize, -14.0, -6.0}},
      {"druglikeness", {Direction::maximize, 0.0, 1.0}},
      {"synthesizability", {Direction::minimize, 1.0, 10.0}},
      {"solubility", {Direction::maximize, -5.0, 5.0}},
  };
  return table;
}

/// Overlapping occurrences of motif in text ("CC" occurs twice in "CCC").
inline int count_motif(const std::string& text, const std::string& motif) {
  if (motif.empty() || motif.size() > text.size()) return 0;
  int count = 0;
  for (std::size_t i = 0; i + motif.size() <= text.size(); ++i)
    if (text.compare(i, motif.size(), motif) == 0) ++count;
  return count;
}

/// Factory for the built-in critic kinds:
///   length_window {target}          raw = -|len - target|
///   motif_count   {motif}           raw = overlapping occurrences
///   char_balance  {char}            raw = fraction of that character
///   table_lookup  {table{str:num}}  raw = table[s], bound_min when absent
/// params may carry name/direction/min/max; absent bounds fall back to the
/// stock table keyed by name, and anything else is rejected.
inline CriticSpec builtin_critic(const std::string& kind, const nlohmann::json& params) {
  if (!params.is_object()) throw InvalidCritic("critic params must be an object");
  CriticSpec spec;
  spec.name = params.contains("name") ? params.at("name").get<std::string>() : kind;

  bool has_dir = params.contains("direction");
  bool has_min = params.contains("min");
  bool has_max = params.contains("max");
  if (has_dir != has_min || has_min != has_max)
    throw InvalidCritic("critic '" + spec.name +
                        "': direction/min/max must be given together");
  if (has_dir) {
    std::string dir = params.at("direction").get<std::string>();
    if (dir == "maximize") {
      spec.direction = Direction::maximize;
    } else if (dir == "minimize") {
      spec.direction = Direction::minimize;
    } else {
      throw InvalidCritic("critic '" + spec.name + "': unknown direction '" + dir + "'");
    }
    spec.bound_min = params.at("min").get<double>();
    spec.bound_max = params.at("max").get<double>();
  } else {
    auto it = default_bounds_table().find(spec.name);
    if (it == default_bounds_table().end())
      throw InvalidCritic("critic '" + spec.name +
                          "': no stock bounds for this name, set direction/min/max");
    spec.direction = it->second.direction;
    spec.bound_min = it->second.lo;
    spec.bound_max = it->second.hi;
  }
  if (!(spec.bound_min < spec.bound_max))
    throw InvalidCritic("critic '" + spec.name + "' needs min < max");

  try {
    if (kind == "length_window") {
      int target = params.at("target").get<int>();
      if (target < 0) throw InvalidCritic("length_window target must be >= 0");
      spec.evaluator = [target](const std::string& s) {
        return -std::abs(static_cast<double>(s.size()) - target);
      };
    } else if (kind == "motif_count") {
      std::string motif = params.at("motif").get<std::string>();
      if (motif.empty()) throw InvalidCritic("motif_count motif must be non-empty");
      spec.evaluator = [motif](const std::string& s) {
        return static_cast<double>(count_motif(s, motif));
      };
    } else if (kind == "char_balance") {
      std::string ch = params.at("char").get<std::string>();
      if (ch.size() != 1) throw InvalidCritic("char_balance char must be one character");
      char c = ch[0];
      spec.evaluator = [c](const std::string& s) {
        if (s.empty()) return 0.0;
        double hits = static_cast<double>(std::count(s.begin(), s.end(), c));
        return hits / static_cast<double>(s.size());
      };
    } else if (kind == "table_lookup") {
      auto table = params.at("table").get<std::map<std::string, double>>();
      double missing = spec.bound_min;
      spec.evaluator = [table = std::move(table), missing](const std::string& s) {
        auto it = table.find(s);
        return it == table.end() ? missing : it->second;
      };
    } else {
      throw InvalidCritic("unknown critic kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidCritic("critic '" + spec.name + "': bad params: " + e.what());
  }
  return spec;
}

}  // namespace erp
