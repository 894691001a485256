#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "erp/errors.hpp"
#include "erp/vocab.hpp"

namespace erp {

/// Probability vector indexed by token id. Valid iff non-negative and summing
/// to 1 within 1e-9.
using ProbDist = std::vector<double>;

inline void require_prob_dist(const ProbDist& dist) {
  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) throw Error("probability entry is negative or NaN");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error("probabilities sum to " + std::to_string(sum) + ", expected 1");
}

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax_lowest(const ProbDist& dist) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i)
    if (dist[i] > dist[best]) best = i;
  return best;
}

/// Sharpens or flattens a distribution: p_i^(1/tau), renormalized. Zero
/// entries stay zero; tau = 1 is the identity; the argmax never moves.
inline ProbDist apply_temperature(const ProbDist& dist, double tau) {
  if (!(tau > 0.0)) throw InvalidTemperature(tau);
  require_prob_dist(dist);
  if (tau == 1.0) return dist;
  // Work in log space so extreme tau cannot overflow or underflow to all-zero.
  double max_log = -std::numeric_limits<double>::infinity();
  for (double p : dist)
    if (p > 0.0) max_log = std::max(max_log, std::log(p) / tau);
  ProbDist out(dist.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > 0.0) {
      out[i] = std::exp(std::log(dist[i]) / tau - max_log);
      sum += out[i];
    }
  }
  for (double& p : out) p /= sum;
  return out;
}

/// A conditional next-token model. Implementations return their raw estimate;
/// next_dist() below applies the begin-marker mask all callers go through.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual void raw_next_dist(const SequenceState& state, ProbDist& out) const = 0;
};

/// The one true read path: raw estimate with the begin marker zeroed and the
/// rest renormalized. The begin marker can never be generated.
inline ProbDist next_dist(const Policy& policy, const SequenceState& state) {
  if (state.terminal) throw TerminalState();
  ProbDist dist(policy.vocab_size(), 0.0);
  policy.raw_next_dist(state, dist);
  require_prob_dist(dist);
  dist[kBos] = 0.0;
  double sum = 0.0;
  for (double p : dist) sum += p;
  if (!(sum > 0.0)) throw Error("no probability mass outside the begin marker");
  for (double& p : dist) p /= sum;
  return dist;
}

class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(std::size_t vocab_size) : v_(vocab_size) {}
  std::size_t vocab_size() const override { return v_; }
  void raw_next_dist(const SequenceState&, ProbDist& out) const override {
    out.assign(v_, 1.0 / static_cast<double>(v_));
  }

 private:
  std::size_t v_;
};

/// Explicit prefix -> distribution table, with an optional fallback for
/// prefixes the table does not cover.
class TablePolicy final : public Policy {
 public:
  explicit TablePolicy(std::size_t vocab_size) : v_(vocab_size) {}

  void set(const std::vector<TokenId>& prefix, ProbDist dist) {
    if (dist.size() != v_) throw Error("table entry has wrong width");
    table_[prefix] = std::move(dist);
  }
  void set_fallback(ProbDist dist) {
    if (dist.size() != v_) throw Error("fallback has wrong width");
    fallback_ = std::move(dist);
  }

  std::size_t vocab_size() const override { return v_; }
  void raw_next_dist(const SequenceState& state, ProbDist& out) const override {
    auto it = table_.find(state.ids);
    if (it != table_.end()) {
      out = it->second;
    } else if (fallback_) {
      out = *fallback_;
    } else {
      throw Error("table policy has no entry for this prefix");
    }
  }

 private:
  std::size_t v_;
  std::map<std::vector<TokenId>, ProbDist> table_;
  std::optional<ProbDist> fallback_;
};

/// Order-n model with additive smoothing:
///   P(y | ctx) = (count(ctx, y) + k) / (count(ctx, *) + k * V)
/// where ctx is the last n-1 tokens, padded on the left with the begin marker.
class NGramPolicy final : public Policy {
 public:
  NGramPolicy(Vocabulary vocab, int n, double k)
      : vocab_(std::move(vocab)), n_(n), k_(k) {
    if (n_ < 1) throw ConfigError("ngram order must be >= 1");
    if (!(k_ > 0.0)) throw ConfigError("smoothing k must be > 0");
  }

  const Vocabulary& vocab() const noexcept { return vocab_; }
  int order() const noexcept { return n_; }
  double smoothing() const noexcept { return k_; }

  void observe(const SequenceState& state) {
    if (!state.has_eos()) throw Error("training state must end with the end marker");
    for (std::size_t t = 1; t < state.ids.size(); ++t) {
      auto& slot = counts_[context_at(state.ids, t)];
      ++slot.per_token[state.ids[t]];
      ++slot.total;
    }
  }

  /// Raw smoothed estimate for one continuation, before any masking.
  double cond_prob(const SequenceState& state, TokenId next) const {
    const double v = static_cast<double>(vocab_.size());
    auto it = counts_.find(context_at(state.ids, state.ids.size()));
    if (it == counts_.end()) return 1.0 / v;
    std::int64_t c = 0;
    auto tok = it->second.per_token.find(next);
    if (tok != it->second.per_token.end()) c = tok->second;
    return (static_cast<double>(c) + k_) /
           (static_cast<double>(it->second.total) + k_ * v);
  }

  std::size_t vocab_size() const override { return vocab_.size(); }
  void raw_next_dist(const SequenceState& state, ProbDist& out) const override {
    const std::size_t v = vocab_.size();
    const double denom_uniform = 1.0 / static_cast<double>(v);
    out.assign(v, denom_uniform);
    auto it = counts_.find(context_at(state.ids, state.ids.size()));
    if (it == counts_.end()) return;
    const double denom = static_cast<double>(it->second.total) +
                         k_ * static_cast<double>(v);
    for (std::size_t y = 0; y < v; ++y) {
      std::int64_t c = 0;
      auto tok = it->second.per_token.find(static_cast<TokenId>(y));
      if (tok != it->second.per_token.end()) c = tok->second;
      out[y] = (static_cast<double>(c) + k_) / denom;
    }
  }

  struct ContextCounts {
    std::map<TokenId, std::int64_t> per_token;
    std::int64_t total = 0;
  };
  const std::map<std::vector<TokenId>, ContextCounts>& counts() const noexcept {
    return counts_;
  }
  void set_counts(std::map<std::vector<TokenId>, ContextCounts> counts) {
    counts_ = std::move(counts);
  }

 private:
  // Context preceding position t: exactly n-1 ids, begin-marker padded.
  std::vector<TokenId> context_at(const std::vector<TokenId>& ids, std::size_t t) const {
    std::vector<TokenId> ctx;
    ctx.reserve(static_cast<std::size_t>(n_ - 1));
    for (int j = static_cast<int>(t) - (n_ - 1); j < static_cast<int>(t); ++j)
      ctx.push_back(j < 0 ? kBos : ids[static_cast<std::size_t>(j)]);
    return ctx;
  }

  Vocabulary vocab_;
  int n_;
  double k_;
  std::map<std::vector<TokenId>, ContextCounts> counts_;
};

/// Fits an order-n additive-k model on fully tokenized corpus states.
inline NGramPolicy train_ngram(const std::vector<SequenceState>& corpus,
                               int n, double k, Vocabulary vocab) {
  if (corpus.empty()) throw CorpusEmpty();
  NGramPolicy policy(std::move(vocab), n, k);
  for (const auto& state : corpus) policy.observe(state);
  return policy;
}

/// Pass-through wrapper that counts how many distributions were requested.
class CountingPolicy final : public Policy {
 public:
  CountingPolicy(const Policy& inner, std::int64_t* counter)
      : inner_(&inner), counter_(counter) {}
  std::size_t vocab_size() const override { return inner_->vocab_size(); }
  void raw_next_dist(const SequenceState& state, ProbDist& out) const override {
    ++*counter_;
    inner_->raw_next_dist(state, out);
  }

 private:
  const Policy* inner_;
  std::int64_t* counter_;
};

}  // namespace erp
