#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <unordered_map>
#include <vector>

#include "erp/errors.hpp"
#include "erp/policy.hpp"
#include "erp/vocab.hpp"

namespace erp {

/// Candidate continuations in rank order.
using ActionSet = std::vector<TokenId>;

/// Token ids with positive mass, highest probability first; equal
/// probabilities rank by lowest id.
inline ActionSet ranked_tokens(const ProbDist& dist) {
  ActionSet order;
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (dist[i] > 0.0) order.push_back(static_cast<TokenId>(i));
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    if (dist[static_cast<std::size_t>(a)] != dist[static_cast<std::size_t>(b)])
      return dist[static_cast<std::size_t>(a)] > dist[static_cast<std::size_t>(b)];
    return a < b;
  });
  return order;
}

/// Nucleus-and-k filter: the shortest probability-ranked head reaching
/// cumulative mass p, hard-capped at k tokens.
inline ActionSet top_pk(const ProbDist& dist, double p, int k) {
  if (!(p > 0.0) || p > 1.0)
    throw InvalidFilter("top_pk p must be in (0, 1], got " + std::to_string(p));
  if (k < 1) throw InvalidFilter("top_pk k must be >= 1, got " + std::to_string(k));
  require_prob_dist(dist);
  ActionSet ranked = ranked_tokens(dist);
  ActionSet out;
  double cum = 0.0;
  for (TokenId id : ranked) {
    if (static_cast<int>(out.size()) == k) break;
    out.push_back(id);
    cum += dist[static_cast<std::size_t>(id)];
    if (cum >= p - 1e-12) break;
  }
  return out;
}

/// Shannon entropy in nats. Zero entries contribute nothing; a point mass
/// scores exactly 0.
inline double entropy(const ProbDist& dist) {
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log(p);
  return h < 0.0 ? 0.0 : h;
}

/// Entropy of the distribution renormalized on its top_pk(p, k) support.
inline double restricted_entropy(const ProbDist& dist, double p, int k) {
  ActionSet keep = top_pk(dist, p, k);
  double mass = 0.0;
  for (TokenId id : keep) mass += dist[static_cast<std::size_t>(id)];
  double h = 0.0;
  for (TokenId id : keep) {
    double q = dist[static_cast<std::size_t>(id)] / mass;
    if (q > 0.0) h -= q * std::log(q);
  }
  return h < 0.0 ? 0.0 : h;
}

/// How the per-state entropy feeding the lookahead average is computed.
struct EntropyOptions {
  double tau = 1.0;
  bool restrict_top_pk = false;  // false: full-vocabulary entropy
  double p = 1.0;
  int k = std::numeric_limits<int>::max();
};

/// Per-state cache of (entropy of the tempered distribution, greedy argmax).
/// Valid for one fixed (policy, EntropyOptions) pair; both values come from a
/// single policy query, so a hit costs no query at all.
class EntropyMemo {
 public:
  struct Entry {
    double entropy;
    TokenId greedy;
  };

  const Entry& lookup(const Policy& policy, const SequenceState& state,
                      const EntropyOptions& opts) {
    auto it = cache_.find(state.ids);
    if (it != cache_.end()) return it->second;
    ProbDist tempered = apply_temperature(next_dist(policy, state), opts.tau);
    Entry entry;
    entry.entropy = opts.restrict_top_pk
                        ? restricted_entropy(tempered, opts.p, opts.k)
                        : entropy(tempered);
    entry.greedy = static_cast<TokenId>(argmax_lowest(tempered));
    return cache_.emplace(state.ids, entry).first->second;
  }

  std::size_t size() const noexcept { return cache_.size(); }

 private:
  struct VecHash {
    std::size_t operator()(const std::vector<TokenId>& v) const noexcept {
      std::size_t h = 1469598103934665603ull;
      for (TokenId id : v) {
        h ^= static_cast<std::size_t>(id) + 0x9e3779b97f4a7c15ull;
        h *= 1099511628211ull;
      }
      return h;
    }
  };
  std::unordered_map<std::vector<TokenId>, Entry, VecHash> cache_;
};

/// Mean entropy along an e-step greedy walk starting at child_state.
///   e = 0        -> exactly 1 (neutral factor, no policy queries)
///   child is terminal -> 0
///   otherwise    -> arithmetic mean of the recorded per-state entropies,
///                   stopping early if the walk reaches a terminal state.
inline double lookahead_entropy(const Policy& policy, const SequenceState& child_state,
                                int e, const EntropyOptions& opts, EntropyMemo& memo,
                                int H) {
  if (e == 0) return 1.0;
  if (child_state.terminal) return 0.0;
  double sum = 0.0;
  int recorded = 0;
  SequenceState s = child_state;
  for (int i = 1; i <= e; ++i) {
    const auto& entry = memo.lookup(policy, s, opts);
    sum += entry.entropy;
    ++recorded;
    if (i == e) break;
    s = extend(s, entry.greedy, H);
    if (s.terminal) break;
  }
  return sum / static_cast<double>(recorded);
}

/// Width-b exact-likelihood beam under horizon H. Terminal hypotheses freeze
/// in place and keep competing on their final score; the result is every
/// terminal survivor, best first (ties by lexicographic id order).
inline std::vector<SequenceState> beam_search(const Policy& policy,
                                              const SequenceState& prefix,
                                              int b, int H) {
  if (b < 1) throw Error("beam width must be >= 1, got " + std::to_string(b));
  if (prefix.terminal || is_terminal(prefix, H)) throw TerminalState();

  struct Hyp {
    SequenceState state;
    double logp;
  };
  auto better = [](const Hyp& x, const Hyp& y) {
    if (x.logp != y.logp) return x.logp > y.logp;
    return x.state.ids < y.state.ids;
  };

  std::vector<Hyp> beam{{prefix, 0.0}};
  bool any_live = true;
  while (any_live) {
    std::vector<Hyp> pool;
    for (const auto& hyp : beam) {
      if (hyp.state.terminal) {
        pool.push_back(hyp);
        continue;
      }
      ProbDist dist = next_dist(policy, hyp.state);
      for (std::size_t y = 0; y < dist.size(); ++y) {
        if (dist[y] <= 0.0) continue;
        pool.push_back({extend(hyp.state, static_cast<TokenId>(y), H),
                        hyp.logp + std::log(dist[y])});
      }
    }
    std::sort(pool.begin(), pool.end(), better);
    if (static_cast<int>(pool.size()) > b) pool.resize(static_cast<std::size_t>(b));
    beam = std::move(pool);
    any_live = false;
    for (const auto& hyp : beam)
      if (!hyp.state.terminal) any_live = true;
  }

  std::vector<SequenceState> out;
  out.reserve(beam.size());
  for (auto& hyp : beam) out.push_back(std::move(hyp.state));
  return out;
}

/// Ancestral sampling restricted to the k most likely tokens per step,
/// renormalized. Fully determined by rng_seed; k = 1 is greedy decoding.
inline SequenceState sample_topk(const Policy& policy, const SequenceState& prefix,
                                 int k, int H, std::uint64_t rng_seed) {
  if (k < 1) throw InvalidFilter("sample_topk k must be >= 1, got " + std::to_string(k));
  if (prefix.terminal || is_terminal(prefix, H)) throw TerminalState();
  std::mt19937_64 rng(rng_seed);
  SequenceState s = prefix;
  s.terminal = is_terminal(s, H);
  while (!s.terminal) {
    ProbDist dist = next_dist(policy, s);
    ActionSet ranked = ranked_tokens(dist);
    if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<std::size_t>(k));
    double mass = 0.0;
    for (TokenId id : ranked) mass += dist[static_cast<std::size_t>(id)];
    // 53-bit uniform draw; inverse CDF over the renormalized head.
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double cum = 0.0;
    TokenId choice = ranked.back();
    for (TokenId id : ranked) {
      cum += dist[static_cast<std::size_t>(id)] / mass;
      if (u < cum) {
        choice = id;
        break;
      }
    }
    s = extend(s, choice, H);
  }
  return s;
}

}  // namespace erp
