#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "erp/decode.hpp"
#include "erp/errors.hpp"
#include "erp/policy.hpp"
#include "erp/reward.hpp"
#include "erp/vocab.hpp"

namespace erp {

enum class Algorithm { uct, p_uct, ph_uct };
enum class ExpansionFilter { top_pk, top_k_only, full };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::uct: return "uct";
    case Algorithm::p_uct: return "p_uct";
    case Algorithm::ph_uct: return "ph_uct";
  }
  return "?";
}
inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "uct") return Algorithm::uct;
  if (s == "p_uct") return Algorithm::p_uct;
  if (s == "ph_uct") return Algorithm::ph_uct;
  throw ConfigError("unknown algorithm '" + s + "' (uct, p_uct, ph_uct)");
}
inline const char* filter_name(ExpansionFilter f) {
  switch (f) {
    case ExpansionFilter::top_pk: return "top_pk";
    case ExpansionFilter::top_k_only: return "top_k_only";
    case ExpansionFilter::full: return "full";
  }
  return "?";
}
inline ExpansionFilter parse_filter(const std::string& s) {
  if (s == "top_pk") return ExpansionFilter::top_pk;
  if (s == "top_k_only") return ExpansionFilter::top_k_only;
  if (s == "full") return ExpansionFilter::full;
  throw ConfigError("unknown expansion_filter '" + s + "' (top_pk, top_k_only, full)");
}

struct SearchConfig {
  Algorithm algorithm = Algorithm::ph_uct;
  int rollouts = 256;
  double c_p = 4.0;
  double tau = 1.0;
  int e = 2;
  double p = 0.95;
  int k = 15;
  int b = 8;
  int H = 40;
  std::uint64_t rng_seed = 0;
  ExpansionFilter expansion_filter = ExpansionFilter::top_pk;
  bool entropy_normalized = false;

  void validate() const {
    if (rollouts < 1) throw ConfigError("search.rollouts must be >= 1");
    if (!(c_p >= 0.0)) throw ConfigError("search.c_p must be >= 0");
    if (!(tau > 0.0)) throw ConfigError("search.tau must be > 0");
    if (e < 0) throw ConfigError("search.e must be >= 0");
    if (!(p > 0.0) || p > 1.0) throw ConfigError("search.p must be in (0, 1]");
    if (k < 1) throw ConfigError("search.k must be >= 1");
    if (b < 1) throw ConfigError("search.b must be >= 1");
    if (H < 1) throw ConfigError("search.H must be >= 1");
  }
};

// Selection scores. The entropy-guided form shares the plain prior-weighted
// expression exactly, so a lookahead factor of 1 reproduces it bit for bit.

/// Classic visit-count bonus; unvisited edges are infinitely attractive.
inline double ucb_score(double q, std::int64_t n_s, std::int64_t n_sa, double c_p) {
  if (n_sa == 0) return std::numeric_limits<double>::infinity();
  return q + c_p * std::sqrt(std::log(static_cast<double>(n_s)) /
                             static_cast<double>(n_sa));
}

/// Prior-weighted bonus, finite even for unvisited edges.
inline double p_ucb_score(double q, std::int64_t n_s, std::int64_t n_sa, double c_p,
                          double prior) {
  return q + c_p * (std::sqrt(std::log(static_cast<double>(n_s))) /
                    static_cast<double>(1 + n_sa)) *
                 prior;
}

/// Prior-weighted bonus scaled by the child's lookahead entropy factor.
/// Delegating keeps the neutral factor reduction exact: a lookahead of 1
/// multiplies the prior by exactly 1, then runs the very same expression.
inline double ph_ucb_score(double q, std::int64_t n_s, std::int64_t n_sa, double c_p,
                           double prior, double lookahead) {
  return p_ucb_score(q, n_s, n_sa, c_p, prior * lookahead);
}

struct EdgeStats {
  std::int64_t n = 0;
  double q = 0.0;
};

inline constexpr double kUnsetLookahead = -1.0;

/// One search-tree node. visits counts rollouts through or ending here; the
/// creation visit is charged by the first backpropagation that touches the
/// node, so visits = 1 + sum of child edge counts at every visited node.
struct TreeNode {
  SequenceState state;
  std::int64_t visits = 0;
  ProbDist tempered;  // tempered policy at this state, cached at expansion

  struct Child {
    TokenId action;
    EdgeStats edge;
    double lookahead = kUnsetLookahead;  // lazily filled, >= 0 once computed
    std::unique_ptr<TreeNode> node;
  };
  std::vector<Child> children;  // in expansion rank order
};

/// Insertion-ordered single-evaluation store keyed by detokenized sequence.
class RewardCache {
 public:
  struct Entry {
    std::string sequence;
    double reward = 0.0;
    bool valid = false;
    std::vector<double> raw_scores;
    std::vector<std::string> critic_errors;
    int rollout_discovered = 0;
  };

  bool contains(const std::string& key) const { return index_.count(key) != 0; }

  const Entry* find(const std::string& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  const Entry& insert(Entry entry) {
    auto [it, fresh] = index_.emplace(entry.sequence, entries_.size());
    if (!fresh) return entries_[it->second];
    entries_.push_back(std::move(entry));
    return entries_.back();
  }

  double best() const {
    double r = 0.0;
    for (const auto& e : entries_) r = std::max(r, e.reward);
    return r;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

using RewardFn = std::function<RewardOutcome(const SequenceState&)>;

inline RewardFn make_reward_fn(RewardSpec spec, Vocabulary vocab) {
  return [spec = std::move(spec), vocab = std::move(vocab)](const SequenceState& s) {
    return score_sequence(s, spec, vocab);
  };
}

struct Metrics {
  double best_norm_reward = 0.0;
  double avg_valid_norm_reward = 0.0;
  double avg_top10_norm_reward = 0.0;
  std::int64_t unique_valid_count = 0;
  std::map<std::string, double> per_critic_means;
  std::int64_t tokens_sampled_total = 0;
};

struct RunResult {
  SearchConfig config;
  std::vector<RewardCache::Entry> molecules;  // reward desc, then discovery order
  std::vector<double> best_so_far;            // one entry per rollout
  std::vector<std::int64_t> tokens_sampled;   // cumulative, one entry per rollout
  Metrics metrics;
};

/// The planner. One instance owns one tree; rollouts are select -> expand ->
/// evaluate-by-beam -> max-backpropagate, all deterministic for a fixed
/// config, policy, and reward.
class Search {
 public:
  Search(const Vocabulary& vocab, const Policy& policy, SearchConfig cfg, RewardFn reward)
      : vocab_(vocab),
        counting_(policy, &tokens_),
        cfg_(cfg),
        reward_(std::move(reward)) {
    cfg_.validate();
    if (!reward_) throw ConfigError("reward function must be set");
    entropy_opts_ = EntropyOptions{cfg_.tau, cfg_.entropy_normalized, cfg_.p, cfg_.k};
    root_ = std::make_unique<TreeNode>();
    root_->state = make_root();
  }

  void rollout() {
    Path path = select();
    TreeNode* leaf = path.leaf;
    if (!leaf->state.terminal) expand(leaf);
    double r = evaluate(leaf);
    backpropagate(path, r);
    ++rollouts_done_;
    best_so_far_.push_back(cache_.best());
    tokens_trace_.push_back(tokens_);
    std::vector<TokenId> actions;
    actions.reserve(path.steps.size());
    for (const auto& [node, idx] : path.steps)
      actions.push_back(node->children[idx].action);
    selection_trace_.push_back(std::move(actions));
  }

  RunResult run() {
    while (rollouts_done_ < cfg_.rollouts) rollout();
    RunResult result;
    result.config = cfg_;
    result.molecules = cache_.entries();
    std::stable_sort(result.molecules.begin(), result.molecules.end(),
                     [](const RewardCache::Entry& a, const RewardCache::Entry& b) {
                       return a.reward > b.reward;
                     });
    result.best_so_far = best_so_far_;
    result.tokens_sampled = tokens_trace_;
    result.metrics.tokens_sampled_total = tokens_;
    return result;
  }

  const TreeNode& root() const noexcept { return *root_; }
  const RewardCache& cache() const noexcept { return cache_; }
  std::int64_t tokens_sampled() const noexcept { return tokens_; }
  int rollouts_done() const noexcept { return rollouts_done_; }
  const std::vector<std::vector<TokenId>>& selection_trace() const noexcept {
    return selection_trace_;
  }

  struct Path {
    std::vector<std::pair<TreeNode*, std::size_t>> steps;
    TreeNode* leaf = nullptr;
  };

  /// Descends by argmax of the configured score until a childless node.
  /// Score ties resolve to the lowest token id.
  Path select() {
    Path path;
    TreeNode* node = root_.get();
    while (!node->children.empty()) {
      std::size_t idx = best_child(node);
      path.steps.emplace_back(node, idx);
      node = node->children[idx].node.get();
    }
    path.leaf = node;
    return path;
  }

  /// Creates the filtered children of a non-terminal leaf, caching the
  /// tempered distribution. Edges start at n = 0, q = 0.
  void expand(TreeNode* leaf) {
    if (leaf->state.terminal) throw TerminalState();
    ProbDist dist = next_dist(counting_, leaf->state);
    leaf->tempered = apply_temperature(dist, cfg_.tau);
    ActionSet actions;
    switch (cfg_.expansion_filter) {
      case ExpansionFilter::top_pk:
        actions = top_pk(leaf->tempered, cfg_.p, cfg_.k);
        break;
      case ExpansionFilter::top_k_only:
        actions = ranked_tokens(leaf->tempered);
        if (static_cast<int>(actions.size()) > cfg_.k)
          actions.resize(static_cast<std::size_t>(cfg_.k));
        break;
      case ExpansionFilter::full: {
        actions = ranked_tokens(leaf->tempered);
        for (std::size_t y = 0; y < leaf->tempered.size(); ++y)
          if (leaf->tempered[y] <= 0.0 && static_cast<TokenId>(y) != kBos)
            actions.push_back(static_cast<TokenId>(y));
        break;
      }
    }
    leaf->children.reserve(actions.size());
    for (TokenId a : actions) {
      TreeNode::Child child;
      child.action = a;
      child.node = std::make_unique<TreeNode>();
      child.node->state = extend(leaf->state, a, cfg_.H);
      leaf->children.push_back(std::move(child));
    }
  }

  /// Completes the node (beam for live nodes, itself when terminal), scores
  /// anything new exactly once, and returns the best reward seen among this
  /// rollout's completions.
  double evaluate(TreeNode* node) {
    std::vector<SequenceState> completions;
    if (node->state.terminal) {
      completions.push_back(node->state);
    } else {
      completions = beam_search(counting_, node->state, cfg_.b, cfg_.H);
    }
    double r = 0.0;
    bool first = true;
    for (const auto& completion : completions) {
      std::string key = detokenize(vocab_, completion);
      const RewardCache::Entry* entry = cache_.find(key);
      if (entry == nullptr) {
        RewardOutcome outcome = reward_(completion);
        RewardCache::Entry fresh;
        fresh.sequence = std::move(key);
        fresh.reward = outcome.value;
        fresh.valid = outcome.valid;
        fresh.raw_scores = std::move(outcome.raw_scores);
        fresh.critic_errors = std::move(outcome.critic_errors);
        fresh.rollout_discovered = rollouts_done_ + 1;
        entry = &cache_.insert(std::move(fresh));
      }
      r = first ? entry->reward : std::max(r, entry->reward);
      first = false;
    }
    return r;
  }

  /// Max-update for every edge on the path; every node on the path gains a
  /// visit. A childless leaf only ever absorbs its creation visit, keeping
  /// visits = 1 + sum of child edge counts exact everywhere.
  void backpropagate(Path& path, double r) {
    for (auto& [node, idx] : path.steps) {
      EdgeStats& edge = path_edge(node, idx);
      edge.q = std::max(edge.q, r);
      edge.n += 1;
      node->visits += 1;
    }
    if (path.leaf->children.empty()) {
      if (path.leaf->visits == 0) path.leaf->visits = 1;
    } else {
      path.leaf->visits += 1;
    }
  }

 private:
  static EdgeStats& path_edge(TreeNode* node, std::size_t idx) {
    return node->children[idx].edge;
  }

  std::size_t best_child(TreeNode* node) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    TokenId best_action = std::numeric_limits<TokenId>::max();
    for (std::size_t i = 0; i < node->children.size(); ++i) {
      TreeNode::Child& child = node->children[i];
      double score = 0.0;
      switch (cfg_.algorithm) {
        case Algorithm::uct:
          score = ucb_score(child.edge.q, node->visits, child.edge.n, cfg_.c_p);
          break;
        case Algorithm::p_uct:
          score = p_ucb_score(child.edge.q, node->visits, child.edge.n, cfg_.c_p,
                              node->tempered[static_cast<std::size_t>(child.action)]);
          break;
        case Algorithm::ph_uct: {
          if (child.lookahead == kUnsetLookahead)
            child.lookahead = lookahead_entropy(counting_, child.node->state, cfg_.e,
                                                entropy_opts_, memo_, cfg_.H);
          score = ph_ucb_score(child.edge.q, node->visits, child.edge.n, cfg_.c_p,
                               node->tempered[static_cast<std::size_t>(child.action)],
                               child.lookahead);
          break;
        }
      }
      if (score > best_score ||
          (score == best_score && child.action < best_action)) {
        best = i;
        best_score = score;
        best_action = child.action;
      }
    }
    return best;
  }

  const Vocabulary& vocab_;
  std::int64_t tokens_ = 0;
  CountingPolicy counting_;
  SearchConfig cfg_;
  RewardFn reward_;
  EntropyOptions entropy_opts_;
  EntropyMemo memo_;
  std::unique_ptr<TreeNode> root_;
  RewardCache cache_;
  int rollouts_done_ = 0;
  std::vector<double> best_so_far_;
  std::vector<std::int64_t> tokens_trace_;
  std::vector<std::vector<TokenId>> selection_trace_;
};

inline RunResult run_search(const Vocabulary& vocab, const Policy& policy,
                            const SearchConfig& cfg, RewardFn reward) {
  Search search(vocab, policy, cfg, std::move(reward));
  return search.run();
}

inline constexpr int kResultFormatVersion = 1;

/// Versioned result report. Field order is fixed and doubles use
/// shortest-round-trip formatting, so equal runs serialize byte-identically.
/// Folds negative zero into plain zero so serialized reports never depend on
/// the sign of a zero-valued score.
inline double canonical_zero(double x) { return x == 0.0 ? 0.0 : x; }

inline std::string run_result_to_json(const RunResult& result) {
  nlohmann::ordered_json j;
  j["format_version"] = kResultFormatVersion;
  nlohmann::ordered_json cfg;
  cfg["algorithm"] = algorithm_name(result.config.algorithm);
  cfg["rollouts"] = result.config.rollouts;
  cfg["c_p"] = result.config.c_p;
  cfg["tau"] = result.config.tau;
  cfg["e"] = result.config.e;
  cfg["p"] = result.config.p;
  cfg["k"] = result.config.k;
  cfg["b"] = result.config.b;
  cfg["H"] = result.config.H;
  cfg["rng_seed"] = result.config.rng_seed;
  cfg["expansion_filter"] = filter_name(result.config.expansion_filter);
  cfg["entropy_normalized"] = result.config.entropy_normalized;
  j["config"] = std::move(cfg);
  auto molecules = nlohmann::ordered_json::array();
  for (const auto& m : result.molecules) {
    nlohmann::ordered_json entry;
    entry["sequence"] = m.sequence;
    entry["reward"] = canonical_zero(m.reward);
    entry["valid"] = m.valid;
    auto raws = nlohmann::ordered_json::array();
    for (double raw : m.raw_scores) {
      if (std::isfinite(raw)) {
        raws.push_back(canonical_zero(raw));
      } else {
        raws.push_back(nullptr);
      }
    }
    entry["raw_scores"] = std::move(raws);
    entry["rollout_discovered"] = m.rollout_discovered;
    if (!m.critic_errors.empty()) entry["critic_errors"] = m.critic_errors;
    molecules.push_back(std::move(entry));
  }
  j["molecules"] = std::move(molecules);
  auto best_trace = nlohmann::ordered_json::array();
  for (double b : result.best_so_far) best_trace.push_back(canonical_zero(b));
  j["best_so_far"] = std::move(best_trace);
  j["tokens_sampled"] = result.tokens_sampled;
  nlohmann::ordered_json met;
  met["best_norm_reward"] = canonical_zero(result.metrics.best_norm_reward);
  met["avg_valid_norm_reward"] = canonical_zero(result.metrics.avg_valid_norm_reward);
  met["avg_top10_norm_reward"] = canonical_zero(result.metrics.avg_top10_norm_reward);
  met["unique_valid_count"] = result.metrics.unique_valid_count;
  nlohmann::ordered_json means = nlohmann::ordered_json::object();
  for (const auto& [name, mean] : result.metrics.per_critic_means)
    means[name] = canonical_zero(mean);
  met["per_critic_means"] = std::move(means);
  met["tokens_sampled_total"] = result.metrics.tokens_sampled_total;
  j["metrics"] = std::move(met);
  return j.dump(2) + "\n";
}

}  // namespace erp
