#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "erp/io.hpp"
#include "erp/policy.hpp"
#include "erp/reward.hpp"
#include "erp/search.hpp"
#include "erp/vocab.hpp"

namespace erp {

struct OracleResult {
  SequenceState best_state;
  std::string best_sequence;
  double best_reward = 0.0;
  std::vector<std::pair<std::string, double>> table;  // enumeration order
};

/// Exhaustive argmax over every finished sequence of interior length <= H.
/// Guarded: with A non-marker tokens, A^H must stay within 10^6 states.
/// Reward ties resolve to the lexicographically smallest id sequence.
inline OracleResult brute_force_oracle(const Vocabulary& vocab, int H,
                                       const RewardSpec& spec) {
  if (H < 0) throw ConfigError("oracle horizon must be >= 0");
  const std::size_t alphabet = vocab.size() - 2;
  double states = std::pow(static_cast<double>(alphabet), static_cast<double>(H));
  if (states > 1e6)
    throw SpaceTooLarge("enumeration of " + std::to_string(alphabet) + "^" +
                        std::to_string(H) + " sequences exceeds the 10^6 guard");
  spec.validate();

  OracleResult result;
  bool have_best = false;
  std::set<std::string> seen;
  std::vector<TokenId> interior;

  auto visit = [&](const std::vector<TokenId>& ids) {
    SequenceState state;
    state.ids.reserve(ids.size() + 2);
    state.ids.push_back(kBos);
    state.ids.insert(state.ids.end(), ids.begin(), ids.end());
    state.ids.push_back(kEos);
    state.terminal = true;
    RewardOutcome outcome = score_sequence(state, spec, vocab);
    std::string text = detokenize(vocab, state);
    if (seen.insert(text).second) result.table.emplace_back(text, outcome.value);
    if (!have_best || outcome.value > result.best_reward ||
        (outcome.value == result.best_reward && state.ids < result.best_state.ids)) {
      have_best = true;
      result.best_state = state;
      result.best_sequence = std::move(text);
      result.best_reward = outcome.value;
    }
  };

  // Depth-first by length, token ids ascending within each position.
  auto enumerate = [&](auto&& self, int remaining) -> void {
    visit(interior);
    if (remaining == 0) return;
    for (TokenId a = 2; a < static_cast<TokenId>(vocab.size()); ++a) {
      interior.push_back(a);
      self(self, remaining - 1);
      interior.pop_back();
    }
  };
  enumerate(enumerate, H);
  return result;
}

/// Summary statistics over a finished run. Per-critic means use raw scores
/// recorded at evaluation time, over validator-accepted entries only.
inline Metrics compute_metrics(const RunResult& result, const RewardSpec& spec) {
  Metrics m;
  for (const auto& critic : spec.critics) m.per_critic_means[critic.name] = 0.0;
  m.tokens_sampled_total =
      result.tokens_sampled.empty() ? 0 : result.tokens_sampled.back();

  std::vector<double> valid_rewards;
  for (const auto& entry : result.molecules) {
    m.best_norm_reward = std::max(m.best_norm_reward, entry.reward);
    if (entry.valid) valid_rewards.push_back(entry.reward);
  }
  m.unique_valid_count = static_cast<std::int64_t>(valid_rewards.size());
  if (valid_rewards.empty()) return m;

  double sum = 0.0;
  for (double r : valid_rewards) sum += r;
  m.avg_valid_norm_reward = sum / static_cast<double>(valid_rewards.size());

  std::sort(valid_rewards.begin(), valid_rewards.end(), std::greater<>());
  std::size_t top = static_cast<std::size_t>(
      std::ceil(0.1 * static_cast<double>(valid_rewards.size())));
  double top_sum = 0.0;
  for (std::size_t i = 0; i < top; ++i) top_sum += valid_rewards[i];
  m.avg_top10_norm_reward = top_sum / static_cast<double>(top);

  for (std::size_t ci = 0; ci < spec.critics.size(); ++ci) {
    double raw_sum = 0.0;
    std::int64_t raw_n = 0;
    for (const auto& entry : result.molecules) {
      if (!entry.valid || ci >= entry.raw_scores.size()) continue;
      if (!std::isfinite(entry.raw_scores[ci])) continue;
      raw_sum += entry.raw_scores[ci];
      ++raw_n;
    }
    if (raw_n > 0)
      m.per_critic_means[spec.critics[ci].name] =
          raw_sum / static_cast<double>(raw_n);
  }
  return m;
}

/// Hand-built two-branch world for studying exploration. The root splits
/// 50/50. The left subtree is near-deterministic and leads to a mediocre
/// leaf; the right subtree is near-uniform (high entropy) and hides the one
/// high-reward leaf at full depth. Likelihood-greedy completion therefore
/// favors the left branch, while the optimum sits on the right.
struct Fig2Env {
  Vocabulary vocab;
  TablePolicy policy;
  RewardSpec reward;
  int depth;
  int H;  // depth + 1: room for the end marker after a full-depth interior
  std::string hidden_sequence;
  std::string mediocre_sequence;
};

inline Fig2Env make_fig2_env(int depth, double hidden_reward) {
  if (depth < 2 || depth > 12)
    throw ConfigError("two-branch environment depth must be in [2, 12]");
  if (!(hidden_reward > 0.0))
    throw ConfigError("hidden reward must be > 0");

  Vocabulary vocab(std::vector<std::string>{"L", "R"});
  const TokenId l = vocab.find("L");
  const TokenId r = vocab.find("R");
  TablePolicy policy(vocab.size());

  // dist indexed [bos, eos, L, R]
  auto dist = [&](double eos_p, double l_p, double r_p) {
    ProbDist d(vocab.size(), 0.0);
    d[static_cast<std::size_t>(kEos)] = eos_p;
    d[static_cast<std::size_t>(l)] = l_p;
    d[static_cast<std::size_t>(r)] = r_p;
    return d;
  };

  std::vector<std::vector<TokenId>> frontier{{kBos}};
  for (int m = 0; m <= depth; ++m) {
    std::vector<std::vector<TokenId>> next;
    for (const auto& prefix : frontier) {
      if (m == 0) {
        policy.set(prefix, dist(0.0, 0.5, 0.5));
      } else if (m == depth) {
        policy.set(prefix, dist(1.0, 0.0, 0.0));
      } else if (prefix[1] == l) {
        policy.set(prefix, dist(0.02, 0.96, 0.02));
      } else {
        policy.set(prefix, dist(0.33, 0.34, 0.33));
      }
      if (m < depth) {
        for (TokenId t : {l, r}) {
          auto child = prefix;
          child.push_back(t);
          next.push_back(std::move(child));
        }
      }
    }
    frontier = std::move(next);
  }

  Fig2Env env{std::move(vocab), std::move(policy), RewardSpec{}, depth, depth + 1,
              std::string(static_cast<std::size_t>(depth), 'R'),
              std::string(static_cast<std::size_t>(depth), 'L')};

  nlohmann::json params;
  params["name"] = "hidden_payoff";
  params["direction"] = "maximize";
  params["min"] = 0.0;
  params["max"] = hidden_reward;
  params["table"] = {{env.hidden_sequence, hidden_reward},
                     {env.mediocre_sequence, 0.4 * hidden_reward}};
  env.reward.critics.push_back(builtin_critic("table_lookup", params));
  return env;
}

/// One run per cell: an algorithm configuration (seed included) executed
/// against the shared policy and reward.
struct ExperimentPlan {
  std::vector<SearchConfig> cells;
  const Vocabulary* vocab = nullptr;
  const Policy* policy = nullptr;
  RewardSpec reward;
  std::filesystem::path output_dir;
  int jobs = 1;

  void validate() const {
    if (cells.empty()) throw ConfigError("plan.cells must be non-empty");
    if (vocab == nullptr || policy == nullptr)
      throw ConfigError("plan needs a policy and vocabulary");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    reward.validate();
    std::set<std::string> replicate_keys;
    for (const auto& cell : cells) {
      cell.validate();
      SearchConfig base = cell;
      base.rng_seed = 0;
      RunResult probe;
      probe.config = base;
      std::string key = run_result_to_json(probe) + "#" +
                        std::to_string(cell.rng_seed);
      if (!replicate_keys.insert(key).second)
        throw ConfigError("duplicate seed " + std::to_string(cell.rng_seed) +
                          " within one replicate set");
    }
  }
};

struct CellOutcome {
  SearchConfig config;
  Metrics metrics;
  std::int64_t wall_ms = 0;
  std::filesystem::path json_path;
};

inline std::string csv_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", canonical_zero(x));
  return buf;
}

inline constexpr const char* kCsvHeader =
    "algorithm,seed,rollouts,e,c_p,p,k,b,best,avg_valid,avg_top10,"
    "unique_valid,tokens_sampled,wall_ms";

/// Runs every cell (up to plan.jobs at a time), writing one result JSON per
/// cell plus an aggregate summary.csv with rows in plan order. All outputs
/// except wall_ms are functions of the plan alone.
inline std::vector<CellOutcome> run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  std::error_code ec;
  std::filesystem::create_directories(plan.output_dir, ec);
  if (ec)
    throw ReportWriteError("cannot create " + plan.output_dir.string() + ": " +
                           ec.message());

  std::vector<CellOutcome> outcomes(plan.cells.size());
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&]() {
    for (;;) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= plan.cells.size()) return;
      try {
        const SearchConfig& cfg = plan.cells[i];
        auto start = std::chrono::steady_clock::now();
        RunResult result = run_search(*plan.vocab, *plan.policy, cfg,
                                      make_reward_fn(plan.reward, *plan.vocab));
        auto stop = std::chrono::steady_clock::now();
        result.metrics = compute_metrics(result, plan.reward);

        char name[128];
        std::snprintf(name, sizeof(name), "cell%03zu_%s_seed%llu.json", i,
                      algorithm_name(cfg.algorithm),
                      static_cast<unsigned long long>(cfg.rng_seed));
        std::filesystem::path path = plan.output_dir / name;
        write_text_file_atomic(path, run_result_to_json(result));

        CellOutcome& out = outcomes[i];
        out.config = cfg;
        out.metrics = result.metrics;
        out.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          stop - start)
                          .count();
        out.json_path = path;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  std::size_t n_workers = std::min<std::size_t>(
      static_cast<std::size_t>(plan.jobs), plan.cells.size());
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  std::string csv = std::string(kCsvHeader) + "\n";
  for (const auto& out : outcomes) {
    csv += algorithm_name(out.config.algorithm);
    csv += "," + std::to_string(out.config.rng_seed);
    csv += "," + std::to_string(out.config.rollouts);
    csv += "," + std::to_string(out.config.e);
    csv += "," + csv_real(out.config.c_p);
    csv += "," + csv_real(out.config.p);
    csv += "," + std::to_string(out.config.k);
    csv += "," + std::to_string(out.config.b);
    csv += "," + csv_real(out.metrics.best_norm_reward);
    csv += "," + csv_real(out.metrics.avg_valid_norm_reward);
    csv += "," + csv_real(out.metrics.avg_top10_norm_reward);
    csv += "," + std::to_string(out.metrics.unique_valid_count);
    csv += "," + std::to_string(out.metrics.tokens_sampled_total);
    csv += "," + std::to_string(out.wall_ms);
    csv += "\n";
  }
  write_text_file_atomic(plan.output_dir / "summary.csv", csv);
  return outcomes;
}

}  // namespace erp
