// Command-line front end: train, generate, bench, oracle, validate.
// Exit codes: 0 success, 1 runtime failure, 2 bad config or usage.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "erp/bench.hpp"
#include "erp/log.hpp"
#include "erp/run_config.hpp"
#include "erp/search.hpp"

namespace {

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", erp::canonical_zero(x));
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) erp::log_warn(w);
}

void print_metrics(const erp::Metrics& m) {
  std::cout << "best_norm_reward " << fixed6(m.best_norm_reward) << "\n";
  std::cout << "avg_valid_norm_reward " << fixed6(m.avg_valid_norm_reward) << "\n";
  std::cout << "avg_top10_norm_reward " << fixed6(m.avg_top10_norm_reward) << "\n";
  std::cout << "unique_valid " << m.unique_valid_count << "\n";
  for (const auto& [name, mean] : m.per_critic_means)
    std::cout << "critic_mean " << name << " " << fixed6(mean) << "\n";
  std::cout << "tokens_sampled " << m.tokens_sampled_total << "\n";
}

struct TrainArgs {
  std::string corpus;
  int n = 3;
  double k = 0.1;
  std::string mode = "smiles";
  std::string out;
};

int cmd_train(const TrainArgs& args) {
  erp::TokenMode mode = args.mode == "char" ? erp::TokenMode::chars : erp::TokenMode::smiles;
  if (args.n < 1) throw erp::ConfigError("--n must be >= 1");
  if (!(args.k > 0.0)) throw erp::ConfigError("--k must be > 0");

  auto lines = erp::read_corpus(args.corpus);
  erp::Vocabulary vocab = erp::build_vocab(lines, mode);
  std::vector<erp::SequenceState> states;
  states.reserve(lines.size());
  std::size_t min_len = 0, max_len = 0, total = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    states.push_back(erp::tokenize(vocab, lines[i], mode));
    std::size_t len = states.back().interior_length();
    if (i == 0 || len < min_len) min_len = len;
    if (len > max_len) max_len = len;
    total += len;
  }
  erp::NGramPolicy policy = erp::train_ngram(states, args.n, args.k, vocab);
  erp::save_policy(policy, args.out);

  std::cout << "vocab_size " << vocab.size() << "\n";
  std::cout << "lines " << lines.size() << "\n";
  std::cout << "tokens_per_line_min " << min_len << "\n";
  std::cout << "tokens_per_line_mean "
            << fixed6(static_cast<double>(total) / static_cast<double>(lines.size()))
            << "\n";
  std::cout << "tokens_per_line_max " << max_len << "\n";
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

struct GenerateArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_generate(const GenerateArgs& args) {
  erp::RunConfig config = erp::load_run_config(args.config);
  print_warnings(config.warnings);
  if (args.seed_set) config.search.rng_seed = args.seed;
  if (!args.out.empty()) config.output_dir = args.out;

  erp::LoadedPolicy loaded = erp::instantiate_policy(config.policy, config.mode);
  erp::RunResult result =
      erp::run_search(loaded.vocab, *loaded.policy, config.search,
                      erp::make_reward_fn(config.reward, loaded.vocab));
  result.metrics = erp::compute_metrics(result, config.reward);

  std::filesystem::create_directories(config.output_dir);
  std::string name = std::string("result_") + erp::algorithm_name(config.search.algorithm) +
                     "_seed" + std::to_string(config.search.rng_seed) + ".json";
  std::filesystem::path path = config.output_dir / name;
  erp::write_text_file_atomic(path, erp::run_result_to_json(result));

  std::cout << "wrote " << path.string() << "\n";
  if (!result.molecules.empty()) {
    std::cout << "best_sequence " << result.molecules.front().sequence << "\n";
  }
  print_metrics(result.metrics);
  return 0;
}

struct BenchArgs {
  std::string plan;
  std::string out;
  int jobs = 1;
  bool seed_set = false;
};

int cmd_bench(const BenchArgs& args) {
  if (args.seed_set)
    erp::log_warn("bench takes its seeds from the plan file; --seed is ignored");
  erp::PlanConfig plan_config = erp::load_plan_config(args.plan);
  print_warnings(plan_config.warnings);
  if (!args.out.empty()) plan_config.output_dir = args.out;

  erp::LoadedPolicy loaded = erp::instantiate_policy(plan_config.policy, plan_config.mode);
  erp::ExperimentPlan plan;
  plan.cells = plan_config.cells;
  plan.vocab = &loaded.vocab;
  plan.policy = loaded.policy.get();
  plan.reward = plan_config.reward;
  plan.output_dir = plan_config.output_dir;
  plan.jobs = args.jobs;
  plan.validate();

  std::vector<erp::CellOutcome> outcomes = erp::run_experiment(plan);
  std::cout << "cells " << outcomes.size() << "\n";
  std::cout << "wrote " << (plan.output_dir / "summary.csv").string() << "\n";
  return 0;
}

struct OracleArgs {
  std::string config;
  std::string out;
};

int cmd_oracle(const OracleArgs& args) {
  erp::RunConfig config = erp::load_run_config(args.config);
  print_warnings(config.warnings);
  if (!args.out.empty()) config.output_dir = args.out;

  erp::LoadedPolicy loaded = erp::instantiate_policy(config.policy, config.mode);
  erp::OracleResult oracle =
      erp::brute_force_oracle(loaded.vocab, config.search.H, config.reward);

  std::string csv = "sequence,reward\n";
  for (const auto& [sequence, reward] : oracle.table)
    csv += csv_field(sequence) + "," + erp::csv_real(reward) + "\n";
  std::filesystem::create_directories(config.output_dir);
  std::filesystem::path path = config.output_dir / "oracle.csv";
  erp::write_text_file_atomic(path, csv);

  std::cout << "optimum " << oracle.best_sequence << " " << fixed6(oracle.best_reward)
            << "\n";
  std::cout << "sequences " << oracle.table.size() << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_validate(const std::string& file) {
  nlohmann::json j = erp::cfgdetail::parse_file(file);
  if (j.is_object() && j.contains("cells")) {
    erp::PlanConfig plan = erp::load_plan_config(file);
    print_warnings(plan.warnings);
    std::cout << "OK plan with " << plan.cells.size() << " cells\n";
  } else {
    erp::RunConfig config = erp::load_run_config(file);
    print_warnings(config.warnings);
    std::cout << "OK config\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"search over tokenized sequences guided by a policy and critics"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "fit an n-gram policy on a corpus");
  train->add_option("--corpus", train_args.corpus, "one sequence per line")
      ->required();
  train->add_option("--n", train_args.n, "context order");
  train->add_option("--k", train_args.k, "additive smoothing");
  train->add_option("--mode", train_args.mode, "tokenizer: char or smiles")
      ->check(CLI::IsMember({"char", "smiles"}));
  train->add_option("--out", train_args.out, "policy file to write")->required();

  GenerateArgs generate_args;
  CLI::App* generate = app.add_subcommand("generate", "run one search from a config");
  generate->add_option("--config", generate_args.config, "run config JSON")->required();
  generate->add_option("--out", generate_args.out, "override output directory");
  generate->add_option("--seed", generate_args.seed, "override search.rng_seed");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "run an experiment plan");
  bench->add_option("--plan", bench_args.plan, "plan JSON")->required();
  bench->add_option("--out", bench_args.out, "override output directory");
  bench->add_option("--jobs", bench_args.jobs, "parallel cells")
      ->check(CLI::PositiveNumber);
  std::uint64_t bench_seed = 0;
  bench->add_option("--seed", bench_seed, "ignored; plans carry their own seeds");

  OracleArgs oracle_args;
  CLI::App* oracle = app.add_subcommand("oracle", "exhaustive optimum for a config");
  oracle->add_option("--config", oracle_args.config, "run config JSON")->required();
  oracle->add_option("--out", oracle_args.out, "override output directory");

  std::string validate_file;
  CLI::App* validate = app.add_subcommand("validate", "check a config or plan file");
  validate->add_option("file", validate_file, "config or plan JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (generate->parsed()) {
      generate_args.seed_set = generate->count("--seed") > 0;
      return cmd_generate(generate_args);
    }
    if (bench->parsed()) {
      bench_args.seed_set = bench->count("--seed") > 0;
      return cmd_bench(bench_args);
    }
    if (oracle->parsed()) return cmd_oracle(oracle_args);
    if (validate->parsed()) return cmd_validate(validate_file);
  } catch (const erp::ConfigError& e) {
    erp::log_error(e.what());
    return 2;
  } catch (const erp::SpaceTooLarge& e) {
    erp::log_error(e.what());
    return 2;
  } catch (const erp::Error& e) {
    erp::log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    erp::log_error(e.what());
    return 1;
  }
  return 0;
}
