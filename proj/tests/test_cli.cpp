#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "erp/io.hpp"

using namespace erp;

namespace {

struct CmdResult {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

CmdResult run_cli(const std::string& args) {
  std::string cmd = std::string(ERP_CLI_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult result;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, n);
  int status = pclose(pipe);
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::filesystem::path workspace() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / "erp_cli_test";
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    write_text_file_atomic(d / "corpus.txt", "CCCCC\nCCOCC\nCOC\n");
    write_text_file_atomic(d / "alpha.txt", "abcdefghij\n");
    write_text_file_atomic(d / "gen.json", R"({
      "format_version": 1,
      "search": {"algorithm": "ph_uct", "rollouts": 64, "H": 6},
      "policy": {"type": "ngram", "corpus": "corpus.txt", "n": 2, "k": 0.1},
      "critics": [
        {"kind": "motif_count",
         "params": {"name": "cc_density", "motif": "CC",
                    "direction": "maximize", "min": 0, "max": 4}},
        {"kind": "length_window",
         "params": {"name": "length", "target": 5,
                    "direction": "maximize", "min": -5, "max": 0}}
      ],
      "output_dir": "gen_out"
    })");
    write_text_file_atomic(d / "plan.json", R"({
      "format_version": 1,
      "mode": "char",
      "policy": {"type": "uniform", "corpus": "corpus.txt"},
      "critics": [{"kind": "motif_count",
                   "params": {"motif": "CC", "direction": "maximize",
                              "min": 0, "max": 3}}],
      "base_search": {"rollouts": 16, "H": 4, "b": 4},
      "cells": [
        {"algorithm": "p_uct", "seed": 1},
        {"algorithm": "ph_uct", "seeds": [1, 2]}
      ],
      "output_dir": "bench_out"
    })");
    write_text_file_atomic(d / "bad_p.json", R"({
      "format_version": 1,
      "search": {"p": 1.5},
      "policy": {"type": "ngram", "corpus": "corpus.txt"},
      "critics": [{"kind": "motif_count",
                   "params": {"motif": "CC", "direction": "maximize",
                              "min": 0, "max": 4}}]
    })");
    write_text_file_atomic(d / "dup_seeds.json", R"({
      "format_version": 1,
      "policy": {"type": "uniform", "corpus": "corpus.txt"},
      "critics": [{"kind": "motif_count",
                   "params": {"motif": "CC", "direction": "maximize",
                              "min": 0, "max": 3}}],
      "cells": [{"algorithm": "uct", "seeds": [1, 1]}]
    })");
    write_text_file_atomic(d / "guard.json", R"({
      "format_version": 1,
      "mode": "char",
      "policy": {"type": "uniform", "corpus": "alpha.txt"},
      "critics": [{"kind": "motif_count",
                   "params": {"motif": "ab", "direction": "maximize",
                              "min": 0, "max": 3}}]
    })");
    write_text_file_atomic(d / "warn_e.json", R"({
      "format_version": 1,
      "search": {"algorithm": "uct", "e": 3, "rollouts": 8, "H": 4},
      "policy": {"type": "ngram", "corpus": "corpus.txt", "n": 2},
      "critics": [{"kind": "motif_count",
                   "params": {"motif": "CC", "direction": "maximize",
                              "min": 0, "max": 4}}],
      "output_dir": "warn_out"
    })");
    return d;
  }();
  return dir;
}

std::string ws(const char* name) { return (workspace() / name).string(); }

}  // namespace

TEST_CASE("a subcommand is required and unknown ones are usage errors") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("frobnicate").code == 2);

  CmdResult help = run_cli("--help");
  CHECK(help.code == 0);
  for (const char* sub : {"train", "generate", "bench", "oracle", "validate"})
    CHECK(help.output.find(sub) != std::string::npos);
}

TEST_CASE("training reports corpus shape and writes a reloadable policy") {
  CmdResult r = run_cli("train --corpus " + ws("corpus.txt") + " --n 2 --k 0.1 --out " +
                        ws("policy.json"));
  CHECK(r.code == 0);
  CHECK(r.output.find("vocab_size 4") != std::string::npos);
  CHECK(r.output.find("lines 3") != std::string::npos);
  CHECK(r.output.find("tokens_per_line_min 3") != std::string::npos);
  CHECK(r.output.find("tokens_per_line_mean 4.333333") != std::string::npos);
  CHECK(r.output.find("tokens_per_line_max 5") != std::string::npos);
  CHECK(std::filesystem::exists(ws("policy.json")));

  std::string first = read_text_file(ws("policy.json"));
  CmdResult again = run_cli("train --corpus " + ws("corpus.txt") +
                            " --n 2 --k 0.1 --out " + ws("policy.json"));
  CHECK(again.code == 0);
  CHECK(read_text_file(ws("policy.json")) == first);

  CHECK(run_cli("train --corpus " + ws("corpus.txt") + " --n 0 --out " +
                ws("p2.json"))
            .code == 2);
  CHECK(run_cli("train --corpus " + ws("corpus.txt") + " --mode words --out " +
                ws("p3.json"))
            .code == 2);
}

TEST_CASE("generation finds the enumerable optimum and reruns identically") {
  CmdResult r = run_cli("generate --config " + ws("gen.json"));
  REQUIRE(r.code == 0);
  CHECK(r.output.find("best_sequence CCCCC") != std::string::npos);
  CHECK(r.output.find("best_norm_reward 2.000000") != std::string::npos);
  CHECK(r.output.find("critic_mean cc_density ") != std::string::npos);
  CHECK(r.output.find("critic_mean length ") != std::string::npos);

  auto result_path = workspace() / "gen_out" / "result_ph_uct_seed0.json";
  REQUIRE(std::filesystem::exists(result_path));
  std::string first = read_text_file(result_path);

  nlohmann::json report = nlohmann::json::parse(first);
  CHECK(report.at("molecules")[0].at("sequence") == "CCCCC");
  CHECK(report.at("molecules")[0].at("reward") == 2.0);
  CHECK(report.at("config").at("rollouts") == 64);

  CmdResult again = run_cli("generate --config " + ws("gen.json"));
  CHECK(again.output == r.output);
  CHECK(read_text_file(result_path) == first);
}

TEST_CASE("the seed override only renames and relabels a deterministic search") {
  CmdResult r = run_cli("generate --config " + ws("gen.json") + " --seed 7");
  REQUIRE(r.code == 0);
  auto seed7_path = workspace() / "gen_out" / "result_ph_uct_seed7.json";
  REQUIRE(std::filesystem::exists(seed7_path));

  nlohmann::json seed0 =
      nlohmann::json::parse(read_text_file(workspace() / "gen_out" / "result_ph_uct_seed0.json"));
  nlohmann::json seed7 = nlohmann::json::parse(read_text_file(seed7_path));
  CHECK(seed7.at("config").at("rng_seed") == 7);
  seed0["config"].erase("rng_seed");
  seed7["config"].erase("rng_seed");
  CHECK(seed0 == seed7);
}

TEST_CASE("bad configurations exit with the usage code and name the field") {
  CmdResult r = run_cli("generate --config " + ws("bad_p.json"));
  CHECK(r.code == 2);
  CHECK(r.output.find("search.p") != std::string::npos);

  CHECK(run_cli("generate --config " + ws("nope.json")).code == 2);
  CHECK(run_cli("bench --plan " + ws("dup_seeds.json")).code == 2);
}

TEST_CASE("an ignored lookahead setting warns but still runs") {
  CmdResult r = run_cli("generate --config " + ws("warn_e.json"));
  CHECK(r.code == 0);
  CHECK(r.output.find("ignored by algorithm 'uct'") != std::string::npos);
}

TEST_CASE("the exhaustive reference scores every short sequence") {
  CmdResult r = run_cli("oracle --config " + ws("gen.json") + " --out " +
                        ws("oracle_out"));
  REQUIRE(r.code == 0);
  CHECK(r.output.find("optimum CCCCC 2.000000") != std::string::npos);
  CHECK(r.output.find("sequences 127") != std::string::npos);

  std::string csv = read_text_file(workspace() / "oracle_out" / "oracle.csv");
  CHECK(csv.rfind("sequence,reward\n,0.000000\nC,0.200000\nCC,0.650000\n", 0) == 0);

  CmdResult guarded = run_cli("oracle --config " + ws("guard.json"));
  CHECK(guarded.code == 2);
  CHECK(guarded.output.find("10^40") != std::string::npos);
}

TEST_CASE("experiment plans run every cell and summarize") {
  CmdResult r = run_cli("bench --plan " + ws("plan.json"));
  REQUIRE(r.code == 0);
  CHECK(r.output.find("cells 3") != std::string::npos);

  auto summary = workspace() / "bench_out" / "summary.csv";
  REQUIRE(std::filesystem::exists(summary));
  std::string csv = read_text_file(summary);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
  CHECK(csv.find("p_uct,1,") != std::string::npos);
  CHECK(csv.find("ph_uct,1,") != std::string::npos);
  CHECK(csv.find("ph_uct,2,") != std::string::npos);
  CHECK(std::filesystem::exists(workspace() / "bench_out" /
                                "cell000_p_uct_seed1.json"));
  CHECK(std::filesystem::exists(workspace() / "bench_out" /
                                "cell002_ph_uct_seed2.json"));

  CmdResult warned = run_cli("bench --plan " + ws("plan.json") + " --seed 9");
  CHECK(warned.code == 0);
  CHECK(warned.output.find("--seed is ignored") != std::string::npos);

  CHECK(run_cli("bench --plan " + ws("plan.json") + " --jobs 0").code == 2);

  CmdResult parallel = run_cli("bench --plan " + ws("plan.json") + " --jobs 3");
  CHECK(parallel.code == 0);
}

TEST_CASE("validation answers for both file shapes") {
  CmdResult config_ok = run_cli("validate " + ws("gen.json"));
  CHECK(config_ok.code == 0);
  CHECK(config_ok.output.find("OK config") != std::string::npos);

  CmdResult plan_ok = run_cli("validate " + ws("plan.json"));
  CHECK(plan_ok.code == 0);
  CHECK(plan_ok.output.find("OK plan with 3 cells") != std::string::npos);

  CHECK(run_cli("validate " + ws("bad_p.json")).code == 2);
  CHECK(run_cli("validate " + ws("nope.json")).code == 2);
}
