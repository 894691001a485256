#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "erp/policy_io.hpp"

using namespace erp;

namespace {

NGramPolicy train_on(const std::vector<std::string>& lines, int n, double k) {
  Vocabulary v = build_vocab(lines, TokenMode::chars);
  std::vector<SequenceState> states;
  for (const auto& line : lines) states.push_back(tokenize(v, line, TokenMode::chars));
  return train_ngram(states, n, k, v);
}

std::filesystem::path temp_file(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "erp_policy_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("saved policies load back unchanged") {
  NGramPolicy policy = train_on({"ab", "ba", "abba"}, 3, 0.25);
  auto path = temp_file("roundtrip.json");
  save_policy(policy, path);
  NGramPolicy loaded = load_policy(path);

  CHECK(loaded.order() == policy.order());
  CHECK(loaded.smoothing() == policy.smoothing());
  REQUIRE(loaded.vocab().size() == policy.vocab().size());
  for (const auto& tok : policy.vocab().tokens())
    CHECK(loaded.vocab().text(tok.id) == tok.text);
  REQUIRE(loaded.counts().size() == policy.counts().size());

  SequenceState probe{{kBos, 2}, false};
  CHECK(loaded.cond_prob(probe, 3) == policy.cond_prob(probe, 3));
  CHECK(policy_to_json(loaded) == policy_to_json(policy));
}

TEST_CASE("retraining on the same corpus reproduces the file byte for byte") {
  NGramPolicy a = train_on({"ab", "ab", "ba"}, 2, 1.0);
  NGramPolicy b = train_on({"ab", "ab", "ba"}, 2, 1.0);
  CHECK(policy_to_json(a) == policy_to_json(b));
}

TEST_CASE("unsupported format versions are refused") {
  NGramPolicy policy = train_on({"ab"}, 2, 1.0);
  std::string text = policy_to_json(policy);
  auto pos = text.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 19, "\"format_version\": 2");
  try {
    policy_from_json(text);
    FAIL("expected a throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("format_version") != std::string::npos);
  }
}

TEST_CASE("malformed policy files are refused") {
  CHECK_THROWS_AS(policy_from_json("not json at all"), ConfigError);
  CHECK_THROWS_AS(policy_from_json("{\"format_version\": 1}"), ConfigError);
  // marker tokens must open the vocab list
  CHECK_THROWS_AS(
      policy_from_json("{\"format_version\": 1, \"n\": 2, \"k\": 1.0, "
                       "\"vocab\": [\"a\", \"b\"], \"counts\": []}"),
      ConfigError);
  CHECK_THROWS_AS(load_policy(temp_file("does_not_exist.json")), Error);
}
