#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "erp/io.hpp"
#include "erp/policy.hpp"

namespace erp {

inline constexpr int kPolicyFormatVersion = 1;

/// Versioned model file: {format_version, n, k, vocab, counts}. Serialization
/// is fully ordered, so retraining on identical inputs reproduces the file
/// byte for byte.
inline std::string policy_to_json(const NGramPolicy& policy) {
  nlohmann::ordered_json j;
  j["format_version"] = kPolicyFormatVersion;
  j["n"] = policy.order();
  j["k"] = policy.smoothing();
  auto vocab = nlohmann::ordered_json::array();
  for (const auto& tok : policy.vocab().tokens()) vocab.push_back(tok.text);
  j["vocab"] = std::move(vocab);
  auto counts = nlohmann::ordered_json::array();
  for (const auto& [ctx, slot] : policy.counts()) {
    auto per_token = nlohmann::ordered_json::array();
    for (const auto& [tok, c] : slot.per_token)
      per_token.push_back(nlohmann::ordered_json::array({tok, c}));
    counts.push_back(nlohmann::ordered_json::array({ctx, std::move(per_token)}));
  }
  j["counts"] = std::move(counts);
  return j.dump(2) + "\n";
}

inline NGramPolicy policy_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version") ||
      !j["format_version"].is_number_integer())
    throw ConfigError("policy file missing integer format_version");
  if (j["format_version"].get<int>() != kPolicyFormatVersion)
    throw ConfigError("policy file format_version " +
                      std::to_string(j["format_version"].get<int>()) +
                      " is not supported (expected " +
                      std::to_string(kPolicyFormatVersion) + ")");
  try {
    int n = j.at("n").get<int>();
    double k = j.at("k").get<double>();
    auto texts = j.at("vocab").get<std::vector<std::string>>();
    if (texts.size() < 2 || texts[0] != kBosText || texts[1] != kEosText)
      throw ConfigError("policy vocab does not start with the marker tokens");
    Vocabulary vocab(std::vector<std::string>(texts.begin() + 2, texts.end()));
    NGramPolicy policy(std::move(vocab), n, k);
    std::map<std::vector<TokenId>, NGramPolicy::ContextCounts> counts;
    for (const auto& entry : j.at("counts")) {
      auto ctx = entry.at(0).get<std::vector<TokenId>>();
      NGramPolicy::ContextCounts slot;
      for (const auto& pair : entry.at(1)) {
        std::int64_t c = pair.at(1).get<std::int64_t>();
        slot.per_token[pair.at(0).get<TokenId>()] = c;
        slot.total += c;
      }
      counts[std::move(ctx)] = std::move(slot);
    }
    policy.set_counts(std::move(counts));
    return policy;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed policy file: ") + e.what());
  }
}

inline void save_policy(const NGramPolicy& policy, const std::filesystem::path& path) {
  write_text_file_atomic(path, policy_to_json(policy));
}

inline NGramPolicy load_policy(const std::filesystem::path& path) {
  return policy_from_json(read_text_file(path));
}

}  // namespace erp
