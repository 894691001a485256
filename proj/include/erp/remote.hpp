#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "erp/errors.hpp"
#include "erp/policy.hpp"
#include "erp/reward.hpp"
#include "erp/vocab.hpp"

namespace erp {

/// Transport settings for a remote model or critic endpoint. retries counts
/// extra attempts after the first, so retries = 2 means three tries total.
/// Transport failures retry; malformed or non-200 answers fail immediately.
struct RemoteConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8700"
  int timeout_ms = 1000;
  int retries = 2;
};

namespace detail {

inline httplib::Result post_with_retries(const RemoteConfig& remote,
                                         const std::string& path,
                                         const std::string& body) {
  const int attempts = remote.retries + 1;
  for (int attempt = 1;; ++attempt) {
    // A fresh client per call keeps concurrent callers independent.
    httplib::Client client(remote.endpoint);
    client.set_connection_timeout(0, remote.timeout_ms * 1000);
    client.set_read_timeout(0, remote.timeout_ms * 1000);
    client.set_write_timeout(0, remote.timeout_ms * 1000);
    auto res = client.Post(path, body, "application/json");
    if (res) return res;
    if (attempt == attempts)
      throw RemoteUnavailable(remote.endpoint + path + " unreachable after " +
                              std::to_string(attempts) + " attempts: " +
                              httplib::to_string(res.error()));
  }
}

inline nlohmann::json parse_response(const httplib::Result& res,
                                     const std::string& what) {
  if (res->status != 200)
    throw ProtocolError(what + " returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(what + " returned invalid JSON: " + e.what());
  }
}

}  // namespace detail

/// Next-token model served over HTTP. POST /v1/next_token with
/// {"prefix": [ids], "vocab_size": V} must answer {"logprobs": [V reals]};
/// the log-probabilities are exponentiated and renormalized.
class RemotePolicy final : public Policy {
 public:
  RemotePolicy(RemoteConfig remote, std::size_t vocab_size)
      : remote_(std::move(remote)), v_(vocab_size) {}

  std::size_t vocab_size() const override { return v_; }

  void raw_next_dist(const SequenceState& state, ProbDist& out) const override {
    nlohmann::json body;
    body["prefix"] = state.ids;
    body["vocab_size"] = v_;
    auto res = detail::post_with_retries(remote_, "/v1/next_token", body.dump());
    nlohmann::json j = detail::parse_response(res, "next_token endpoint");
    std::vector<double> logprobs;
    try {
      logprobs = j.at("logprobs").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("next_token payload malformed: ") + e.what());
    }
    if (logprobs.size() != v_)
      throw ProtocolError("next_token returned " + std::to_string(logprobs.size()) +
                          " logprobs, expected " + std::to_string(v_));
    out.assign(v_, 0.0);
    double max_lp = -std::numeric_limits<double>::infinity();
    for (double lp : logprobs) max_lp = std::max(max_lp, lp);
    if (!std::isfinite(max_lp))
      throw ProtocolError("next_token logprobs contain no finite entry");
    double sum = 0.0;
    for (std::size_t i = 0; i < v_; ++i) {
      out[i] = std::exp(logprobs[i] - max_lp);
      sum += out[i];
    }
    for (double& p : out) p /= sum;
  }

 private:
  RemoteConfig remote_;
  std::size_t v_;
};

/// Critic served over HTTP. POST /v1/score with {"sequence": text} must
/// answer {"score": real}. Bounds and direction still come from the caller;
/// stock names fall back to the stock bounds table.
inline CriticSpec remote_critic(RemoteConfig remote, CriticSpec shape) {
  shape.evaluator = [remote = std::move(remote)](const std::string& text) {
    nlohmann::json body;
    body["sequence"] = text;
    auto res = detail::post_with_retries(remote, "/v1/score", body.dump());
    nlohmann::json j = detail::parse_response(res, "score endpoint");
    try {
      return j.at("score").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("score payload malformed: ") + e.what());
    }
  };
  return shape;
}

}  // namespace erp
