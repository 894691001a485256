#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "erp/remote.hpp"

using namespace erp;
using doctest::Approx;

namespace {

/// In-process HTTP endpoint bound to an ephemeral localhost port.
struct MockServer {
  httplib::Server svr;
  int port = 0;
  std::thread runner;
  std::atomic<int> hits{0};
  std::string last_body;

  void start() {
    port = svr.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    runner = std::thread([this] { svr.listen_after_bind(); });
    for (int i = 0; i < 200 && !svr.is_running(); ++i)
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    REQUIRE(svr.is_running());
  }

  RemoteConfig config(int timeout_ms = 2000, int retries = 0) const {
    return RemoteConfig{"http://127.0.0.1:" + std::to_string(port), timeout_ms,
                        retries};
  }

  ~MockServer() {
    svr.stop();
    if (runner.joinable()) runner.join();
  }
};

}  // namespace

TEST_CASE("remote models return renormalized next-token distributions") {
  MockServer server;
  server.svr.Post("/v1/next_token",
                  [&](const httplib::Request& req, httplib::Response& res) {
                    ++server.hits;
                    server.last_body = req.body;
                    nlohmann::json out;
                    out["logprobs"] = {std::log(0.4), std::log(0.2), std::log(0.2),
                                       std::log(0.2)};
                    res.set_content(out.dump(), "application/json");
                  });
  server.start();

  RemotePolicy policy(server.config(), 4);
  CHECK(policy.vocab_size() == 4);

  // raw distribution straight off the wire
  ProbDist raw;
  policy.raw_next_dist(make_root(), raw);
  REQUIRE(raw.size() == 4);
  CHECK(raw[0] == Approx(0.4).epsilon(1e-12));
  CHECK(raw[1] == Approx(0.2).epsilon(1e-12));

  // the usual begin-marker zeroing applies on top
  ProbDist dist = next_dist(policy, make_root());
  CHECK(dist[0] == 0.0);
  CHECK(dist[1] == Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(dist[2] == Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(dist[3] == Approx(1.0 / 3.0).epsilon(1e-12));

  // the request carries the prefix and expected width
  nlohmann::json body = nlohmann::json::parse(server.last_body);
  CHECK(body.at("prefix") == nlohmann::json({0}));
  CHECK(body.at("vocab_size") == 4);
  CHECK(server.hits == 2);
}

TEST_CASE("a width mismatch is a protocol error") {
  MockServer server;
  server.svr.Post("/v1/next_token",
                  [&](const httplib::Request&, httplib::Response& res) {
                    ++server.hits;
                    res.set_content("{\"logprobs\": [0.0, 0.0, 0.0]}",
                                    "application/json");
                  });
  server.start();

  RemotePolicy policy(server.config(), 4);
  ProbDist out;
  try {
    policy.raw_next_dist(make_root(), out);
    FAIL("expected a width rejection");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("expected 4") != std::string::npos);
  }
}

TEST_CASE("server-side failures do not retry") {
  MockServer server;
  server.svr.Post("/v1/next_token",
                  [&](const httplib::Request&, httplib::Response& res) {
                    ++server.hits;
                    res.status = 500;
                    res.set_content("{}", "application/json");
                  });
  server.start();

  RemotePolicy policy(server.config(2000, 5), 4);
  ProbDist out;
  try {
    policy.raw_next_dist(make_root(), out);
    FAIL("expected an HTTP status rejection");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("HTTP 500") != std::string::npos);
  }
  CHECK(server.hits == 1);  // a definitive answer, not a transport failure
}

TEST_CASE("unparseable and incomplete payloads are protocol errors") {
  MockServer server;
  server.svr.Post("/v1/next_token",
                  [&](const httplib::Request&, httplib::Response& res) {
                    res.set_content("this is not json", "text/plain");
                  });
  server.svr.Post("/v1/score",
                  [&](const httplib::Request&, httplib::Response& res) {
                    res.set_content("{\"value\": 1.0}", "application/json");
                  });
  server.start();

  RemotePolicy policy(server.config(), 4);
  ProbDist out;
  try {
    policy.raw_next_dist(make_root(), out);
    FAIL("expected a parse rejection");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("invalid JSON") != std::string::npos);
  }

  CriticSpec shape;
  shape.name = "druglikeness";
  shape.direction = Direction::maximize;
  shape.bound_min = 0.0;
  shape.bound_max = 1.0;
  CriticSpec critic = remote_critic(server.config(), shape);
  CHECK_THROWS_AS(critic.evaluator("CCO"), ProtocolError);
}

TEST_CASE("an unreachable endpoint exhausts its attempts") {
  // nothing listens on port 1
  RemoteConfig remote{"http://127.0.0.1:1", 200, 2};
  RemotePolicy policy(remote, 4);
  ProbDist out;
  try {
    policy.raw_next_dist(make_root(), out);
    FAIL("expected a transport failure");
  } catch (const RemoteUnavailable& e) {
    CHECK(std::string(e.what()).find("3 attempts") != std::string::npos);
  }
}

TEST_CASE("remote scoring plugs into the reward stack") {
  MockServer server;
  server.svr.Post("/v1/score",
                  [&](const httplib::Request& req, httplib::Response& res) {
                    ++server.hits;
                    server.last_body = req.body;
                    res.set_content("{\"score\": -9.1}", "application/json");
                  });
  server.start();

  CriticSpec shape;
  shape.name = "docking";
  shape.direction = Direction::minimize;
  shape.bound_min = -14.0;
  shape.bound_max = -6.0;

  RewardSpec spec;
  spec.critics.push_back(remote_critic(server.config(), shape));

  RewardOutcome out = score_string("CCO", true, spec);
  CHECK(out.valid);
  REQUIRE(out.raw_scores.size() == 1);
  CHECK(out.raw_scores[0] == -9.1);
  // minimize over [-14, -6]: (-6 - -9.1) / 8
  CHECK(out.value == Approx(0.3875).epsilon(1e-12));
  CHECK(nlohmann::json::parse(server.last_body).at("sequence") == "CCO");
}

TEST_CASE("a scorer that goes dark leaves an error trail, not a crash") {
  MockServer server;
  server.svr.Post("/v1/score",
                  [&](const httplib::Request&, httplib::Response& res) {
                    res.status = 503;
                    res.set_content("{}", "application/json");
                  });
  server.start();

  CriticSpec shape;
  shape.name = "docking";
  shape.direction = Direction::minimize;
  shape.bound_min = -14.0;
  shape.bound_max = -6.0;

  RewardSpec spec;
  spec.critics.push_back(remote_critic(server.config(), shape));

  RewardOutcome out = score_string("CCO", true, spec);
  CHECK(out.valid);
  CHECK(out.value == 0.0);
  REQUIRE(out.raw_scores.size() == 1);
  CHECK(std::isnan(out.raw_scores[0]));
  REQUIRE(out.critic_errors.size() == 1);
  CHECK(out.critic_errors[0].find("docking") != std::string::npos);
  CHECK(out.critic_errors[0].find("HTTP 503") != std::string::npos);
}
