#include "rsagame/error.hpp"
#include "rsagame/llm_client.hpp"

#include "paths.hpp"

#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

using namespace rsagame;

namespace {

std::string read_fixture(const char* name) {
  std::ifstream in(data_dir() / "llm" / name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Local completions endpoint. Failures queued in `failures` are served first.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      bodies.push_back(nlohmann::json::parse(req.body));
      auth.push_back(req.get_header_value("Authorization"));
      if (!failures.empty()) {
        const auto [status, body] = failures.front();
        failures.pop_front();
        res.status = status;
        res.set_content(body, "text/plain");
        return;
      }
      const auto& b = bodies.back();
      const char* fixture = "next_token_legacy.json";
      if (b.value("echo", false)) {
        fixture = "echo_legacy.json";
      } else if (b.value("use_beam_search", false)) {
        fixture = "beam_legacy.json";
      }
      res.set_content(read_fixture(fixture), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  ClientConfig config() const {
    ClientConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/";
    c.model_id = "test-model";
    c.api_key_env = "RSAGAME_TEST_KEY";
    c.timeout = std::chrono::milliseconds(5000);
    c.retry_backoff = std::chrono::milliseconds(1);
    c.max_retries = 2;
    return c;
  }
  std::size_t requests() {
    std::lock_guard lock(mutex_);
    return bodies.size();
  }

  std::deque<std::pair<int, std::string>> failures;
  std::vector<nlohmann::json> bodies;
  std::vector<std::string> auth;

 private:
  httplib::Server server_;
  std::thread thread_;
  std::mutex mutex_;
  int port_ = 0;
};

}  // namespace

TEST_CASE("score_sequence keeps only utterance tokens") {
  FakeServer server;
  OpenAICompatibleClient client(server.config());
  const auto s = client.score_sequence("Description:", "a red chair");
  CHECK(s.tokens == std::vector<std::string>{" a", " red", " chair"});
  CHECK(s.total_logprob == doctest::Approx(-2.5).epsilon(1e-12));
  REQUIRE(server.bodies.size() == 1);
  const auto& body = server.bodies[0];
  CHECK(body["echo"] == true);
  CHECK(body["prompt"] == "Description: a red chair");
  CHECK(body["model"] == "test-model");
}

TEST_CASE("beam generation ranks candidates across determiners") {
  FakeServer server;
  OpenAICompatibleClient client(server.config());
  const auto c = client.generate_topk("ctx", 3, {"a", "the"});
  REQUIRE(c.size() == 6);
  const std::vector<std::string> expected = {"a red chair",         "the red chair",
                                             "a chair facing left", "a large red chair",
                                             "the chair facing left", "the large red chair"};
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c[i].text == expected[i]);
    CHECK(c[i].rank == static_cast<int>(i + 1));
  }
  CHECK(c[0].logprob == -0.5);
  CHECK(c[2].logprob == -1.25);
  REQUIRE(server.bodies.size() == 2);
  CHECK(server.bodies[0]["prompt"] == "ctx a");
  CHECK(server.bodies[1]["prompt"] == "ctx the");
  CHECK(server.bodies[0]["n"] == 3);
}

TEST_CASE("next-token distribution and yes/no aggregation") {
  FakeServer server;
  OpenAICompatibleClient client(server.config());
  const auto top = client.next_token_logprobs("Q?", 20);
  REQUIRE(top.size() == 5);
  CHECK(top[0].token == " Yes");
  for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].logprob >= top[i].logprob);
  CHECK(server.bodies[0]["logprobs"] == 20);
  const auto yn = yes_no_probability(client, "Q?");
  CHECK(yn.yes == doctest::Approx(0.8 + 0.05 + 0.01).epsilon(1e-3));
  CHECK(yn.no == doctest::Approx(0.1).epsilon(1e-3));
}

TEST_CASE("retries on 5xx and 429, then succeeds") {
  FakeServer server;
  server.failures = {{500, "boom"}, {429, "slow down"}};
  OpenAICompatibleClient client(server.config());
  CHECK(client.score_sequence("Description:", "a red chair").tokens.size() == 3);
  CHECK(server.requests() == 3);
}

TEST_CASE("retry budget is bounded") {
  FakeServer server;
  server.failures = {{503, "a"}, {503, "b"}, {503, "c"}, {503, "d"}};
  OpenAICompatibleClient client(server.config());
  CHECK_THROWS_AS(client.score_sequence("Description:", "a red chair"), TransportError);
  CHECK(server.requests() == 3);
}

TEST_CASE("capability errors carry advice") {
  FakeServer server;
  server.failures = {{400, "logprobs with beam search is not supported"}};
  OpenAICompatibleClient client(server.config());
  try {
    client.generate_topk("ctx", 3, {"a"});
    FAIL("expected CapabilityError");
  } catch (const CapabilityError& e) {
    CHECK(std::string(e.what()).find("sampling") != std::string::npos);
  }
  CHECK(server.requests() == 1);

  server.failures = {{404, "no such route"}};
  CHECK_THROWS_AS(client.score_sequence("Description:", "a red chair"), TransportError);
}

TEST_CASE("API key comes from the configured environment variable") {
  FakeServer server;
  ::setenv("RSAGAME_TEST_KEY", "sk-local", 1);
  {
    OpenAICompatibleClient client(server.config());
    client.next_token_logprobs("Q?", 5);
  }
  ::unsetenv("RSAGAME_TEST_KEY");
  {
    OpenAICompatibleClient client(server.config());
    client.next_token_logprobs("Q?", 5);
  }
  REQUIRE(server.auth.size() == 2);
  CHECK(server.auth[0] == "Bearer sk-local");
  CHECK(server.auth[1].empty());
}

TEST_CASE("live responses are cached and replay offline unchanged") {
  const auto dir = scratch_dir("http_cache");
  FakeServer server;
  auto config = server.config();
  auto cached = make_model(false, 0, [&] {
    auto c = config;
    c.cache_dir = dir;
    return c;
  }(), false);
  const auto seq = cached->score_sequence("Description:", "a red chair");
  const auto topk = cached->generate_topk("ctx", 3, {"a", "the"});
  const auto next = cached->next_token_logprobs("Q?", 20);
  const auto served = server.requests();
  CHECK(cached->score_sequence("Description:", "a red chair") == seq);
  CHECK(server.requests() == served);

  std::map<std::string, std::string> before;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    before[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  CHECK(before.size() == 3);

  auto offline_config = config;
  offline_config.cache_dir = dir;
  auto replay = make_model(false, 0, offline_config, true);
  CHECK(replay->score_sequence("Description:", "a red chair") == seq);
  CHECK(replay->generate_topk("ctx", 3, {"a", "the"}) == topk);
  CHECK(replay->next_token_logprobs("Q?", 20) == next);
  CHECK_THROWS_AS(replay->score_sequence("Description:", "a blue chair"), Error);
  CHECK(server.requests() == served);

  std::map<std::string, std::string> after;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    after[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  CHECK(after == before);
}
