#include "rsagame/error.hpp"
#include "rsagame/llm_client.hpp"

#include <httplib.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <regex>
#include <semaphore>
#include <thread>

namespace rsagame {

void ClientConfig::validate() const {
  if (base_url.empty()) throw Error("client: base URL is empty");
  if (model_id.empty()) throw Error("client: model id is empty");
  if (max_concurrent < 1) throw Error("client: max concurrent requests must be >= 1");
  if (max_retries < 0 || max_retries > 10) throw Error("client: max retries must be in [0, 10]");
  if (timeout.count() <= 0) throw Error("client: timeout must be positive");
  if (max_new_tokens < 1) throw Error("client: max new tokens must be >= 1");
}

nlohmann::ordered_json ClientConfig::to_json() const {
  nlohmann::ordered_json j;
  j["base_url"] = base_url;
  j["model_id"] = model_id;
  j["api_key_env"] = api_key_env;
  j["timeout_ms"] = timeout.count();
  j["max_retries"] = max_retries;
  j["retry_backoff_ms"] = retry_backoff.count();
  j["max_concurrent"] = max_concurrent;
  j["cache_dir"] = cache_dir ? cache_dir->string() : std::string();
  j["topk_strategy"] = topk_strategy == TopKStrategy::beam ? "beam" : "sampling";
  j["max_new_tokens"] = max_new_tokens;
  j["sampling_temperature"] = sampling_temperature;
  return j;
}

ParsedLogprobs parse_choice_logprobs(const nlohmann::json& choice) {
  ParsedLogprobs out;
  const auto it = choice.find("logprobs");
  if (it == choice.end() || it->is_null()) return out;
  const auto& lp = *it;

  if (lp.contains("content") && lp["content"].is_array()) {
    // llama.cpp style: [{token, logprob, top_logprobs: [{token, logprob}]}]
    std::size_t offset = 0;
    for (const auto& entry : lp["content"]) {
      const auto token = entry.value("token", std::string());
      out.tokens.push_back(token);
      if (entry.contains("logprob") && entry["logprob"].is_number()) {
        out.token_logprobs.push_back(entry["logprob"].get<double>());
      } else {
        out.token_logprobs.push_back(std::nullopt);
      }
      out.text_offsets.push_back(offset);
      offset += token.size();
      std::vector<TokenLogprob> top;
      if (entry.contains("top_logprobs") && entry["top_logprobs"].is_array()) {
        for (const auto& alt : entry["top_logprobs"])
          top.push_back({alt.value("token", std::string()), alt.value("logprob", 0.0)});
      }
      out.top_logprobs.push_back(std::move(top));
    }
    return out;
  }

  // Legacy OpenAI completions object.
  if (lp.contains("tokens")) out.tokens = lp["tokens"].get<std::vector<std::string>>();
  if (lp.contains("token_logprobs")) {
    for (const auto& v : lp["token_logprobs"])
      out.token_logprobs.push_back(v.is_number() ? std::optional<double>(v.get<double>()) : std::nullopt);
  }
  if (lp.contains("text_offset") && lp["text_offset"].is_array())
    out.text_offsets = lp["text_offset"].get<std::vector<std::size_t>>();
  if (lp.contains("top_logprobs") && lp["top_logprobs"].is_array()) {
    for (const auto& entry : lp["top_logprobs"]) {
      std::vector<TokenLogprob> top;
      if (entry.is_object()) {
        for (const auto& [token, value] : entry.items())
          if (value.is_number()) top.push_back({token, value.get<double>()});
      }
      out.top_logprobs.push_back(std::move(top));
    }
  }
  if (out.token_logprobs.size() != out.tokens.size())
    throw ProtocolError("logprobs: tokens and token_logprobs differ in length");
  return out;
}

struct OpenAICompatibleClient::Impl {
  std::string scheme_host_port;
  std::string path;
  std::counting_semaphore<> slots;
  std::string api_key;

  explicit Impl(const ClientConfig& config)
      : slots(static_cast<std::ptrdiff_t>(config.max_concurrent)) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config.base_url, m, url_re))
      throw Error(fmt::format("client: cannot parse base URL '{}'", config.base_url));
    scheme_host_port = m[1].str();
    std::string prefix = m[2].matched ? m[2].str() : std::string();
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    path = prefix + "/completions";
    if (!config.api_key_env.empty()) {
      if (const char* key = std::getenv(config.api_key_env.c_str())) api_key = key;
    }
  }
};

OpenAICompatibleClient::OpenAICompatibleClient(ClientConfig config)
    : config_(std::move(config)) {
  config_.validate();
  impl_ = std::make_unique<Impl>(config_);
}

OpenAICompatibleClient::~OpenAICompatibleClient() = default;

namespace {

bool mentions_capability(const std::string& body) {
  static const char* kWords[] = {"logprobs", "echo", "beam", "best_of", "\"n\"", "not supported",
                                 "unsupported"};
  for (const char* word : kWords)
    if (body.find(word) != std::string::npos) return true;
  return false;
}

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

}  // namespace

nlohmann::json OpenAICompatibleClient::post_completions(const nlohmann::json& body) {
  SlotGuard slot(impl_->slots);
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (!impl_->api_key.empty()) headers.emplace("Authorization", "Bearer " + impl_->api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = config_.retry_backoff * (1LL << (attempt - 1));
      spdlog::debug("retrying completions request in {} ms ({})", delay.count(), last_error);
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(impl_->scheme_host_port);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    auto res = client.Post(impl_->path, headers, payload, "application/json");
    if (!res) {
      last_error = fmt::format("transport error: {}", httplib::to_string(res.error()));
      continue;
    }
    if (res->status == 200) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(fmt::format("completions response is not JSON: {}", e.what()));
      }
    }
    last_error = fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 300));
    if (res->status == 429 || res->status >= 500) continue;
    if (mentions_capability(res->body))
      throw CapabilityError(fmt::format("endpoint rejected the request ({})", last_error));
    throw TransportError(fmt::format("completions request failed ({})", last_error));
  }
  throw TransportError(fmt::format("completions request failed after {} attempts ({})",
                                   config_.max_retries + 1, last_error));
}

std::vector<TopKCandidate> OpenAICompatibleClient::generate_topk(
    const std::string& context, std::size_t k, const std::vector<std::string>& starts) {
  std::vector<TopKCandidate> all;
  const auto take_choices = [&](const nlohmann::json& response, const std::string& start) {
    if (!response.contains("choices") || !response["choices"].is_array())
      throw ProtocolError("completions response has no choices");
    for (const auto& choice : response["choices"]) {
      const auto parsed = parse_choice_logprobs(choice);
      if (parsed.tokens.empty() && !choice.value("text", std::string()).empty())
        throw CapabilityError(
            "endpoint returned no token log-probabilities for generated candidates; "
            "top-k generation needs logprobs");
      double total = 0.0;
      for (const auto& lp : parsed.token_logprobs)
        if (lp) total += *lp;
      std::string text = start + choice.value("text", std::string());
      while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
      all.push_back({std::move(text), 0, total, start});
    }
  };

  for (const auto& start : starts) {
    const std::string prompt = context + " " + start;
    if (config_.topk_strategy == TopKStrategy::beam) {
      nlohmann::json body = {{"model", config_.model_id},
                             {"prompt", prompt},
                             {"max_tokens", config_.max_new_tokens},
                             {"n", k},
                             {"best_of", k},
                             {"use_beam_search", true},
                             {"temperature", 0.0},
                             {"logprobs", 1},
                             {"stop", {"\n"}}};
      nlohmann::json response;
      try {
        response = post_completions(body);
      } catch (const CapabilityError& e) {
        throw CapabilityError(fmt::format(
            "{}; the endpoint does not support n-best beam generation, rerun with the "
            "sampling top-k strategy (repeated constrained sampling)",
            e.what()));
      }
      take_choices(response, start);
    } else {
      for (std::size_t i = 0; i < k; ++i) {
        nlohmann::json body = {{"model", config_.model_id},
                               {"prompt", prompt},
                               {"max_tokens", config_.max_new_tokens},
                               {"n", 1},
                               {"temperature", config_.sampling_temperature},
                               {"seed", static_cast<std::int64_t>(i)},
                               {"logprobs", 1},
                               {"stop", {"\n"}}};
        take_choices(post_completions(body), start);
      }
    }
  }
  rank_candidates(all);
  return all;
}

ScoredSequence OpenAICompatibleClient::score_sequence(const std::string& context,
                                                      const std::string& utterance) {
  const std::string prompt = context + " " + utterance;
  const nlohmann::json body = {{"model", config_.model_id}, {"prompt", prompt},
                               {"max_tokens", 1},           {"echo", true},
                               {"logprobs", 1},             {"temperature", 0.0}};
  const auto response = post_completions(body);
  if (!response.contains("choices") || response["choices"].empty())
    throw ProtocolError("completions response has no choices");
  const auto parsed = parse_choice_logprobs(response["choices"][0]);
  if (parsed.tokens.empty() || parsed.text_offsets.size() != parsed.tokens.size())
    throw CapabilityError(
        "endpoint does not return prompt token log-probabilities with offsets "
        "(echo + logprobs); sequence scoring is unavailable");

  const std::size_t begin = context.size();
  const std::size_t end = prompt.size();
  ScoredSequence out;
  out.text = utterance;
  for (std::size_t i = 0; i < parsed.tokens.size(); ++i) {
    const std::size_t offset = parsed.text_offsets[i];
    const std::size_t token_end = offset + parsed.tokens[i].size();
    if (offset >= end || token_end <= begin) continue;
    if (!parsed.token_logprobs[i])
      throw ProtocolError(fmt::format("no log-probability for utterance token '{}'", parsed.tokens[i]));
    out.tokens.push_back(parsed.tokens[i]);
    out.token_logprobs.push_back(*parsed.token_logprobs[i]);
    out.total_logprob += *parsed.token_logprobs[i];
  }
  if (out.tokens.empty()) throw ProtocolError("no utterance tokens found in echoed prompt");
  return out;
}

std::vector<TokenLogprob> OpenAICompatibleClient::next_token_logprobs(const std::string& prompt,
                                                                      std::size_t top_n) {
  const nlohmann::json body = {{"model", config_.model_id}, {"prompt", prompt},
                               {"max_tokens", 1},           {"logprobs", top_n},
                               {"temperature", 0.0}};
  const auto response = post_completions(body);
  if (!response.contains("choices") || response["choices"].empty())
    throw ProtocolError("completions response has no choices");
  const auto parsed = parse_choice_logprobs(response["choices"][0]);
  if (parsed.top_logprobs.empty() || parsed.top_logprobs.front().empty())
    throw CapabilityError("endpoint returned no top log-probabilities for the next token");
  auto top = parsed.top_logprobs.front();
  std::stable_sort(top.begin(), top.end(),
                   [](const TokenLogprob& a, const TokenLogprob& b) { return a.logprob > b.logprob; });
  return top;
}

}  // namespace rsagame
