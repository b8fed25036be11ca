#pragma once

#include "rsagame/world.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rsagame {

/// Prompt text with `{name}` placeholders.
class PromptTemplate {
 public:
  PromptTemplate(std::string name, std::string text);

  const std::string& name() const noexcept { return name_; }
  const std::string& text() const noexcept { return text_; }
  const std::string& hash() const noexcept { return hash_; }

  /// Placeholder names in order of first appearance.
  std::vector<std::string> placeholders() const;

  /// Substitutes every placeholder; throws TemplateError if one has no value.
  std::string render(const std::map<std::string, std::string, std::less<>>& values) const;

  static PromptTemplate load(const std::filesystem::path& path);

 private:
  std::string name_;
  std::string text_;
  std::string hash_;
};

/// Default context for top-k generation and sequence scoring. Placeholders:
/// {world_description}, {target_description}, {examples}.
const PromptTemplate& default_context_template();

/// Numbered list of object descriptions with the target marked.
std::string render_world(const ReferenceGame& game);

/// c(O, o_t): deterministic prompt for `game` with object `target` as referent.
std::string render_context(const ReferenceGame& game, const PromptTemplate& tmpl,
                           std::optional<std::size_t> target = std::nullopt);

struct ScoredSequence {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<double> token_logprobs;
  double total_logprob = 0.0;

  std::size_t token_count() const noexcept { return token_logprobs.size(); }
  bool operator==(const ScoredSequence&) const = default;
};

struct TopKCandidate {
  std::string text;  // includes the forced determiner
  int rank = 0;      // 1-based over all starts
  double logprob = 0.0;
  std::string start;

  bool operator==(const TopKCandidate&) const = default;
};

/// A next-token alternative with its log-probability.
struct TokenLogprob {
  std::string token;
  double logprob = 0.0;

  bool operator==(const TokenLogprob&) const = default;
};

/// Everything the pipeline needs from a language model. All network access
/// lives behind implementations of this interface.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::string model_id() const = 0;
  /// "mock", a URL, or a replay identifier; recorded in run manifests.
  virtual std::string endpoint_identity() const = 0;

  /// Up to k candidates per start, ranked by total log-probability,
  /// ties broken lexicographically.
  virtual std::vector<TopKCandidate> generate_topk(const std::string& context, std::size_t k,
                                                   const std::vector<std::string>& starts) = 0;

  /// log p(utterance | context), joined with one space.
  virtual ScoredSequence score_sequence(const std::string& context, const std::string& utterance) = 0;

  /// Top next-token alternatives after `prompt`.
  virtual std::vector<TokenLogprob> next_token_logprobs(const std::string& prompt,
                                                        std::size_t top_n) = 0;
};

/// Sorts candidates by logprob desc then text, assigns ranks 1..n.
void rank_candidates(std::vector<TopKCandidate>& candidates);

struct YesNo {
  double yes = 0.0;
  double no = 0.0;
};

/// Probabilities of the Yes and No answer tokens after `prompt`, summed over
/// case and leading-space variants. Throws ProtocolError when neither appears.
YesNo yes_no_probability(LanguageModel& model, const std::string& prompt, std::size_t top_n = 20);

/// Word/punctuation split used by the mock: each token keeps its leading space.
std::vector<std::string> mock_tokenize(std::string_view text);

/// Seeded offline model.
///
/// Token probabilities come from a hash of (seed, context, prefix, token), so
/// every call is a pure function of its inputs. Generation enumerates ordered
/// word subsequences of the target line in the context (the line marked
/// "(target)"), scores them with the same token model and keeps the best k.
/// Scripted responses override the hash model for exact test fixtures.
class MockLanguageModel final : public LanguageModel {
 public:
  explicit MockLanguageModel(std::uint64_t seed = 0) : seed_(seed) {}

  std::string model_id() const override { return "mock-" + std::to_string(seed_); }
  std::string endpoint_identity() const override { return "mock"; }

  std::vector<TopKCandidate> generate_topk(const std::string& context, std::size_t k,
                                           const std::vector<std::string>& starts) override;
  ScoredSequence score_sequence(const std::string& context, const std::string& utterance) override;
  std::vector<TokenLogprob> next_token_logprobs(const std::string& prompt, std::size_t top_n) override;

  /// Every token gets this probability instead of the hashed one.
  void set_constant_token_probability(double p) { constant_p_ = p; }
  /// Exact next-token distribution (probabilities, not logs) for `prompt`.
  void script_next_token(std::string prompt, std::vector<std::pair<std::string, double>> distribution);
  /// Same distribution for every prompt that has no exact script.
  void script_default_next_token(std::vector<std::pair<std::string, double>> distribution);

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  double token_probability(std::uint64_t context_hash, std::string_view prefix,
                           std::string_view token) const;

  std::uint64_t seed_;
  std::optional<double> constant_p_;
  std::map<std::string, std::vector<std::pair<std::string, double>>, std::less<>> scripted_;
  std::optional<std::vector<std::pair<std::string, double>>> default_script_;
  std::atomic<std::size_t> calls_{0};
};

/// One JSON file per request hash, holding {"request", "response"}.
/// Reads may run concurrently; writes are serialized and atomic (temp + rename).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  static std::string key(const nlohmann::json& request);

  std::optional<nlohmann::json> get(const nlohmann::json& request) const;
  void put(const nlohmann::json& request, const nlohmann::json& response);

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::mutex write_mutex_;
};

/// Memoizing decorator over any model.
///
/// Keys are (operation, model id, inputs); values are kept in memory and, with
/// a cache directory, on disk. In offline mode a miss is an error, which
/// turns a cache directory into a replayable fixture.
class CachedLanguageModel final : public LanguageModel {
 public:
  CachedLanguageModel(std::shared_ptr<LanguageModel> inner,
                      std::optional<std::filesystem::path> cache_dir = std::nullopt,
                      bool offline = false);

  std::string model_id() const override { return model_id_; }
  std::string endpoint_identity() const override { return endpoint_; }

  std::vector<TopKCandidate> generate_topk(const std::string& context, std::size_t k,
                                           const std::vector<std::string>& starts) override;
  ScoredSequence score_sequence(const std::string& context, const std::string& utterance) override;
  std::vector<TokenLogprob> next_token_logprobs(const std::string& prompt, std::size_t top_n) override;

  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }

  /// For offline replay of a cache directory without a live model.
  CachedLanguageModel(std::string model_id, std::string endpoint, std::filesystem::path cache_dir);

 private:
  template <typename Compute>
  nlohmann::json lookup(const nlohmann::json& request, Compute&& compute);

  std::shared_ptr<LanguageModel> inner_;
  std::string model_id_;
  std::string endpoint_;
  std::optional<ResponseCache> disk_;
  bool offline_;
  mutable std::shared_mutex memory_mutex_;
  std::unordered_map<std::string, nlohmann::json> memory_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

enum class TopKStrategy { beam, sampling };

struct ClientConfig {
  std::string base_url = "http://127.0.0.1:8080/v1";
  std::string model_id = "Meta-Llama-3-8B-Instruct";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 4;
  std::chrono::milliseconds retry_backoff{250};
  std::size_t max_concurrent = 4;
  std::optional<std::filesystem::path> cache_dir;
  TopKStrategy topk_strategy = TopKStrategy::beam;
  std::size_t max_new_tokens = 16;
  double sampling_temperature = 0.8;

  /// Throws Error when a bound is violated.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// OpenAI-compatible `/completions` client (llama.cpp server, vLLM, ...).
///
///  - generate_topk: `n` candidates per determiner with `use_beam_search`,
///    or independent seeded samples with TopKStrategy::sampling.
///  - score_sequence: `echo` + `logprobs` over the prompt, keeping tokens at
///    or after the utterance offset.
///  - next_token_logprobs: one generated token with `logprobs = top_n`.
///
/// Both the legacy OpenAI logprobs object and the llama.cpp `content` array
/// are understood.
class OpenAICompatibleClient final : public LanguageModel {
 public:
  explicit OpenAICompatibleClient(ClientConfig config);
  ~OpenAICompatibleClient() override;

  std::string model_id() const override { return config_.model_id; }
  std::string endpoint_identity() const override { return config_.base_url; }
  const ClientConfig& config() const noexcept { return config_; }

  std::vector<TopKCandidate> generate_topk(const std::string& context, std::size_t k,
                                           const std::vector<std::string>& starts) override;
  ScoredSequence score_sequence(const std::string& context, const std::string& utterance) override;
  std::vector<TokenLogprob> next_token_logprobs(const std::string& prompt, std::size_t top_n) override;

  /// Sends one completions request with retries; exposed for tests.
  nlohmann::json post_completions(const nlohmann::json& body);

 private:
  struct Impl;
  ClientConfig config_;
  std::unique_ptr<Impl> impl_;
};

// Response parsing, shared by the client and fixture tests.
struct ParsedLogprobs {
  std::vector<std::string> tokens;
  std::vector<std::optional<double>> token_logprobs;
  std::vector<std::size_t> text_offsets;  // empty when the server sent none
  std::vector<std::vector<TokenLogprob>> top_logprobs;
};

ParsedLogprobs parse_choice_logprobs(const nlohmann::json& choice);

/// Model from CLI-level settings: mock, live client, or offline replay,
/// wrapped in the memoizing cache.
std::shared_ptr<CachedLanguageModel> make_model(bool mock, std::uint64_t mock_seed,
                                                const ClientConfig& config, bool offline);

}  // namespace rsagame
