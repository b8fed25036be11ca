#include "rsagame/llm_client.hpp"

#include "rsagame/error.hpp"
#include "rsagame/hash.hpp"
#include "rsagame/utterance.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace rsagame {

// ---------------------------------------------------------------- templates

PromptTemplate::PromptTemplate(std::string name, std::string text)
    : name_(std::move(name)), text_(std::move(text)), hash_(sha256_hex(text_)) {}

namespace {

bool is_placeholder_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Calls on_text / on_placeholder over the template pieces.
template <typename OnText, typename OnPlaceholder>
void scan_template(const std::string& text, OnText&& on_text, OnPlaceholder&& on_placeholder) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string::npos) break;
    auto close = open + 1;
    while (close < text.size() && is_placeholder_char(text[close])) ++close;
    if (close < text.size() && text[close] == '}' && close > open + 1) {
      on_text(std::string_view(text).substr(pos, open - pos));
      on_placeholder(std::string_view(text).substr(open + 1, close - open - 1));
      pos = close + 1;
    } else {
      on_text(std::string_view(text).substr(pos, open + 1 - pos));
      pos = open + 1;
    }
  }
  on_text(std::string_view(text).substr(std::min(pos, text.size())));
}

}  // namespace

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> names;
  scan_template(
      text_, [](std::string_view) {},
      [&](std::string_view name) {
        if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
      });
  return names;
}

std::string PromptTemplate::render(
    const std::map<std::string, std::string, std::less<>>& values) const {
  std::string out;
  out.reserve(text_.size() * 2);
  scan_template(
      text_, [&](std::string_view piece) { out.append(piece); },
      [&](std::string_view name) {
        const auto it = values.find(name);
        if (it == values.end())
          throw TemplateError(fmt::format("template '{}': unresolved placeholder {{{}}}", name_, name));
        out.append(it->second);
      });
  return out;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TemplateError(fmt::format("cannot read template '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return PromptTemplate(path.stem().string(), buffer.str());
}

const PromptTemplate& default_context_template() {
  static const PromptTemplate tmpl(
      "topk-context",
      "You are looking at a room that contains the following objects:\n"
      "{world_description}\n"
      "{examples}"
      "Describe {target_description} so that a listener can pick it out from the other "
      "objects. Use as few words as possible.\n"
      "Description:");
  return tmpl;
}

std::string render_world(const ReferenceGame& game) {
  std::string out;
  for (std::size_t i = 0; i < game.objects.size(); ++i) {
    if (i) out += '\n';
    out += fmt::format("Object {}: {}", i + 1, realize_description(game.objects[i]));
    if (i == game.target_index) out += " (target)";
  }
  return out;
}

std::string render_context(const ReferenceGame& game, const PromptTemplate& tmpl,
                           std::optional<std::size_t> target) {
  ReferenceGame view = game;
  if (target) {
    if (*target >= game.objects.size())
      throw DimensionError(fmt::format("target {} out of range for game '{}'", *target, game.game_id));
    view.target_index = *target;
  }
  return tmpl.render({
      {"world_description", render_world(view)},
      {"target_description", fmt::format("the target (object {})", view.target_index + 1)},
      {"examples", ""},
  });
}

// ---------------------------------------------------------------- helpers

void rank_candidates(std::vector<TopKCandidate>& candidates) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const TopKCandidate& a, const TopKCandidate& b) {
                     if (a.logprob != b.logprob) return a.logprob > b.logprob;
                     return a.text < b.text;
                   });
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].rank = static_cast<int>(i + 1);
}

namespace {

std::string answer_word(std::string_view token) {
  std::string word;
  for (char c : token) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (word.empty()) continue;
      break;
    }
    word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return word;
}

}  // namespace

YesNo yes_no_probability(LanguageModel& model, const std::string& prompt, std::size_t top_n) {
  const auto alternatives = model.next_token_logprobs(prompt, top_n);
  YesNo out;
  bool found = false;
  for (const auto& alt : alternatives) {
    const std::string word = answer_word(alt.token);
    if (word == "yes") {
      out.yes += std::exp(alt.logprob);
      found = true;
    } else if (word == "no") {
      out.no += std::exp(alt.logprob);
      found = true;
    }
  }
  if (!found)
    throw ProtocolError(fmt::format(
        "neither Yes nor No among the top {} next tokens; request a larger top-n", top_n));
  return out;
}

std::vector<std::string> mock_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string pending_space;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      pending_space = " ";
      ++i;
      continue;
    }
    std::string token = pending_space;
    pending_space.clear();
    if (std::isalnum(c)) {
      while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) token += text[i++];
    } else {
      token += text[i++];
    }
    tokens.push_back(std::move(token));
  }
  return tokens;
}

// ---------------------------------------------------------------- mock

double MockLanguageModel::token_probability(std::uint64_t context_hash, std::string_view prefix,
                                            std::string_view token) const {
  if (constant_p_) return *constant_p_;
  const std::string key = fmt::format("{}\x1f{}\x1f{}\x1f{}", seed_, context_hash, prefix, token);
  const double u = static_cast<double>(stable_hash64(key) >> 11) * 0x1.0p-53;
  return 0.05 + 0.9 * u;
}

ScoredSequence MockLanguageModel::score_sequence(const std::string& context,
                                                 const std::string& utterance) {
  ++calls_;
  ScoredSequence out;
  out.text = utterance;
  const std::uint64_t context_hash = stable_hash64(context);
  std::string prefix;
  for (auto& token : mock_tokenize(utterance)) {
    const double lp = std::log(token_probability(context_hash, prefix, token));
    prefix += token;
    out.token_logprobs.push_back(lp);
    out.total_logprob += lp;
    out.tokens.push_back(std::move(token));
  }
  return out;
}

std::vector<TopKCandidate> MockLanguageModel::generate_topk(const std::string& context, std::size_t k,
                                                            const std::vector<std::string>& starts) {
  ++calls_;
  // Target line, else last non-empty line.
  std::istringstream lines(context);
  std::string line;
  std::string source;
  std::string last;
  while (std::getline(lines, line)) {
    if (line.find("(target)") != std::string::npos) source = line;
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
  }
  if (source.empty()) source = last;
  if (const auto marker = source.find("(target)"); marker != std::string::npos) source.erase(marker);
  if (const auto colon = source.find(':'); colon != std::string::npos) source.erase(0, colon + 1);

  std::vector<std::string> words;
  {
    std::istringstream in(normalize_utterance(source));
    std::string word;
    while (in >> word) {
      word.erase(std::remove_if(word.begin(), word.end(),
                                [](unsigned char c) { return std::ispunct(c); }),
                 word.end());
      if (word.empty() || (words.empty() && (word == "a" || word == "the"))) continue;
      words.push_back(word);
    }
  }
  if (words.size() > 8) words.resize(8);

  std::vector<TopKCandidate> all;
  for (const auto& start : starts) {
    std::vector<TopKCandidate> per_start;
    for (std::uint32_t mask = 1; mask < (1u << words.size()); ++mask) {
      std::string text = start;
      for (std::size_t i = 0; i < words.size(); ++i)
        if (mask & (1u << i)) text += " " + words[i];
      const double lp = score_sequence(context, text).total_logprob;
      per_start.push_back({std::move(text), 0, lp, start});
    }
    rank_candidates(per_start);
    if (per_start.size() > k) per_start.resize(k);
    all.insert(all.end(), per_start.begin(), per_start.end());
  }
  rank_candidates(all);
  return all;
}

void MockLanguageModel::script_next_token(std::string prompt,
                                          std::vector<std::pair<std::string, double>> distribution) {
  scripted_[std::move(prompt)] = std::move(distribution);
}

void MockLanguageModel::script_default_next_token(
    std::vector<std::pair<std::string, double>> distribution) {
  default_script_ = std::move(distribution);
}

std::vector<TokenLogprob> MockLanguageModel::next_token_logprobs(const std::string& prompt,
                                                                 std::size_t top_n) {
  ++calls_;
  std::vector<std::pair<std::string, double>> distribution;
  if (const auto it = scripted_.find(prompt); it != scripted_.end()) {
    distribution = it->second;
  } else if (default_script_) {
    distribution = *default_script_;
  } else {
    const double u =
        static_cast<double>(stable_hash64(fmt::format("{}\x1fyes-no\x1f{}", seed_, prompt)) >> 11) *
        0x1.0p-53;
    const double yes = 0.02 + 0.96 * u;
    const double no = (1.0 - yes) * 0.95;
    distribution = {{" Yes", yes}, {" No", no}, {" Maybe", 1.0 - yes - no}};
  }
  std::vector<TokenLogprob> out;
  for (const auto& [token, p] : distribution)
    if (p > 0.0) out.push_back({token, std::log(p)});
  std::stable_sort(out.begin(), out.end(),
                   [](const TokenLogprob& a, const TokenLogprob& b) { return a.logprob > b.logprob; });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

// ---------------------------------------------------------------- cache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key(const nlohmann::json& request) { return sha256_hex(request.dump()); }

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::optional<nlohmann::json> ResponseCache::get(const nlohmann::json& request) const {
  const auto path = path_for(key(request));
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    auto entry = nlohmann::json::parse(in);
    if (entry.at("request") != request) return std::nullopt;
    return entry.at("response");
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

void ResponseCache::put(const nlohmann::json& request, const nlohmann::json& response) {
  const auto k = key(request);
  nlohmann::json entry;
  entry["request"] = request;
  entry["response"] = response;
  std::lock_guard lock(write_mutex_);
  const auto target = path_for(k);
  auto temp = target;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write cache entry '{}'", temp.string()));
    out << entry.dump() << '\n';
  }
  std::filesystem::rename(temp, target);
}

// ---------------------------------------------------------------- cached model

CachedLanguageModel::CachedLanguageModel(std::shared_ptr<LanguageModel> inner,
                                         std::optional<std::filesystem::path> cache_dir, bool offline)
    : inner_(std::move(inner)), offline_(offline) {
  if (!inner_) throw Error("cached model needs an inner model");
  model_id_ = inner_->model_id();
  endpoint_ = inner_->endpoint_identity();
  if (cache_dir) disk_.emplace(*cache_dir);
}

CachedLanguageModel::CachedLanguageModel(std::string model_id, std::string endpoint,
                                         std::filesystem::path cache_dir)
    : model_id_(std::move(model_id)), endpoint_(std::move(endpoint)), offline_(true) {
  disk_.emplace(std::move(cache_dir));
}

template <typename Compute>
nlohmann::json CachedLanguageModel::lookup(const nlohmann::json& request, Compute&& compute) {
  const std::string key = ResponseCache::key(request);
  {
    std::shared_lock lock(memory_mutex_);
    if (const auto it = memory_.find(key); it != memory_.end()) {
      ++hits_;
      return it->second;
    }
  }
  if (disk_) {
    if (auto cached = disk_->get(request)) {
      ++hits_;
      std::unique_lock lock(memory_mutex_);
      memory_.emplace(key, *cached);
      return *cached;
    }
  }
  if (offline_ || !inner_)
    throw Error(fmt::format("offline replay: no cached response for {} request {}",
                            request.value("op", "?"), key));
  ++misses_;
  nlohmann::json response = compute();
  if (disk_) disk_->put(request, response);
  std::unique_lock lock(memory_mutex_);
  memory_.emplace(key, response);
  return response;
}

std::vector<TopKCandidate> CachedLanguageModel::generate_topk(const std::string& context,
                                                              std::size_t k,
                                                              const std::vector<std::string>& starts) {
  const nlohmann::json request = {
      {"op", "generate_topk"}, {"model", model_id_}, {"context", context}, {"k", k}, {"starts", starts}};
  const auto response = lookup(request, [&] {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : inner_->generate_topk(context, k, starts))
      out.push_back({{"text", c.text}, {"rank", c.rank}, {"logprob", c.logprob}, {"start", c.start}});
    return out;
  });
  std::vector<TopKCandidate> out;
  for (const auto& c : response)
    out.push_back({c.at("text").get<std::string>(), c.at("rank").get<int>(),
                   c.at("logprob").get<double>(), c.at("start").get<std::string>()});
  return out;
}

ScoredSequence CachedLanguageModel::score_sequence(const std::string& context,
                                                   const std::string& utterance) {
  const nlohmann::json request = {
      {"op", "score_sequence"}, {"model", model_id_}, {"context", context}, {"utterance", utterance}};
  const auto response = lookup(request, [&] {
    const auto s = inner_->score_sequence(context, utterance);
    return nlohmann::json{{"text", s.text},
                          {"tokens", s.tokens},
                          {"token_logprobs", s.token_logprobs},
                          {"total_logprob", s.total_logprob}};
  });
  ScoredSequence out;
  out.text = response.at("text").get<std::string>();
  out.tokens = response.at("tokens").get<std::vector<std::string>>();
  out.token_logprobs = response.at("token_logprobs").get<std::vector<double>>();
  out.total_logprob = response.at("total_logprob").get<double>();
  return out;
}

std::vector<TokenLogprob> CachedLanguageModel::next_token_logprobs(const std::string& prompt,
                                                                   std::size_t top_n) {
  const nlohmann::json request = {
      {"op", "next_token_logprobs"}, {"model", model_id_}, {"prompt", prompt}, {"top_n", top_n}};
  const auto response = lookup(request, [&] {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& t : inner_->next_token_logprobs(prompt, top_n))
      out.push_back({{"token", t.token}, {"logprob", t.logprob}});
    return out;
  });
  std::vector<TokenLogprob> out;
  for (const auto& t : response)
    out.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
  return out;
}

std::shared_ptr<CachedLanguageModel> make_model(bool mock, std::uint64_t mock_seed,
                                                const ClientConfig& config, bool offline) {
  if (mock) return std::make_shared<CachedLanguageModel>(
      std::make_shared<MockLanguageModel>(mock_seed), config.cache_dir, offline);
  config.validate();
  if (offline) {
    if (!config.cache_dir) throw Error("offline replay needs a cache directory");
    return std::make_shared<CachedLanguageModel>(config.model_id, config.base_url, *config.cache_dir);
  }
  return std::make_shared<CachedLanguageModel>(std::make_shared<OpenAICompatibleClient>(config),
                                               config.cache_dir, false);
}

}  // namespace rsagame
