// rsagame: corpus ingestion, utterance spaces, scoring and analysis.

#include "rsagame/analysis.hpp"
#include "rsagame/corpus.hpp"
#include "rsagame/error.hpp"
#include "rsagame/llm_client.hpp"
#include "rsagame/manifest.hpp"
#include "rsagame/meaning.hpp"
#include "rsagame/parallel.hpp"
#include "rsagame/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace rsagame;

namespace {

constexpr const char* kNotApplicable = "n/a";

struct LlmFlags {
  bool mock = false;
  std::uint64_t mock_seed = 0;
  ClientConfig client;
  double timeout_s = 60.0;
  std::string cache_dir;
  bool offline = false;
  std::string strategy = "beam";
};

void add_llm_flags(CLI::App& app, LlmFlags& f) {
  app.add_flag("--mock", f.mock, "Use the seeded offline model");
  app.add_option("--mock-seed", f.mock_seed, "Seed of the offline model");
  app.add_option("--base-url", f.client.base_url, "OpenAI-compatible endpoint")->capture_default_str();
  app.add_option("--model", f.client.model_id, "Model id sent to the endpoint")->capture_default_str();
  app.add_option("--api-key-env", f.client.api_key_env, "Environment variable holding the API key")
      ->capture_default_str();
  app.add_option("--timeout", f.timeout_s, "Request timeout in seconds")->capture_default_str();
  app.add_option("--max-retries", f.client.max_retries)->capture_default_str();
  app.add_option("--max-concurrent", f.client.max_concurrent)->capture_default_str();
  app.add_option("--cache-dir", f.cache_dir, "Response cache directory");
  app.add_flag("--offline", f.offline, "Serve every request from --cache-dir; misses are errors");
  app.add_option("--topk-strategy", f.strategy, "beam or sampling")
      ->check(CLI::IsMember({"beam", "sampling"}))
      ->capture_default_str();
}

std::shared_ptr<CachedLanguageModel> open_model(LlmFlags& f) {
  f.client.timeout = std::chrono::milliseconds(static_cast<long long>(f.timeout_s * 1000.0));
  f.client.topk_strategy = f.strategy == "sampling" ? TopKStrategy::sampling : TopKStrategy::beam;
  if (!f.cache_dir.empty()) f.client.cache_dir = f.cache_dir;
  return make_model(f.mock, f.mock_seed, f.client, f.offline);
}

void record_llm(RunManifest& m, const LlmFlags& f, const LanguageModel& model) {
  m.model_id = model.model_id();
  m.endpoint = model.endpoint_identity();
  m.settings["mock"] = f.mock ? "true" : "false";
  m.settings["mock_seed"] = std::to_string(f.mock_seed);
  m.settings["timeout_s"] = fmt::format("{}", f.timeout_s);
  m.settings["max_retries"] = std::to_string(f.client.max_retries);
  m.settings["max_concurrent"] = std::to_string(f.client.max_concurrent);
  m.settings["api_key_env"] = f.client.api_key_env;
  m.settings["cache_dir"] = f.cache_dir.empty() ? kNotApplicable : f.cache_dir;
  m.settings["offline"] = f.offline ? "true" : "false";
  m.settings["topk_strategy"] = f.strategy;
  m.settings["max_new_tokens"] = std::to_string(f.client.max_new_tokens);
}

// Fields a stage does not use are filled explicitly so the manifest is
// still complete.
RunManifest base_manifest(std::string stage) {
  RunManifest m;
  m.stage = std::move(stage);
  m.lexicon_hash = kNotApplicable;
  m.model_id = kNotApplicable;
  m.endpoint = kNotApplicable;
  m.cost_mode = kNotApplicable;
  m.llm_score_mode = kNotApplicable;
  m.template_hashes["none"] = kNotApplicable;
  m.alphas = {kSweepAlphas.begin(), kSweepAlphas.end()};
  m.started_at = utc_timestamp();
  return m;
}

fs::path manifest_path_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

std::string header_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::getline(in, line);
  try {
    return nlohmann::json::parse(line).at("_meta").at("manifest_sha256").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw IngestionError(fmt::format("'{}' has no manifest header", path.string()));
  }
}

void write_with_manifest(const fs::path& out, RunManifest& manifest,
                         const std::function<void(std::ostream&, const std::string&)>& body) {
  manifest.finished_at = utc_timestamp();
  const std::string hash = manifest.content_hash();
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_manifest(manifest_path_for(out), manifest);
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(fmt::format("cannot write '{}'", out.string()));
  body(file, hash);
  if (!file) throw Error(fmt::format("write failed for '{}'", out.string()));
}

std::vector<double> parse_alphas(const std::vector<double>& given) {
  if (given.empty()) return {kSweepAlphas.begin(), kSweepAlphas.end()};
  for (double a : given)
    if (!(a > 0.0)) throw Error(fmt::format("alpha must be positive, got {}", a));
  return given;
}

std::vector<MfKind> parse_mfs(const std::string& text) {
  if (text == "both") return {MfKind::rule, MfKind::prompt};
  return {mf_kind_from_string(text)};
}

std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// ------------------------------------------------------------------ ingest

struct IngestArgs {
  std::string tuna_dir;
  bool synthetic = false;
  std::uint64_t seed = 1;
  std::size_t games = 10;
  std::size_t objects = 7;
  std::string out;
  bool skip_bad = false;
};

int run_ingest(const IngestArgs& a) {
  if (a.tuna_dir.empty() == !a.synthetic) throw Error("give exactly one of --tuna-dir or --synthetic");
  RunManifest m = base_manifest("ingest");
  Corpus corpus;
  std::vector<std::string> errors;
  if (a.synthetic) {
    corpus = generate_synthetic(a.seed, AttributeSchema::furniture(), a.objects, a.games);
    m.settings = {{"source", "synthetic"},
                  {"seed", std::to_string(a.seed)},
                  {"games", std::to_string(a.games)},
                  {"objects", std::to_string(a.objects)}};
  } else {
    auto loaded = load_corpus(a.tuna_dir, {a.skip_bad, nullptr});
    corpus = std::move(loaded.corpus);
    errors = std::move(loaded.errors);
    m.settings = {{"source", "tuna"},
                  {"tuna_dir", fs::path(a.tuna_dir).lexically_normal().generic_string()},
                  {"skip_bad", a.skip_bad ? "true" : "false"},
                  {"files", std::to_string(loaded.files)}};
  }
  m.corpus_hash = corpus_hash(corpus);
  write_with_manifest(a.out, m, [&](std::ostream& out, const std::string& hash) { write_corpus(out, corpus, hash); });

  auto stats = to_json(corpus_stats(corpus));
  stats["skipped_files"] = errors.size();
  std::cout << stats.dump(2) << '\n';
  return 0;
}

int run_stats(const std::string& corpus_file) {
  std::cout << to_json(corpus_stats(read_corpus_file(corpus_file))).dump(2) << '\n';
  return 0;
}

// -------------------------------------------------------------- utterances

struct UtteranceArgs {
  std::string corpus;
  std::string out;
  std::string mode = "both";
  std::size_t k = 15;
  std::vector<std::string> starts = {"a", "the"};
  std::string context_template;
  std::size_t workers = default_workers();
  LlmFlags llm;
};

int run_utterances(UtteranceArgs& a) {
  const Corpus corpus = read_corpus_file(a.corpus);
  SpaceOptions opts;
  opts.mode = space_mode_from_string(a.mode);
  opts.k = a.k;
  opts.starts = a.starts;
  std::optional<PromptTemplate> tmpl;
  if (!a.context_template.empty()) tmpl = PromptTemplate::load(a.context_template);
  opts.context_template = tmpl ? &*tmpl : &default_context_template();

  RunManifest m = base_manifest("utterances");
  m.corpus_hash = corpus_hash(corpus);
  m.upstream = {header_hash(a.corpus)};
  m.k = opts.mode == SpaceMode::logic ? 0 : a.k;
  m.template_hashes = {{"context", opts.context_template->hash()}};
  m.settings["mode"] = a.mode;
  m.settings["starts"] = fmt::format("{}", fmt::join(a.starts, ","));
  m.settings["workers"] = std::to_string(a.workers);

  std::shared_ptr<CachedLanguageModel> model;
  if (opts.mode != SpaceMode::logic) {
    model = open_model(a.llm);
    record_llm(m, a.llm, *model);
  }

  std::vector<SpaceResult> results(corpus.games.size());
  parallel_for(corpus.games.size(), a.workers,
               [&](std::size_t i) { results[i] = build_space(corpus.games[i], opts, model.get()); });

  std::vector<UtteranceSpace> spaces;
  std::size_t logic = 0, topk = 0, dropped = 0;
  for (auto& r : results) {
    logic += r.space.count(Provenance::logic);
    topk += r.space.count(Provenance::topk);
    dropped += r.dropped_duplicates;
    spaces.push_back(std::move(r.space));
  }
  write_with_manifest(a.out, m, [&](std::ostream& out, const std::string& hash) { write_spaces(out, spaces, hash); });

  nlohmann::ordered_json summary;
  summary["games"] = spaces.size();
  summary["logic"] = logic;
  summary["topk"] = topk;
  summary["dropped_duplicates"] = dropped;
  if (model) {
    summary["cache_hits"] = model->hits();
    summary["cache_misses"] = model->misses();
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

// ------------------------------------------------------------------- score

struct ScoreArgs {
  std::string corpus;
  std::string utterances;
  std::string out;
  std::string records_out;
  std::string mf = "both";
  int shots = 3;
  std::string lexicon;
  std::string mf_template;
  std::string context_template;
  std::vector<double> alphas;
  std::string cost_mode = "word-count";
  bool reuse_beam_scores = false;
  bool rescore_all = false;
  std::size_t workers = default_workers();
  LlmFlags llm;
};

int run_score(ScoreArgs& a) {
  if (a.reuse_beam_scores && a.rescore_all) throw Error("--paper-faithful and --rescore-all are exclusive");
  const Corpus corpus = read_corpus_file(a.corpus);
  const auto spaces = read_spaces_file(a.utterances);
  const auto alphas = parse_alphas(a.alphas);
  const CostMode cost_mode = cost_mode_from_string(a.cost_mode);

  ScoreOptions opts;
  opts.mfs = parse_mfs(a.mf);
  opts.lexicon = a.lexicon.empty() ? Lexicon::default_for(AttributeSchema::furniture()) : Lexicon::load(a.lexicon);
  opts.lexicon.validate(AttributeSchema::furniture());
  if (!a.mf_template.empty()) opts.prompt.tmpl = PromptTemplate::load(a.mf_template);
  opts.prompt.shots = a.shots;
  default_shots(a.shots);
  std::optional<PromptTemplate> ctx;
  if (!a.context_template.empty()) ctx = PromptTemplate::load(a.context_template);
  opts.context_template = ctx ? &*ctx : &default_context_template();
  opts.reuse_beam_scores = a.reuse_beam_scores;

  std::map<std::string, const UtteranceSpace*, std::less<>> by_game;
  for (const auto& s : spaces) by_game.emplace(s.game_id, &s);
  for (const auto& g : corpus.games)
    if (!by_game.contains(g.game_id))
      throw Error(fmt::format("game '{}' has no utterance space in '{}'", g.game_id, a.utterances));

  auto model = open_model(a.llm);
  RunManifest m = base_manifest("score");
  record_llm(m, a.llm, *model);
  m.corpus_hash = corpus_hash(corpus);
  m.upstream = {header_hash(a.corpus), header_hash(a.utterances)};
  if (const auto up = manifest_path_for(a.utterances); fs::exists(up)) {
    const RunManifest spaces_manifest = read_manifest(up);
    m.k = spaces_manifest.k;
    m.settings["utterance_mode"] = spaces_manifest.settings.contains("mode") ? spaces_manifest.settings.at("mode") : kNotApplicable;
  }
  m.lexicon_hash = opts.lexicon.hash();
  m.template_hashes = {{"context", opts.context_template->hash()}};
  if (std::ranges::find(opts.mfs, MfKind::prompt) != opts.mfs.end())
    m.template_hashes["meaning"] = opts.prompt.hash();
  m.alphas = alphas;
  m.cost_mode = std::string(to_string(cost_mode));
  m.settings["mf"] = a.mf;
  m.settings["shots"] = std::to_string(a.shots);
  m.settings["llm_scoring"] = a.reuse_beam_scores ? "paper-faithful" : "rescore-all";
  m.settings["workers"] = std::to_string(a.workers);

  std::vector<GameScores> scores(corpus.games.size());
  parallel_for(corpus.games.size(), a.workers, [&](std::size_t i) {
    const auto& game = corpus.games[i];
    scores[i] = score_game(game, *by_game.find(game.game_id)->second, *model, opts);
    spdlog::debug("scored {}", game.game_id);
  });

  std::vector<std::string> notes;
  const auto records = build_records(scores, alphas, {cost_mode, Prior::uniform()}, &notes);

  write_with_manifest(a.out, m, [&](std::ostream& out, const std::string& hash) { write_scores(out, scores, hash); });
  const fs::path records_path = a.records_out.empty() ? fs::path(a.out + ".records.tsv") : fs::path(a.records_out);
  {
    std::ofstream out(records_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}'", records_path.string()));
    write_records_tsv(out, records, header_hash(a.out));
  }

  nlohmann::ordered_json summary;
  summary["games"] = scores.size();
  summary["records"] = records.size();
  summary["notes"] = notes;
  summary["cache_hits"] = model->hits();
  summary["cache_misses"] = model->misses();
  std::cout << summary.dump(2) << '\n';
  return 0;
}

// ----------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string scores;
  std::string out_dir;
  std::vector<double> alphas;
  bool sweep = false;
  std::string llm_score_mode = "normalized-prob";
  std::string cost_mode;
  std::size_t min_group = 3;
  double bin_width = 0.05;
};

int run_analyze(const AnalyzeArgs& a) {
  const auto scores = read_scores_file(a.scores);
  const RunManifest upstream = read_manifest(manifest_path_for(a.scores));
  const std::vector<double> alphas =
      a.sweep ? std::vector<double>(kSweepAlphas.begin(), kSweepAlphas.end())
              : (a.alphas.empty() ? std::vector<double>{1.0} : parse_alphas(a.alphas));
  const CostMode cost_mode = cost_mode_from_string(a.cost_mode.empty() ? upstream.cost_mode : a.cost_mode);
  const LlmScoreMode mode = llm_score_mode_from_string(a.llm_score_mode);
  if (!(a.bin_width > 0.0 && a.bin_width <= 2.0)) throw Error("--bin-width must be in (0, 2]");
  GroupOptions groups{a.min_group, a.bin_width, false};

  std::set<MfKind> kinds;
  for (const auto& s : scores)
    for (const auto& mm : s.meanings) kinds.insert(mm.kind);
  const std::vector<MfKind> mfs(kinds.begin(), kinds.end());

  RunManifest m = upstream;
  m.stage = a.sweep ? "sweep-alpha" : "analyze";
  m.tool_version = tool_version();
  m.upstream = {header_hash(a.scores)};
  m.alphas = alphas;
  m.cost_mode = std::string(to_string(cost_mode));
  m.llm_score_mode = std::string(to_string(mode));
  m.settings["min_group_rows"] = std::to_string(a.min_group);
  m.settings["bin_width"] = fmt::format("{}", a.bin_width);
  m.started_at = utc_timestamp();

  std::vector<std::string> notes;
  const RecordOptions record_opts{cost_mode, Prior::uniform()};
  const auto records = build_records(scores, alphas, record_opts, &notes);
  // Speaker tables for every α are already in `records`; the builder just
  // hands them back so each report sees the same rows.
  auto reports = alpha_sweep([&](double) { return records; }, alphas, mfs, mode, groups);
  for (auto& r : reports) r.notes.insert(r.notes.end(), notes.begin(), notes.end());

  m.finished_at = utc_timestamp();
  const std::string hash = m.content_hash();
  fs::create_directories(a.out_dir);
  write_manifest(fs::path(a.out_dir) / "manifest.json", m);
  const auto emitted = emit_report(reports, records, a.out_dir, hash);

  for (const auto& r : reports) std::cout << summary_table(r);
  std::cout << '\n' << alpha_pcc_table(reports);
  spdlog::info("wrote {} files to {}", emitted.files.size() + 1, a.out_dir);
  return 0;
}

// ----------------------------------------------------------------- eval-mf

struct EvalArgs {
  std::string labels;
  std::string mf = "rule";
  std::vector<int> shots = {3, 6};
  std::vector<double> thresholds = {0.6, 0.8};
  std::string lexicon;
  std::string mf_template;
  std::string out;
  std::size_t workers = default_workers();
  LlmFlags llm;
};

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : "n/a"; }

int run_eval_mf(EvalArgs& a) {
  const auto& schema = AttributeSchema::furniture();
  const auto pairs = read_labels_file(a.labels, schema);
  if (pairs.empty()) throw Error(fmt::format("label file '{}' is empty", a.labels));
  std::vector<int> truth;
  for (const auto& p : pairs) truth.push_back(p.label);

  const auto mfs = parse_mfs(a.mf);
  const Lexicon lexicon = a.lexicon.empty() ? Lexicon::default_for(schema) : Lexicon::load(a.lexicon);
  nlohmann::ordered_json out;
  out["labels"] = a.labels;
  out["pairs"] = pairs.size();
  out["rows"] = nlohmann::ordered_json::array();
  std::string table = "mf\tshots\tthreshold\taccuracy\tprecision\trecall\n";

  const auto add_row = [&](std::string_view mf, std::optional<int> shots, const MFEvalReport& rep,
                           std::string_view kind) {
    auto row = to_json(rep);
    row["mf"] = mf;
    row["shots"] = shots ? nlohmann::ordered_json(*shots) : nlohmann::ordered_json();
    row["kind"] = kind;
    out["rows"].push_back(row);
    table += fmt::format("{}\t{}\t{}{}\t{}\t{}\t{}\n", mf, shots ? std::to_string(*shots) : "-",
                         fmt::format("{:g}", rep.threshold), kind == "best" ? " (best)" : "", cell(rep.accuracy),
                         cell(rep.precision), cell(rep.recall));
  };

  for (MfKind kind : mfs) {
    if (kind == MfKind::rule) {
      std::vector<int> predicted;
      for (const auto& p : pairs) predicted.push_back(rule_meaning(p.utterance, p.object, lexicon));
      auto rep = evaluate_mf(predicted, truth);
      rep.threshold = 1.0;
      add_row("rule", std::nullopt, rep, "fixed");
      continue;
    }
    auto model = open_model(a.llm);
    for (int n : a.shots) {
      PromptMeaningConfig cfg;
      if (!a.mf_template.empty()) cfg.tmpl = PromptTemplate::load(a.mf_template);
      cfg.shots = n;
      default_shots(n);
      std::vector<double> scores(pairs.size());
      parallel_for(pairs.size(), a.workers,
                   [&](std::size_t i) { scores[i] = prompt_meaning(pairs[i].utterance, pairs[i].object, *model, cfg); });
      for (double t : a.thresholds) {
        std::vector<int> predicted;
        for (double s : scores) predicted.push_back(binarize(s, t));
        auto rep = evaluate_mf(predicted, truth);
        rep.threshold = t;
        add_row("prompt", n, rep, "fixed");
      }
      add_row("prompt", n, sweep_threshold(scores, truth), "best");
    }
    out["model_id"] = model->model_id();
    out["endpoint"] = model->endpoint_identity();
  }

  if (!a.out.empty()) {
    std::ofstream file(a.out, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(fmt::format("cannot write '{}'", a.out));
    file << out.dump(2) << '\n';
  }
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compare LLM referring-expression scores with RSA speaker probabilities"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build a canonical corpus from TUNA XML or a synthetic generator");
  c_ingest->add_option("--tuna-dir", ingest.tuna_dir, "Directory of TUNA trial XML files")->check(CLI::ExistingDirectory);
  c_ingest->add_flag("--synthetic", ingest.synthetic, "Generate random furniture games");
  c_ingest->add_option("--seed", ingest.seed)->capture_default_str();
  c_ingest->add_option("--games", ingest.games)->capture_default_str();
  c_ingest->add_option("--objects", ingest.objects, "Objects per synthetic game")->capture_default_str();
  c_ingest->add_option("--out", ingest.out, "Corpus file (JSON lines)")->required();
  c_ingest->add_flag("--skip-bad", ingest.skip_bad, "Log and skip malformed trials");

  std::string stats_corpus;
  auto* c_stats = app.add_subcommand("stats", "Print corpus statistics");
  c_stats->add_option("--corpus", stats_corpus)->required()->check(CLI::ExistingFile);

  UtteranceArgs utt;
  auto* c_utt = app.add_subcommand("utterances", "Construct logic and/or top-k utterance spaces");
  c_utt->add_option("--corpus", utt.corpus)->required()->check(CLI::ExistingFile);
  c_utt->add_option("--out", utt.out)->required();
  c_utt->add_option("--mode", utt.mode)->check(CLI::IsMember({"logic", "topk", "both"}))->capture_default_str();
  c_utt->add_option("--k", utt.k, "Candidates per start word")->capture_default_str();
  c_utt->add_option("--starts", utt.starts)->delimiter(',')->capture_default_str();
  c_utt->add_option("--context-template", utt.context_template)->check(CLI::ExistingFile);
  c_utt->add_option("--workers", utt.workers)->capture_default_str();
  add_llm_flags(*c_utt, utt.llm);

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "LLM scores, meaning matrices and RSA records");
  c_score->add_option("--corpus", score.corpus)->required()->check(CLI::ExistingFile);
  c_score->add_option("--utterances", score.utterances)->required()->check(CLI::ExistingFile);
  c_score->add_option("--out", score.out)->required();
  c_score->add_option("--records-out", score.records_out, "Record table (default <out>.records.tsv)");
  c_score->add_option("--mf", score.mf, "rule, prompt or both")
      ->check(CLI::IsMember({"rule", "prompt", "both"}))
      ->capture_default_str();
  c_score->add_option("--shots", score.shots)->check(CLI::IsMember({3, 6}))->capture_default_str();
  c_score->add_option("--lexicon", score.lexicon)->check(CLI::ExistingFile);
  c_score->add_option("--mf-template", score.mf_template)->check(CLI::ExistingFile);
  c_score->add_option("--context-template", score.context_template)->check(CLI::ExistingFile);
  c_score->add_option("--alphas", score.alphas, "Default: the six-value sweep")->delimiter(',');
  c_score->add_option("--cost-mode", score.cost_mode)
      ->check(CLI::IsMember({"word-count", "token-count", "feature-count"}))
      ->capture_default_str();
  c_score->add_flag("--paper-faithful", score.reuse_beam_scores, "Reuse beam scores for the target's top-k rows");
  c_score->add_flag("--rescore-all", score.rescore_all, "Rescore every utterance (default)");
  c_score->add_option("--workers", score.workers)->capture_default_str();
  add_llm_flags(*c_score, score.llm);

  AnalyzeArgs analyze;
  const auto add_analyze = [&](CLI::App* c) {
    c->add_option("--scores", analyze.scores)->required()->check(CLI::ExistingFile);
    c->add_option("--out-dir", analyze.out_dir)->required();
    c->add_option("--llm-score-mode", analyze.llm_score_mode)
        ->check(CLI::IsMember({"normalized-prob", "raw-logprob"}))
        ->capture_default_str();
    c->add_option("--cost-mode", analyze.cost_mode, "Default: the one used by score")
        ->check(CLI::IsMember({"word-count", "token-count", "feature-count"}));
    c->add_option("--min-group", analyze.min_group, "Minimum rows per group")->capture_default_str();
    c->add_option("--bin-width", analyze.bin_width)->capture_default_str();
  };
  auto* c_analyze = app.add_subcommand("analyze", "Overall and per-group correlations");
  add_analyze(c_analyze);
  c_analyze->add_option("--alphas", analyze.alphas, "Default: 1.0")->delimiter(',');
  c_analyze->add_flag("--sweep-alpha", analyze.sweep, "Use the six-value sweep");
  auto* c_sweep = app.add_subcommand("sweep-alpha", "analyze --sweep-alpha");
  add_analyze(c_sweep);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval-mf", "Accuracy/precision/recall of meaning functions on labels");
  c_eval->add_option("--labels", eval.labels)->required();
  c_eval->add_option("--mf", eval.mf)->check(CLI::IsMember({"rule", "prompt", "both"}))->capture_default_str();
  c_eval->add_option("--shots", eval.shots)->delimiter(',')->capture_default_str();
  c_eval->add_option("--thresholds", eval.thresholds)->delimiter(',')->capture_default_str();
  c_eval->add_option("--lexicon", eval.lexicon)->check(CLI::ExistingFile);
  c_eval->add_option("--mf-template", eval.mf_template)->check(CLI::ExistingFile);
  c_eval->add_option("--out", eval.out, "JSON report");
  c_eval->add_option("--workers", eval.workers)->capture_default_str();
  add_llm_flags(*c_eval, eval.llm);

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("rsagame");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (c_ingest->parsed()) return run_ingest(ingest);
    if (c_stats->parsed()) return run_stats(stats_corpus);
    if (c_utt->parsed()) return run_utterances(utt);
    if (c_score->parsed()) return run_score(score);
    if (c_analyze->parsed()) return run_analyze(analyze);
    if (c_sweep->parsed()) {
      analyze.sweep = true;
      return run_analyze(analyze);
    }
    if (c_eval->parsed()) return run_eval_mf(eval);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}
