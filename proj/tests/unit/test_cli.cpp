#include "paths.hpp"
#include "process.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = RSAGAME_CLI;

CommandResult cli(const std::string& args) {
  return run_command("SOURCE_DATE_EPOCH=1700000000 " + quote(kCli) + " " + args);
}

}  // namespace

TEST_CASE("synthetic ingest is reproducible") {
  const auto dir = scratch_dir("cli_ingest");
  for (const char* name : {"a.jsonl", "b.jsonl"}) {
    const auto r = cli("ingest --synthetic --games 3 --objects 4 --seed 9 --out " + quote(dir / name));
    REQUIRE_MESSAGE(r.status == 0, r.output);
  }
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(slurp(dir / "a.jsonl.manifest.json") == slurp(dir / "b.jsonl.manifest.json"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "a.jsonl.manifest.json"));
  CHECK(manifest["started_at"] == "2023-11-14T22:13:20Z");
  CHECK(manifest["stage"] == "ingest");

  const auto other = cli("ingest --synthetic --games 3 --objects 4 --seed 10 --out " + quote(dir / "c.jsonl"));
  REQUIRE(other.status == 0);
  CHECK(slurp(dir / "c.jsonl") != slurp(dir / "a.jsonl"));

  const auto stats = cli("stats --corpus " + quote(dir / "a.jsonl"));
  REQUIRE(stats.status == 0);
  CHECK(stats.output.find("\"games\": 3") != std::string::npos);
}

TEST_CASE("TUNA ingest rejects bad files unless told to skip them") {
  const auto dir = scratch_dir("cli_tuna");
  const auto bad = data_dir() / "tuna" / "bad";
  const auto strict = cli("ingest --tuna-dir " + quote(bad) + " --out " + quote(dir / "x.jsonl"));
  CHECK(strict.status != 0);
  CHECK(strict.output.find("missing attribute 'orientation'") != std::string::npos);
  const auto lenient = cli("ingest --tuna-dir " + quote(bad) + " --skip-bad --out " + quote(dir / "x.jsonl"));
  CHECK(lenient.status == 0);
  CHECK(lenient.output.find("\"skipped_files\": 1") != std::string::npos);
  const auto good = cli("ingest --tuna-dir " + quote(data_dir() / "tuna" / "good") + " --out " + quote(dir / "g.jsonl"));
  CHECK(good.status == 0);
  CHECK(good.output.find("\"games\": 14") != std::string::npos);
}

TEST_CASE("logic utterances without a model") {
  const auto dir = scratch_dir("cli_logic");
  REQUIRE(cli("ingest --synthetic --games 2 --objects 2 --out " + quote(dir / "c.jsonl")).status == 0);
  const auto r = cli("utterances --corpus " + quote(dir / "c.jsonl") + " --mode logic --out " + quote(dir / "u.jsonl"));
  REQUIRE_MESSAGE(r.status == 0, r.output);
  CHECK(r.output.find("\"topk\": 0") != std::string::npos);
  CHECK(fs::exists(dir / "u.jsonl.manifest.json"));

  const auto no_model = cli("utterances --corpus " + quote(dir / "c.jsonl") + " --mode topk --offline --out " +
                            quote(dir / "t.jsonl"));
  CHECK(no_model.status != 0);
}

TEST_CASE("eval-mf on the logic label set") {
  const auto r = cli("eval-mf --labels " + quote(data_dir() / "labels" / "logic_labels.jsonl") + " --mf rule");
  REQUIRE_MESSAGE(r.status == 0, r.output);
  CHECK(r.output.find("rule\t-\t1\t1.000\t1.000\t1.000") != std::string::npos);
}

TEST_CASE("errors name the offending input") {
  const auto missing = cli("eval-mf --labels /nonexistent/labels.jsonl --mf rule");
  CHECK(missing.status == 1);
  CHECK(missing.output.find("/nonexistent/labels.jsonl") != std::string::npos);

  const auto dir = scratch_dir("cli_errors");
  const auto both = cli("score --corpus x --utterances y --out " + quote(dir / "s.jsonl") +
                        " --mock --paper-faithful --rescore-all");
  CHECK(both.status != 0);

  const auto unknown = cli("frobnicate");
  CHECK(unknown.status != 0);
}
