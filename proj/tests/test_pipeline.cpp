#include <doctest.h>

#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "demo_corpus.hpp"
#include "ontoext/deid.hpp"
#include "ontoext/errors.hpp"
#include "ontoext/fsio.hpp"
#include "ontoext/gateway.hpp"
#include "ontoext/pipeline.hpp"
#include "support.hpp"

using namespace ontoext;

namespace {

namespace fs = std::filesystem;

void rewrite_config(const fs::path& file,
                    const std::function<void(nlohmann::json&)>& edit) {
  nlohmann::json doc = nlohmann::json::parse(read_file(file));
  edit(doc);
  write_file_atomic(file, doc.dump(2) + "\n");
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      files[fs::relative(entry.path(), root).generic_string()] = read_file(entry.path());
  return files;
}

void run_all(const PipelineConfig& config) {
  for (Stage stage : {Stage::Deid, Stage::Extract, Stage::Extend, Stage::Eval})
    run_stage(config, stage);
}

}  // namespace

TEST_CASE("stage names round-trip and reject strangers") {
  for (Stage stage : {Stage::Deid, Stage::Extract, Stage::Extend, Stage::Eval})
    CHECK(stage_from(stage_name(stage)) == stage);
  CHECK_THROWS_AS(stage_from("bogus"), config_error);
}

TEST_CASE("the demo config loads with resolved paths") {
  testsup::TempDir dir;
  demo::DemoLayout layout = demo::write_demo(dir.path());
  PipelineConfig config = PipelineConfig::load(layout.config_file);

  CHECK(config.notes_path == layout.notes_dir);
  CHECK(config.ontology_path == layout.seed_obo);
  CHECK(config.output_dir == dir.path() / "out");
  CHECK(config.phi_gold == layout.gold_file);
  CHECK(config.workers == 2);
  CHECK(config.depth_guard_offset == 8);
  CHECK(config.scripted_only);
  CHECK(config.thresholds.reference == 90);
  CHECK(config.thresholds.eval == std::vector<int>{60, 70, 80});
  CHECK(config.pipeline_model.model == "scripted-chat");
  // The relative fixture directory resolves against the config file.
  CHECK(config.pipeline_model.endpoint == "scripted:" + layout.script_dir.string());
  CHECK(config.judge_model.model == "scripted-judge");
}

TEST_CASE("config violations are rejected up front") {
  testsup::TempDir dir;
  demo::DemoLayout layout = demo::write_demo(dir.path());

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(PipelineConfig::load(dir.path() / "nope.json"),
                         doctest::Contains("does not exist"), config_error);
  }
  SUBCASE("not JSON") {
    write_file_atomic(layout.config_file, "{");
    CHECK_THROWS_WITH_AS(PipelineConfig::load(layout.config_file),
                         doctest::Contains("not valid JSON"), config_error);
  }
  SUBCASE("missing notes key") {
    rewrite_config(layout.config_file, [](nlohmann::json& doc) { doc.erase("notes"); });
    CHECK_THROWS_AS(PipelineConfig::load(layout.config_file), config_error);
  }
  SUBCASE("threshold outside the percent range") {
    rewrite_config(layout.config_file,
                   [](nlohmann::json& doc) { doc["thresholds"]["reference"] = 150; });
    CHECK_THROWS_WITH_AS(PipelineConfig::load(layout.config_file),
                         doctest::Contains("outside [0,100]"), config_error);
  }
  SUBCASE("empty eval threshold list") {
    rewrite_config(layout.config_file, [](nlohmann::json& doc) {
      doc["thresholds"]["eval"] = nlohmann::json::array();
    });
    CHECK_THROWS_WITH_AS(PipelineConfig::load(layout.config_file),
                         doctest::Contains("empty"), config_error);
  }
  SUBCASE("zero workers") {
    rewrite_config(layout.config_file, [](nlohmann::json& doc) { doc["workers"] = 0; });
    CHECK_THROWS_WITH_AS(PipelineConfig::load(layout.config_file),
                         doctest::Contains("worker count"), config_error);
  }
  SUBCASE("scripted_only forbids live endpoints") {
    rewrite_config(layout.config_file, [](nlohmann::json& doc) {
      doc["judge_model"]["endpoint"] = "https://api.example.com/v1";
    });
    CHECK_THROWS_WITH_AS(PipelineConfig::load(layout.config_file),
                         doctest::Contains("not scripted"), config_error);
  }
  SUBCASE("vanished notes directory") {
    fs::remove_all(layout.notes_dir);
    CHECK_THROWS_WITH_AS(PipelineConfig::load(layout.config_file),
                         doctest::Contains("not a directory"), config_error);
  }
  SUBCASE("a notes directory with no notes fails at run time") {
    PipelineConfig config = PipelineConfig::load(layout.config_file);
    for (const fs::path& file : list_files_sorted(layout.notes_dir, ".txt"))
      fs::remove(file);
    CHECK_THROWS_WITH_AS(run_stage(config, Stage::Deid),
                         doctest::Contains("no .txt notes"), config_error);
  }
}

TEST_CASE("stages refuse to run out of order") {
  testsup::TempDir dir;
  demo::DemoLayout layout = demo::write_demo(dir.path());
  PipelineConfig config = PipelineConfig::load(layout.config_file);

  CHECK_THROWS_WITH_AS(run_stage(config, Stage::Extract),
                       doctest::Contains("requires stage deid"), ordering_error);
  CHECK_THROWS_WITH_AS(run_stage(config, Stage::Extend),
                       doctest::Contains("requires stage extract"), ordering_error);
  CHECK_THROWS_WITH_AS(run_stage(config, Stage::Eval),
                       doctest::Contains("requires stage"), ordering_error);
  CHECK_THROWS_WITH_AS(report(config), doctest::Contains("has not run"), ordering_error);

  StageManifest stub;
  stub.stage = "eval";
  stub.complete = false;
  stub.save(manifest_path(config, Stage::Eval));
  CHECK_THROWS_WITH_AS(report(config), doctest::Contains("incomplete"), ordering_error);
}

TEST_CASE("the full demo run lands on its expected numbers") {
  testsup::TempDir dir;
  demo::DemoLayout layout = demo::write_demo(dir.path());
  PipelineConfig config = PipelineConfig::load(layout.config_file);

  for (Stage stage : {Stage::Deid, Stage::Extract, Stage::Extend, Stage::Eval}) {
    StageManifest manifest = run_stage(config, stage);
    CHECK(manifest.complete);
    CHECK(manifest.all_ok());
  }

  // Masked notes carry placeholders instead of the identifiers.
  std::string masked001 = read_file(config.output_dir / "deid" / "masked" / "note001.txt");
  CHECK(masked001.find("[PERSON]") != std::string::npos);
  CHECK(masked001.find("John Maxwell") == std::string::npos);

  CHECK(read_jsonl(config.output_dir / "extract" / "corpus.jsonl").size() == 10);
  CHECK(read_jsonl(config.output_dir / "extend" / "traces.jsonl").size() == 10);
  CHECK(read_jsonl(config.output_dir / "extend" / "records.jsonl").size() == 7);
  CHECK(read_jsonl(config.output_dir / "eval" / "verdicts.jsonl").size() == 7);
  CHECK(read_jsonl(config.output_dir / "eval" / "reference.jsonl").size() == 8);

  nlohmann::json doc =
      nlohmann::json::parse(read_file(config.output_dir / "eval" / "report.json"));

  CHECK(doc["masking"]["notes"] == 3);
  CHECK(doc["masking"]["spans_masked"] == 17);

  CHECK(doc["recovery"]["reference_threshold"] == 90);
  CHECK(doc["recovery"]["reference_size"] == 8);
  CHECK(doc["recovery"]["candidates"] == 10);
  const auto& rows = doc["recovery"]["rows"];
  REQUIRE(rows.size() == 3);
  CHECK(rows[0]["threshold"] == 60);
  CHECK(rows[0]["true_positives"] == 3);
  CHECK(rows[0]["precision"].get<double>() == doctest::Approx(0.3));
  CHECK(rows[0]["recall"].get<double>() == doctest::Approx(0.375));
  CHECK(rows[0]["f1"].get<double>() == doctest::Approx(1.0 / 3.0));
  CHECK(rows[1]["true_positives"] == 3);
  CHECK(rows[2]["threshold"] == 80);
  CHECK(rows[2]["true_positives"] == 2);
  CHECK(rows[2]["precision"].get<double>() == doctest::Approx(0.2));
  CHECK(rows[2]["f1"].get<double>() == doctest::Approx(2.0 / 9.0));

  CHECK(doc["extension"]["inserted"] == 7);
  CHECK(doc["extension"]["already_present"] == 3);
  CHECK(doc["extension"]["failed"] == 0);
  CHECK(doc["extension"]["by_parent_layer"] == nlohmann::json({{"1", 1}, {"2", 6}}));

  CHECK(doc["judgement"]["correct"] == 5);
  CHECK(doc["judgement"]["incorrect"] == 1);
  CHECK(doc["judgement"]["not_sure"] == 1);
  CHECK(doc["judgement"]["precision"].get<double>() == doctest::Approx(250.0 / 3.0));

  CHECK(doc["identifiers"]["true_positives"] == 16);
  CHECK(doc["identifiers"]["predicted"] == 17);
  CHECK(doc["identifiers"]["gold"] == 17);
  CHECK(doc["identifiers"]["micro"]["precision"].get<double>() ==
        doctest::Approx(16.0 / 17.0));
  CHECK(doc["identifiers"]["micro"]["f1"].get<double>() == doctest::Approx(16.0 / 17.0));
  CHECK(doc["identifiers"]["macro"]["precision"].get<double>() ==
        doctest::Approx(0.9523809523809524));
  CHECK(doc["identifiers"]["macro"]["recall"].get<double>() ==
        doctest::Approx(0.9166666666666666));
  // Mean of per-note F1s, which is not the harmonic mean of the two above.
  CHECK(doc["identifiers"]["macro"]["f1"].get<double>() ==
        doctest::Approx(0.9267399267399267));

  CHECK(doc["failures"].is_array());
  CHECK(doc["failures"].empty());

  std::string rendered = report(config);
  CHECK(rendered == read_file(config.output_dir / "eval" / "report.txt"));
  CHECK(rendered.find("precision: 83.333") != std::string::npos);
  CHECK(rendered.find("reference concepts:  8") != std::string::npos);
  CHECK(rendered.find("failures: none") != std::string::npos);
}

TEST_CASE("a clean rerun rewrites nothing") {
  testsup::TempDir dir;
  demo::DemoLayout layout = demo::write_demo(dir.path());
  PipelineConfig config = PipelineConfig::load(layout.config_file);

  run_all(config);
  std::map<std::string, std::string> before = snapshot_tree(config.output_dir);
  run_all(config);
  CHECK(snapshot_tree(config.output_dir) == before);

  // Touching one raw note invalidates deid and downstream work reruns.
  fs::path note = layout.notes_dir / "note001.txt";
  write_file_atomic(note, read_file(note) + "Addendum: influenza suspected.\n");
  StageManifest manifest = run_stage(config, Stage::Deid);
  CHECK(manifest.complete);
  CHECK(manifest.inputs != StageManifest::from_json(
                               nlohmann::json::parse(before.at("deid.manifest.json")))
                               .inputs);
}

TEST_CASE("downstream stages never touch the raw notes") {
  testsup::TempDir dir;
  demo::DemoLayout layout = demo::write_demo(dir.path());
  PipelineConfig config = PipelineConfig::load(layout.config_file);

  run_stage(config, Stage::Deid);
  fs::remove_all(layout.notes_dir);

  for (Stage stage : {Stage::Extract, Stage::Extend, Stage::Eval})
    CHECK(run_stage(config, stage).all_ok());

  std::string rendered = report(config);
  CHECK(rendered.find("failures: none") != std::string::npos);
  // What left the de-identification stage carries no raw identifiers.
  CHECK(read_file(config.output_dir / "extract" / "corpus.jsonl")
            .find("John Maxwell") == std::string::npos);
  CHECK(rendered.find("Sarah Quinn") == std::string::npos);
}

TEST_CASE("one bad note fails alone and is retried on the next run") {
  testsup::TempDir dir;
  demo::DemoLayout layout = demo::write_demo(dir.path());
  PipelineConfig config = PipelineConfig::load(layout.config_file);

  ClinicalNote note002{"note002", read_file(layout.notes_dir / "note002.txt")};
  fs::path fixture =
      layout.script_dir / "chat" /
      (ScriptedBackend::chat_key("scripted-chat", phi_exchange(note002)) + ".txt");
  REQUIRE(fs::exists(fixture));
  fs::path hidden = fixture;
  hidden += ".hidden";
  fs::rename(fixture, hidden);

  StageManifest broken = run_stage(config, Stage::Deid);
  CHECK(broken.complete);
  CHECK_FALSE(broken.all_ok());
  CHECK(broken.notes.at("note001") == "ok");
  CHECK(broken.notes.at("note002").find("failed:") == 0);
  CHECK(broken.notes.at("note002").find("no scripted chat response") != std::string::npos);
  CHECK_FALSE(fs::exists(config.output_dir / "deid" / "masked" / "note002.txt"));

  // The surviving notes still flow downstream.
  StageManifest extract = run_stage(config, Stage::Extract);
  CHECK(extract.all_ok());
  CHECK(extract.notes.size() == 2);
  CHECK(extract.notes.count("note002") == 0);

  // Restoring the fixture and rerunning retries the failed note; the
  // failure recorded in the manifest blocks the unchanged-inputs shortcut.
  fs::rename(hidden, fixture);
  StageManifest repaired = run_stage(config, Stage::Deid);
  CHECK(repaired.all_ok());
  CHECK(fs::exists(config.output_dir / "deid" / "masked" / "note002.txt"));
  CHECK(run_stage(config, Stage::Extract).notes.size() == 3);
}

TEST_CASE("manifests key inputs by logical names, not paths") {
  testsup::TempDir dir_a, dir_b;
  demo::DemoLayout layout_a = demo::write_demo(dir_a.path());
  demo::DemoLayout layout_b = demo::write_demo(dir_b.path());
  PipelineConfig config_a = PipelineConfig::load(layout_a.config_file);
  PipelineConfig config_b = PipelineConfig::load(layout_b.config_file);

  run_stage(config_a, Stage::Deid);
  run_stage(config_b, Stage::Deid);

  std::string manifest_a = read_file(manifest_path(config_a, Stage::Deid));
  CHECK(manifest_a.find(dir_a.path().string()) == std::string::npos);
  for (const char* key : {"note:note001", "note:note002", "note:note003", "chat_model"})
    CHECK(manifest_a.find(key) != std::string::npos);

  // Identical corpora in different directories produce byte-identical
  // manifests, so state can be compared across machines.
  CHECK(manifest_a == read_file(manifest_path(config_b, Stage::Deid)));
}

TEST_CASE("stage manifests round-trip and reject garbage") {
  StageManifest manifest;
  manifest.stage = "deid";
  manifest.complete = true;
  manifest.inputs = {{"chat_model", "abc123"}, {"note:n1", "def456"}};
  manifest.notes = {{"n1", "ok"}, {"n2", "failed: backend unreachable"}};
  CHECK_FALSE(manifest.all_ok());

  StageManifest back = StageManifest::from_json(manifest.to_json());
  CHECK(back.stage == manifest.stage);
  CHECK(back.complete == manifest.complete);
  CHECK(back.inputs == manifest.inputs);
  CHECK(back.notes == manifest.notes);

  testsup::TempDir dir;
  fs::path path = dir.path() / "m.json";
  manifest.save(path);
  StageManifest loaded = StageManifest::load(path);
  CHECK(loaded.inputs == manifest.inputs);

  write_file_atomic(path, "not json at all");
  CHECK_THROWS_AS(StageManifest::load(path), parse_error);
}

TEST_CASE("credential values stay out of every artifact") {
  testsup::TempDir dir;
  demo::DemoLayout layout = demo::write_demo(dir.path());
  const std::string canary = "canary-secret-0xdead";
  setenv("ONTOEXT_SCAN_KEY", canary.c_str(), 1);
  rewrite_config(layout.config_file, [](nlohmann::json& doc) {
    for (const char* model : {"pipeline_model", "embedding_model", "judge_model"})
      doc[model]["api_key_env"] = "ONTOEXT_SCAN_KEY";
  });

  PipelineConfig config = PipelineConfig::load(layout.config_file);
  CHECK(config.pipeline_model.api_key_env == "ONTOEXT_SCAN_KEY");

  testsup::WarnCapture warnings;
  run_all(config);
  std::string rendered = report(config);

  CHECK(rendered.find(canary) == std::string::npos);
  for (const auto& [name, content] : snapshot_tree(dir.path())) {
    INFO("file: " << name);
    CHECK(content.find(canary) == std::string::npos);
  }
  for (const std::string& message : warnings.messages)
    CHECK(message.find(canary) == std::string::npos);
  unsetenv("ONTOEXT_SCAN_KEY");
}
