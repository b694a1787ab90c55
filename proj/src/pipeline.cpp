#include "ontoext/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <set>

#include "ontoext/deid.hpp"
#include "ontoext/entity_extract.hpp"
#include "ontoext/errors.hpp"
#include "ontoext/evalkit.hpp"
#include "ontoext/extend.hpp"
#include "ontoext/fsio.hpp"
#include "ontoext/obo.hpp"
#include "ontoext/ontology.hpp"
#include "ontoext/parallel.hpp"
#include "ontoext/strutil.hpp"

namespace ontoext {

namespace {

namespace fs = std::filesystem;

std::string hash_string(const std::string& content) { return hex64(fnv1a64(content)); }

std::string jsonl_of(const std::vector<nlohmann::ordered_json>& records) {
  std::string out;
  for (const auto& record : records) {
    out += record.dump();
    out += '\n';
  }
  return out;
}

ProviderConfig provider_from(const nlohmann::json& value, const std::string& key) {
  if (!value.contains(key)) throw config_error("config is missing \"" + key + "\"");
  const nlohmann::json& entry = value.at(key);
  ProviderConfig cfg;
  try {
    cfg.endpoint = entry.at("endpoint").get<std::string>();
    cfg.model = entry.at("model").get<std::string>();
    cfg.api_key_env = entry.value("api_key_env", std::string{});
    cfg.timeout_seconds = entry.value("timeout_seconds", 30.0);
    cfg.max_retries = entry.value("max_retries", 2);
    cfg.embedding_dim = entry.value("embedding_dim", 0);
    cfg.requests_per_second = entry.value("requests_per_second", 0.0);
  } catch (const nlohmann::json::exception& ex) {
    throw config_error("config \"" + key + "\" is malformed: " + ex.what());
  }
  return cfg;
}

// A scripted endpoint's fixture directory is a path too; resolve it so the
// config works regardless of the process working directory.
void resolve_scripted(ProviderConfig& cfg, const fs::path& base) {
  const std::string prefix = "scripted:";
  if (!cfg.scripted()) return;
  fs::path dir = cfg.endpoint.substr(prefix.size());
  if (dir.is_relative()) cfg.endpoint = prefix + (base / dir).lexically_normal().string();
}

// The fingerprint a provider contributes to stage inputs: a model swap or
// endpoint change must invalidate the stage, a credential never appears. A
// scripted endpoint collapses to its kind so manifests stay byte-identical
// when the fixture directory moves.
std::string provider_fingerprint(const ProviderConfig& cfg) {
  std::string endpoint = cfg.scripted() ? "scripted" : cfg.endpoint;
  return hash_string(endpoint + "\x1f" + cfg.model);
}

struct StagePaths {
  fs::path dir;         // output_dir/<stage>
  fs::path manifest;

  explicit StagePaths(const PipelineConfig& config, Stage stage)
      : dir(config.output_dir / stage_name(stage)),
        manifest(manifest_path(config, stage)) {}
};

StageManifest predecessor_manifest(const PipelineConfig& config, Stage stage,
                                   Stage predecessor) {
  fs::path path = manifest_path(config, predecessor);
  if (!fs::exists(path))
    throw ordering_error("stage " + stage_name(stage) + " requires stage " +
                         stage_name(predecessor) + " to run first");
  StageManifest manifest = StageManifest::load(path);
  if (!manifest.complete)
    throw ordering_error("stage " + stage_name(predecessor) +
                         " is incomplete; rerun it before " + stage_name(stage));
  return manifest;
}

// Returns the previous manifest when the stage already ran cleanly over
// byte-identical inputs. A manifest with failures never short-circuits, so
// reruns retry failed items.
std::optional<StageManifest> unchanged(const StagePaths& paths,
                                       const std::map<std::string, std::string>& inputs) {
  if (!fs::exists(paths.manifest)) return std::nullopt;
  StageManifest previous = StageManifest::load(paths.manifest);
  if (!previous.complete || !previous.all_ok()) return std::nullopt;
  if (previous.inputs != inputs) return std::nullopt;
  return previous;
}

std::vector<std::string> ok_items(const StageManifest& manifest, const std::string& prefix) {
  std::vector<std::string> items;
  for (const auto& [key, status] : manifest.notes)
    if (status == "ok" && key.rfind(prefix, 0) == 0)
      items.push_back(key.substr(prefix.size()));
  return items;
}

nlohmann::ordered_json inventory_line(const std::string& note_id,
                                      const PhiInventory& inventory) {
  nlohmann::ordered_json line;
  line["note_id"] = note_id;
  line["identifiers"] = inventory.to_json();
  return line;
}

StageManifest run_deid(const PipelineConfig& config) {
  StagePaths paths(config, Stage::Deid);

  struct RawNote {
    std::string id;
    std::string text;
  };
  std::vector<RawNote> notes;
  for (const fs::path& file : list_files_sorted(config.notes_path, ".txt"))
    notes.push_back({file.stem().string(), read_file(file)});
  if (notes.empty())
    throw config_error("no .txt notes under " + config.notes_path.string());

  std::map<std::string, std::string> inputs;
  inputs["chat_model"] = provider_fingerprint(config.pipeline_model);
  for (const RawNote& note : notes) inputs["note:" + note.id] = hash_string(note.text);
  if (auto previous = unchanged(paths, inputs)) return *previous;

  ModelGateway gateway(config.pipeline_model);
  std::vector<PhiInventory> inventories(notes.size());
  std::vector<std::string> masked(notes.size());
  std::vector<MaskStats> stats(notes.size());
  std::vector<std::string> status(notes.size(), "ok");

  run_parallel(notes.size(), config.workers, [&](std::size_t i) {
    try {
      ClinicalNote note{notes[i].id, notes[i].text};
      inventories[i] = extract_phi(gateway, note);
      masked[i] = mask(note.text, inventories[i], &stats[i]);
    } catch (const error& ex) {
      status[i] = std::string("failed: ") + ex.what();
    }
  });

  fs::create_directories(paths.dir / "masked");
  std::vector<nlohmann::ordered_json> inventory_lines;
  std::vector<nlohmann::ordered_json> mask_lines;
  StageManifest manifest;
  manifest.stage = stage_name(Stage::Deid);
  manifest.inputs = inputs;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    manifest.notes[notes[i].id] = status[i];
    if (status[i] != "ok") continue;
    write_file_atomic(paths.dir / "masked" / (notes[i].id + ".txt"), masked[i]);
    inventory_lines.push_back(inventory_line(notes[i].id, inventories[i]));
    nlohmann::ordered_json mask_line;
    mask_line["note_id"] = notes[i].id;
    mask_line["spans_masked"] = stats[i].spans_masked;
    nlohmann::ordered_json per_category = nlohmann::json::object();
    for (const auto& [category, count] : stats[i].per_category)
      per_category[phi_category_name(category)] = count;
    mask_line["per_category"] = std::move(per_category);
    mask_lines.push_back(std::move(mask_line));
  }
  write_file_atomic(paths.dir / "inventories.jsonl", jsonl_of(inventory_lines));
  write_file_atomic(paths.dir / "masklog.jsonl", jsonl_of(mask_lines));

  manifest.complete = true;
  manifest.save(paths.manifest);
  return manifest;
}

StageManifest run_extract(const PipelineConfig& config) {
  StagePaths paths(config, Stage::Extract);
  StageManifest deid = predecessor_manifest(config, Stage::Extract, Stage::Deid);

  struct MaskedNote {
    std::string id;
    std::string text;
  };
  std::vector<MaskedNote> notes;
  for (const auto& [note_id, note_status] : deid.notes) {
    if (note_status != "ok") continue;
    fs::path file = config.output_dir / "deid" / "masked" / (note_id + ".txt");
    notes.push_back({note_id, read_file(file)});
  }

  std::map<std::string, std::string> inputs;
  inputs["chat_model"] = provider_fingerprint(config.pipeline_model);
  for (const MaskedNote& note : notes) inputs["masked:" + note.id] = hash_string(note.text);
  if (auto previous = unchanged(paths, inputs)) return *previous;

  ModelGateway gateway(config.pipeline_model);
  std::vector<CandidateEntitySet> sets(notes.size());
  std::vector<std::string> status(notes.size(), "ok");

  run_parallel(notes.size(), config.workers, [&](std::size_t i) {
    try {
      ClinicalNote note{notes[i].id, notes[i].text};
      sets[i] = extract_diseases(gateway, note);
    } catch (const error& ex) {
      status[i] = std::string("failed: ") + ex.what();
    }
  });

  fs::create_directories(paths.dir);
  StageManifest manifest;
  manifest.stage = stage_name(Stage::Extract);
  manifest.inputs = inputs;
  std::vector<CandidateEntitySet> ok_sets;
  std::vector<nlohmann::ordered_json> candidate_lines;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    manifest.notes[notes[i].id] = status[i];
    if (status[i] != "ok") continue;
    candidate_lines.push_back(sets[i].to_json());
    ok_sets.push_back(std::move(sets[i]));
  }
  write_file_atomic(paths.dir / "candidates.jsonl", jsonl_of(candidate_lines));

  std::vector<nlohmann::ordered_json> corpus_lines;
  for (const CorpusCandidate& candidate : merge_candidates(ok_sets)) {
    nlohmann::ordered_json line;
    line["normalized"] = candidate.normalized;
    line["surface"] = candidate.surface;
    line["note_ids"] = candidate.note_ids;
    corpus_lines.push_back(std::move(line));
  }
  write_file_atomic(paths.dir / "corpus.jsonl", jsonl_of(corpus_lines));

  manifest.complete = true;
  manifest.save(paths.manifest);
  return manifest;
}

std::vector<CorpusCandidate> load_corpus(const fs::path& path) {
  std::vector<CorpusCandidate> corpus;
  for (const nlohmann::json& line : read_jsonl(path)) {
    CorpusCandidate candidate;
    candidate.normalized = line.at("normalized").get<std::string>();
    candidate.surface = line.at("surface").get<std::string>();
    candidate.note_ids = line.at("note_ids").get<std::vector<std::string>>();
    corpus.push_back(std::move(candidate));
  }
  return corpus;
}

StageManifest run_extend(const PipelineConfig& config) {
  StagePaths paths(config, Stage::Extend);
  predecessor_manifest(config, Stage::Extend, Stage::Extract);

  fs::path corpus_path = config.output_dir / "extract" / "corpus.jsonl";
  std::map<std::string, std::string> inputs;
  inputs["chat_model"] = provider_fingerprint(config.pipeline_model);
  inputs["embedding_model"] = provider_fingerprint(config.embedding_model);
  inputs["ontology"] = hash_file(config.ontology_path);
  inputs["corpus"] = hash_string(read_file(corpus_path));
  inputs["depth_guard"] = hash_string(std::to_string(config.depth_guard_offset));
  if (auto previous = unchanged(paths, inputs)) return *previous;

  Ontology ontology = parse_obo_file(config.ontology_path);
  std::vector<CorpusCandidate> corpus = load_corpus(corpus_path);
  std::vector<std::string> entities;
  for (const CorpusCandidate& candidate : corpus) entities.push_back(candidate.normalized);

  ModelGateway chat(config.pipeline_model);
  ModelGateway embedder(config.embedding_model);
  ExtendOptions options;
  options.depth_guard_offset = config.depth_guard_offset;
  // Insertions must land before the next entity walks, so this stage is
  // sequential by design regardless of the worker count.
  ExtensionRun run = extend_all(ontology, entities, chat, embedder, options);

  fs::create_directories(paths.dir);
  StageManifest manifest;
  manifest.stage = stage_name(Stage::Extend);
  manifest.inputs = inputs;

  std::vector<nlohmann::ordered_json> trace_lines;
  for (const ExtensionTrace& trace : run.traces) {
    trace_lines.push_back(trace_to_json(trace));
    std::string item = "entity:" + trace.entity;
    manifest.notes[item] = trace.outcome.kind == ExtensionOutcome::Kind::Failed
                               ? "failed: " + trace.outcome.reason
                               : "ok";
  }
  write_file_atomic(paths.dir / "traces.jsonl", jsonl_of(trace_lines));

  std::vector<nlohmann::ordered_json> record_lines;
  for (const InsertionRecord& record : run.records) {
    nlohmann::ordered_json line;
    line["new_entity"] = record.new_entity;
    line["new_id"] = record.new_id.value;
    line["parent_id"] = record.parent_id.value;
    line["parent_name"] = record.parent_name;
    line["layer"] = record.layer;
    line["trace_ref"] = record.trace_ref;
    record_lines.push_back(std::move(line));
  }
  write_file_atomic(paths.dir / "records.jsonl", jsonl_of(record_lines));
  {
    std::ostringstream extension;
    serialize_extension(ontology, run.records, extension);
    write_file_atomic(paths.dir / "extension.txt", extension.str());
    std::ostringstream extended;
    serialize_obo(ontology, extended);
    write_file_atomic(paths.dir / "extended.obo", extended.str());
  }

  manifest.complete = true;
  manifest.save(paths.manifest);
  return manifest;
}

std::vector<InsertionRecord> load_records(const fs::path& path) {
  std::vector<InsertionRecord> records;
  for (const nlohmann::json& line : read_jsonl(path)) {
    InsertionRecord record;
    record.new_entity = line.at("new_entity").get<std::string>();
    record.new_id = ConceptId(line.at("new_id").get<std::string>());
    record.parent_id = ConceptId(line.at("parent_id").get<std::string>());
    record.parent_name = line.at("parent_name").get<std::string>();
    record.layer = line.at("layer").get<int>();
    record.trace_ref = line.value("trace_ref", std::string{});
    records.push_back(std::move(record));
  }
  return records;
}

std::map<std::string, PhiInventory> load_inventories(const fs::path& path) {
  std::map<std::string, PhiInventory> inventories;
  for (const nlohmann::json& line : read_jsonl(path)) {
    inventories[line.at("note_id").get<std::string>()] =
        PhiInventory::from_json(line.at("identifiers"));
  }
  return inventories;
}

nlohmann::ordered_json prf_json(const PrfResult& result, int threshold) {
  nlohmann::ordered_json row;
  row["threshold"] = threshold;
  row["precision"] = result.precision;
  row["recall"] = result.recall;
  row["f1"] = result.f1;
  row["true_positives"] = result.true_positives;
  row["predicted"] = result.predicted;
  row["reference"] = result.reference;
  row["degenerate"] = result.degenerate;
  return row;
}

StageManifest run_eval(const PipelineConfig& config) {
  StagePaths paths(config, Stage::Eval);
  predecessor_manifest(config, Stage::Eval, Stage::Extend);
  StageManifest deid = predecessor_manifest(config, Stage::Eval, Stage::Deid);

  fs::path corpus_path = config.output_dir / "extract" / "corpus.jsonl";
  fs::path records_path = config.output_dir / "extend" / "records.jsonl";

  std::vector<std::string> note_ids = ok_items(deid, "");
  std::vector<std::string> masked_texts;
  std::map<std::string, std::string> inputs;
  for (const std::string& note_id : note_ids) {
    std::string text = read_file(config.output_dir / "deid" / "masked" / (note_id + ".txt"));
    inputs["masked:" + note_id] = hash_string(text);
    masked_texts.push_back(std::move(text));
  }
  inputs["judge_model"] = provider_fingerprint(config.judge_model);
  inputs["ontology"] = hash_file(config.ontology_path);
  inputs["corpus"] = hash_string(read_file(corpus_path));
  inputs["records"] = hash_string(read_file(records_path));
  {
    nlohmann::ordered_json thresholds;
    thresholds["reference"] = config.thresholds.reference;
    thresholds["eval"] = config.thresholds.eval;
    inputs["thresholds"] = hash_string(thresholds.dump());
  }
  if (!config.phi_gold.empty()) {
    inputs["phi_gold"] = hash_file(config.phi_gold);
    inputs["inventories"] = hash_string(read_file(config.output_dir / "deid" / "inventories.jsonl"));
  }
  if (auto previous = unchanged(paths, inputs)) return *previous;

  Ontology seed = parse_obo_file(config.ontology_path);
  std::vector<CorpusCandidate> corpus = load_corpus(corpus_path);
  std::vector<InsertionRecord> records = load_records(records_path);

  fs::create_directories(paths.dir);
  StageManifest manifest;
  manifest.stage = stage_name(Stage::Eval);
  manifest.inputs = inputs;
  nlohmann::ordered_json doc;

  // Masking totals come from the earlier stage's log.
  {
    std::size_t spans = 0;
    for (const nlohmann::json& line :
         read_jsonl(config.output_dir / "deid" / "masklog.jsonl"))
      spans += line.at("spans_masked").get<std::size_t>();
    nlohmann::ordered_json masking;
    masking["notes"] = note_ids.size();
    masking["spans_masked"] = spans;
    doc["masking"] = std::move(masking);
  }

  try {
    ReferenceSet reference =
        build_reference(seed, masked_texts, config.thresholds.reference);
    std::vector<nlohmann::ordered_json> reference_lines;
    for (const std::string& name : reference.names)
      reference_lines.push_back(nlohmann::ordered_json{{"name", name}});
    write_file_atomic(paths.dir / "reference.jsonl", jsonl_of(reference_lines));

    nlohmann::ordered_json recovery;
    recovery["reference_threshold"] = config.thresholds.reference;
    recovery["reference_size"] = reference.names.size();
    recovery["candidates"] = corpus.size();
    nlohmann::ordered_json rows = nlohmann::json::array();
    for (int threshold : config.thresholds.eval)
      rows.push_back(prf_json(prf_at(corpus, reference, threshold), threshold));
    recovery["rows"] = std::move(rows);
    doc["recovery"] = std::move(recovery);
    manifest.notes["reference"] = "ok";
    manifest.notes["recovery"] = "ok";
  } catch (const error& ex) {
    manifest.notes["reference"] = std::string("failed: ") + ex.what();
    manifest.notes["recovery"] = manifest.notes["reference"];
  }

  // Extension outcome counts come from the traces.
  {
    std::size_t inserted = 0, already = 0, failed = 0;
    for (const nlohmann::json& line :
         read_jsonl(config.output_dir / "extend" / "traces.jsonl")) {
      std::string outcome = line.at("outcome").get<std::string>();
      if (outcome == "inserted") ++inserted;
      else if (outcome == "already_present") ++already;
      else ++failed;
    }
    nlohmann::ordered_json extension;
    extension["inserted"] = inserted;
    extension["already_present"] = already;
    extension["failed"] = failed;
    std::map<int, std::size_t> by_layer;
    for (const InsertionRecord& record : records) ++by_layer[record.layer];
    nlohmann::ordered_json layers = nlohmann::json::object();
    for (const auto& [layer, count] : by_layer) layers[std::to_string(layer)] = count;
    extension["by_parent_layer"] = std::move(layers);
    doc["extension"] = std::move(extension);
  }

  try {
    ModelGateway judge(config.judge_model);
    std::vector<JudgeVerdict> verdicts(records.size());
    run_parallel(records.size(), config.workers,
                 [&](std::size_t i) { verdicts[i] = judge_extension(judge, records[i]); });

    std::vector<nlohmann::ordered_json> verdict_lines;
    for (const JudgeVerdict& verdict : verdicts) {
      nlohmann::ordered_json line;
      line["new_entity"] = verdict.new_entity;
      line["parent_name"] = verdict.parent_name;
      line["relation"] = verdict.relation;
      line["label"] = judge_label_name(verdict.label);
      if (!verdict.note.empty()) line["note"] = verdict.note;
      verdict_lines.push_back(std::move(line));
    }
    write_file_atomic(paths.dir / "verdicts.jsonl", jsonl_of(verdict_lines));

    JudgeTally tallied = tally(verdicts);
    nlohmann::ordered_json judgement;
    judgement["correct"] = tallied.correct;
    judgement["incorrect"] = tallied.incorrect;
    judgement["not_sure"] = tallied.not_sure;
    if (auto precision = judge_precision(tallied))
      judgement["precision"] = *precision;
    else
      judgement["precision"] = nullptr;
    doc["judgement"] = std::move(judgement);
    manifest.notes["judgement"] = "ok";
  } catch (const error& ex) {
    manifest.notes["judgement"] = std::string("failed: ") + ex.what();
  }

  if (!config.phi_gold.empty()) {
    try {
      auto predicted = load_inventories(config.output_dir / "deid" / "inventories.jsonl");
      auto gold = load_inventories(config.phi_gold);
      PhiEvaluation eval = evaluate_phi(predicted, gold);
      nlohmann::ordered_json identifiers;
      identifiers["micro"] = {{"precision", eval.micro.precision},
                              {"recall", eval.micro.recall},
                              {"f1", eval.micro.f1}};
      identifiers["macro"] = {{"precision", eval.macro_avg.precision},
                              {"recall", eval.macro_avg.recall},
                              {"f1", eval.macro_avg.f1}};
      identifiers["true_positives"] = eval.true_positives;
      identifiers["predicted"] = eval.predicted;
      identifiers["gold"] = eval.gold;
      doc["identifiers"] = std::move(identifiers);
      manifest.notes["identifiers"] = "ok";
    } catch (const error& ex) {
      manifest.notes["identifiers"] = std::string("failed: ") + ex.what();
    }
  }

  // Every failure across the run, gathered for the report's tail section.
  {
    nlohmann::ordered_json failures = nlohmann::json::array();
    for (Stage stage : {Stage::Deid, Stage::Extract, Stage::Extend}) {
      fs::path path = manifest_path(config, stage);
      if (!fs::exists(path)) continue;
      StageManifest loaded = StageManifest::load(path);
      for (const auto& [item, item_status] : loaded.notes)
        if (item_status != "ok")
          failures.push_back({{"stage", loaded.stage}, {"item", item}, {"status", item_status}});
    }
    for (const auto& [item, item_status] : manifest.notes)
      if (item_status != "ok")
        failures.push_back(
            {{"stage", stage_name(Stage::Eval)}, {"item", item}, {"status", item_status}});
    doc["failures"] = std::move(failures);
  }

  write_file_atomic(paths.dir / "report.json", doc.dump(2) + "\n");

  manifest.complete = true;
  manifest.save(paths.manifest);

  // report.txt is a rendering of report.json; write it last so the report
  // subcommand and the file always agree.
  write_file_atomic(paths.dir / "report.txt", report(config));
  return manifest;
}

std::string format_double(double value, int places) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", places, value);
  return buffer;
}

std::string format_report(const nlohmann::json& doc) {
  std::string out;
  out += "pipeline report\n";
  out += "===============\n\n";

  if (doc.contains("masking")) {
    const auto& masking = doc.at("masking");
    out += "identifier masking\n";
    out += "  notes processed: " + std::to_string(masking.at("notes").get<std::size_t>()) + "\n";
    out += "  spans masked:    " +
           std::to_string(masking.at("spans_masked").get<std::size_t>()) + "\n\n";
  }

  if (doc.contains("recovery")) {
    const auto& recovery = doc.at("recovery");
    out += "entity recovery (reference threshold " +
           std::to_string(recovery.at("reference_threshold").get<int>()) + ")\n";
    out += "  reference concepts:  " +
           std::to_string(recovery.at("reference_size").get<std::size_t>()) + "\n";
    out += "  distinct candidates: " +
           std::to_string(recovery.at("candidates").get<std::size_t>()) + "\n";
    out += "  threshold  precision  recall      f1\n";
    for (const auto& row : recovery.at("rows")) {
      char line[128];
      std::snprintf(line, sizeof(line), "  %9d     %.4f  %.4f  %.4f", row.at("threshold").get<int>(),
                    row.at("precision").get<double>(), row.at("recall").get<double>(),
                    row.at("f1").get<double>());
      out += line;
      if (row.value("degenerate", false)) out += "  (empty reference)";
      out += "\n";
    }
    out += "\n";
  }

  if (doc.contains("extension")) {
    const auto& extension = doc.at("extension");
    std::size_t inserted = extension.at("inserted").get<std::size_t>();
    out += "hierarchy extension\n";
    out += "  inserted:        " + std::to_string(inserted) + "\n";
    out += "  already present: " +
           std::to_string(extension.at("already_present").get<std::size_t>()) + "\n";
    out += "  failed:          " + std::to_string(extension.at("failed").get<std::size_t>()) + "\n";
    if (inserted == 0) {
      out += "  no insertions; the seed hierarchy is unchanged\n";
    } else {
      out += "  insertions by parent layer:";
      for (const auto& [layer, count] : extension.at("by_parent_layer").items())
        out += " " + layer + ":" + std::to_string(count.get<std::size_t>());
      out += "\n";
    }
    out += "\n";
  }

  if (doc.contains("judgement")) {
    const auto& judgement = doc.at("judgement");
    out += "placement judgement\n";
    out += "  correct: " + std::to_string(judgement.at("correct").get<std::size_t>()) +
           "   incorrect: " + std::to_string(judgement.at("incorrect").get<std::size_t>()) +
           "   not sure: " + std::to_string(judgement.at("not_sure").get<std::size_t>()) + "\n";
    if (judgement.at("precision").is_null())
      out += "  precision: n/a (no decided verdicts)\n";
    else
      out += "  precision: " + format_double(judgement.at("precision").get<double>(), 3) + "\n";
    out += "\n";
  }

  if (doc.contains("identifiers")) {
    const auto& identifiers = doc.at("identifiers");
    auto prf_line = [&](const char* name, const nlohmann::json& scores) {
      return std::string("  ") + name + "  P " +
             format_double(scores.at("precision").get<double>(), 4) + "  R " +
             format_double(scores.at("recall").get<double>(), 4) + "  F1 " +
             format_double(scores.at("f1").get<double>(), 4) + "\n";
    };
    out += "identifier recovery vs gold\n";
    out += prf_line("micro", identifiers.at("micro"));
    out += prf_line("macro", identifiers.at("macro"));
    out += "\n";
  }

  const auto& failures = doc.at("failures");
  if (failures.empty()) {
    out += "failures: none\n";
  } else {
    out += "failures:\n";
    for (const auto& failure : failures)
      out += "  [" + failure.at("stage").get<std::string>() + "] " +
             failure.at("item").get<std::string>() + ": " +
             failure.at("status").get<std::string>() + "\n";
  }
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw config_error("config file does not exist: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& ex) {
    throw config_error("config is not valid JSON: " + std::string(ex.what()));
  }

  fs::path base = fs::absolute(path).parent_path();
  auto resolve = [&](const std::string& value) -> fs::path {
    fs::path p = value;
    return p.is_relative() ? (base / p).lexically_normal() : p;
  };

  PipelineConfig config;
  try {
    config.notes_path = resolve(doc.at("notes").get<std::string>());
    config.ontology_path = resolve(doc.at("ontology").get<std::string>());
    config.output_dir = resolve(doc.at("output").get<std::string>());
    config.pipeline_model = provider_from(doc, "pipeline_model");
    config.embedding_model = provider_from(doc, "embedding_model");
    config.judge_model = provider_from(doc, "judge_model");
    if (doc.contains("thresholds")) {
      const auto& thresholds = doc.at("thresholds");
      config.thresholds.reference = thresholds.value("reference", 90);
      if (thresholds.contains("eval"))
        config.thresholds.eval = thresholds.at("eval").get<std::vector<int>>();
    }
    config.workers = doc.value("workers", 1);
    config.depth_guard_offset = doc.value("depth_guard_offset", 8);
    if (doc.contains("phi_gold"))
      config.phi_gold = resolve(doc.at("phi_gold").get<std::string>());
    config.scripted_only = doc.value("scripted_only", false);
  } catch (const nlohmann::json::exception& ex) {
    throw config_error("config is malformed: " + std::string(ex.what()));
  }

  resolve_scripted(config.pipeline_model, base);
  resolve_scripted(config.embedding_model, base);
  resolve_scripted(config.judge_model, base);

  config.validate();
  return config;
}

void PipelineConfig::validate() const {
  if (!fs::is_directory(notes_path))
    throw config_error("notes path is not a directory: " + notes_path.string());
  if (!fs::is_regular_file(ontology_path))
    throw config_error("ontology path is not a file: " + ontology_path.string());
  if (output_dir.empty()) throw config_error("output directory is not set");
  if (workers < 1) throw config_error("worker count must be at least 1");
  auto check_threshold = [](int value, const std::string& name) {
    if (value < 0 || value > 100)
      throw config_error(name + " threshold " + std::to_string(value) +
                         " is outside [0,100]");
  };
  check_threshold(thresholds.reference, "reference");
  if (thresholds.eval.empty()) throw config_error("eval threshold list is empty");
  for (int value : thresholds.eval) check_threshold(value, "eval");
  if (!phi_gold.empty() && !fs::is_regular_file(phi_gold))
    throw config_error("gold identifier path is not a file: " + phi_gold.string());
  if (scripted_only) {
    for (const ProviderConfig* provider :
         {&pipeline_model, &embedding_model, &judge_model})
      if (!provider->scripted())
        throw config_error("scripted_only is set but endpoint \"" + provider->endpoint +
                           "\" is not scripted");
  }
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Deid: return "deid";
    case Stage::Extract: return "extract";
    case Stage::Extend: return "extend";
    case Stage::Eval: return "eval";
  }
  throw argument_error("unknown stage value");
}

Stage stage_from(const std::string& name) {
  if (name == "deid") return Stage::Deid;
  if (name == "extract") return Stage::Extract;
  if (name == "extend") return Stage::Extend;
  if (name == "eval") return Stage::Eval;
  throw config_error("unknown stage \"" + name + "\"");
}

bool StageManifest::all_ok() const {
  for (const auto& [item, status] : notes)
    if (status != "ok") return false;
  return true;
}

nlohmann::json StageManifest::to_json() const {
  nlohmann::ordered_json out;
  out["stage"] = stage;
  out["complete"] = complete;
  out["inputs"] = inputs;
  out["notes"] = notes;
  return out;
}

StageManifest StageManifest::from_json(const nlohmann::json& value) {
  StageManifest manifest;
  manifest.stage = value.at("stage").get<std::string>();
  manifest.complete = value.at("complete").get<bool>();
  manifest.inputs = value.at("inputs").get<std::map<std::string, std::string>>();
  manifest.notes = value.at("notes").get<std::map<std::string, std::string>>();
  return manifest;
}

StageManifest StageManifest::load(const fs::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& ex) {
    throw parse_error("manifest " + path.string() + " is unreadable: " + ex.what());
  }
}

void StageManifest::save(const fs::path& path) const {
  fs::create_directories(path.parent_path());
  write_file_atomic(path, to_json().dump(2) + "\n");
}

std::filesystem::path manifest_path(const PipelineConfig& config, Stage stage) {
  return config.output_dir / (stage_name(stage) + ".manifest.json");
}

StageManifest run_stage(const PipelineConfig& config, Stage stage) {
  switch (stage) {
    case Stage::Deid: return run_deid(config);
    case Stage::Extract: return run_extract(config);
    case Stage::Extend: return run_extend(config);
    case Stage::Eval: return run_eval(config);
  }
  throw argument_error("unknown stage value");
}

std::string report(const PipelineConfig& config) {
  fs::path path = manifest_path(config, Stage::Eval);
  if (!fs::exists(path))
    throw ordering_error("the eval stage has not run; nothing to report");
  StageManifest manifest = StageManifest::load(path);
  if (!manifest.complete)
    throw ordering_error("the eval stage is incomplete; rerun it before reporting");
  fs::path report_path = config.output_dir / "eval" / "report.json";
  if (!fs::exists(report_path))
    throw ordering_error("eval outputs are missing: " + report_path.string());
  return format_report(nlohmann::json::parse(read_file(report_path)));
}

}  // namespace ontoext
