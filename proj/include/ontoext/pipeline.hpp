#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontoext/gateway.hpp"

namespace ontoext {

struct ThresholdConfig {
  int reference = 90;                 // fuzzy cutoff for reference construction
  std::vector<int> eval = {60, 70, 80};  // cutoffs the recovery table reports
};

struct PipelineConfig {
  std::filesystem::path notes_path;     // directory of raw .txt notes
  std::filesystem::path ontology_path;  // seed hierarchy, OBO format
  std::filesystem::path output_dir;
  ProviderConfig pipeline_model;   // chat model for masking, extraction, relations
  ProviderConfig embedding_model;
  ProviderConfig judge_model;
  ThresholdConfig thresholds;
  int workers = 1;
  int depth_guard_offset = 8;
  std::filesystem::path phi_gold;  // optional gold identifier inventories (jsonl)
  bool scripted_only = false;      // refuse any non-scripted endpoint

  // Parses the JSON config file; relative paths resolve against the file's
  // directory. Violated invariants raise config_error.
  static PipelineConfig load(const std::filesystem::path& path);

  void validate() const;
};

enum class Stage { Deid, Extract, Extend, Eval };

std::string stage_name(Stage stage);
Stage stage_from(const std::string& name);  // config_error for unknown names

struct StageManifest {
  std::string stage;
  bool complete = false;
  // Logical input name -> content hash; keys are stable identifiers like
  // "note:note001", never filesystem paths, so manifests compare byte-equal
  // across machines.
  std::map<std::string, std::string> inputs;
  // Work item -> "ok" or "failed: <reason>".
  std::map<std::string, std::string> notes;

  bool all_ok() const;

  nlohmann::json to_json() const;
  static StageManifest from_json(const nlohmann::json& value);
  static StageManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

std::filesystem::path manifest_path(const PipelineConfig& config, Stage stage);

// Executes one stage: checks the predecessor manifest (ordering_error when
// missing or incomplete), skips work when input hashes are unchanged, writes
// outputs atomically, and records per-item status instead of throwing on
// individual failures.
StageManifest run_stage(const PipelineConfig& config, Stage stage);

// Renders the evaluation summary as text. Requires the eval stage to be
// complete (ordering_error otherwise).
std::string report(const PipelineConfig& config);

}  // namespace ontoext
