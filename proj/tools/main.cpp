#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ontoext/errors.hpp"
#include "ontoext/pipeline.hpp"

namespace {

using ontoext::PipelineConfig;
using ontoext::Stage;
using ontoext::StageManifest;

struct CommonArgs {
  std::string config_path;
  std::optional<int> workers;
  std::optional<int> depth_guard_offset;
  std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "pipeline config file (JSON)")
      ->required();
  cmd->add_option("--workers", args.workers, "override worker count");
  cmd->add_option("--depth-guard-offset", args.depth_guard_offset,
                  "override the descent depth guard offset");
  cmd->add_option("--output", args.output_dir, "override the output directory");
}

PipelineConfig load_config(const CommonArgs& args) {
  PipelineConfig config = PipelineConfig::load(args.config_path);
  if (args.workers) config.workers = *args.workers;
  if (args.depth_guard_offset) config.depth_guard_offset = *args.depth_guard_offset;
  if (args.output_dir) config.output_dir = *args.output_dir;
  config.validate();
  return config;
}

// 0 clean, 1 when any work item failed.
int stage_exit(const StageManifest& manifest) { return manifest.all_ok() ? 0 : 1; }

int run_stages(const PipelineConfig& config, const std::vector<Stage>& stages) {
  int exit_code = 0;
  for (Stage stage : stages) {
    StageManifest manifest = ontoext::run_stage(config, stage);
    std::printf("stage %-7s %s\n", ontoext::stage_name(stage).c_str(),
                manifest.all_ok() ? "ok" : "completed with failures");
    exit_code = std::max(exit_code, stage_exit(manifest));
  }
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clinical-note hierarchy extension pipeline: mask identifiers, "
               "extract disease entities, grow the seed hierarchy, evaluate"};
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<std::pair<const char*, std::vector<Stage>>> stage_commands = {
      {"deid", {Stage::Deid}},
      {"extract", {Stage::Extract}},
      {"extend", {Stage::Extend}},
      {"eval", {Stage::Eval}},
      {"run-all", {Stage::Deid, Stage::Extract, Stage::Extend, Stage::Eval}},
  };
  std::vector<std::pair<CLI::App*, std::vector<Stage>>> parsed;
  for (auto& [name, stages] : stage_commands) {
    CLI::App* cmd = app.add_subcommand(
        name, stages.size() == 1 ? "run the " + std::string(name) + " stage"
                                 : "run every stage in order");
    add_common(cmd, args);
    parsed.emplace_back(cmd, stages);
  }
  CLI::App* report_cmd = app.add_subcommand("report", "print the evaluation summary");
  add_common(report_cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig config = load_config(args);
    if (report_cmd->parsed()) {
      std::fputs(ontoext::report(config).c_str(), stdout);
      return 0;
    }
    for (const auto& [cmd, stages] : parsed)
      if (cmd->parsed()) return run_stages(config, stages);
    return 2;  // unreachable: a subcommand is required
  } catch (const ontoext::config_error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  } catch (const ontoext::ordering_error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
}
