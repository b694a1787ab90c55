#pragma once

#include <filesystem>

namespace ontoext::demo {

struct DemoLayout {
  std::filesystem::path root;
  std::filesystem::path notes_dir;
  std::filesystem::path seed_obo;
  std::filesystem::path script_dir;
  std::filesystem::path config_file;
  std::filesystem::path gold_file;
};

// Materializes a self-contained three-note corpus under `dir`: raw notes, a
// fifteen-concept seed hierarchy, scripted responses for every model call
// the pipeline will make, gold identifier inventories, and a ready-to-run
// config. The same corpus backs the test suite and the README walkthrough.
DemoLayout write_demo(const std::filesystem::path& dir);

}  // namespace ontoext::demo
