#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "demo_corpus.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the bundled demo corpus (notes, seed hierarchy, scripted "
               "model responses, config) into a directory"};
  std::string dir = "demo";
  app.add_option("dir", dir, "target directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    auto layout = ontoext::demo::write_demo(dir);
    std::printf("demo corpus written under %s\n", layout.root.string().c_str());
    std::printf("run: ontoext run-all --config %s\n", layout.config_file.string().c_str());
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
  return 0;
}
