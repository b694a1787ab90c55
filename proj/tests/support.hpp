#pragma once

// Shared helpers for the test binaries: scratch directories, warning
// capture, scripted-backend shorthands, and random hierarchy generation.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "ontoext/gateway.hpp"
#include "ontoext/log.hpp"
#include "ontoext/ontology.hpp"

namespace testsup {

// Scratch directory removed on scope exit.
class TempDir {
public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    auto ticks = std::chrono::steady_clock::now().time_since_epoch().count();
    char name[64];
    std::snprintf(name, sizeof(name), "ontoext-test-%llx-%u",
                  static_cast<unsigned long long>(ticks), counter.fetch_add(1));
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

// Redirects warnings into `messages` for the lifetime of the object.
// Warnings can arrive from pipeline worker threads, hence the lock.
class WarnCapture {
public:
  WarnCapture() {
    ontoext::set_warn_sink([this](const std::string& m) {
      std::lock_guard<std::mutex> lock(mutex_);
      messages.push_back(m);
    });
  }
  ~WarnCapture() { ontoext::set_warn_sink(nullptr); }
  WarnCapture(const WarnCapture&) = delete;
  WarnCapture& operator=(const WarnCapture&) = delete;

  bool any_contains(const std::string& needle) const {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const std::string& m : messages)
      if (m.find(needle) != std::string::npos) return true;
    return false;
  }

  bool empty() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return messages.empty();
  }

  std::vector<std::string> messages;

private:
  mutable std::mutex mutex_;
};

inline ontoext::ProviderConfig scripted_provider(const std::filesystem::path& dir,
                                                 const std::string& model) {
  ontoext::ProviderConfig cfg;
  cfg.endpoint = "scripted:" + dir.string();
  cfg.model = model;
  return cfg;
}

inline ontoext::ConceptId dag_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "N:%03d", i);
  return ontoext::ConceptId(buf);
}

// Random DAG over `size` concepts: every non-first concept takes one parent
// among the earlier ones and sometimes a second, so the edge set is acyclic
// by construction. Roughly a quarter of the nodes end up with two parents.
inline ontoext::Ontology random_dag(std::mt19937& rng, int size) {
  ontoext::Ontology o;
  for (int i = 0; i < size; ++i) {
    ontoext::Concept c;
    c.id = dag_id(i);
    c.name = "node " + std::to_string(i);
    o.add_concept(std::move(c));
  }
  for (int i = 1; i < size; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    int first = pick(rng);
    o.add_edge(dag_id(first), dag_id(i));
    if (i > 1 && rng() % 4 == 0) {
      int second = pick(rng);
      if (second != first) o.add_edge(dag_id(second), dag_id(i));
    }
  }
  return o;
}

}  // namespace testsup
