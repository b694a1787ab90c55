#include "ontoext/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace ontoext {

namespace {
std::mutex g_mutex;
LogSink g_sink;
}  // namespace

void set_warn_sink(LogSink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void warn(const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (g_sink) {
    g_sink(message);
  } else {
    std::cerr << "warning: " << message << "\n";
  }
}

}  // namespace ontoext
