#pragma once

#include <functional>
#include <string>

namespace ontoext {

using LogSink = std::function<void(const std::string&)>;

// Replace the warning sink (tests capture warnings this way); nullptr
// restores the default stderr sink.
void set_warn_sink(LogSink sink);

void warn(const std::string& message);

}  // namespace ontoext
