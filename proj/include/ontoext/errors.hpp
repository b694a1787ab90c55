#pragma once

#include <stdexcept>
#include <string>

namespace ontoext {

// Base for everything thrown by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct parse_error : error { using error::error; };       // malformed input files
struct validation_error : error { using error::error; };  // structural invariants broken
struct lookup_error : error { using error::error; };      // unknown ids / missing records
struct duplicate_error : error { using error::error; };   // repeated id or insertion
struct argument_error : error { using error::error; };
struct io_error : error { using error::error; };
struct transport_error : error { using error::error; };   // endpoint unreachable, timeouts
struct format_error : error { using error::error; };      // unparseable model output
struct config_error : error { using error::error; };
struct ordering_error : error { using error::error; };    // pipeline stage run out of order

// Non-success HTTP status from a provider; carries the status code.
struct provider_error : error {
  int status;
  provider_error(int status_, const std::string& what_) : error(what_), status(status_) {}
};

}  // namespace ontoext
