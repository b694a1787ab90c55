#include "ontoext/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "ontoext/errors.hpp"
#include "ontoext/fsio.hpp"
#include "ontoext/strutil.hpp"

namespace ontoext {

namespace {

constexpr char kFieldSep = '\x1f';

std::string body_excerpt(const std::string& body) {
  if (body.size() <= 200) return body;
  return body.substr(0, 200) + "...";
}

// Splits "https://host:port/v1" into client target and path prefix.
struct EndpointParts {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path portion, no trailing slash
};

EndpointParts split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw config_error("endpoint must start with http:// or https://: " + endpoint);
  auto path_start = endpoint.find('/', scheme_end + 3);
  EndpointParts parts;
  if (path_start == std::string::npos) {
    parts.origin = endpoint;
  } else {
    parts.origin = endpoint.substr(0, path_start);
    parts.prefix = endpoint.substr(path_start);
  }
  while (!parts.prefix.empty() && parts.prefix.back() == '/') parts.prefix.pop_back();
  return parts;
}

class HttpBackend : public Backend {
public:
  std::string complete(const ProviderConfig& cfg, const ChatExchange& exchange) override {
    nlohmann::json payload = {
        {"model", cfg.model},
        {"messages",
         {{{"role", "system"}, {"content", exchange.system_prompt}},
          {{"role", "user"}, {"content", exchange.user_prompt}}}},
        {"temperature", exchange.temperature},
        {"max_tokens", exchange.max_tokens},
    };
    nlohmann::json reply = post_json(cfg, "/chat/completions", payload);
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw format_error(std::string("chat response missing choices[0].message.content: ") +
                         ex.what());
    }
  }

  std::vector<double> embed(const ProviderConfig& cfg, const std::string& text) override {
    nlohmann::json payload = {{"model", cfg.model}, {"input", text}};
    nlohmann::json reply = post_json(cfg, "/embeddings", payload);
    try {
      return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& ex) {
      throw format_error(std::string("embedding response missing data[0].embedding: ") +
                         ex.what());
    }
  }

private:
  nlohmann::json post_json(const ProviderConfig& cfg, const std::string& route,
                           const nlohmann::json& payload) {
    EndpointParts parts = split_endpoint(cfg.endpoint);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_seconds));

    httplib::Headers headers;
    if (!cfg.api_key_env.empty()) {
      // Credential is resolved per call and lives only in this request's
      // headers; it is never copied into any long-lived structure.
      const char* key = std::getenv(cfg.api_key_env.c_str());
      if (key == nullptr || *key == '\0')
        throw config_error("environment variable " + cfg.api_key_env + " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = client.Post(parts.prefix + route, headers, payload.dump(), "application/json");
    if (!res)
      throw transport_error("request to " + parts.origin + route + " failed: " +
                            httplib::to_string(res.error()));
    if (res->status != 200)
      throw provider_error(res->status, "provider returned status " +
                                            std::to_string(res->status) + ": " +
                                            body_excerpt(res->body));
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& ex) {
      throw format_error(std::string("provider body is not JSON: ") + ex.what());
    }
  }
};

bool retryable(const std::exception& ex) {
  if (dynamic_cast<const transport_error*>(&ex) != nullptr) return true;
  if (const auto* pe = dynamic_cast<const provider_error*>(&ex))
    return pe->status >= 500 || pe->status == 429;
  return false;
}

// Scans one balanced JSON value starting at text[start] ('{' or '['),
// honouring string literals and escapes. Returns npos when unbalanced.
std::size_t balanced_end(const std::string& text, std::size_t start) {
  char open = text[start];
  char close = open == '{' ? '}' : ']';
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == open) {
      ++depth;
    } else if (c == close) {
      if (--depth == 0) return i;
    }
  }
  return std::string::npos;
}

std::string coerce_scalar(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  if (value.is_number_float()) {
    std::ostringstream out;
    out << value.get<double>();
    return out.str();
  }
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  throw format_error("expected a scalar value, got " + std::string(value.type_name()));
}

// mapping_of_lists: object whose values are arrays of scalars.
bool shape_mapping(const nlohmann::json& value, nlohmann::json& out) {
  if (!value.is_object()) return false;
  nlohmann::json result = nlohmann::json::object();
  for (const auto& [key, entry] : value.items()) {
    if (!entry.is_array()) return false;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& item : entry) {
      if (item.is_object() || item.is_array() || item.is_null()) return false;
      list.push_back(coerce_scalar(item));
    }
    result[key] = std::move(list);
  }
  out = std::move(result);
  return true;
}

bool shape_list(const nlohmann::json& value, nlohmann::json& out) {
  if (!value.is_array()) return false;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& item : value) {
    if (item.is_object() || item.is_array() || item.is_null()) return false;
    list.push_back(coerce_scalar(item));
  }
  out = std::move(list);
  return true;
}

// Tries every balanced {...} / [...] region left to right.
bool extract_json_payload(const std::string& raw, PayloadShape shape, nlohmann::json& out) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    bool want = (shape == PayloadShape::MappingOfLists) ? (c == '{')
                                                        : (c == '{' || c == '[');
    if (shape == PayloadShape::ListOfStrings) want = (c == '[');
    if (!want) continue;
    std::size_t end = balanced_end(raw, i);
    if (end == std::string::npos) continue;
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw.substr(i, end - i + 1));
    } catch (const nlohmann::json::parse_error&) {
      continue;
    }
    bool ok = (shape == PayloadShape::MappingOfLists) ? shape_mapping(value, out)
                                                      : shape_list(value, out);
    if (ok) return true;
    i = end;  // skip past this candidate, keep scanning
  }
  return false;
}

// Single labels arrive in many dresses: bare word, quoted string, a one-key
// object, or prose ending in "... : Label".
std::string extract_label(const std::string& raw) {
  std::string text = trim(raw);
  if (text.empty()) throw format_error("empty response where a label was expected");

  // Strip a ``` fence if the whole reply is wrapped in one.
  if (text.rfind("```", 0) == 0) {
    auto first_newline = text.find('\n');
    auto closing = text.rfind("```");
    if (first_newline != std::string::npos && closing > first_newline)
      text = trim(text.substr(first_newline + 1, closing - first_newline - 1));
  }

  // A JSON string or a small object with a label-ish key.
  if (!text.empty() && (text.front() == '"' || text.front() == '{')) {
    try {
      nlohmann::json value = nlohmann::json::parse(text);
      if (value.is_string()) return trim(value.get<std::string>());
      if (value.is_object()) {
        for (const char* key : {"label", "relation", "answer", "verdict", "classification"})
          if (value.contains(key) && value[key].is_string())
            return trim(value[key].get<std::string>());
        if (value.size() == 1 && value.begin().value().is_string())
          return trim(value.begin().value().get<std::string>());
      }
    } catch (const nlohmann::json::parse_error&) {
    }
  }

  // Last non-empty line, if short enough to be a label on its own.
  std::string last_line;
  {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      std::string t = trim(line);
      if (!t.empty()) last_line = t;
    }
  }
  if (!last_line.empty()) {
    while (!last_line.empty() &&
           (last_line.back() == '.' || last_line.back() == '!'))
      last_line.pop_back();
    last_line = trim(last_line);
    std::string candidate = last_line;
    auto colon = candidate.rfind(':');
    if (colon != std::string::npos) candidate = trim(candidate.substr(colon + 1));
    if (!candidate.empty() && split_ws(candidate).size() <= 3) return candidate;
  }
  throw format_error("could not isolate a label in: " + body_excerpt(raw));
}

}  // namespace

double EmbeddingVector::norm() const {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

nlohmann::json parse_structured(const std::string& raw, PayloadShape shape) {
  if (shape == PayloadShape::SingleLabel) return nlohmann::json(extract_label(raw));
  nlohmann::json out;
  if (extract_json_payload(raw, shape, out)) return out;
  const char* wanted = shape == PayloadShape::MappingOfLists
                           ? "an object mapping names to string lists"
                           : "an array of strings";
  throw format_error(std::string("no payload shaped like ") + wanted +
                     " in: " + body_excerpt(raw));
}

ScriptedBackend::ScriptedBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_))
    throw config_error("scripted backend directory does not exist: " + dir_.string());
}

std::string ScriptedBackend::chat_key(const std::string& model, const ChatExchange& exchange) {
  std::string canon = "chat";
  canon += kFieldSep;
  canon += model;
  canon += kFieldSep;
  canon += exchange.system_prompt;
  canon += kFieldSep;
  canon += exchange.user_prompt;
  return hex64(fnv1a64(canon));
}

std::string ScriptedBackend::embed_key(const std::string& model, const std::string& text) {
  std::string canon = "embed";
  canon += kFieldSep;
  canon += model;
  canon += kFieldSep;
  canon += text;
  return hex64(fnv1a64(canon));
}

std::string ScriptedBackend::complete(const ProviderConfig& cfg, const ChatExchange& exchange) {
  auto path = dir_ / "chat" / (chat_key(cfg.model, exchange) + ".txt");
  if (!std::filesystem::exists(path))
    throw lookup_error("no scripted chat response for this prompt (expected " + path.string() +
                       ")");
  return read_file(path);
}

std::vector<double> ScriptedBackend::embed(const ProviderConfig& cfg, const std::string& text) {
  auto path = dir_ / "embed" / (embed_key(cfg.model, text) + ".json");
  if (!std::filesystem::exists(path))
    throw lookup_error("no scripted embedding for \"" + body_excerpt(text) + "\" (expected " +
                       path.string() + ")");
  nlohmann::json value = nlohmann::json::parse(read_file(path));
  return value.get<std::vector<double>>();
}

void ScriptedBackend::script_chat(const std::filesystem::path& dir, const std::string& model,
                                  const ChatExchange& exchange, const std::string& response) {
  auto path = dir / "chat" / (chat_key(model, exchange) + ".txt");
  std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, response);
}

void ScriptedBackend::script_embedding(const std::filesystem::path& dir, const std::string& model,
                                       const std::string& text,
                                       const std::vector<double>& values) {
  auto path = dir / "embed" / (embed_key(model, text) + ".json");
  std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, nlohmann::json(values).dump());
}

std::unique_ptr<Backend> make_backend(const ProviderConfig& cfg) {
  if (cfg.scripted())
    return std::make_unique<ScriptedBackend>(cfg.endpoint.substr(std::string("scripted:").size()));
  return std::make_unique<HttpBackend>();
}

ModelGateway::TokenBucket::TokenBucket(double per_second)
    : per_second_(per_second),
      tokens_(per_second > 0 ? 1.0 : 0.0),
      last_(std::chrono::steady_clock::now()) {}

void ModelGateway::TokenBucket::acquire() {
  if (per_second_ <= 0) return;
  std::unique_lock lock(mutex_);
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    tokens_ += std::chrono::duration<double>(now - last_).count() * per_second_;
    last_ = now;
    if (tokens_ > 1.0) tokens_ = 1.0;  // burst of one keeps spacing even
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    double wait = (1.0 - tokens_) / per_second_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

ModelGateway::ModelGateway(ProviderConfig cfg) : ModelGateway(cfg, make_backend(cfg)) {}

ModelGateway::ModelGateway(ProviderConfig cfg, std::unique_ptr<Backend> backend)
    : cfg_(std::move(cfg)),
      backend_(std::move(backend)),
      bucket_(cfg_.requests_per_second) {}

namespace {

// Retries transport failures and retryable provider statuses with doubling
// backoff (50ms base, 2s ceiling). Anything else propagates immediately.
template <typename Fn>
auto with_retry(int max_retries, Fn&& fn) -> decltype(fn()) {
  int attempt = 0;
  for (;;) {
    try {
      return fn();
    } catch (const error& ex) {
      if (!retryable(ex) || attempt >= max_retries) throw;
      auto delay = std::chrono::milliseconds(50) * (1 << attempt);
      if (delay > std::chrono::milliseconds(2000)) delay = std::chrono::milliseconds(2000);
      std::this_thread::sleep_for(delay);
      ++attempt;
    }
  }
}

}  // namespace

std::string ModelGateway::complete(ChatExchange& exchange) {
  bucket_.acquire();
  std::string reply = with_retry(cfg_.max_retries,
                                 [&] { return backend_->complete(cfg_, exchange); });
  exchange.raw_response = reply;
  return reply;
}

EmbeddingVector ModelGateway::embed(const std::string& text) {
  if (text.empty()) throw argument_error("cannot embed empty text");
  {
    std::shared_lock lock(cache_mutex_);
    auto it = cache_.find(text);
    if (it != cache_.end()) return it->second;
  }
  bucket_.acquire();
  std::vector<double> values =
      with_retry(cfg_.max_retries, [&] { return backend_->embed(cfg_, text); });
  if (values.empty()) throw format_error("provider returned an empty embedding");
  if (cfg_.embedding_dim > 0 && static_cast<int>(values.size()) != cfg_.embedding_dim)
    throw format_error("embedding dimension " + std::to_string(values.size()) +
                       " does not match configured " + std::to_string(cfg_.embedding_dim));
  EmbeddingVector vec{std::move(values)};
  std::unique_lock lock(cache_mutex_);
  auto [it, inserted] = cache_.emplace(text, std::move(vec));
  return it->second;
}

std::size_t ModelGateway::embed_cache_size() const {
  std::shared_lock lock(cache_mutex_);
  return cache_.size();
}

nlohmann::json request_structured(ModelGateway& gateway, ChatExchange exchange,
                                  PayloadShape shape) {
  const std::string original_user = exchange.user_prompt;
  std::string last_error;
  for (int attempt = 0; attempt <= 2; ++attempt) {
    if (attempt > 0) {
      const char* reminder = shape == PayloadShape::MappingOfLists
                                 ? "Respond with only a JSON object mapping each "
                                   "category to a list of strings. No prose."
                             : shape == PayloadShape::ListOfStrings
                                 ? "Respond with only a JSON array of strings. No prose."
                                 : "Respond with only the label itself. No prose.";
      exchange.user_prompt =
          original_user + "\n\nYour previous reply could not be parsed. " + reminder;
    }
    std::string raw = gateway.complete(exchange);
    try {
      return parse_structured(raw, shape);
    } catch (const format_error& ex) {
      last_error = ex.what();
    }
  }
  throw format_error("response stayed malformed after 2 re-prompts: " + last_error);
}

}  // namespace ontoext
