#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace ontoext {

// One chat-completion request/response. complete() fills raw_response.
struct ChatExchange {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;  // pinned to 0 everywhere for reproducible runs
  int max_tokens = 1024;
  std::string raw_response;
};

struct EmbeddingVector {
  std::vector<double> values;

  int dimension() const { return static_cast<int>(values.size()); }
  double norm() const;
};

struct ProviderConfig {
  // "https://host/v1" for an OpenAI-compatible endpoint, or "scripted:<dir>"
  // for the deterministic fixture-driven backend.
  std::string endpoint;
  std::string model;
  // Name of the environment variable holding the credential. The credential
  // itself is read at request time and never stored or logged.
  std::string api_key_env;
  double timeout_seconds = 30.0;
  int max_retries = 2;  // additional attempts after the first
  int embedding_dim = 0;  // expected dimension; 0 accepts whatever arrives
  double requests_per_second = 0.0;  // 0 = unthrottled

  bool scripted() const { return endpoint.rfind("scripted:", 0) == 0; }
};

// What a structured reply should look like after the prose is peeled away.
enum class PayloadShape { MappingOfLists, ListOfStrings, SingleLabel };

// Extracts the first well-formed payload of the requested shape from raw
// model output: code fences and surrounding commentary are tolerated, scalar
// values are coerced to strings. Throws format_error when nothing matches.
nlohmann::json parse_structured(const std::string& raw, PayloadShape shape);

class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string complete(const ProviderConfig& cfg, const ChatExchange& exchange) = 0;
  virtual std::vector<double> embed(const ProviderConfig& cfg, const std::string& text) = 0;
};

// Fixture-driven stand-in for live providers: responses live in
// <dir>/chat/<key>.txt and <dir>/embed/<key>.json where <key> hashes the
// request. Referentially transparent across process restarts.
class ScriptedBackend : public Backend {
public:
  explicit ScriptedBackend(std::filesystem::path dir);

  std::string complete(const ProviderConfig& cfg, const ChatExchange& exchange) override;
  std::vector<double> embed(const ProviderConfig& cfg, const std::string& text) override;

  static std::string chat_key(const std::string& model, const ChatExchange& exchange);
  static std::string embed_key(const std::string& model, const std::string& text);

  // Fixture writers used by tests and the demo generator.
  static void script_chat(const std::filesystem::path& dir, const std::string& model,
                          const ChatExchange& exchange, const std::string& response);
  static void script_embedding(const std::filesystem::path& dir, const std::string& model,
                               const std::string& text, const std::vector<double>& values);

private:
  std::filesystem::path dir_;
};

// Picks ScriptedBackend or the HTTP client from the endpoint string.
std::unique_ptr<Backend> make_backend(const ProviderConfig& cfg);

// Uniform front door to one provider: retry with exponential backoff on
// transport failures, an exact-text embedding cache, and a token-bucket rate
// limit. Request methods are safe for concurrent use.
class ModelGateway {
public:
  explicit ModelGateway(ProviderConfig cfg);
  ModelGateway(ProviderConfig cfg, std::unique_ptr<Backend> backend);  // injected for tests

  // Returns assistant text and stores it in exchange.raw_response.
  std::string complete(ChatExchange& exchange);

  // Throws argument_error for empty text; identical text hits the cache.
  EmbeddingVector embed(const std::string& text);

  const ProviderConfig& config() const { return cfg_; }
  std::size_t embed_cache_size() const;

private:
  class TokenBucket {
  public:
    explicit TokenBucket(double per_second);
    void acquire();

   private:
    double per_second_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
  };

  ProviderConfig cfg_;
  std::unique_ptr<Backend> backend_;
  TokenBucket bucket_;
  mutable std::shared_mutex cache_mutex_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
};

// complete() plus structured parsing with a bounded recovery loop: up to two
// re-prompts carrying a format reminder, then format_error.
nlohmann::json request_structured(ModelGateway& gateway, ChatExchange exchange,
                                  PayloadShape shape);

}  // namespace ontoext
