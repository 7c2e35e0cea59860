#pragma once

#include "syncog/audio.hpp"
#include "syncog/prompts.hpp"
#include "syncog/timbre.hpp"
#include "syncog/types.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace syncog::services {

struct RetryPolicy {
  int max_attempts = 5;
  int base_backoff_ms = 500;
  double jitter_fraction = 0.2;
  double multiplier = 2.0;
};

struct EndpointConfig {
  std::string base_url;
  std::string auth_token_env_name;  // empty: no Authorization header
  std::string model_name;
  double timeout_s = 60.0;
  RetryPolicy retry;
  int max_in_flight = 4;

  void validate() const;
};

struct DecodeParams {
  double temperature = 0.7;
  int max_tokens = 1024;
  double top_p = 1.0;
  std::optional<std::uint64_t> request_seed;

  void validate() const;
};

struct ModelResponse {
  std::string text;
  std::string finish_reason = "stop";
  double latency_ms = 0.0;
  std::string raw_payload_hash;
  int attempts = 1;
};

enum class ServiceErrorKind {
  Timeout,
  RateLimited,
  ServerError,
  ProtocolError,
  AuthError,
  AudioDecodeError,
  Unreachable,
  InvalidInput,
};

std::string_view to_string(ServiceErrorKind k);

class ServiceError : public Error {
 public:
  ServiceError(ServiceErrorKind kind, const std::string& what, int attempts = 1)
      : Error(std::string(to_string(kind)), what), service_kind_(kind), attempts_(attempts) {}
  ServiceErrorKind service_kind() const noexcept { return service_kind_; }
  int attempts() const noexcept { return attempts_; }

 private:
  ServiceErrorKind service_kind_;
  int attempts_;
};

// ---- transport ---------------------------------------------------------------

struct HttpRequest {
  std::string url;  // full URL: base_url + path
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::string content_type = "application/json";
  double timeout_s = 60.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string content_type;
};

/// Raised by transports when no HTTP status was obtained.
class TransportFailure : public std::runtime_error {
 public:
  enum class Reason { Timeout, Unreachable };
  TransportFailure(Reason reason, const std::string& what) : std::runtime_error(what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib backed POST transport (http and https).
std::shared_ptr<Transport> make_http_transport();

/// Number of network requests issued by the HTTP transport in this process.
std::uint64_t network_requests_issued();

/// Key under which a request is stored as a fixture: hash of URL and body.
std::string fixture_key(const HttpRequest& request);

/// Replays `<dir>/<key>.response.json` for each request. A missing fixture
/// is reported as Unreachable.
class FixtureTransport : public Transport {
 public:
  explicit FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}
  HttpResponse post(const HttpRequest& request) override;

 private:
  std::filesystem::path dir_;
};

/// Forwards to another transport and saves paired request/response fixtures.
class RecordingTransport : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {}
  HttpResponse post(const HttpRequest& request) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::filesystem::path dir_;
  std::mutex mu_;
};

/// Returns queued responses (or failures) in order; records every request.
class ScriptedTransport : public Transport {
 public:
  struct Step {
    std::optional<HttpResponse> response;
    std::optional<TransportFailure::Reason> failure;
  };
  void push(HttpResponse r) { steps_.push_back({std::move(r), std::nullopt}); }
  void push_failure(TransportFailure::Reason r) { steps_.push_back({std::nullopt, r}); }
  HttpResponse post(const HttpRequest& request) override;
  std::vector<HttpRequest> requests() const;

 private:
  mutable std::mutex mu_;
  std::vector<Step> steps_;
  std::size_t next_ = 0;
  std::vector<HttpRequest> seen_;
};

nlohmann::json to_json(const HttpResponse& r);
HttpResponse http_response_from_json(const nlohmann::json& j);

// ---- client ------------------------------------------------------------------

struct ClientHooks {
  std::function<void(std::chrono::milliseconds)> sleep;  // default: this_thread::sleep_for
  std::function<double()> now_ms;                        // default: steady clock
  std::function<void(const std::string&)> log;           // default: silent
};

/// Counting gate bounding concurrent requests; tracks the peak.
class InFlightGate {
 public:
  explicit InFlightGate(int limit) : limit_(limit < 1 ? 1 : limit) {}
  void acquire();
  void release();
  int peak() const noexcept { return peak_.load(); }

 private:
  int limit_;
  int current_ = 0;
  std::atomic<int> peak_{0};
  std::mutex mu_;
  std::condition_variable cv_;
};

/// Backoff before retry `attempt` (1-based count of failed attempts so far).
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt, double unit_jitter);

/// OpenAI-style chat-completion request body. Audio attachments become
/// `input_audio` parts (base64 WAV) on the last user message.
nlohmann::json chat_request_body(const EndpointConfig& endpoint, const prompts::RenderedPrompt& prompt,
                                 const DecodeParams& decode,
                                 const std::filesystem::path& attachment_root);

/// First-choice text and finish reason of a chat-completion response.
ModelResponse parse_chat_response(std::string_view body);

/// Shared by threads; every call is independent.
class ServiceClient {
 public:
  ServiceClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport, ClientHooks hooks = {});

  void set_attachment_root(std::filesystem::path root) { attachment_root_ = std::move(root); }

  ModelResponse chat_complete(const prompts::RenderedPrompt& prompt, const DecodeParams& decode);
  /// Mono 16 kHz regardless of the service's output format.
  audio::AudioBlob synthesize_speech(std::string_view text, const timbre::TimbreEntry& reference,
                                     const std::filesystem::path& reference_path);
  std::string transcribe(const audio::AudioBlob& audio);

  const EndpointConfig& endpoint() const noexcept { return endpoint_; }
  int peak_in_flight() const noexcept { return gate_.peak(); }

 private:
  HttpResponse send(const std::string& path, const std::string& body, int& attempts);

  EndpointConfig endpoint_;
  std::shared_ptr<Transport> transport_;
  ClientHooks hooks_;
  InFlightGate gate_;
  std::filesystem::path attachment_root_;
};

/// Trims and collapses internal whitespace; fillers and punctuation are kept.
std::string normalize_transcript(std::string_view text);

// ---- model interfaces used by the pipeline and evaluator ----------------------

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual ModelResponse complete(const prompts::RenderedPrompt& prompt, const DecodeParams& decode) = 0;
};

class LiveChatModel : public ChatModel {
 public:
  explicit LiveChatModel(std::shared_ptr<ServiceClient> client) : client_(std::move(client)) {}
  ModelResponse complete(const prompts::RenderedPrompt& prompt, const DecodeParams& decode) override {
    return client_->chat_complete(prompt, decode);
  }

 private:
  std::shared_ptr<ServiceClient> client_;
};

class SpeechSynthesizer {
 public:
  virtual ~SpeechSynthesizer() = default;
  virtual audio::AudioBlob synthesize(std::string_view text, const timbre::TimbreEntry& reference,
                                      const std::filesystem::path& reference_path, std::uint64_t seed) = 0;
};

class LiveSpeechSynthesizer : public SpeechSynthesizer {
 public:
  explicit LiveSpeechSynthesizer(std::shared_ptr<ServiceClient> client) : client_(std::move(client)) {}
  audio::AudioBlob synthesize(std::string_view text, const timbre::TimbreEntry& reference,
                              const std::filesystem::path& reference_path, std::uint64_t) override {
    return client_->synthesize_speech(text, reference, reference_path);
  }

 private:
  std::shared_ptr<ServiceClient> client_;
};

class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string transcribe(const audio::AudioBlob& audio) = 0;
};

class LiveTranscriber : public Transcriber {
 public:
  explicit LiveTranscriber(std::shared_ptr<ServiceClient> client) : client_(std::move(client)) {}
  std::string transcribe(const audio::AudioBlob& audio) override { return client_->transcribe(audio); }

 private:
  std::shared_ptr<ServiceClient> client_;
};

nlohmann::json to_json(const EndpointConfig& e);
EndpointConfig endpoint_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DecodeParams& d);
DecodeParams decode_from_json(const nlohmann::json& j, DecodeParams defaults = {});

}  // namespace syncog::services
