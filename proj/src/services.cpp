#include "syncog/services.hpp"

#include "syncog/hash.hpp"
#include "syncog/rng.hpp"
#include "syncog/text.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>

namespace syncog::services {

using nlohmann::json;

std::string_view to_string(ServiceErrorKind k) {
  switch (k) {
    case ServiceErrorKind::Timeout: return "Timeout";
    case ServiceErrorKind::RateLimited: return "RateLimited";
    case ServiceErrorKind::ServerError: return "ServerError";
    case ServiceErrorKind::ProtocolError: return "ProtocolError";
    case ServiceErrorKind::AuthError: return "AuthError";
    case ServiceErrorKind::AudioDecodeError: return "AudioDecodeError";
    case ServiceErrorKind::Unreachable: return "Unreachable";
    case ServiceErrorKind::InvalidInput: return "InvalidInput";
  }
  return "ServiceError";
}

void EndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint base_url is empty");
  if (retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
  if (retry.base_backoff_ms < 0) throw ConfigError("retry.base_backoff_ms must be >= 0");
  if (retry.jitter_fraction < 0.0 || retry.jitter_fraction >= 1.0)
    throw ConfigError("retry.jitter_fraction must be in [0, 1)");
  if (!(timeout_s > 0.0)) throw ConfigError("timeout_s must be > 0");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

void DecodeParams::validate() const {
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
}

// ---- gate and backoff -------------------------------------------------------------

void InFlightGate::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return current_ < limit_; });
  ++current_;
  if (current_ > peak_.load()) peak_.store(current_);
}

void InFlightGate::release() {
  {
    std::lock_guard lock(mu_);
    --current_;
  }
  cv_.notify_one();
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt, double unit_jitter) {
  const double base = policy.base_backoff_ms * std::pow(policy.multiplier, attempt - 1);
  const double factor = 1.0 + policy.jitter_fraction * (2.0 * unit_jitter - 1.0);
  return std::chrono::milliseconds(std::llround(base * factor));
}

// ---- fixtures -----------------------------------------------------------------------

namespace {

std::string url_path(std::string_view url) {
  const auto scheme = url.find("://");
  const auto start = scheme == std::string_view::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', start);
  return slash == std::string_view::npos ? std::string("/") : std::string(url.substr(slash));
}

bool is_json_type(std::string_view content_type) {
  return content_type.find("json") != std::string_view::npos ||
         content_type.rfind("text/", 0) == 0;
}

}  // namespace

std::string fixture_key(const HttpRequest& request) {
  return hex64(stable_hash64(url_path(request.url) + "\n" + request.body));
}

json to_json(const HttpResponse& r) {
  json j{{"status", r.status}, {"content_type", r.content_type}};
  if (is_json_type(r.content_type) || r.content_type.empty())
    j["body"] = r.body;
  else
    j["body_base64"] = base64_encode(r.body);
  return j;
}

HttpResponse http_response_from_json(const json& j) {
  HttpResponse r;
  r.status = j.at("status").get<int>();
  r.content_type = j.value("content_type", std::string("application/json"));
  if (j.contains("body_base64")) {
    const auto bytes = base64_decode(j.at("body_base64").get<std::string>());
    r.body.assign(bytes.begin(), bytes.end());
  } else if (j.contains("body")) {
    const auto& b = j.at("body");
    r.body = b.is_string() ? b.get<std::string>() : b.dump();
  }
  return r;
}

HttpResponse FixtureTransport::post(const HttpRequest& request) {
  const auto path = dir_ / (fixture_key(request) + ".response.json");
  if (!std::filesystem::exists(path))
    throw TransportFailure(TransportFailure::Reason::Unreachable,
                           fmt::format("no fixture {} for {}", path.filename().string(), url_path(request.url)));
  const json j = json::parse(text::read_file(path.string()));
  if (j.contains("failure")) {
    const auto f = j.at("failure").get<std::string>();
    throw TransportFailure(f == "timeout" ? TransportFailure::Reason::Timeout
                                          : TransportFailure::Reason::Unreachable,
                           "fixture failure: " + f);
  }
  return http_response_from_json(j);
}

HttpResponse RecordingTransport::post(const HttpRequest& request) {
  HttpResponse resp = inner_->post(request);
  std::lock_guard lock(mu_);
  std::filesystem::create_directories(dir_);
  const auto key = fixture_key(request);
  json req{{"path", url_path(request.url)}, {"content_type", request.content_type}};
  req["body"] = request.body;
  text::write_file((dir_ / (key + ".request.json")).string(), req.dump(2) + "\n");
  text::write_file((dir_ / (key + ".response.json")).string(), to_json(resp).dump(2) + "\n");
  return resp;
}

HttpResponse ScriptedTransport::post(const HttpRequest& request) {
  std::lock_guard lock(mu_);
  seen_.push_back(request);
  if (next_ >= steps_.size())
    throw TransportFailure(TransportFailure::Reason::Unreachable, "script exhausted");
  const Step step = steps_[next_++];
  if (step.failure)
    throw TransportFailure(*step.failure, *step.failure == TransportFailure::Reason::Timeout
                                              ? "scripted timeout"
                                              : "scripted connection failure");
  return *step.response;
}

std::vector<HttpRequest> ScriptedTransport::requests() const {
  std::lock_guard lock(mu_);
  return seen_;
}

// ---- request/response shapes -------------------------------------------------------

json chat_request_body(const EndpointConfig& endpoint, const prompts::RenderedPrompt& prompt,
                       const DecodeParams& decode, const std::filesystem::path& attachment_root) {
  json messages = json::array();
  std::size_t last_user = prompt.messages.size();
  for (std::size_t i = 0; i < prompt.messages.size(); ++i)
    if (prompt.messages[i].role == "user") last_user = i;

  for (std::size_t i = 0; i < prompt.messages.size(); ++i) {
    const auto& m = prompt.messages[i];
    if (i != last_user || prompt.attachments.empty()) {
      messages.push_back({{"role", m.role}, {"content", m.content}});
      continue;
    }
    json parts = json::array({{{"type", "text"}, {"text", m.content}}});
    for (const auto& a : prompt.attachments) {
      const auto path = std::filesystem::path(a.path).is_absolute() ? std::filesystem::path(a.path)
                                                                    : attachment_root / a.path;
      std::string bytes;
      try {
        bytes = text::read_file(path.string());
      } catch (const Error&) {
        throw ServiceError(ServiceErrorKind::InvalidInput, "cannot read attachment " + path.string());
      }
      if (!a.checksum.empty() && sha256_hex(bytes) != a.checksum)
        throw ServiceError(ServiceErrorKind::InvalidInput, "attachment checksum mismatch: " + a.path);
      parts.push_back({{"type", "input_audio"},
                       {"input_audio", {{"data", base64_encode(bytes)}, {"format", "wav"}}}});
    }
    messages.push_back({{"role", m.role}, {"content", parts}});
  }

  json body{{"model", endpoint.model_name},
            {"messages", messages},
            {"temperature", decode.temperature},
            {"max_tokens", decode.max_tokens},
            {"top_p", decode.top_p}};
  if (decode.request_seed) body["seed"] = *decode.request_seed;
  return body;
}

ModelResponse parse_chat_response(std::string_view body) {
  ModelResponse r;
  r.raw_payload_hash = sha256_hex(body);
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ServiceError(ServiceErrorKind::ProtocolError, fmt::format("response is not JSON: {}", e.what()));
  }
  try {
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    if (content.is_string()) {
      r.text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& part : content)
        if (part.value("type", "") == "text") r.text += part.at("text").get<std::string>();
    } else if (!content.is_null()) {
      throw ServiceError(ServiceErrorKind::ProtocolError, "message content has unexpected type");
    }
    if (choice.contains("finish_reason") && choice.at("finish_reason").is_string())
      r.finish_reason = choice.at("finish_reason").get<std::string>();
  } catch (const json::exception& e) {
    throw ServiceError(ServiceErrorKind::ProtocolError, fmt::format("malformed completion: {}", e.what()));
  }
  if (r.text.empty() && r.finish_reason != "content_filter" && r.finish_reason != "error")
    throw ServiceError(ServiceErrorKind::ProtocolError, "completion text is empty");
  return r;
}

std::string normalize_transcript(std::string_view text) {
  return text::join(text::split_whitespace(text), " ");
}

// ---- client ---------------------------------------------------------------------------

ServiceClient::ServiceClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport, ClientHooks hooks)
    : endpoint_(std::move(endpoint)),
      transport_(std::move(transport)),
      hooks_(std::move(hooks)),
      gate_(endpoint_.max_in_flight) {
  endpoint_.validate();
  if (!hooks_.sleep) hooks_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!hooks_.now_ms)
    hooks_.now_ms = [] {
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch())
          .count();
    };
  if (!hooks_.log) hooks_.log = [](const std::string&) {};
}

HttpResponse ServiceClient::send(const std::string& path, const std::string& body, int& attempts) {
  HttpRequest req;
  std::string base = endpoint_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  req.url = base + path;
  req.body = body;
  req.timeout_s = endpoint_.timeout_s;
  if (!endpoint_.auth_token_env_name.empty()) {
    const char* token = std::getenv(endpoint_.auth_token_env_name.c_str());
    if (!token || !*token)
      throw ServiceError(ServiceErrorKind::AuthError,
                         fmt::format("environment variable {} is not set", endpoint_.auth_token_env_name), 0);
    req.headers.emplace_back("Authorization", fmt::format("Bearer {}", token));
  }

  Rng jitter(stable_hash64(req.url + "\n" + body));
  const int max_attempts = endpoint_.retry.max_attempts;
  for (attempts = 1;; ++attempts) {
    ServiceErrorKind kind;
    std::string detail;
    gate_.acquire();
    try {
      HttpResponse resp = transport_->post(req);
      gate_.release();
      if (resp.status >= 200 && resp.status < 300) {
        hooks_.log(fmt::format("{} attempt {}: {}", path, attempts, resp.status));
        return resp;
      }
      detail = fmt::format("HTTP {}", resp.status);
      if (resp.status == 401 || resp.status == 403)
        throw ServiceError(ServiceErrorKind::AuthError, fmt::format("{}: {}", path, detail), attempts);
      if (resp.status == 429) kind = ServiceErrorKind::RateLimited;
      else if (resp.status == 408) kind = ServiceErrorKind::Timeout;
      else if (resp.status >= 500) kind = ServiceErrorKind::ServerError;
      else
        throw ServiceError(ServiceErrorKind::ProtocolError, fmt::format("{}: {}", path, detail), attempts);
    } catch (const TransportFailure& f) {
      gate_.release();
      kind = f.reason() == TransportFailure::Reason::Timeout ? ServiceErrorKind::Timeout
                                                             : ServiceErrorKind::Unreachable;
      detail = f.what();
    }
    if (attempts >= max_attempts) {
      hooks_.log(fmt::format("{} attempt {}: {}; giving up", path, attempts, detail));
      throw ServiceError(kind, fmt::format("{}: {} after {} attempt(s)", path, detail, attempts), attempts);
    }
    const auto delay = backoff_delay(endpoint_.retry, attempts, jitter.uniform());
    hooks_.log(fmt::format("{} attempt {}: {}; retrying in {} ms", path, attempts, detail, delay.count()));
    hooks_.sleep(delay);
  }
}

ModelResponse ServiceClient::chat_complete(const prompts::RenderedPrompt& prompt, const DecodeParams& decode) {
  decode.validate();
  const auto body = chat_request_body(endpoint_, prompt, decode, attachment_root_).dump();
  const double t0 = hooks_.now_ms();
  int attempts = 0;
  const auto resp = send("/chat/completions", body, attempts);
  ModelResponse r = parse_chat_response(resp.body);
  r.latency_ms = hooks_.now_ms() - t0;
  r.attempts = attempts;
  return r;
}

audio::AudioBlob ServiceClient::synthesize_speech(std::string_view text, const timbre::TimbreEntry& reference,
                                                  const std::filesystem::path& reference_path) {
  if (text::trim(text).empty())
    throw ServiceError(ServiceErrorKind::InvalidInput, "refusing to synthesize empty text", 0);
  json body{{"model", endpoint_.model_name},
            {"input", std::string(text)},
            {"voice", reference.timbre_id},
            {"response_format", "wav"}};
  if (!reference_path.empty()) {
    std::string ref;
    try {
      ref = text::read_file(reference_path.string());
    } catch (const Error&) {
      throw ServiceError(ServiceErrorKind::InvalidInput, "cannot read reference " + reference_path.string(), 0);
    }
    body["reference_audio"] = {{"data", base64_encode(ref)}, {"format", "wav"}};
  }
  int attempts = 0;
  const auto resp = send("/audio/speech", body.dump(), attempts);

  std::string wav = resp.body;
  if (wav.rfind("RIFF", 0) != 0) {
    try {
      const json j = json::parse(resp.body);
      const json& a = j.at("audio");
      const auto encoded = a.is_string() ? a.get<std::string>() : a.at("data").get<std::string>();
      const auto bytes = base64_decode(encoded);
      wav.assign(bytes.begin(), bytes.end());
    } catch (const std::exception& e) {
      throw ServiceError(ServiceErrorKind::AudioDecodeError,
                         fmt::format("speech response carries no audio: {}", e.what()), attempts);
    }
  }
  audio::AudioBlob blob;
  try {
    blob = audio::decode_wav(wav);
  } catch (const audio::AudioDecodeError& e) {
    throw ServiceError(ServiceErrorKind::AudioDecodeError, e.what(), attempts);
  }
  if (blob.samples.empty())
    throw ServiceError(ServiceErrorKind::AudioDecodeError, "speech response is empty", attempts);
  return audio::to_pipeline_format(blob);
}

std::string ServiceClient::transcribe(const audio::AudioBlob& input) {
  if (input.samples.empty())
    throw ServiceError(ServiceErrorKind::InvalidInput, "cannot transcribe zero-length audio", 0);
  const auto wav = audio::encode_wav(audio::to_pipeline_format(input));
  json body{{"model", endpoint_.model_name},
            {"audio", {{"data", base64_encode(wav)}, {"format", "wav"}}},
            {"response_format", "json"},
            {"verbatim", true}};
  int attempts = 0;
  const auto resp = send("/audio/transcriptions", body.dump(), attempts);
  try {
    return normalize_transcript(json::parse(resp.body).at("text").get<std::string>());
  } catch (const json::exception& e) {
    throw ServiceError(ServiceErrorKind::ProtocolError, fmt::format("malformed transcription: {}", e.what()),
                       attempts);
  }
}

// ---- config mapping -------------------------------------------------------------------

json to_json(const EndpointConfig& e) {
  return {{"base_url", e.base_url},
          {"auth_token_env", e.auth_token_env_name},
          {"model", e.model_name},
          {"timeout_s", e.timeout_s},
          {"max_in_flight", e.max_in_flight},
          {"retry",
           {{"max_attempts", e.retry.max_attempts},
            {"base_backoff_ms", e.retry.base_backoff_ms},
            {"jitter_fraction", e.retry.jitter_fraction}}}};
}

EndpointConfig endpoint_from_json(const json& j) {
  EndpointConfig e;
  e.base_url = j.value("base_url", e.base_url);
  e.auth_token_env_name = j.value("auth_token_env", e.auth_token_env_name);
  e.model_name = j.value("model", e.model_name);
  e.timeout_s = j.value("timeout_s", e.timeout_s);
  e.max_in_flight = j.value("max_in_flight", e.max_in_flight);
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    e.retry.max_attempts = r.value("max_attempts", e.retry.max_attempts);
    e.retry.base_backoff_ms = r.value("base_backoff_ms", e.retry.base_backoff_ms);
    e.retry.jitter_fraction = r.value("jitter_fraction", e.retry.jitter_fraction);
  }
  return e;
}

json to_json(const DecodeParams& d) {
  json j{{"temperature", d.temperature}, {"max_tokens", d.max_tokens}, {"top_p", d.top_p}};
  if (d.request_seed) j["request_seed"] = *d.request_seed;
  return j;
}

DecodeParams decode_from_json(const json& j, DecodeParams d) {
  d.temperature = j.value("temperature", d.temperature);
  d.max_tokens = j.value("max_tokens", d.max_tokens);
  d.top_p = j.value("top_p", d.top_p);
  if (j.contains("request_seed")) d.request_seed = j.at("request_seed").get<std::uint64_t>();
  d.validate();
  return d;
}

}  // namespace syncog::services
