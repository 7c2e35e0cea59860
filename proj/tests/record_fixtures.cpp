// Regenerates tests/fixtures/http from scripted service replies.

#include "support.hpp"

#include "syncog/text.hpp"

#include <iostream>

using namespace syncog;
using namespace syncog::testing;

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : (fixture_dir() / "http");
  std::filesystem::create_directories(dir);
  audio::write_wav(dir / "ref_female.wav", tone(3.5, audio::kPipelineRate, 1, 200.0));

  auto script = std::make_shared<services::ScriptedTransport>();
  auto chat_reply = [](const std::string& content) {
    nlohmann::json body{{"id", "chatcmpl-fixture"},
                        {"object", "chat.completion"},
                        {"choices", {{{"index", 0},
                                      {"message", {{"role", "assistant"}, {"content", content}}},
                                      {"finish_reason", "stop"}}}}};
    return services::HttpResponse{200, body.dump(), "application/json"};
  };
  script->push(chat_reply(kChatOkAnswer));
  script->push({200, R"({"id":"chatcmpl-fixture","choices":[]})", "application/json"});
  script->push({429, R"({"error":{"message":"rate limited"}})", "application/json"});
  script->push({200, audio::encode_wav(fixture_tts_reply()), "audio/wav"});
  script->push({200, nlohmann::json{{"text", kAsrRaw}}.dump(), "application/json"});

  auto recorder = std::make_shared<services::RecordingTransport>(script, dir);
  services::ClientHooks hooks;
  hooks.sleep = [](std::chrono::milliseconds) {};
  auto endpoint = fixture_endpoint();
  endpoint.retry.max_attempts = 1;
  services::ServiceClient client(endpoint, recorder, hooks);

  client.chat_complete(fixture_prompt(kChatOkPrompt), fixture_decode());
  try {
    client.chat_complete(fixture_prompt(kChatMalformedPrompt), fixture_decode());
  } catch (const services::ServiceError&) {
  }
  try {
    client.chat_complete(fixture_prompt(kChatRateLimitedPrompt), fixture_decode());
  } catch (const services::ServiceError&) {
  }
  client.synthesize_speech(kTtsText, fixture_voice(), dir / "ref_female.wav");
  client.transcribe(fixture_asr_audio());

  // A transport-level timeout has no HTTP reply to record.
  services::HttpRequest timeout_req;
  timeout_req.url = endpoint.base_url + "/chat/completions";
  timeout_req.body =
      services::chat_request_body(endpoint, fixture_prompt(kChatTimeoutPrompt), fixture_decode(), {}).dump();
  text::write_file((dir / (services::fixture_key(timeout_req) + ".response.json")).string(),
                   "{\n  \"failure\": \"timeout\"\n}\n");
  std::cout << "fixtures written to " << dir << "\n";
  return 0;
}
