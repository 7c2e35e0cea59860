#pragma once

#include "syncog/audio.hpp"
#include "syncog/prompts.hpp"
#include "syncog/services.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace syncog::testing {

inline std::filesystem::path fixture_dir() { return std::filesystem::path(SYNCOG_TEST_DIR) / "fixtures"; }
inline std::filesystem::path data_dir() { return std::filesystem::path(SYNCOG_DATA_DIR); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("syncog-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline audio::AudioBlob tone(double seconds, int rate = audio::kPipelineRate, int channels = 1,
                             double freq = 220.0) {
  audio::AudioBlob b;
  b.sample_rate_hz = rate;
  b.channels = channels;
  const auto frames = static_cast<std::size_t>(std::llround(seconds * rate));
  b.samples.resize(frames * static_cast<std::size_t>(channels));
  for (std::size_t i = 0; i < frames; ++i) {
    const double v = 8000.0 * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate);
    for (int c = 0; c < channels; ++c)
      b.samples[i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)] =
          static_cast<std::int16_t>(v * (c == 0 ? 1.0 : 0.5));
  }
  return b;
}

// The recorded HTTP fixtures were produced from exactly these inputs.

inline services::EndpointConfig fixture_endpoint() {
  services::EndpointConfig e;
  e.base_url = "http://fixtures.test/v1";
  e.model_name = "fixture-model";
  e.timeout_s = 5.0;
  e.retry.max_attempts = 3;
  e.retry.base_backoff_ms = 10;
  return e;
}

inline services::DecodeParams fixture_decode() { return {0.2, 64, 1.0, 7}; }

inline prompts::RenderedPrompt fixture_prompt(const std::string& user) {
  prompts::RenderedPrompt p;
  p.messages = {{"system", "You are a cognitive assessment specialist."}, {"user", user}};
  p.template_version = 1;
  return p;
}

inline const std::string kChatOkPrompt = "Transcript: the boy, um, takes a cookie. Classify.";
inline const std::string kChatMalformedPrompt = "Transcript: the girl reaches up. Classify.";
inline const std::string kChatTimeoutPrompt = "Transcript: the water spills. Classify.";
inline const std::string kChatRateLimitedPrompt = "Transcript: the stool tips. Classify.";
inline const std::string kChatOkAnswer = "Short sentences and one filler.\nFINAL: MCI";
inline const std::string kTtsText = "The boy takes a cookie from the jar.";
inline const std::string kAsrRaw = "  the boy   um  takes a\ncookie ";
inline const std::string kAsrNormalized = "the boy um takes a cookie";

inline timbre::TimbreEntry fixture_voice() {
  timbre::TimbreEntry e;
  e.timbre_id = "ref-female";
  e.file_path = "ref_female.wav";
  e.sex = Sex::Female;
  e.age_bucket = timbre::AgeBucket::Seventies;
  return e;
}

inline audio::AudioBlob fixture_asr_audio() { return tone(1.0, audio::kPipelineRate, 1, 180.0); }
inline audio::AudioBlob fixture_tts_reply() { return tone(0.25, 24000, 2, 300.0); }

}  // namespace syncog::testing
