#pragma once

#include "syncog/persona.hpp"
#include "syncog/rubric.hpp"
#include "syncog/services.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>

namespace syncog::services {

/// Stub synthesis rate: seconds of audio per word.
inline constexpr double kStubSecondsPerWord = 0.4;

/// Band targets used by the stub generator.
int stub_word_target(int narrative_length_level);  // 80 / 118 / 160
int stub_filler_target(int fluency_level);         // 5 / 2 / 1
int stub_spatial_target(int spatial_level);        // 1 / 2 / 4

/// Offline narrative whose rubric scores equal `persona.style`. Built from
/// fragment banks, then checked with analyze+score; a failed check is
/// rebuilt with the next draw from `rng`.
std::string stub_generate(const persona::Persona& persona, const rubric::Lexicons& lexicons, Rng& rng);

/// Generates a narrative for a persona. The live implementation sends the
/// rendered prompt; the stub ignores it.
class NarrativeGenerator {
 public:
  virtual ~NarrativeGenerator() = default;
  virtual ModelResponse generate(const persona::Persona& persona, const prompts::RenderedPrompt& prompt,
                                 std::uint64_t seed) = 0;
};

class LiveNarrativeGenerator : public NarrativeGenerator {
 public:
  LiveNarrativeGenerator(std::shared_ptr<ChatModel> model, DecodeParams decode)
      : model_(std::move(model)), decode_(decode) {}
  ModelResponse generate(const persona::Persona& persona, const prompts::RenderedPrompt& prompt,
                         std::uint64_t seed) override;

 private:
  std::shared_ptr<ChatModel> model_;
  DecodeParams decode_;
};

class StubNarrativeGenerator : public NarrativeGenerator {
 public:
  explicit StubNarrativeGenerator(std::shared_ptr<const rubric::Lexicons> lexicons)
      : lexicons_(std::move(lexicons)) {}
  /// Every narrative is built for a style whose `dim` level is shifted away
  /// from the target, so validation of that dimension always fails.
  void force_mismatch(StyleDimension dim) { mismatch_ = dim; }

  ModelResponse generate(const persona::Persona& persona, const prompts::RenderedPrompt& prompt,
                         std::uint64_t seed) override;

 private:
  std::shared_ptr<const rubric::Lexicons> lexicons_;
  std::optional<StyleDimension> mismatch_;
};

/// Shaped noise: one amplitude envelope per word, 0.4 s each, mono 16 kHz.
class StubSpeechSynthesizer : public SpeechSynthesizer {
 public:
  audio::AudioBlob synthesize(std::string_view text, const timbre::TimbreEntry& reference,
                              const std::filesystem::path& reference_path, std::uint64_t seed) override;
};

/// Returns the transcript registered for the audio's content hash.
class StubTranscriber : public Transcriber {
 public:
  void remember(const audio::AudioBlob& audio, std::string transcript);
  std::string transcribe(const audio::AudioBlob& audio) override;

 private:
  std::mutex mu_;
  std::map<std::string, std::string> by_hash_;
};

/// Label-conditioned rationale: evidence drawn from the transcript's rubric
/// profile, then `FINAL: <label>` with the label bound in the prompt.
class StubRationaleModel : public ChatModel {
 public:
  StubRationaleModel(std::shared_ptr<const rubric::Lexicons> lexicons, LabelScheme scheme)
      : lexicons_(std::move(lexicons)), scheme_(scheme) {}
  /// Prompts for which the predicate holds conclude with a different label.
  void set_inconsistent(std::function<bool(const prompts::RenderedPrompt&)> predicate) {
    inconsistent_ = std::move(predicate);
  }
  ModelResponse complete(const prompts::RenderedPrompt& prompt, const DecodeParams& decode) override;

 private:
  std::shared_ptr<const rubric::Lexicons> lexicons_;
  LabelScheme scheme_;
  std::function<bool(const prompts::RenderedPrompt&)> inconsistent_;
};

/// Classifier stub. Oracle mode answers with the ground truth registered for
/// the transcript; rubric mode maps the mean style score to a label. With
/// `noise` > 0 a seeded fraction of answers is replaced by a random label.
class StubClassifier : public ChatModel {
 public:
  StubClassifier(std::shared_ptr<const rubric::Lexicons> lexicons, LabelScheme scheme)
      : lexicons_(std::move(lexicons)), scheme_(scheme) {}
  void set_oracle(std::map<std::string, Label> truth_by_transcript_hash) {
    oracle_ = std::move(truth_by_transcript_hash);
  }
  void set_noise(double fraction) { noise_ = fraction; }

  ModelResponse complete(const prompts::RenderedPrompt& prompt, const DecodeParams& decode) override;

  /// Rubric-mode decision for a transcript.
  Label decide(std::string_view transcript) const;

 private:
  std::shared_ptr<const rubric::Lexicons> lexicons_;
  LabelScheme scheme_;
  std::optional<std::map<std::string, Label>> oracle_;
  double noise_ = 0.0;
};

/// Stub response wrapper: hash of the text, finish reason "stop".
ModelResponse stub_response(std::string text);

}  // namespace syncog::services
