#pragma once

#include "syncog/audio.hpp"
#include "syncog/corpus.hpp"
#include "syncog/services.hpp"
#include "syncog/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace syncog::preprocess {

inline constexpr double kParticipantCapSeconds = 90.0;

class NoSegments : public Error {
 public:
  explicit NoSegments(const std::string& what) : Error("NoSegments", what) {}
};

class EmptyTranscript : public Error {
 public:
  explicit EmptyTranscript(const std::string& what) : Error("EmptyTranscript", what) {}
};

struct Segment {
  std::string speaker;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct DiarizationSegments {
  std::vector<Segment> segments;  // sorted by start

  void validate() const;
  /// Total seconds per speaker.
  std::map<std::string, double> durations() const;
};

/// Sidecar format: one `speaker start_s end_s` per line; `#` starts a comment.
DiarizationSegments parse_segments(std::string_view body);

struct RawRecording {
  std::filesystem::path path;
  int sample_rate_hz = 0;
  int channels = 0;
  double duration_s = 0.0;

  /// Reads the WAV header. Throws AudioDecodeError.
  static RawRecording probe(const std::filesystem::path& path);
};

/// Mono (channel average) at 16 kHz. Conformant input passes through unchanged.
audio::AudioBlob standardize(const RawRecording& raw,
                             audio::ResampleQuality quality = audio::ResampleQuality::WindowedSinc);

/// Concatenates the participant's segments in order, capped at 90 s (the
/// final segment is truncated). Without an id the speaker with the largest
/// total duration is used.
audio::AudioBlob isolate_participant(const audio::AudioBlob& audio, const DiarizationSegments& segments,
                                     const std::optional<std::string>& participant_id = std::nullopt,
                                     double cap_s = kParticipantCapSeconds);

/// Speaker chosen by the majority-duration rule (ties: lexicographically first).
std::string majority_speaker(const DiarizationSegments& segments);

/// Real-provenance record with content hashes; audio_ref points at
/// `audio/real/<sample_id>.wav`.
corpus::SampleRecord build_pair(const audio::AudioBlob& audio, const std::string& transcript,
                                const std::optional<CognitiveStatus>& label, Language language,
                                const std::string& cohort_id = "real");

struct BatchOptions {
  std::filesystem::path input_dir;
  std::filesystem::path run_dir;
  Language language = Language::EN;
  LabelScheme scheme = LabelScheme::Ternary;
  audio::ResampleQuality quality = audio::ResampleQuality::WindowedSinc;
  std::string cohort_id = "real";
  int jobs = 1;
};

struct BatchFailure {
  std::string recording;
  std::string kind;
  std::string message;
};

struct BatchResult {
  corpus::CohortManifest manifest;
  std::vector<BatchFailure> failures;
};

/// For each `<name>.wav` in the input directory: optional `<name>.segments`,
/// `<name>.txt` transcript (else the transcriber is asked), optional
/// `<name>.label`. Writes audio under the run directory and returns a manifest
/// of real records in file-name order.
BatchResult run_batch(const BatchOptions& options, services::Transcriber* transcriber);

}  // namespace syncog::preprocess
