#pragma once

#include "syncog/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace syncog::audio {

inline constexpr int kPipelineRate = 16000;

class AudioDecodeError : public Error {
 public:
  explicit AudioDecodeError(const std::string& what) : Error("AudioDecodeError", what) {}
};

/// Interleaved signed 16-bit PCM.
struct AudioBlob {
  std::vector<std::int16_t> samples;
  int sample_rate_hz = kPipelineRate;
  int channels = 1;

  std::size_t frames() const noexcept {
    return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
  }
  double duration_s() const noexcept {
    return sample_rate_hz > 0 ? static_cast<double>(frames()) / sample_rate_hz : 0.0;
  }
  /// Mono and 16 kHz.
  bool conforms() const noexcept { return channels == 1 && sample_rate_hz == kPipelineRate; }

  friend bool operator==(const AudioBlob&, const AudioBlob&) = default;
};

struct WavInfo {
  int sample_rate_hz = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::uint64_t frames = 0;
  double duration_s() const noexcept {
    return sample_rate_hz > 0 ? static_cast<double>(frames) / sample_rate_hz : 0.0;
  }
};

/// Decodes RIFF/WAVE with PCM 8/16/24/32-bit or IEEE float 32-bit data.
/// Non-16-bit input is converted to 16-bit.
AudioBlob decode_wav(std::span<const std::uint8_t> bytes);
AudioBlob decode_wav(std::string_view bytes);
WavInfo probe_wav(std::span<const std::uint8_t> bytes);

/// 16-bit PCM WAV bytes.
std::string encode_wav(const AudioBlob& blob);

AudioBlob read_wav(const std::filesystem::path& path);
WavInfo probe_wav_file(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioBlob& blob);

enum class ResampleQuality { Linear, WindowedSinc };

/// Averages channels into one.
AudioBlob downmix(const AudioBlob& in);
AudioBlob resample(const AudioBlob& in, int target_rate, ResampleQuality quality = ResampleQuality::WindowedSinc);

/// Mono + 16 kHz. Conformant input is returned unchanged.
AudioBlob to_pipeline_format(const AudioBlob& in, ResampleQuality quality = ResampleQuality::WindowedSinc);

/// sha256 over the sample bytes and format, not the container.
std::string content_hash(const AudioBlob& blob);

}  // namespace syncog::audio
