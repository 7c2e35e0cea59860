#include "syncog/audio.hpp"

#include "syncog/hash.hpp"
#include "syncog/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include <fmt/format.h>

namespace syncog::audio {

namespace {

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xFF);
  out += static_cast<char>((v >> 8) & 0xFF);
}

struct Layout {
  WavInfo info;
  int format_tag = 0;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

Layout parse_layout(std::span<const std::uint8_t> b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw AudioDecodeError("not a RIFF/WAVE file");
  Layout l;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = le32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > b.size()) throw AudioDecodeError("truncated fmt chunk");
      l.format_tag = le16(b, body);
      l.info.channels = le16(b, body + 2);
      l.info.sample_rate_hz = static_cast<int>(le32(b, body + 4));
      l.info.bits_per_sample = le16(b, body + 14);
      if (l.format_tag == 0xFFFE && size >= 40 && body + 26 <= b.size())
        l.format_tag = le16(b, body + 24);  // WAVE_FORMAT_EXTENSIBLE sub-format
      have_fmt = true;
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      l.data_offset = body;
      l.data_size = std::min<std::size_t>(size, b.size() - body);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw AudioDecodeError("missing fmt chunk");
  if (!have_data) throw AudioDecodeError("missing data chunk");
  if (l.info.channels <= 0 || l.info.sample_rate_hz <= 0) throw AudioDecodeError("invalid format header");
  const bool pcm = l.format_tag == 1 && (l.info.bits_per_sample == 8 || l.info.bits_per_sample == 16 ||
                                         l.info.bits_per_sample == 24 || l.info.bits_per_sample == 32);
  const bool flt = l.format_tag == 3 && l.info.bits_per_sample == 32;
  if (!pcm && !flt)
    throw AudioDecodeError(fmt::format("unsupported WAV encoding (format {}, {} bits)", l.format_tag,
                                       l.info.bits_per_sample));
  const std::size_t frame_bytes =
      static_cast<std::size_t>(l.info.channels) * static_cast<std::size_t>(l.info.bits_per_sample / 8);
  l.info.frames = l.data_size / frame_bytes;
  return l;
}

std::int16_t clamp16(double v) {
  return static_cast<std::int16_t>(std::clamp(std::lround(v), -32768L, 32767L));
}

}  // namespace

WavInfo probe_wav(std::span<const std::uint8_t> bytes) { return parse_layout(bytes).info; }

AudioBlob decode_wav(std::span<const std::uint8_t> b) {
  const auto l = parse_layout(b);
  AudioBlob out;
  out.sample_rate_hz = l.info.sample_rate_hz;
  out.channels = l.info.channels;
  const std::size_t n = l.info.frames * static_cast<std::size_t>(l.info.channels);
  out.samples.resize(n);
  const std::size_t width = static_cast<std::size_t>(l.info.bits_per_sample / 8);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = l.data_offset + i * width;
    if (l.format_tag == 3) {
      float f;
      const std::uint32_t raw = le32(b, at);
      std::memcpy(&f, &raw, 4);
      out.samples[i] = clamp16(static_cast<double>(f) * 32767.0);
    } else if (width == 1) {
      out.samples[i] = static_cast<std::int16_t>((static_cast<int>(b[at]) - 128) << 8);
    } else if (width == 2) {
      out.samples[i] = static_cast<std::int16_t>(le16(b, at));
    } else if (width == 3) {
      const std::int32_t v = static_cast<std::int32_t>((b[at] << 8) | (b[at + 1] << 16) | (b[at + 2] << 24));
      out.samples[i] = static_cast<std::int16_t>(v >> 16);
    } else {
      out.samples[i] = static_cast<std::int16_t>(static_cast<std::int32_t>(le32(b, at)) >> 16);
    }
  }
  return out;
}

AudioBlob decode_wav(std::string_view bytes) {
  return decode_wav(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()),
                                                  bytes.size()));
}

std::string encode_wav(const AudioBlob& blob) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(blob.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, static_cast<std::uint16_t>(blob.channels));
  put32(out, static_cast<std::uint32_t>(blob.sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(blob.sample_rate_hz * blob.channels * 2));
  put16(out, static_cast<std::uint16_t>(blob.channels * 2));
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (std::int16_t s : blob.samples) put16(out, static_cast<std::uint16_t>(s));
  return out;
}

AudioBlob read_wav(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = text::read_file(path.string());
  } catch (const Error&) {
    throw AudioDecodeError(fmt::format("cannot read {}", path.string()));
  }
  try {
    return decode_wav(bytes);
  } catch (const AudioDecodeError& e) {
    throw AudioDecodeError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

WavInfo probe_wav_file(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = text::read_file(path.string());
  } catch (const Error&) {
    throw AudioDecodeError(fmt::format("cannot read {}", path.string()));
  }
  return probe_wav(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()),
                                                 bytes.size()));
}

void write_wav(const std::filesystem::path& path, const AudioBlob& blob) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  text::write_file(path.string(), encode_wav(blob));
}

AudioBlob downmix(const AudioBlob& in) {
  if (in.channels == 1) return in;
  AudioBlob out;
  out.sample_rate_hz = in.sample_rate_hz;
  out.channels = 1;
  const std::size_t frames = in.frames();
  const auto ch = static_cast<std::size_t>(in.channels);
  out.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    long sum = 0;
    for (std::size_t c = 0; c < ch; ++c) sum += in.samples[f * ch + c];
    out.samples[f] = clamp16(static_cast<double>(sum) / static_cast<double>(ch));
  }
  return out;
}

AudioBlob resample(const AudioBlob& in, int target_rate, ResampleQuality quality) {
  if (target_rate <= 0) throw ConfigError("target sample rate must be positive");
  if (in.sample_rate_hz == target_rate) return in;
  const AudioBlob mono = downmix(in);
  const std::size_t n_in = mono.samples.size();
  const double ratio = static_cast<double>(in.sample_rate_hz) / target_rate;
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * target_rate / in.sample_rate_hz));

  AudioBlob out;
  out.sample_rate_hz = target_rate;
  out.channels = 1;
  out.samples.resize(n_out);
  auto sample_at = [&](long i) -> double {
    if (i < 0 || static_cast<std::size_t>(i) >= n_in) return 0.0;
    return mono.samples[static_cast<std::size_t>(i)];
  };

  if (quality == ResampleQuality::Linear) {
    for (std::size_t n = 0; n < n_out; ++n) {
      const double t = static_cast<double>(n) * ratio;
      const auto i0 = static_cast<long>(std::floor(t));
      const double frac = t - static_cast<double>(i0);
      const double next = static_cast<std::size_t>(i0 + 1) < n_in ? sample_at(i0 + 1) : sample_at(i0);
      out.samples[n] = clamp16(sample_at(i0) * (1.0 - frac) + next * frac);
    }
    return out;
  }

  // Hann-windowed sinc; the cutoff follows the lower of the two Nyquist rates.
  constexpr int kZeroCrossings = 16;
  const double cutoff = std::min(1.0, 1.0 / ratio);
  const double half_width = kZeroCrossings / cutoff;
  for (std::size_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) * ratio;
    const auto lo = static_cast<long>(std::ceil(t - half_width));
    const auto hi = static_cast<long>(std::floor(t + half_width));
    double acc = 0.0, norm = 0.0;
    for (long i = lo; i <= hi; ++i) {
      const double x = static_cast<double>(i) - t;
      const double arg = std::numbers::pi * cutoff * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double window = 0.5 * (1.0 + std::cos(std::numbers::pi * x / half_width));
      const double w = sinc * window;
      norm += w;
      acc += w * sample_at(i);
    }
    out.samples[n] = clamp16(norm != 0.0 ? acc / norm : 0.0);
  }
  return out;
}

AudioBlob to_pipeline_format(const AudioBlob& in, ResampleQuality quality) {
  if (in.conforms()) return in;
  return resample(downmix(in), kPipelineRate, quality);
}

std::string content_hash(const AudioBlob& blob) {
  std::string bytes = fmt::format("pcm16|{}|{}|", blob.sample_rate_hz, blob.channels);
  bytes.reserve(bytes.size() + blob.samples.size() * 2);
  for (std::int16_t s : blob.samples) {
    const auto u = static_cast<std::uint16_t>(s);
    bytes += static_cast<char>(u & 0xFF);
    bytes += static_cast<char>(u >> 8);
  }
  return sha256_hex(bytes);
}

}  // namespace syncog::audio
