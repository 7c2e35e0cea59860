#include "syncog/preprocess.hpp"

#include "syncog/hash.hpp"
#include "syncog/parallel.hpp"
#include "syncog/text.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <fmt/format.h>

namespace syncog::preprocess {

void DiarizationSegments::validate() const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.start_s >= 0.0 && s.start_s < s.end_s))
      throw ParseError(fmt::format("segment {}: need 0 <= start < end, got {} {}", i, s.start_s, s.end_s));
    if (i > 0 && segments[i - 1].start_s > s.start_s) throw ParseError("segments are not sorted by start");
  }
}

std::map<std::string, double> DiarizationSegments::durations() const {
  std::map<std::string, double> d;
  for (const auto& s : segments) d[s.speaker] += s.end_s - s.start_s;
  return d;
}

DiarizationSegments parse_segments(std::string_view body) {
  DiarizationSegments out;
  int lineno = 0;
  for (const auto& raw : text::split(body, '\n')) {
    ++lineno;
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto fields = text::split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != 3) throw ParseError(fmt::format("segments line {}: expected 'speaker start end'", lineno));
    Segment s;
    s.speaker = fields[0];
    try {
      s.start_s = std::stod(fields[1]);
      s.end_s = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw ParseError(fmt::format("segments line {}: bad number", lineno));
    }
    out.segments.push_back(std::move(s));
  }
  std::stable_sort(out.segments.begin(), out.segments.end(),
                   [](const Segment& a, const Segment& b) { return a.start_s < b.start_s; });
  out.validate();
  return out;
}

RawRecording RawRecording::probe(const std::filesystem::path& path) {
  const auto info = audio::probe_wav_file(path);
  RawRecording r;
  r.path = path;
  r.sample_rate_hz = info.sample_rate_hz;
  r.channels = info.channels;
  r.duration_s = info.duration_s();
  if (!(r.duration_s > 0.0)) throw audio::AudioDecodeError(path.string() + ": recording is empty");
  return r;
}

audio::AudioBlob standardize(const RawRecording& raw, audio::ResampleQuality quality) {
  return audio::to_pipeline_format(audio::read_wav(raw.path), quality);
}

std::string majority_speaker(const DiarizationSegments& segments) {
  std::string best;
  double best_total = -1.0;
  for (const auto& [speaker, total] : segments.durations()) {
    if (total > best_total) {
      best = speaker;
      best_total = total;
    }
  }
  if (best.empty()) throw NoSegments("diarization has no segments");
  return best;
}

audio::AudioBlob isolate_participant(const audio::AudioBlob& in, const DiarizationSegments& segments,
                                     const std::optional<std::string>& participant_id, double cap_s) {
  const std::string who = participant_id ? *participant_id : majority_speaker(segments);
  const auto ch = static_cast<std::size_t>(in.channels);
  const std::size_t frames = in.frames();
  const auto cap = static_cast<std::size_t>(std::llround(cap_s * in.sample_rate_hz));
  constexpr double kTolerance = 0.05;  // seconds of slack for rounding in sidecars

  audio::AudioBlob out;
  out.sample_rate_hz = in.sample_rate_hz;
  out.channels = in.channels;
  bool any = false;
  for (const auto& s : segments.segments) {
    if (s.speaker != who) continue;
    any = true;
    if (s.end_s > in.duration_s() + kTolerance)
      throw Error("SegmentOutOfRange", fmt::format("segment {}-{} s exceeds audio duration {:.3f} s", s.start_s,
                                                   s.end_s, in.duration_s()));
    const auto a = std::min(frames, static_cast<std::size_t>(std::llround(s.start_s * in.sample_rate_hz)));
    const auto b = std::min(frames, static_cast<std::size_t>(std::llround(s.end_s * in.sample_rate_hz)));
    const std::size_t have = out.frames();
    const std::size_t take = std::min(b - a, cap - have);
    out.samples.insert(out.samples.end(), in.samples.begin() + static_cast<std::ptrdiff_t>(a * ch),
                       in.samples.begin() + static_cast<std::ptrdiff_t>((a + take) * ch));
    if (out.frames() >= cap) break;
  }
  if (!any) throw NoSegments(fmt::format("no segments for speaker '{}'", who));
  return out;
}

corpus::SampleRecord build_pair(const audio::AudioBlob& audio, const std::string& transcript,
                                const std::optional<CognitiveStatus>& label, Language language,
                                const std::string& cohort_id) {
  if (text::trim(transcript).empty()) throw EmptyTranscript("transcript is empty");
  if (!audio.conforms())
    throw ConfigError(fmt::format("audio must be mono 16 kHz, got {} ch at {} Hz", audio.channels,
                                  audio.sample_rate_hz));
  corpus::SampleRecord r;
  r.cohort_id = cohort_id;
  r.language = language;
  r.label = label;
  r.transcript = transcript;
  r.transcript_hash = sha256_hex(transcript);
  r.audio.checksum = sha256_hex(audio::encode_wav(audio));
  r.provenance = corpus::Provenance::Real;
  r.sample_id = corpus::sample_id_for(r.transcript_hash, r.audio.checksum,
                                      label ? std::optional<Label>(label->label()) : std::nullopt);
  r.audio.path = fmt::format("audio/real/{}.wav", r.sample_id);
  return r;
}

BatchResult run_batch(const BatchOptions& opt, services::Transcriber* transcriber) {
  std::vector<std::filesystem::path> inputs;
  for (const auto& entry : std::filesystem::directory_iterator(opt.input_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav") inputs.push_back(entry.path());
  std::sort(inputs.begin(), inputs.end());

  std::vector<std::optional<corpus::SampleRecord>> records(inputs.size());
  std::vector<std::optional<BatchFailure>> failures(inputs.size());
  parallel_for(inputs.size(), opt.jobs, [&](std::size_t i) {
    const auto& wav = inputs[i];
    auto sidecar = [&](std::string_view ext) {
      auto p = wav;
      p.replace_extension(ext);
      return p;
    };
    try {
      auto audio = standardize(RawRecording::probe(wav), opt.quality);
      if (std::filesystem::exists(sidecar(".segments")))
        audio = isolate_participant(audio, parse_segments(text::read_file(sidecar(".segments").string())));
      std::string transcript;
      if (std::filesystem::exists(sidecar(".txt"))) {
        transcript = text::read_file(sidecar(".txt").string());
        while (!transcript.empty() && (transcript.back() == '\n' || transcript.back() == '\r')) transcript.pop_back();
      } else if (transcriber) {
        transcript = transcriber->transcribe(audio);
      } else {
        throw EmptyTranscript("no transcript sidecar and no transcriber configured");
      }
      std::optional<CognitiveStatus> label;
      if (std::filesystem::exists(sidecar(".label")))
        label = CognitiveStatus(opt.scheme, parse_label(text::trim(text::read_file(sidecar(".label").string()))));
      auto rec = build_pair(audio, transcript, label, opt.language, opt.cohort_id);
      audio::write_wav(opt.run_dir / rec.audio.path, audio);
      records[i] = std::move(rec);
    } catch (const Error& e) {
      failures[i] = BatchFailure{wav.filename().string(), e.kind(), e.what()};
    }
  });

  BatchResult out;
  out.manifest.cohort_id = opt.cohort_id;
  out.manifest.created_at = corpus::utc_timestamp();
  out.manifest.spec = {{"source", "preprocess"}, {"input_dir", opt.input_dir.string()}};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (records[i]) out.manifest.records.push_back(std::move(*records[i]));
    if (failures[i]) out.failures.push_back(std::move(*failures[i]));
  }
  out.manifest.seal = corpus::seal_of(out.manifest.records);
  return out;
}

}  // namespace syncog::preprocess
