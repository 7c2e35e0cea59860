#include "syncog/timbre.hpp"

#include "syncog/audio.hpp"
#include "syncog/hash.hpp"
#include "syncog/text.hpp"

#include <fstream>

#include <fmt/format.h>

namespace syncog::timbre {

using nlohmann::json;

std::string_view to_string(AgeBucket b) {
  switch (b) {
    case AgeBucket::Sixties: return "60s";
    case AgeBucket::Seventies: return "70s";
    case AgeBucket::Eighties: return "80s";
    case AgeBucket::Unknown: return "unknown";
  }
  return "unknown";
}

AgeBucket parse_age_bucket(std::string_view s) {
  if (s == "60s") return AgeBucket::Sixties;
  if (s == "70s") return AgeBucket::Seventies;
  if (s == "80s") return AgeBucket::Eighties;
  if (s == "unknown" || s.empty()) return AgeBucket::Unknown;
  throw ParseError(fmt::format("unknown age bucket '{}'", s));
}

AgeBucket bucket_for_age(int age) {
  if (age < 70) return AgeBucket::Sixties;
  if (age < 80) return AgeBucket::Seventies;
  return AgeBucket::Eighties;
}

std::string_view to_string(AuditReason r) {
  switch (r) {
    case AuditReason::NotMono: return "not_mono";
    case AuditReason::WrongRate: return "wrong_rate";
    case AuditReason::TooShort: return "too_short";
    case AuditReason::Unreadable: return "unreadable";
  }
  return "unreadable";
}

TimbreEntry audit_reference(const std::filesystem::path& path, const TimbreMetadata& metadata) {
  std::string bytes;
  audio::WavInfo info;
  try {
    bytes = text::read_file(path.string());
    info = audio::probe_wav(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  } catch (const Error& e) {
    throw AuditFailed(AuditReason::Unreadable, fmt::format("{}: {}", path.string(), e.what()));
  }
  if (info.channels != 1)
    throw AuditFailed(AuditReason::NotMono,
                      fmt::format("{}: {} channels, expected mono", path.string(), info.channels));
  if (info.sample_rate_hz != audio::kPipelineRate)
    throw AuditFailed(AuditReason::WrongRate, fmt::format("{}: {} Hz, expected {} Hz", path.string(),
                                                          info.sample_rate_hz, audio::kPipelineRate));
  if (info.duration_s() < kMinReferenceSeconds)
    throw AuditFailed(AuditReason::TooShort,
                      fmt::format("{}: {:.2f} s, minimum is {:.1f} s", path.string(),
                                  info.duration_s(), kMinReferenceSeconds));
  TimbreEntry e;
  e.timbre_id = metadata.timbre_id.empty() ? path.stem().string() : metadata.timbre_id;
  e.file_path = path.string();
  e.sex = metadata.sex;
  e.age_bucket = metadata.age_bucket;
  e.duration_s = info.duration_s();
  e.sample_rate_hz = info.sample_rate_hz;
  e.channels = info.channels;
  e.checksum = sha256_hex(bytes);
  return e;
}

const TimbreEntry& TimbreLibrary::register_file(const std::filesystem::path& path,
                                                const TimbreMetadata& metadata) {
  auto entry = audit_reference(path, metadata);
  if (!root_.empty()) {
    const auto rel = std::filesystem::relative(std::filesystem::absolute(path), std::filesystem::absolute(root_));
    if (!rel.empty() && rel.native().rfind("..", 0) != 0) entry.file_path = rel.string();
  }
  add(std::move(entry));
  return entries_.back();
}

void TimbreLibrary::add(TimbreEntry entry) {
  if (find(entry.timbre_id))
    throw ConfigError(fmt::format("duplicate timbre id '{}'", entry.timbre_id));
  const std::size_t idx = entries_.size();
  by_bucket_[{entry.sex, entry.age_bucket}].push_back(idx);
  by_sex_[entry.sex].push_back(idx);
  entries_.push_back(std::move(entry));
}

const TimbreEntry& TimbreLibrary::select(Sex sex, std::optional<AgeBucket> preferred, Rng& rng) const {
  const std::vector<std::size_t>* pool = nullptr;
  if (preferred) {
    const auto it = by_bucket_.find({sex, *preferred});
    if (it != by_bucket_.end() && !it->second.empty()) pool = &it->second;
  }
  if (!pool) {
    const auto it = by_sex_.find(sex);
    if (it == by_sex_.end() || it->second.empty())
      throw NoMatch(fmt::format("timbre library has no {} voice", syncog::to_string(sex)));
    pool = &it->second;
  }
  return entries_[(*pool)[rng.index(pool->size())]];
}

const TimbreEntry* TimbreLibrary::find(std::string_view timbre_id) const {
  for (const auto& e : entries_)
    if (e.timbre_id == timbre_id) return &e;
  return nullptr;
}

std::size_t TimbreLibrary::count(Sex sex) const {
  const auto it = by_sex_.find(sex);
  return it == by_sex_.end() ? 0 : it->second.size();
}

std::filesystem::path TimbreLibrary::resolve(const TimbreEntry& e) const {
  std::filesystem::path p(e.file_path);
  if (p.is_absolute() || root_.empty()) return p;
  return root_ / p;
}

TimbreLibrary TimbreLibrary::load(const std::filesystem::path& root) {
  TimbreLibrary lib(root);
  const auto index = root / "timbres.jsonl";
  if (!std::filesystem::exists(index)) return lib;
  std::ifstream in(index);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      lib.add(timbre_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", index.string(), lineno, e.what()));
    }
  }
  return lib;
}

void TimbreLibrary::save() const {
  std::filesystem::create_directories(root_);
  std::string out;
  for (const auto& e : entries_) out += to_json(e).dump() + "\n";
  text::write_file((root_ / "timbres.jsonl").string(), out);
}

TimbreLibrary stub_library() {
  TimbreLibrary lib;
  for (auto sex : {Sex::Female, Sex::Male}) {
    TimbreEntry e;
    e.timbre_id = fmt::format("stub-{}", syncog::to_string(sex));
    e.sex = sex;
    e.age_bucket = AgeBucket::Unknown;
    e.duration_s = 10.0;
    e.sample_rate_hz = audio::kPipelineRate;
    e.channels = 1;
    e.checksum = "stub";
    lib.add(e);
  }
  return lib;
}

LibraryAudit audit_library(const TimbreLibrary& library) {
  LibraryAudit report;
  for (const auto& e : library.entries()) {
    ++report.checked;
    (e.sex == Sex::Female ? report.female : report.male) += 1;
    try {
      const auto fresh = audit_reference(library.resolve(e), {e.timbre_id, e.sex, e.age_bucket});
      if (fresh.checksum != e.checksum) report.failures.emplace_back(e.timbre_id, "checksum_mismatch");
    } catch (const AuditFailed& f) {
      report.failures.emplace_back(e.timbre_id, std::string(to_string(f.reason())));
    }
  }
  return report;
}

json to_json(const TimbreEntry& e) {
  return {{"timbre_id", e.timbre_id},         {"file_path", e.file_path},
          {"sex", syncog::to_string(e.sex)},  {"age_bucket", to_string(e.age_bucket)},
          {"duration_s", e.duration_s},       {"sample_rate_hz", e.sample_rate_hz},
          {"channels", e.channels},           {"checksum", e.checksum}};
}

TimbreEntry timbre_from_json(const json& j) {
  TimbreEntry e;
  e.timbre_id = j.at("timbre_id").get<std::string>();
  e.file_path = j.at("file_path").get<std::string>();
  e.sex = parse_sex(j.at("sex").get<std::string>());
  e.age_bucket = parse_age_bucket(j.value("age_bucket", std::string("unknown")));
  e.duration_s = j.at("duration_s").get<double>();
  e.sample_rate_hz = j.at("sample_rate_hz").get<int>();
  e.channels = j.at("channels").get<int>();
  e.checksum = j.at("checksum").get<std::string>();
  return e;
}

}  // namespace syncog::timbre
