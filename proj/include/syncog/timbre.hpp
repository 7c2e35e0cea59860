#pragma once

#include "syncog/rng.hpp"
#include "syncog/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace syncog::timbre {

enum class AgeBucket { Sixties, Seventies, Eighties, Unknown };

std::string_view to_string(AgeBucket b);
AgeBucket parse_age_bucket(std::string_view s);
/// <70 -> 60s, 70-79 -> 70s, >=80 -> 80s.
AgeBucket bucket_for_age(int age);

inline constexpr double kMinReferenceSeconds = 3.0;

struct TimbreEntry {
  std::string timbre_id;
  std::string file_path;  // relative to the library root unless absolute
  Sex sex = Sex::Female;
  AgeBucket age_bucket = AgeBucket::Unknown;
  double duration_s = 0.0;
  int sample_rate_hz = 0;
  int channels = 0;
  std::string checksum;  // sha256 of the file bytes

  friend bool operator==(const TimbreEntry&, const TimbreEntry&) = default;
};

enum class AuditReason { NotMono, WrongRate, TooShort, Unreadable };
std::string_view to_string(AuditReason r);

class AuditFailed : public Error {
 public:
  AuditFailed(AuditReason reason, const std::string& what)
      : Error("AuditFailed", what), reason_(reason) {}
  AuditReason reason() const noexcept { return reason_; }

 private:
  AuditReason reason_;
};

class NoMatch : public Error {
 public:
  explicit NoMatch(const std::string& what) : Error("NoMatch", what) {}
};

struct TimbreMetadata {
  std::string timbre_id;  // empty: derived from the file stem
  Sex sex = Sex::Female;
  AgeBucket age_bucket = AgeBucket::Unknown;
};

/// Checks a reference file (mono, 16 kHz, >= 3 s) and builds its entry.
TimbreEntry audit_reference(const std::filesystem::path& path, const TimbreMetadata& metadata);

class TimbreLibrary {
 public:
  TimbreLibrary() = default;
  explicit TimbreLibrary(std::filesystem::path root) : root_(std::move(root)) {}

  /// Audits and appends. Paths inside the root are stored relative to it.
  const TimbreEntry& register_file(const std::filesystem::path& path, const TimbreMetadata& metadata);
  /// Appends an already-built entry (used when loading and for virtual stub voices).
  void add(TimbreEntry entry);

  /// Uniform seeded choice among entries of `sex` in the preferred bucket,
  /// falling back to any entry of that sex.
  const TimbreEntry& select(Sex sex, std::optional<AgeBucket> preferred, Rng& rng) const;

  const std::vector<TimbreEntry>& entries() const noexcept { return entries_; }
  const TimbreEntry* find(std::string_view timbre_id) const;
  std::size_t count(Sex sex) const;
  std::filesystem::path resolve(const TimbreEntry& e) const;
  const std::filesystem::path& root() const noexcept { return root_; }

  /// `<root>/timbres.jsonl`
  static TimbreLibrary load(const std::filesystem::path& root);
  void save() const;

 private:
  std::filesystem::path root_;
  std::vector<TimbreEntry> entries_;
  std::map<std::pair<Sex, AgeBucket>, std::vector<std::size_t>> by_bucket_;
  std::map<Sex, std::vector<std::size_t>> by_sex_;
};

/// A library of two virtual voices (one per sex) for stub synthesis.
TimbreLibrary stub_library();

struct LibraryAudit {
  int checked = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (timbre_id, reason)
  int female = 0;
  int male = 0;
};

/// Re-probes every registered file and verifies its checksum.
LibraryAudit audit_library(const TimbreLibrary& library);

nlohmann::json to_json(const TimbreEntry& e);
TimbreEntry timbre_from_json(const nlohmann::json& j);

}  // namespace syncog::timbre
