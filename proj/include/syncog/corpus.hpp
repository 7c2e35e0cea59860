#pragma once

#include "syncog/persona.hpp"
#include "syncog/rng.hpp"
#include "syncog/rubric.hpp"
#include "syncog/seed.hpp"
#include "syncog/types.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace syncog::corpus {

inline constexpr std::string_view kManifestSchema = "syncog-manifest/1";
inline constexpr std::string_view kToolVersion = "syncog 0.1.0";

enum class Provenance { Real, Synthetic };
std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

class SchemaVersionMismatch : public Error {
 public:
  explicit SchemaVersionMismatch(const std::string& what) : Error("SchemaVersionMismatch", what) {}
};

class InsufficientSynthetic : public Error {
 public:
  InsufficientSynthetic(Label label, std::size_t needed, std::size_t available);
  Label label;
  std::size_t needed;
  std::size_t available;
};

struct AudioRef {
  std::string path;      // relative to the run directory
  std::string checksum;  // sha256 of the WAV file bytes
  friend bool operator==(const AudioRef&, const AudioRef&) = default;
};

struct GenerationMeta {
  std::uint64_t template_version = 0;
  std::string timbre_id;
  int attempts = 0;
  int matched_dims = 0;
  std::vector<std::string> flags;
  friend bool operator==(const GenerationMeta&, const GenerationMeta&) = default;
};

struct SampleRecord {
  std::string sample_id;
  std::string cohort_id;
  Language language = Language::EN;
  std::optional<CognitiveStatus> label;
  std::optional<persona::Persona> persona;
  AudioRef audio;
  std::string transcript;
  std::string transcript_hash;  // sha256 of the transcript bytes
  std::optional<rubric::FeatureProfile> feature_profile;
  Provenance provenance = Provenance::Real;
  std::optional<GenerationMeta> generation;
  std::uint64_t seed = 0;

  bool flagged() const { return generation && !generation->flags.empty(); }
};

/// Stable hash of (transcript hash, audio checksum, label).
std::string sample_id_for(std::string_view transcript_hash, std::string_view audio_checksum,
                          std::optional<Label> label);

struct CohortManifest {
  std::string cohort_id;
  nlohmann::json spec;  // snapshot of the generating configuration
  std::string created_at;
  std::string tool_version{kToolVersion};
  std::uint64_t master_seed = 0;
  std::vector<SampleRecord> records;
  std::optional<std::string> seal;  // present once the manifest is complete

  const SampleRecord* find(std::string_view sample_id) const;
};

/// Hash over the serialized record lines, in order.
std::string seal_of(const std::vector<SampleRecord>& records);

/// Header line, one line per record, and a trailer carrying the seal if sealed.
void write_manifest(const CohortManifest& manifest, const std::filesystem::path& path);
CohortManifest read_manifest(const std::filesystem::path& path);

/// Appends records to a manifest file one line at a time (single writer).
/// Opening an existing unsealed manifest continues it.
class ManifestWriter {
 public:
  /// Creates the file with `header` unless it already exists, in which case
  /// the existing records are loaded and the header is kept.
  ManifestWriter(const std::filesystem::path& path, const CohortManifest& header);

  void append(const SampleRecord& record);
  /// Writes the trailer. No appends are accepted afterwards.
  void seal();

  const CohortManifest& manifest() const noexcept { return manifest_; }
  bool sealed() const noexcept { return manifest_.seal.has_value(); }

 private:
  std::filesystem::path path_;
  CohortManifest manifest_;
  std::ofstream out_;
  std::mutex mu_;
};

struct IntegrityIssue {
  std::string sample_id;
  std::string problem;
};

/// Verifies transcript hashes, sample ids, the seal, and (when `run_dir` is
/// given) audio file checksums.
std::vector<IntegrityIssue> integrity_check(const CohortManifest& manifest,
                                            const std::optional<std::filesystem::path>& run_dir = std::nullopt);

struct SplitEntry {
  std::string sample_id;
  Label label = Label::AD;
  Provenance provenance = Provenance::Real;
  friend bool operator==(const SplitEntry&, const SplitEntry&) = default;
};

struct DatasetSplit {
  std::string name;
  std::vector<SplitEntry> entries;

  std::map<Label, int> histogram() const;
  std::map<Label, int> histogram(Provenance provenance) const;
  std::set<std::string> ids() const;
};

/// All labelled, unflagged records of a manifest.
DatasetSplit split_from_manifest(const CohortManifest& manifest, std::string name,
                                 bool include_flagged = false);

/// Every real sample plus ratio x |real_c| synthetic samples of each class c,
/// drawn uniformly without replacement.
DatasetSplit mix(const DatasetSplit& real, const DatasetSplit& synthetic, int ratio, Rng& rng);

/// Per-class seeded split into (train, test).
std::pair<DatasetSplit, DatasetSplit> stratified_split(const DatasetSplit& all, double test_fraction, Rng& rng);

/// Throws if any id appears in both splits.
void check_disjoint(const DatasetSplit& a, const DatasetSplit& b);

struct CotRecord {
  std::string sample_id;
  std::string rationale;
  Label label = Label::AD;
  std::uint64_t prompt_version = 0;
  Label parsed_conclusion = Label::AD;
  friend bool operator==(const CotRecord&, const CotRecord&) = default;
};

nlohmann::json to_json(const SampleRecord& r);
SampleRecord sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetSplit& s);
DatasetSplit split_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CotRecord& c);
CotRecord cot_from_json(const nlohmann::json& j);

void write_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit read_split(const std::filesystem::path& path);
void write_cot_records(const std::vector<CotRecord>& records, const std::filesystem::path& path);
std::vector<CotRecord> read_cot_records(const std::filesystem::path& path);

/// UTC time, ISO 8601 with seconds.
std::string utc_timestamp();

}  // namespace syncog::corpus
