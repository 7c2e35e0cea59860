#include "syncog/corpus.hpp"

#include "syncog/hash.hpp"
#include "syncog/text.hpp"

#include <ctime>
#include <sstream>

#include <fmt/format.h>

namespace syncog::corpus {

using nlohmann::json;

std::string_view to_string(Provenance p) { return p == Provenance::Real ? "real" : "synthetic"; }

Provenance parse_provenance(std::string_view s) {
  if (s == "real") return Provenance::Real;
  if (s == "synthetic") return Provenance::Synthetic;
  throw ParseError(fmt::format("unknown provenance '{}'", s));
}

InsufficientSynthetic::InsufficientSynthetic(Label l, std::size_t n, std::size_t a)
    : Error("InsufficientSynthetic",
            fmt::format("class {}: need {} synthetic samples, only {} available", syncog::to_string(l), n, a)),
      label(l),
      needed(n),
      available(a) {}

std::string sample_id_for(std::string_view transcript_hash, std::string_view audio_checksum,
                          std::optional<Label> label) {
  const std::string key = fmt::format("sample/1|{}|{}|{}", transcript_hash, audio_checksum,
                                      label ? syncog::to_string(*label) : std::string_view("unlabelled"));
  return hex64(stable_hash64(key));
}

const SampleRecord* CohortManifest::find(std::string_view sample_id) const {
  for (const auto& r : records)
    if (r.sample_id == sample_id) return &r;
  return nullptr;
}

// ---- JSON ---------------------------------------------------------------------------

json to_json(const SampleRecord& r) {
  json j{{"sample_id", r.sample_id},
         {"cohort_id", r.cohort_id},
         {"language", syncog::to_string(r.language)},
         {"audio", {{"path", r.audio.path}, {"checksum", r.audio.checksum}}},
         {"transcript", r.transcript},
         {"transcript_sha256", r.transcript_hash},
         {"provenance", to_string(r.provenance)},
         {"seed", hex64(r.seed)}};
  j["label"] = r.label ? json{{"scheme", syncog::to_string(r.label->scheme())},
                              {"label", syncog::to_string(r.label->label())}}
                       : json(nullptr);
  j["persona"] = r.persona ? persona::to_json(*r.persona) : json(nullptr);
  j["feature_profile"] = r.feature_profile ? rubric::to_json(*r.feature_profile) : json(nullptr);
  if (r.generation) {
    j["generation"] = {{"template_version", hex64(r.generation->template_version)},
                       {"timbre_id", r.generation->timbre_id},
                       {"attempts", r.generation->attempts},
                       {"matched_dims", r.generation->matched_dims},
                       {"flags", r.generation->flags}};
  } else {
    j["generation"] = nullptr;
  }
  return j;
}

SampleRecord sample_from_json(const json& j) {
  SampleRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.cohort_id = j.value("cohort_id", std::string());
  r.language = parse_language(j.at("language").get<std::string>());
  r.audio.path = j.at("audio").value("path", std::string());
  r.audio.checksum = j.at("audio").value("checksum", std::string());
  r.transcript = j.at("transcript").get<std::string>();
  r.transcript_hash = j.value("transcript_sha256", std::string());
  r.provenance = parse_provenance(j.at("provenance").get<std::string>());
  r.seed = parse_hex64(j.value("seed", std::string("0000000000000000")));
  if (j.contains("label") && !j.at("label").is_null())
    r.label = CognitiveStatus(parse_scheme(j.at("label").at("scheme").get<std::string>()),
                              parse_label(j.at("label").at("label").get<std::string>()));
  if (j.contains("persona") && !j.at("persona").is_null()) r.persona = persona::persona_from_json(j.at("persona"));
  if (j.contains("feature_profile") && !j.at("feature_profile").is_null())
    r.feature_profile = rubric::profile_from_json(j.at("feature_profile"));
  if (j.contains("generation") && !j.at("generation").is_null()) {
    const auto& g = j.at("generation");
    GenerationMeta m;
    m.template_version = parse_hex64(g.at("template_version").get<std::string>());
    m.timbre_id = g.value("timbre_id", std::string());
    m.attempts = g.value("attempts", 0);
    m.matched_dims = g.value("matched_dims", 0);
    m.flags = g.value("flags", std::vector<std::string>{});
    r.generation = m;
  }
  return r;
}

json to_json(const DatasetSplit& s) {
  json entries = json::array();
  for (const auto& e : s.entries)
    entries.push_back({{"sample_id", e.sample_id},
                       {"label", syncog::to_string(e.label)},
                       {"provenance", to_string(e.provenance)}});
  json hist = json::object();
  for (const auto& [label, n] : s.histogram()) hist[std::string(syncog::to_string(label))] = n;
  return {{"name", s.name}, {"entries", entries}, {"histogram", hist}};
}

DatasetSplit split_from_json(const json& j) {
  DatasetSplit s;
  s.name = j.at("name").get<std::string>();
  for (const auto& e : j.at("entries"))
    s.entries.push_back({e.at("sample_id").get<std::string>(), parse_label(e.at("label").get<std::string>()),
                         parse_provenance(e.value("provenance", std::string("real")))});
  return s;
}

json to_json(const CotRecord& c) {
  return {{"sample_id", c.sample_id},
          {"rationale", c.rationale},
          {"label", syncog::to_string(c.label)},
          {"prompt_version", hex64(c.prompt_version)},
          {"parsed_conclusion", syncog::to_string(c.parsed_conclusion)}};
}

CotRecord cot_from_json(const json& j) {
  CotRecord c;
  c.sample_id = j.at("sample_id").get<std::string>();
  c.rationale = j.at("rationale").get<std::string>();
  c.label = parse_label(j.at("label").get<std::string>());
  c.prompt_version = parse_hex64(j.at("prompt_version").get<std::string>());
  c.parsed_conclusion = parse_label(j.at("parsed_conclusion").get<std::string>());
  return c;
}

// ---- manifests ------------------------------------------------------------------------

namespace {

json header_json(const CohortManifest& m) {
  return {{"schema", kManifestSchema},   {"cohort_id", m.cohort_id},
          {"spec", m.spec},              {"created_at", m.created_at},
          {"tool_version", m.tool_version}, {"master_seed", hex64(m.master_seed)}};
}

json trailer_json(const CohortManifest& m) {
  return {{"seal", *m.seal}, {"records", m.records.size()}};
}

}  // namespace

std::string seal_of(const std::vector<SampleRecord>& records) {
  std::string all;
  for (const auto& r : records) all += to_json(r).dump() + "\n";
  return sha256_hex(all);
}

void write_manifest(const CohortManifest& m, const std::filesystem::path& path) {
  std::string out = header_json(m).dump() + "\n";
  for (const auto& r : m.records) out += to_json(r).dump() + "\n";
  if (m.seal) out += trailer_json(m).dump() + "\n";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  text::write_file(path.string(), out);
}

CohortManifest read_manifest(const std::filesystem::path& path) {
  const std::string body = text::read_file(path.string());
  std::istringstream in(body);
  std::string line;
  CohortManifest m;
  int lineno = 0;
  bool have_header = false;
  const bool truncated_tail = !body.empty() && body.back() != '\n';
  std::size_t consumed = 0;
  while (std::getline(in, line)) {
    ++lineno;
    consumed += line.size() + 1;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      // An interrupted append leaves a partial final line; it is dropped.
      if (truncated_tail && consumed >= body.size()) break;
      throw ParseError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
    if (!have_header) {
      const auto schema = j.value("schema", std::string());
      if (schema != kManifestSchema)
        throw SchemaVersionMismatch(fmt::format("{}: schema '{}', expected '{}'", path.string(), schema,
                                                kManifestSchema));
      m.cohort_id = j.value("cohort_id", std::string());
      m.spec = j.value("spec", json::object());
      m.created_at = j.value("created_at", std::string());
      m.tool_version = j.value("tool_version", std::string());
      m.master_seed = parse_hex64(j.value("master_seed", std::string("0000000000000000")));
      have_header = true;
      continue;
    }
    if (j.contains("seal")) {
      m.seal = j.at("seal").get<std::string>();
      continue;
    }
    try {
      m.records.push_back(sample_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  if (!have_header) throw SchemaVersionMismatch(fmt::format("{}: missing header line", path.string()));
  return m;
}

ManifestWriter::ManifestWriter(const std::filesystem::path& path, const CohortManifest& header) : path_(path) {
  if (std::filesystem::exists(path)) {
    manifest_ = read_manifest(path);
  } else {
    manifest_ = header;
    manifest_.records.clear();
    manifest_.seal.reset();
  }
  if (!manifest_.seal) write_manifest(manifest_, path_);  // normalizes an interrupted tail
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error("IoError", "cannot append to " + path_.string());
}

void ManifestWriter::append(const SampleRecord& record) {
  std::lock_guard lock(mu_);
  if (manifest_.seal) throw Error("ManifestSealed", path_.string() + " is sealed");
  out_ << to_json(record).dump() << '\n';
  out_.flush();
  manifest_.records.push_back(record);
}

void ManifestWriter::seal() {
  std::lock_guard lock(mu_);
  if (manifest_.seal) return;
  manifest_.seal = seal_of(manifest_.records);
  out_ << trailer_json(manifest_).dump() << '\n';
  out_.flush();
}

std::vector<IntegrityIssue> integrity_check(const CohortManifest& m,
                                            const std::optional<std::filesystem::path>& run_dir) {
  std::vector<IntegrityIssue> issues;
  for (const auto& r : m.records) {
    if (sha256_hex(r.transcript) != r.transcript_hash) issues.push_back({r.sample_id, "transcript_hash_mismatch"});
    const auto expected = sample_id_for(r.transcript_hash, r.audio.checksum,
                                        r.label ? std::optional<Label>(r.label->label()) : std::nullopt);
    if (expected != r.sample_id) issues.push_back({r.sample_id, "sample_id_mismatch"});
    if (r.provenance == Provenance::Synthetic && (!r.persona || !r.generation))
      issues.push_back({r.sample_id, "missing_generation_meta"});
    if (run_dir && !r.audio.path.empty()) {
      const auto p = *run_dir / r.audio.path;
      if (!std::filesystem::exists(p)) {
        issues.push_back({r.sample_id, "audio_missing"});
      } else if (sha256_hex(text::read_file(p.string())) != r.audio.checksum) {
        issues.push_back({r.sample_id, "audio_checksum_mismatch"});
      }
    }
  }
  if (m.seal && seal_of(m.records) != *m.seal) issues.push_back({"", "seal_mismatch"});
  return issues;
}

// ---- splits ---------------------------------------------------------------------------

std::map<Label, int> DatasetSplit::histogram() const {
  std::map<Label, int> h;
  for (const auto& e : entries) ++h[e.label];
  return h;
}

std::map<Label, int> DatasetSplit::histogram(Provenance provenance) const {
  std::map<Label, int> h;
  for (const auto& e : entries)
    if (e.provenance == provenance) ++h[e.label];
  return h;
}

std::set<std::string> DatasetSplit::ids() const {
  std::set<std::string> s;
  for (const auto& e : entries) s.insert(e.sample_id);
  return s;
}

DatasetSplit split_from_manifest(const CohortManifest& m, std::string name, bool include_flagged) {
  DatasetSplit s;
  s.name = std::move(name);
  for (const auto& r : m.records) {
    if (!r.label || (r.flagged() && !include_flagged)) continue;
    s.entries.push_back({r.sample_id, r.label->label(), r.provenance});
  }
  return s;
}

DatasetSplit mix(const DatasetSplit& real, const DatasetSplit& synthetic, int ratio, Rng& rng) {
  if (ratio < 0) throw ConfigError("mix ratio must be >= 0");
  DatasetSplit out;
  out.name = fmt::format("{}_mix{}", real.name, ratio);
  out.entries = real.entries;
  for (const auto& [label, n_real] : real.histogram()) {
    std::vector<SplitEntry> pool;
    for (const auto& e : synthetic.entries)
      if (e.label == label) pool.push_back(e);
    const auto need = static_cast<std::size_t>(ratio) * static_cast<std::size_t>(n_real);
    if (pool.size() < need) throw InsufficientSynthetic(label, need, pool.size());
    for (std::size_t i = 0; i < need; ++i) {
      std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
      out.entries.push_back(pool[i]);
    }
  }
  return out;
}

std::pair<DatasetSplit, DatasetSplit> stratified_split(const DatasetSplit& all, double test_fraction, Rng& rng) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) throw ConfigError("test_fraction must be in [0, 1]");
  DatasetSplit train{all.name + "_train", {}};
  DatasetSplit test{all.name + "_test", {}};
  for (const auto& [label, n] : all.histogram()) {
    std::vector<SplitEntry> cls;
    for (const auto& e : all.entries)
      if (e.label == label) cls.push_back(e);
    for (std::size_t i = cls.size(); i > 1; --i) std::swap(cls[i - 1], cls[rng.index(i)]);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < cls.size(); ++i) (i < n_test ? test : train).entries.push_back(cls[i]);
  }
  return {train, test};
}

void check_disjoint(const DatasetSplit& a, const DatasetSplit& b) {
  const auto ids = a.ids();
  for (const auto& e : b.entries)
    if (ids.count(e.sample_id))
      throw Error("SplitOverlap", fmt::format("sample {} is in both {} and {}", e.sample_id, a.name, b.name));
}

void write_split(const DatasetSplit& split, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  text::write_file(path.string(), to_json(split).dump(2) + "\n");
}

DatasetSplit read_split(const std::filesystem::path& path) {
  return split_from_json(json::parse(text::read_file(path.string())));
}

void write_cot_records(const std::vector<CotRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& c : records) out += to_json(c).dump() + "\n";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  text::write_file(path.string(), out);
}

std::vector<CotRecord> read_cot_records(const std::filesystem::path& path) {
  std::vector<CotRecord> out;
  std::istringstream in(text::read_file(path.string()));
  std::string line;
  while (std::getline(in, line))
    if (!text::trim(line).empty()) out.push_back(cot_from_json(json::parse(line)));
  return out;
}

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace syncog::corpus
