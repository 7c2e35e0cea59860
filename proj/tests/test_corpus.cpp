#include "support.hpp"

#include "syncog/corpus.hpp"
#include "syncog/hash.hpp"
#include "syncog/text.hpp"

#include <doctest.h>

#include <fstream>

using namespace syncog;
using namespace syncog::corpus;

namespace {

SampleRecord record(int i, Label label, Provenance prov = Provenance::Synthetic) {
  SampleRecord r;
  r.cohort_id = "test";
  r.language = Language::EN;
  r.label = CognitiveStatus(LabelScheme::Ternary, label);
  r.transcript = "sample transcript number " + std::to_string(i);
  r.transcript_hash = sha256_hex(r.transcript);
  r.audio = {"audio/" + std::to_string(i) + ".wav", sha256_hex("audio" + std::to_string(i))};
  r.provenance = prov;
  r.seed = static_cast<std::uint64_t>(i);
  if (prov == Provenance::Synthetic) {
    r.generation = GenerationMeta{1, "stub-female", 1, 5, {}};
    r.persona = persona::Persona{"p" + std::to_string(i), {}, CognitiveStatus(LabelScheme::Ternary, label), {}, Language::EN, 0};
  }
  r.sample_id = sample_id_for(r.transcript_hash, r.audio.checksum, label);
  return r;
}

CohortManifest manifest_of(int n) {
  CohortManifest m;
  m.cohort_id = "test";
  m.spec = {{"k", 1}};
  m.created_at = "2026-01-01T00:00:00Z";
  m.master_seed = 42;
  const Label labels[3] = {Label::HC, Label::MCI, Label::AD};
  for (int i = 0; i < n; ++i) m.records.push_back(record(i, labels[i % 3]));
  m.seal = seal_of(m.records);
  return m;
}

DatasetSplit split_of(Provenance prov, std::map<Label, int> counts, int offset = 0) {
  DatasetSplit s;
  int i = offset;
  for (const auto& [label, n] : counts)
    for (int k = 0; k < n; ++k) s.entries.push_back({"id" + std::to_string(i++), label, prov});
  return s;
}

}  // namespace

TEST_CASE("manifest round trip and integrity") {
  const auto dir = testing::scratch_dir("manifest");
  const auto m = manifest_of(6);
  write_manifest(m, dir / "m.jsonl");
  const auto back = read_manifest(dir / "m.jsonl");
  CHECK(back.records.size() == 6);
  CHECK(back.seal == m.seal);
  CHECK(back.cohort_id == m.cohort_id);
  CHECK(back.master_seed == 42);
  for (std::size_t i = 0; i < 6; ++i) CHECK(to_json(back.records[i]) == to_json(m.records[i]));
  CHECK(integrity_check(back).empty());

  auto tampered = back;
  tampered.records[2].transcript += " extra";
  const auto issues = integrity_check(tampered);
  REQUIRE_FALSE(issues.empty());
  CHECK(issues[0].sample_id == m.records[2].sample_id);
}

TEST_CASE("unknown schema and truncated trailing line") {
  const auto dir = testing::scratch_dir("manifest-schema");
  text::write_file((dir / "bad.jsonl").string(), R"({"schema":"syncog-manifest/9","cohort_id":"x"})" "\n");
  CHECK_THROWS_AS(read_manifest(dir / "bad.jsonl"), SchemaVersionMismatch);

  auto m = manifest_of(3);
  m.seal.reset();
  write_manifest(m, dir / "partial.jsonl");
  {
    std::ofstream out(dir / "partial.jsonl", std::ios::app);
    out << R"({"sample_id":"trunc)";
  }
  CHECK(read_manifest(dir / "partial.jsonl").records.size() == 3);
}

TEST_CASE("manifest writer resumes and seals") {
  const auto dir = testing::scratch_dir("writer");
  auto header = manifest_of(0);
  header.seal.reset();
  const auto full = manifest_of(4);
  {
    ManifestWriter w(dir / "m.jsonl", header);
    w.append(full.records[0]);
    w.append(full.records[1]);
  }
  {
    ManifestWriter w(dir / "m.jsonl", header);
    CHECK(w.manifest().records.size() == 2);
    w.append(full.records[2]);
    w.append(full.records[3]);
    w.seal();
    CHECK(w.sealed());
    CHECK_THROWS(w.append(full.records[0]));
  }
  const auto back = read_manifest(dir / "m.jsonl");
  CHECK(back.records.size() == 4);
  CHECK(back.seal == seal_of(full.records));
}

TEST_CASE("mixing arithmetic") {
  const auto real = split_of(Provenance::Real, {{Label::AD, 10}, {Label::HC, 10}});
  const auto synth = split_of(Provenance::Synthetic, {{Label::AD, 25}, {Label::HC, 60}}, 1000);
  Rng rng(1);
  const auto two = mix(real, synth, 2, rng);
  CHECK(two.histogram(Provenance::Real).at(Label::AD) == 10);
  CHECK(two.histogram(Provenance::Synthetic).at(Label::AD) == 20);
  CHECK(two.histogram(Provenance::Synthetic).at(Label::HC) == 20);
  CHECK(two.ids().size() == two.entries.size());

  const auto zero = mix(real, synth, 0, rng);
  CHECK(zero.entries == real.entries);

  try {
    mix(real, synth, 3, rng);
    FAIL("expected InsufficientSynthetic");
  } catch (const InsufficientSynthetic& e) {
    CHECK(e.label == Label::AD);
    CHECK(e.needed == 30);
    CHECK(e.available == 25);
  }

  Rng a(9), b(9);
  CHECK(mix(real, synth, 2, a).entries == mix(real, synth, 2, b).entries);
}

TEST_CASE("stratified split keeps classes and stays disjoint") {
  const auto all = split_of(Provenance::Real, {{Label::AD, 20}, {Label::MCI, 10}, {Label::HC, 30}});
  Rng rng(4);
  const auto [train, test] = stratified_split(all, 0.2, rng);
  CHECK(test.histogram().at(Label::AD) == 4);
  CHECK(test.histogram().at(Label::MCI) == 2);
  CHECK(test.histogram().at(Label::HC) == 6);
  CHECK(train.entries.size() + test.entries.size() == all.entries.size());
  CHECK_NOTHROW(check_disjoint(train, test));
  CHECK_THROWS(check_disjoint(train, train));
}

TEST_CASE("split and rationale files round trip") {
  const auto dir = testing::scratch_dir("splits");
  auto s = split_of(Provenance::Real, {{Label::AD, 2}, {Label::HC, 1}});
  s.name = "real";
  write_split(s, dir / "s.json");
  const auto back = read_split(dir / "s.json");
  CHECK(back.name == "real");
  CHECK(back.entries == s.entries);

  std::vector<CotRecord> cot{{"a", "because FINAL: AD", Label::AD, 3, Label::AD}};
  write_cot_records(cot, dir / "c.jsonl");
  CHECK(read_cot_records(dir / "c.jsonl") == cot);
}

TEST_CASE("split selection excludes flagged and unlabelled records") {
  auto m = manifest_of(6);
  m.records[0].generation->flags.push_back("validation_exhausted");
  m.records[1].label.reset();
  const auto s = split_from_manifest(m, "all");
  CHECK(s.entries.size() == 4);
  CHECK(split_from_manifest(m, "all", true).entries.size() == 5);
}
