#include "support.hpp"

#include "syncog/timbre.hpp"

#include <doctest.h>

using namespace syncog;
using namespace syncog::timbre;

namespace {

TimbreEntry entry(std::string id, Sex sex, AgeBucket bucket = AgeBucket::Seventies) {
  TimbreEntry e;
  e.timbre_id = std::move(id);
  e.sex = sex;
  e.age_bucket = bucket;
  return e;
}

}  // namespace

TEST_CASE("reference audit") {
  const auto dir = testing::scratch_dir("timbre-audit");
  audio::write_wav(dir / "ok.wav", testing::tone(10.0));
  audio::write_wav(dir / "stereo.wav", testing::tone(10.0, audio::kPipelineRate, 2));
  audio::write_wav(dir / "short.wav", testing::tone(1.0));
  audio::write_wav(dir / "rate.wav", testing::tone(10.0, 44100));

  TimbreLibrary lib(dir);
  const auto& e = lib.register_file(dir / "ok.wav", {"", Sex::Female, AgeBucket::Seventies});
  CHECK(e.timbre_id == "ok");
  CHECK(e.file_path == "ok.wav");
  CHECK(e.duration_s == doctest::Approx(10.0));

  auto reason = [&](const char* name) {
    try {
      audit_reference(dir / name, {});
    } catch (const AuditFailed& f) {
      return std::string(to_string(f.reason()));
    }
    return std::string("none");
  };
  CHECK(reason("stereo.wav") == "not_mono");
  CHECK(reason("short.wav") == "too_short");
  CHECK(reason("rate.wav") == "wrong_rate");
  CHECK(reason("missing.wav") == "unreadable");

  lib.save();
  const auto back = TimbreLibrary::load(dir);
  REQUIRE(back.entries().size() == 1);
  CHECK(back.entries()[0] == e);
  CHECK(audit_library(back).failures.empty());

  audio::write_wav(dir / "ok.wav", testing::tone(10.0, audio::kPipelineRate, 1, 400.0));
  const auto audit = audit_library(back);
  REQUIRE(audit.failures.size() == 1);
  CHECK(audit.failures[0].second == "checksum_mismatch");
}

TEST_CASE("selection by sex and age bucket") {
  TimbreLibrary lib;
  lib.add(entry("f1", Sex::Female));
  lib.add(entry("f2", Sex::Female, AgeBucket::Eighties));
  lib.add(entry("m1", Sex::Male, AgeBucket::Sixties));
  Rng rng(3);
  CHECK(lib.select(Sex::Male, AgeBucket::Eighties, rng).timbre_id == "m1");
  CHECK(lib.select(Sex::Female, AgeBucket::Eighties, rng).timbre_id == "f2");
  CHECK_THROWS_AS(lib.add(entry("f1", Sex::Female)), Error);

  TimbreLibrary empty;
  CHECK_THROWS_AS(empty.select(Sex::Female, std::nullopt, rng), NoMatch);
}

TEST_CASE("seeded selection is uniform") {
  TimbreLibrary lib;
  for (int i = 0; i < 4; ++i) lib.add(entry("f" + std::to_string(i), Sex::Female));
  std::map<std::string, int> counts;
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) ++counts[lib.select(Sex::Female, AgeBucket::Seventies, rng).timbre_id];
  // Binomial(10000, 1/4): sd = 43.3, so +-150 is about 3.5 sd.
  for (const auto& [id, n] : counts) CHECK(std::abs(n - 2500) <= 150);
  CHECK(counts.size() == 4);
}

TEST_CASE("age buckets") {
  CHECK(bucket_for_age(65) == AgeBucket::Sixties);
  CHECK(bucket_for_age(70) == AgeBucket::Seventies);
  CHECK(bucket_for_age(79) == AgeBucket::Seventies);
  CHECK(bucket_for_age(80) == AgeBucket::Eighties);
  CHECK(parse_age_bucket("80s") == AgeBucket::Eighties);
}
