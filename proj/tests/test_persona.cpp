#include "oracles.hpp"

#include "syncog/persona.hpp"
#include "syncog/seed.hpp"

#include <doctest.h>

using namespace syncog;
using namespace syncog::persona;

namespace {

Demographics demo(int age, int education, Sex sex = Sex::Female) {
  Demographics d;
  d.age = age;
  d.education = education;
  d.sex = sex;
  return d;
}

}  // namespace

TEST_CASE("covariates normalize age and education") {
  const auto params = StyleSamplerParams::defaults();
  CHECK(normalize_covariates(demo(60, 0), params).g == doctest::Approx(0.0));
  CHECK(normalize_covariates(demo(90, 0), params).g == doctest::Approx(1.0));
  CHECK(normalize_covariates(demo(75, 1), params).h == doctest::Approx(1.0 / 3.0));
  CHECK(normalize_covariates(demo(95, 3), params).g == doctest::Approx(1.0));
}

TEST_CASE("degenerate and clipped latent draws") {
  Rng rng(1);
  const CognitiveStatus hc(LabelScheme::Ternary, Label::HC);
  const auto flat = sample_style(hc, demo(70, 2), StyleSamplerParams::uniform(2.0, 0.0, 0.0, 0.0), rng);
  for (int v : flat.values()) CHECK(v == 2);
  const auto high = sample_style(hc, demo(70, 2), StyleSamplerParams::uniform(3.6, 0.0, 0.0, 0.0), rng);
  for (int v : high.values()) CHECK(v == 3);
  CHECK(quantize_level(3.6) == 3);
  CHECK(quantize_level(-4.0) == 1);
  CHECK(quantize_level(1.5) == 2);
  CHECK(quantize_level(2.5) == 3);
  CHECK(quantize_level(2.49) == 2);
}

TEST_CASE("level frequencies follow the clipped rounded Normal") {
  // mu 2.0, alpha 0.5, beta 0.3, sigma 0.6 at g = 1, h = 0: latent mean 1.5.
  const auto params = StyleSamplerParams::uniform(2.0, 0.5, 0.3, 0.6);
  const auto expected = oracle::level_probabilities(1.5, 0.6);
  Rng rng(2024);
  std::array<int, 3> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_style(CognitiveStatus(LabelScheme::Ternary, Label::MCI), demo(90, 0), params, rng);
    ++counts[static_cast<std::size_t>(s[StyleDimension::NarrativeLength] - 1)];
  }
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(counts[k] / double(n) - expected[k]) < 0.01);
}

TEST_CASE("persona sampling is deterministic per slot") {
  CohortSpec spec;
  spec.counts = {{Label::HC, 2}, {Label::MCI, 2}, {Label::AD, 2}};
  const auto plan = plan_cohort(spec);
  const auto params = StyleSamplerParams::defaults();
  const auto a = sample_persona(plan.slots[3], params);
  const auto b = sample_persona(plan.slots[3], params);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.persona_id == "P00003");

  auto slot = plan.slots[0];
  slot.demographics.sex = Sex::Female;
  CHECK(sample_persona(slot, params).demographics.sex == Sex::Female);
}

TEST_CASE("age prior mean matches the clipped-Normal oracle") {
  CohortSpec spec;
  Rng rng(77);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += draw_demographics(spec, Sex::Male, rng).age;
  const double oracle_mean = oracle::clipped_rounded_mean(spec.age.mean, spec.age.sd, spec.age.low, spec.age.high);
  CHECK(std::abs(sum / n - oracle_mean) < 0.3);
}

TEST_CASE("education prior frequencies") {
  CohortSpec spec;
  Rng rng(5);
  std::array<int, 4> counts{};
  const int n = 20000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(draw_demographics(spec, Sex::Female, rng).education)];
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(counts[k] / double(n) - spec.education[k]) < 0.015);
}

TEST_CASE("cohort plans balance label and sex") {
  CohortSpec binary;
  binary.scheme = LabelScheme::Binary;
  binary.counts = {{Label::AD, 500}, {Label::NonAD, 500}};
  const auto plan = plan_cohort(binary);
  CHECK(plan.slots.size() == 1000);
  std::map<std::pair<Label, Sex>, int> cells;
  for (const auto& s : plan.slots) ++cells[{s.status.label(), s.demographics.sex}];
  CHECK(cells[{Label::AD, Sex::Female}] == 250);
  CHECK(cells[{Label::AD, Sex::Male}] == 250);
  CHECK(cells[{Label::NonAD, Sex::Female}] == 250);
  CHECK(cells[{Label::NonAD, Sex::Male}] == 250);

  CohortSpec empty;
  empty.counts = {{Label::HC, 0}, {Label::MCI, 0}, {Label::AD, 0}};
  CHECK(plan_cohort(empty).slots.empty());

  CohortSpec ternary;
  ternary.counts = {{Label::HC, 50}, {Label::MCI, 50}, {Label::AD, 50}};
  const auto t = plan_cohort(ternary);
  CHECK(t.slots.size() == 150);
  std::map<std::pair<Label, Sex>, int> tc;
  for (const auto& s : t.slots) ++tc[{s.status.label(), s.demographics.sex}];
  for (const auto& [cell, n] : tc) CHECK(n == 25);
}

TEST_CASE("plan and sampler JSON round trips") {
  CohortSpec spec;
  spec.counts = {{Label::HC, 3}, {Label::MCI, 3}, {Label::AD, 3}};
  const auto plan = plan_cohort(spec);
  const auto back = cohort_plan_from_json(to_json(plan));
  CHECK(to_json(back).dump() == to_json(plan).dump());
  const auto params = StyleSamplerParams::defaults();
  CHECK(to_json(sampler_params_from_json(to_json(params))).dump() == to_json(params).dump());
  CHECK_THROWS_AS(cohort_spec_from_json({{"scheme", "ternary"}, {"counts", {{"NonAD", 3}}}}), ConfigError);
}

TEST_CASE("derived seeds are stable and namespaced") {
  CHECK(corpus::derive_seed(42, "persona", 0) == corpus::derive_seed(42, "persona", 0));
  CHECK(corpus::derive_seed(42, "persona", 0) != corpus::derive_seed(42, "persona", 1));
  CHECK(corpus::derive_seed(42, "persona", 0) != corpus::derive_seed(42, "timbre", 0));
  CHECK(corpus::derive_seed(42, "persona", 0) != corpus::derive_seed(43, "persona", 0));
}
