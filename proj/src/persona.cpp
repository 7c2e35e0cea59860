#include "syncog/persona.hpp"

#include "syncog/hash.hpp"
#include "syncog/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace syncog::persona {

using nlohmann::json;

void Demographics::validate() const {
  if (age < 55 || age > 95) throw ConfigError(fmt::format("age {} outside [55, 95]", age));
  if (education < 0 || education > 3)
    throw ConfigError(fmt::format("education index {} outside 0..3", education));
}

StyleSamplerParams StyleSamplerParams::defaults() {
  StyleSamplerParams p;
  const std::pair<Label, double> base[] = {
      {Label::NonAD, 2.6}, {Label::HC, 2.6}, {Label::MCI, 2.0}, {Label::AD, 1.4}};
  for (const auto& [label, mu] : base)
    for (auto d : kStyleDimensions) p.mu[{label, d}] = mu;
  p.alpha.fill(0.5);
  p.beta.fill(0.3);
  p.sigma.fill(0.6);
  return p;
}

StyleSamplerParams StyleSamplerParams::uniform(double mu, double alpha, double beta, double sigma) {
  StyleSamplerParams p;
  for (auto label : {Label::AD, Label::NonAD, Label::HC, Label::MCI})
    for (auto d : kStyleDimensions) p.mu[{label, d}] = mu;
  p.alpha.fill(alpha);
  p.beta.fill(beta);
  p.sigma.fill(sigma);
  return p;
}

double StyleSamplerParams::mean_for(Label label, StyleDimension d) const {
  const auto it = mu.find({label, d});
  if (it == mu.end())
    throw ConfigError(fmt::format("sampler params have no mu for ({}, {})", to_string(label),
                                  to_string(d)));
  return it->second;
}

void StyleSamplerParams::validate() const {
  for (const auto& [key, v] : mu)
    if (!std::isfinite(v)) throw ConfigError("sampler mu must be finite");
  for (std::size_t k = 0; k < 5; ++k) {
    if (!(sigma[k] >= 0.0)) throw ConfigError("sampler sigma must be >= 0");
    if (!(alpha[k] >= 0.0) || !(beta[k] >= 0.0))
      throw ConfigError("sampler alpha/beta must be >= 0");
  }
  if (!(age_bounds.low < age_bounds.high)) throw ConfigError("age_bounds.low must be < high");
}

Covariates normalize_covariates(const Demographics& demographics, const StyleSamplerParams& params) {
  const auto [low, high] = params.age_bounds;
  const double g = std::clamp((demographics.age - low) / (high - low), 0.0, 1.0);
  const double h = static_cast<double>(demographics.education) / 3.0;
  return {g, h};
}

double latent_mean(Label label, StyleDimension d, Covariates cov, const StyleSamplerParams& params) {
  const auto k = index_of(d);
  return params.mean_for(label, d) - params.alpha[k] * cov.g + params.beta[k] * cov.h;
}

int quantize_level(double latent) {
  const double clipped = std::clamp(latent, 1.0, 3.0);
  return static_cast<int>(std::floor(clipped + 0.5));
}

StyleVector sample_style(const CognitiveStatus& status, const Demographics& demographics,
                         const StyleSamplerParams& params, Rng& rng) {
  const auto cov = normalize_covariates(demographics, params);
  std::array<int, 5> levels{};
  for (auto d : kStyleDimensions) {
    const double mean = latent_mean(status.label(), d, cov, params);
    const double latent = rng.normal(mean, params.sigma[index_of(d)]);
    levels[index_of(d)] = quantize_level(latent);
  }
  return StyleVector(levels);
}

int CohortSpec::total() const {
  int n = 0;
  for (const auto& [label, c] : counts) n += c;
  return n;
}

void CohortSpec::validate() const {
  for (const auto& [label, c] : counts) {
    if (c < 0) throw ConfigError("cohort counts must be >= 0");
    if (!scheme_contains(scheme, label))
      throw ConfigError(fmt::format("label {} not in {} scheme", to_string(label), to_string(scheme)));
  }
  const double sum = std::accumulate(education.begin(), education.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError(fmt::format("education prior sums to {}, expected 1", sum));
  for (double p : education)
    if (p < 0.0) throw ConfigError("education prior has a negative probability");
  if (!(age.low < age.high) || age.sd < 0.0) throw ConfigError("invalid age prior");
  if (age.low < 55 || age.high > 95) throw ConfigError("age prior bounds must lie in [55, 95]");
  if (female_fraction < 0.0 || female_fraction > 1.0)
    throw ConfigError("female_fraction must lie in [0, 1]");
}

Demographics draw_demographics(const CohortSpec& spec, Sex sex, Rng& rng) {
  Demographics d;
  d.sex = sex;
  const double raw = std::clamp(rng.normal(spec.age.mean, spec.age.sd), spec.age.low, spec.age.high);
  d.age = static_cast<int>(std::floor(raw + 0.5));
  const double u = rng.uniform();
  double acc = 0.0;
  d.education = 3;
  for (int i = 0; i < 4; ++i) {
    acc += spec.education[static_cast<std::size_t>(i)];
    if (u < acc) {
      d.education = i;
      break;
    }
  }
  return d;
}

CohortPlan plan_cohort(const CohortSpec& spec) {
  spec.validate();
  CohortPlan plan{spec, {}};
  plan.slots.reserve(static_cast<std::size_t>(spec.total()));
  int index = 0;
  for (Label label : labels_of(spec.scheme)) {
    const auto it = spec.counts.find(label);
    const int n = it == spec.counts.end() ? 0 : it->second;
    const int females = static_cast<int>(std::floor(n * spec.female_fraction + 0.5));
    for (int j = 0; j < n; ++j, ++index) {
      const Sex sex = j < females ? Sex::Female : Sex::Male;
      Rng rng(corpus::derive_seed(spec.master_seed, "demographics", static_cast<std::uint64_t>(index)));
      PersonaSlot slot;
      slot.index = index;
      slot.status = CognitiveStatus(spec.scheme, label);
      slot.demographics = draw_demographics(spec, sex, rng);
      slot.language = spec.language;
      slot.seed = corpus::derive_seed(spec.master_seed, "persona", static_cast<std::uint64_t>(index));
      plan.slots.push_back(slot);
    }
  }
  return plan;
}

std::string persona_id_for(int slot_index) { return fmt::format("P{:05d}", slot_index); }

Persona sample_persona(const PersonaSlot& slot, const StyleSamplerParams& params) {
  slot.demographics.validate();
  Rng rng(slot.seed);
  Persona p;
  p.persona_id = persona_id_for(slot.index);
  p.demographics = slot.demographics;
  p.status = slot.status;
  p.style = sample_style(slot.status, slot.demographics, params, rng);
  p.language = slot.language;
  p.seed = slot.seed;
  return p;
}

// ---------------------------------------------------------------- JSON

json to_json(const Demographics& d) {
  return {{"sex", to_string(d.sex)},
          {"age", d.age},
          {"education", kEducationNames[static_cast<std::size_t>(d.education)]}};
}

Demographics demographics_from_json(const json& j) {
  Demographics d;
  d.sex = parse_sex(j.at("sex").get<std::string>());
  d.age = j.at("age").get<int>();
  const auto& e = j.at("education");
  if (e.is_number_integer()) {
    d.education = e.get<int>();
  } else {
    const auto name = e.get<std::string>();
    const auto it = std::find(kEducationNames.begin(), kEducationNames.end(), name);
    if (it == kEducationNames.end()) throw ParseError(fmt::format("unknown education '{}'", name));
    d.education = static_cast<int>(it - kEducationNames.begin());
  }
  d.validate();
  return d;
}

json to_json(const StyleLevels& s) {
  json j = json::object();
  for (auto d : kStyleDimensions) j[std::string(to_string(d))] = s[d];
  return j;
}

StyleLevels style_from_json(const json& j) {
  std::array<int, 5> v{};
  for (auto d : kStyleDimensions) v[index_of(d)] = j.at(std::string(to_string(d))).get<int>();
  return StyleLevels(v);
}

json to_json(const Persona& p) {
  return {{"persona_id", p.persona_id},
          {"demographics", to_json(p.demographics)},
          {"scheme", to_string(p.status.scheme())},
          {"label", to_string(p.status.label())},
          {"style", to_json(p.style)},
          {"language", to_string(p.language)},
          {"seed", hex64(p.seed)}};
}

Persona persona_from_json(const json& j) {
  Persona p;
  p.persona_id = j.at("persona_id").get<std::string>();
  p.demographics = demographics_from_json(j.at("demographics"));
  p.status = CognitiveStatus(parse_scheme(j.at("scheme").get<std::string>()),
                             parse_label(j.at("label").get<std::string>()));
  p.style = style_from_json(j.at("style"));
  p.language = parse_language(j.at("language").get<std::string>());
  p.seed = parse_hex64(j.at("seed").get<std::string>());
  return p;
}

json to_json(const CohortSpec& s) {
  json counts = json::object();
  for (Label l : labels_of(s.scheme)) {
    const auto it = s.counts.find(l);
    counts[std::string(to_string(l))] = it == s.counts.end() ? 0 : it->second;
  }
  return {{"scheme", to_string(s.scheme)},
          {"counts", counts},
          {"female_fraction", s.female_fraction},
          {"age_prior", {{"mean", s.age.mean}, {"sd", s.age.sd}, {"low", s.age.low}, {"high", s.age.high}}},
          {"education_prior", s.education},
          {"language", to_string(s.language)},
          {"master_seed", s.master_seed}};
}

CohortSpec cohort_spec_from_json(const json& j) {
  CohortSpec s;
  s.scheme = parse_scheme(j.value("scheme", std::string("ternary")));
  if (j.contains("counts"))
    for (const auto& [k, v] : j.at("counts").items()) s.counts[parse_label(k)] = v.get<int>();
  s.female_fraction = j.value("female_fraction", 0.5);
  if (j.contains("age_prior")) {
    const auto& a = j.at("age_prior");
    s.age.mean = a.value("mean", s.age.mean);
    s.age.sd = a.value("sd", s.age.sd);
    s.age.low = a.value("low", s.age.low);
    s.age.high = a.value("high", s.age.high);
  }
  if (j.contains("education_prior")) s.education = j.at("education_prior").get<std::array<double, 4>>();
  s.language = parse_language(j.value("language", std::string("en")));
  s.master_seed = j.value("master_seed", std::uint64_t{42});
  s.validate();
  return s;
}

json to_json(const CohortPlan& p) {
  json slots = json::array();
  for (const auto& s : p.slots)
    slots.push_back({{"index", s.index},
                     {"label", to_string(s.status.label())},
                     {"demographics", to_json(s.demographics)},
                     {"language", to_string(s.language)},
                     {"seed", hex64(s.seed)}});
  return {{"spec", to_json(p.spec)}, {"slots", slots}};
}

CohortPlan cohort_plan_from_json(const json& j) {
  CohortPlan p;
  p.spec = cohort_spec_from_json(j.at("spec"));
  for (const auto& s : j.at("slots")) {
    PersonaSlot slot;
    slot.index = s.at("index").get<int>();
    slot.status = CognitiveStatus(p.spec.scheme, parse_label(s.at("label").get<std::string>()));
    slot.demographics = demographics_from_json(s.at("demographics"));
    slot.language = parse_language(s.at("language").get<std::string>());
    slot.seed = parse_hex64(s.at("seed").get<std::string>());
    p.slots.push_back(slot);
  }
  return p;
}

namespace {

// A per-dimension parameter may be given as one number or as {dimension: value}.
std::array<double, 5> per_dimension(const json& j, double fallback) {
  std::array<double, 5> out;
  out.fill(fallback);
  if (j.is_number()) {
    out.fill(j.get<double>());
  } else if (j.is_object()) {
    for (const auto& [k, v] : j.items()) out[index_of(parse_dimension(k))] = v.get<double>();
  } else {
    throw ConfigError("sampler parameter must be a number or a per-dimension object");
  }
  return out;
}

json dims_to_json(const std::array<double, 5>& v) {
  json j = json::object();
  for (auto d : kStyleDimensions) j[std::string(to_string(d))] = v[index_of(d)];
  return j;
}

}  // namespace

json to_json(const StyleSamplerParams& p) {
  json mu = json::object();
  for (const auto& [key, v] : p.mu)
    mu[std::string(to_string(key.first))][std::string(to_string(key.second))] = v;
  return {{"mu", mu},
          {"alpha", dims_to_json(p.alpha)},
          {"beta", dims_to_json(p.beta)},
          {"sigma", dims_to_json(p.sigma)},
          {"age_bounds", {p.age_bounds.low, p.age_bounds.high}},
          {"rounding", "half_up"}};
}

StyleSamplerParams sampler_params_from_json(const json& j) {
  auto p = StyleSamplerParams::defaults();
  if (j.contains("mu")) {
    for (const auto& [label, v] : j.at("mu").items()) {
      const auto l = parse_label(label);
      std::array<double, 5> current{};
      for (auto d : kStyleDimensions) current[index_of(d)] = p.mu.count({l, d}) ? p.mu[{l, d}] : 2.0;
      const auto dims = v.is_number() ? per_dimension(v, 0.0) : current;
      for (auto d : kStyleDimensions) p.mu[{l, d}] = dims[index_of(d)];
      if (v.is_object())
        for (const auto& [k, x] : v.items()) p.mu[{l, parse_dimension(k)}] = x.get<double>();
    }
  }
  if (j.contains("alpha")) p.alpha = per_dimension(j.at("alpha"), 0.5);
  if (j.contains("beta")) p.beta = per_dimension(j.at("beta"), 0.3);
  if (j.contains("sigma")) p.sigma = per_dimension(j.at("sigma"), 0.6);
  if (j.contains("age_bounds")) {
    const auto b = j.at("age_bounds").get<std::array<double, 2>>();
    p.age_bounds = {b[0], b[1]};
  }
  if (j.contains("rounding") && j.at("rounding").get<std::string>() != "half_up")
    throw ConfigError("only half_up rounding is supported");
  p.validate();
  return p;
}

}  // namespace syncog::persona
