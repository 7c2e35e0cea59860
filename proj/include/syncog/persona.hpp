#pragma once

#include "syncog/rng.hpp"
#include "syncog/types.hpp"

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace syncog::persona {

inline constexpr std::array<std::string_view, 4> kEducationNames = {
    "primary_or_below", "junior_high", "high_school", "university_or_above"};

struct Demographics {
  Sex sex = Sex::Female;
  int age = 73;        // years, [55, 95]
  int education = 0;   // index into kEducationNames

  void validate() const;
  friend bool operator==(const Demographics&, const Demographics&) = default;
};

struct AgeBounds {
  double low = 60.0;
  double high = 90.0;
};

/// Parameters of the latent style model. The latent mean for dimension k and
/// label y is mu[y][k] - alpha[k] * g(age) + beta[k] * h(education).
struct StyleSamplerParams {
  std::map<std::pair<Label, StyleDimension>, double> mu;
  std::array<double, 5> alpha{};
  std::array<double, 5> beta{};
  std::array<double, 5> sigma{};
  AgeBounds age_bounds;

  /// NonAD/HC 2.6, MCI 2.0, AD 1.4 on every dimension; alpha 0.5, beta 0.3, sigma 0.6.
  static StyleSamplerParams defaults();
  /// Same baseline for every label and dimension; handy for tests.
  static StyleSamplerParams uniform(double mu, double alpha, double beta, double sigma);

  double mean_for(Label label, StyleDimension d) const;
  void validate() const;
};

struct Covariates {
  double g = 0.0;  // normalized age in [0, 1]
  double h = 0.0;  // normalized education in [0, 1]
};

Covariates normalize_covariates(const Demographics& demographics, const StyleSamplerParams& params);

/// Mean of the latent Gaussian for one dimension.
double latent_mean(Label label, StyleDimension d, Covariates cov, const StyleSamplerParams& params);

/// Round(Clip(x, 1, 3)) with ties rounded up.
int quantize_level(double latent);

StyleVector sample_style(const CognitiveStatus& status, const Demographics& demographics,
                         const StyleSamplerParams& params, Rng& rng);

struct AgePrior {
  double mean = 73.0;
  double sd = 7.0;
  double low = 60.0;
  double high = 90.0;
};

struct CohortSpec {
  LabelScheme scheme = LabelScheme::Ternary;
  std::map<Label, int> counts;
  double female_fraction = 0.5;
  AgePrior age;
  std::array<double, 4> education{0.40, 0.31, 0.20, 0.09};
  Language language = Language::EN;
  std::uint64_t master_seed = 42;

  int total() const;
  void validate() const;
};

struct PersonaSlot {
  int index = 0;
  CognitiveStatus status{LabelScheme::Ternary, Label::HC};
  Demographics demographics;
  Language language = Language::EN;
  std::uint64_t seed = 0;
};

struct CohortPlan {
  CohortSpec spec;
  std::vector<PersonaSlot> slots;
};

struct Persona {
  std::string persona_id;
  Demographics demographics;
  CognitiveStatus status{LabelScheme::Ternary, Label::HC};
  StyleVector style;
  Language language = Language::EN;
  std::uint64_t seed = 0;
};

/// Draws age (Normal clipped to the prior bounds, rounded half up) and the
/// education index from the cohort priors. Sex is supplied by the plan.
Demographics draw_demographics(const CohortSpec& spec, Sex sex, Rng& rng);

CohortPlan plan_cohort(const CohortSpec& spec);
Persona sample_persona(const PersonaSlot& slot, const StyleSamplerParams& params);

std::string persona_id_for(int slot_index);

// JSON mapping
nlohmann::json to_json(const Demographics& d);
Demographics demographics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StyleLevels& s);
StyleLevels style_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Persona& p);
Persona persona_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CohortSpec& s);
CohortSpec cohort_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CohortPlan& p);
CohortPlan cohort_plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StyleSamplerParams& p);
StyleSamplerParams sampler_params_from_json(const nlohmann::json& j);

}  // namespace syncog::persona
