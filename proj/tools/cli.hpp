#pragma once

#include "syncog/persona.hpp"
#include "syncog/pipeline.hpp"
#include "syncog/services.hpp"

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace syncog::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigInvalid = 2,
  kPartialFailure = 3,
  kUnreachable = 4,
};

struct EndpointSetting {
  bool stub = true;
  services::EndpointConfig endpoint;
  std::string fixtures_dir;  // replay recorded responses instead of the network
  std::string record_dir;    // save request/response pairs while running live
};

struct RunConfig {
  Language language = Language::EN;
  LabelScheme scheme = LabelScheme::Ternary;
  std::uint64_t master_seed = 42;
  std::filesystem::path run_dir = "run";
  std::filesystem::path lexicon_dir;
  std::filesystem::path template_dir;
  std::filesystem::path timbre_dir;
  std::string stimulus;
  std::string cohort_id = "synthetic";

  persona::CohortSpec cohort;
  persona::StyleSamplerParams sampler = persona::StyleSamplerParams::defaults();
  pipeline::GenerationPolicy policy;

  EndpointSetting generator, tts, asr, eval, distill;
  services::DecodeParams synthesis_decode{0.7, 1024, 1.0, std::nullopt};
  services::DecodeParams eval_decode{0.2, 1024, 1.0, std::nullopt};
  services::DecodeParams distill_decode{0.7, 1024, 1.0, std::nullopt};

  int n_rollouts = 8;
  bool eval_attach_audio = false;
  std::string stub_classifier = "rubric";  // or "oracle"
  double stub_noise = 0.0;
  bool distill_attach_audio = false;

  nlohmann::json resolved;  // the effective configuration
  std::string hash;         // sha256 of `resolved`
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> run_dir;
  bool stub = false;
};

/// Replaces `${NAME}` in every string with the environment value.
nlohmann::json interpolate_env(const nlohmann::json& j);

/// Reads the JSON config (or the built-in defaults when `path` is empty),
/// applies overrides, validates paths and modes.
RunConfig load_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides);

/// Entry point of the `syncog` executable.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace syncog::cli
