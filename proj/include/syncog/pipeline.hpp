#pragma once

#include "syncog/corpus.hpp"
#include "syncog/evaluate.hpp"
#include "syncog/persona.hpp"
#include "syncog/prompts.hpp"
#include "syncog/rubric.hpp"
#include "syncog/services.hpp"
#include "syncog/stub.hpp"
#include "syncog/timbre.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace syncog::pipeline {

struct GenerationPolicy {
  int max_retries = 4;
  rubric::ValidationPolicy validation;
  bool keep_best_on_exhaustion = true;
  double failure_threshold = 0.10;

  void validate() const;
};

struct PipelineDeps {
  std::shared_ptr<services::NarrativeGenerator> generator;
  std::shared_ptr<services::SpeechSynthesizer> tts;
  std::shared_ptr<const rubric::Lexicons> lexicons;
  prompts::PromptTemplate syn_template;
  std::shared_ptr<const timbre::TimbreLibrary> timbres;
  persona::StyleSamplerParams sampler = persona::StyleSamplerParams::defaults();
  prompts::StimulusInfo stimulus;
  std::filesystem::path run_dir;  // audio is written below it when nonempty
  std::string cohort_id = "cohort";

  void validate(Language language) const;
};

class LabelLeak : public Error {
 public:
  explicit LabelLeak(const std::string& what) : Error("LabelLeak", what) {}
};

/// Persona -> prompt -> narrative -> rubric validation (with retries) ->
/// timbre -> speech. Service errors propagate.
corpus::SampleRecord generate_sample(const persona::PersonaSlot& slot, const PipelineDeps& deps,
                                     const GenerationPolicy& policy);

struct SlotFailure {
  int slot = 0;
  std::string persona_id;
  std::string kind;
  std::string message;
};

struct CohortOptions {
  std::filesystem::path manifest_path;  // required
  int jobs = 1;
  /// Generate at most this many new records, then stop without sealing.
  std::optional<int> stop_after;
  std::function<void(int done, int total)> progress;
};

struct CohortRun {
  corpus::CohortManifest manifest;
  int generated = 0;
  int skipped = 0;
  int flagged = 0;
  std::vector<SlotFailure> failures;
  bool sealed = false;
  bool over_threshold = false;  // failures / slots > policy.failure_threshold
};

/// One record per slot, appended in slot order whatever the worker count.
/// Slots whose persona already has a record are skipped; failed slots are
/// reported, not written, so a rerun retries them. The manifest is sealed
/// once every slot has a record.
CohortRun generate_cohort(const persona::CohortPlan& plan, const PipelineDeps& deps, const GenerationPolicy& policy,
                          const CohortOptions& options, nlohmann::json spec_snapshot = nlohmann::json::object());

struct DistillOptions {
  LabelScheme scheme = LabelScheme::Ternary;
  Language language = Language::EN;
  services::DecodeParams decode{0.7, 1024, 1.0, std::nullopt};
  evaluate::ParseRules rules = evaluate::ParseRules::defaults();
  std::uint64_t master_seed = 42;
  bool attach_audio = false;
  int jobs = 1;
};

struct DroppedSample {
  std::string sample_id;
  std::string reason;  // "DroppedInconsistent" or a service error kind
};

struct DistillResult {
  std::vector<corpus::CotRecord> records;
  std::vector<DroppedSample> dropped;
  int dropped_inconsistent = 0;
};

/// Label-conditioned rationales. A rationale whose parsed conclusion differs
/// from the label is retried once with a fresh seed, then dropped.
DistillResult distill_cot(const std::vector<corpus::SampleRecord>& samples, services::ChatModel& model,
                          const prompts::PromptTemplate& cot_template, const DistillOptions& options);

/// One training example per line: system and user messages rendered from the
/// classification template, assistant = rationale ending in `FINAL: <label>`.
/// Throws UnresolvedSample when a record's sample is not in the manifest.
void export_sft(const std::vector<corpus::CotRecord>& records, const corpus::CohortManifest& manifest,
                const prompts::PromptTemplate& cls_template, LabelScheme scheme, const std::filesystem::path& path);

/// The rationale with a trailing `FINAL: <label>` line guaranteed.
std::string with_final_tag(std::string rationale, Label label);

}  // namespace syncog::pipeline
