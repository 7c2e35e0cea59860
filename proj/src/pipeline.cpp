#include "syncog/pipeline.hpp"

#include "syncog/hash.hpp"
#include "syncog/parallel.hpp"
#include "syncog/seed.hpp"
#include "syncog/text.hpp"

#include <mutex>
#include <set>

#include <fmt/format.h>

namespace syncog::pipeline {

using nlohmann::json;

void GenerationPolicy::validate() const {
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0))
    throw ConfigError("failure_threshold must be in [0, 1]");
  validation.validate();
}

void PipelineDeps::validate(Language language) const {
  if (!generator || !tts || !lexicons || !timbres) throw ConfigError("pipeline dependencies are incomplete");
  if (lexicons->language != language) throw ConfigError("lexicons do not match the cohort language");
  if (syn_template.language != language) throw ConfigError("synthesis template does not match the cohort language");
  if (syn_template.id != prompts::TemplateId::Syn) throw ConfigError("synthesis template has the wrong id");
  sampler.validate();
}

corpus::SampleRecord generate_sample(const persona::PersonaSlot& slot, const PipelineDeps& deps,
                                     const GenerationPolicy& policy) {
  const auto persona = persona::sample_persona(slot, deps.sampler);
  const auto prompt = prompts::render(deps.syn_template, prompts::syn_bindings(persona, deps.stimulus));
  for (const auto& m : prompt.messages)
    if (prompts::contains_label_token(m.content, slot.status.scheme()))
      throw LabelLeak(fmt::format("synthesis prompt for {} contains a label token", persona.persona_id));

  struct Attempt {
    std::string text;
    rubric::FeatureProfile profile;
    rubric::ValidationResult result;
  };
  std::optional<Attempt> kept;
  int attempts = 0;
  bool accepted = false;
  for (int a = 0; a <= policy.max_retries; ++a) {
    attempts = a + 1;
    const auto seed = corpus::derive_seed(slot.seed, "narrative", static_cast<std::uint64_t>(a));
    auto response = deps.generator->generate(persona, prompt, seed);
    Attempt cur;
    cur.profile = rubric::analyze(response.text, *deps.lexicons);
    cur.result = rubric::validate(rubric::score(cur.profile), persona.style, policy.validation);
    cur.text = std::move(response.text);
    const bool better = !kept || cur.result.matched_dims > kept->result.matched_dims;
    accepted = cur.result.pass;
    if (accepted || better || !policy.keep_best_on_exhaustion) kept = std::move(cur);
    if (accepted) break;
  }

  Rng timbre_rng(corpus::derive_seed(slot.seed, "timbre", 0));
  const auto& voice = deps.timbres->select(persona.demographics.sex,
                                           timbre::bucket_for_age(persona.demographics.age), timbre_rng);
  const auto ref_path = voice.file_path.empty() ? std::filesystem::path() : deps.timbres->resolve(voice);
  const auto speech = audio::to_pipeline_format(
      deps.tts->synthesize(kept->text, voice, ref_path, corpus::derive_seed(slot.seed, "speech", 0)));
  const auto wav = audio::encode_wav(speech);

  corpus::SampleRecord r;
  r.cohort_id = deps.cohort_id;
  r.language = persona.language;
  r.label = slot.status;
  r.persona = persona;
  r.transcript = kept->text;
  r.transcript_hash = sha256_hex(r.transcript);
  r.audio.checksum = sha256_hex(wav);
  r.audio.path = fmt::format("audio/{}.wav", persona.persona_id);
  r.feature_profile = kept->profile;
  r.provenance = corpus::Provenance::Synthetic;
  r.seed = slot.seed;
  corpus::GenerationMeta meta;
  meta.template_version = prompt.template_version;
  meta.timbre_id = voice.timbre_id;
  meta.attempts = attempts;
  meta.matched_dims = kept->result.matched_dims;
  if (!accepted) meta.flags.push_back("validation_exhausted");
  r.generation = meta;
  r.sample_id = corpus::sample_id_for(r.transcript_hash, r.audio.checksum, slot.status.label());

  if (!deps.run_dir.empty()) {
    const auto path = deps.run_dir / r.audio.path;
    std::filesystem::create_directories(path.parent_path());
    text::write_file(path.string(), wav);
  }
  return r;
}

CohortRun generate_cohort(const persona::CohortPlan& plan, const PipelineDeps& deps, const GenerationPolicy& policy,
                          const CohortOptions& options, json spec_snapshot) {
  if (plan.slots.empty()) throw ConfigError("cohort plan is empty");
  if (options.manifest_path.empty()) throw ConfigError("manifest path is required");
  policy.validate();
  deps.validate(plan.spec.language);

  corpus::CohortManifest header;
  header.cohort_id = deps.cohort_id;
  header.spec = std::move(spec_snapshot);
  header.created_at = corpus::utc_timestamp();
  header.master_seed = plan.spec.master_seed;
  corpus::ManifestWriter writer(options.manifest_path, header);

  std::set<std::string> present;
  for (const auto& r : writer.manifest().records)
    if (r.persona) present.insert(r.persona->persona_id);

  CohortRun run;
  std::vector<const persona::PersonaSlot*> pending;
  for (const auto& slot : plan.slots) {
    if (present.count(persona::persona_id_for(slot.index))) ++run.skipped;
    else pending.push_back(&slot);
  }
  if (writer.sealed() && !pending.empty())
    throw Error("ManifestSealed", options.manifest_path.string() + " is sealed but the plan has missing slots");
  if (options.stop_after && static_cast<int>(pending.size()) > *options.stop_after)
    pending.resize(static_cast<std::size_t>(std::max(0, *options.stop_after)));

  // Completed slots are appended strictly in slot order.
  std::vector<std::optional<corpus::SampleRecord>> results(pending.size());
  std::vector<std::optional<SlotFailure>> failures(pending.size());
  std::vector<bool> done(pending.size(), false);
  std::size_t next_write = 0;
  int finished = 0;
  std::mutex mu;

  parallel_for(pending.size(), options.jobs, [&](std::size_t k) {
    const auto& slot = *pending[k];
    std::optional<corpus::SampleRecord> rec;
    std::optional<SlotFailure> fail;
    try {
      rec = generate_sample(slot, deps, policy);
    } catch (const Error& e) {
      fail = SlotFailure{slot.index, persona::persona_id_for(slot.index), e.kind(), e.what()};
    }
    std::lock_guard lock(mu);
    results[k] = std::move(rec);
    failures[k] = std::move(fail);
    done[k] = true;
    while (next_write < pending.size() && done[next_write]) {
      if (results[next_write]) writer.append(*results[next_write]);
      ++next_write;
    }
    ++finished;
    if (options.progress) options.progress(finished, static_cast<int>(pending.size()));
  });

  for (std::size_t k = 0; k < pending.size(); ++k) {
    if (results[k]) {
      ++run.generated;
      if (results[k]->flagged()) ++run.flagged;
    }
    if (failures[k]) run.failures.push_back(std::move(*failures[k]));
  }
  const auto total = plan.slots.size();
  if (writer.manifest().records.size() == total) writer.seal();
  run.sealed = writer.sealed();
  run.over_threshold =
      static_cast<double>(run.failures.size()) > policy.failure_threshold * static_cast<double>(total);
  run.manifest = writer.manifest();
  return run;
}

namespace {

std::string language_name(Language l) { return l == Language::EN ? "English" : "中文"; }

std::string audio_note(Language l, bool attached) {
  if (!attached) return "";
  return l == Language::EN ? "The audio recording of this sample is attached." : "本样本的录音已附上。";
}

}  // namespace

DistillResult distill_cot(const std::vector<corpus::SampleRecord>& samples, services::ChatModel& model,
                          const prompts::PromptTemplate& cot_template, const DistillOptions& opt) {
  if (cot_template.id != prompts::TemplateId::Cot) throw ConfigError("distillation needs the cot template");
  struct Outcome {
    std::optional<corpus::CotRecord> record;
    std::optional<DroppedSample> dropped;
  };
  std::vector<Outcome> outcomes(samples.size());

  parallel_for(samples.size(), opt.jobs, [&](std::size_t i) {
    const auto& s = samples[i];
    if (!s.label) throw Error("UnlabelledSample", fmt::format("sample {} has no label", s.sample_id));
    const Label label = s.label->label();
    const bool attach = opt.attach_audio && !s.audio.path.empty();
    std::map<std::string, std::string> b{{"transcript", s.transcript},
                                         {"label", std::string(to_string(label))},
                                         {"label_description", prompts::label_description(label, opt.language)},
                                         {"audio_note", audio_note(opt.language, attach)},
                                         {"language", language_name(opt.language)}};
    auto prompt = prompts::render(cot_template, b);
    if (attach) prompt.attachments.push_back({s.audio.path, s.audio.checksum});

    for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
      services::DecodeParams d = opt.decode;
      d.request_seed = corpus::derive_seed(opt.master_seed, "cot/" + s.sample_id, attempt);
      services::ModelResponse resp;
      try {
        resp = model.complete(prompt, d);
      } catch (const services::ServiceError& e) {
        outcomes[i].dropped = DroppedSample{s.sample_id, e.kind()};
        return;
      }
      const auto parsed = evaluate::parse_label(resp.text, opt.scheme, opt.rules);
      if (parsed == label) {
        outcomes[i].record = corpus::CotRecord{s.sample_id, resp.text, label, cot_template.version_hash, *parsed};
        return;
      }
    }
    outcomes[i].dropped = DroppedSample{s.sample_id, "DroppedInconsistent"};
  });

  DistillResult out;
  for (auto& o : outcomes) {
    if (o.record) out.records.push_back(std::move(*o.record));
    if (o.dropped) {
      out.dropped_inconsistent += o.dropped->reason == "DroppedInconsistent";
      out.dropped.push_back(std::move(*o.dropped));
    }
  }
  return out;
}

std::string with_final_tag(std::string rationale, Label label) {
  while (!rationale.empty() && (rationale.back() == '\n' || rationale.back() == ' ' || rationale.back() == '\r'))
    rationale.pop_back();
  const std::string tag = fmt::format("FINAL: {}", to_string(label));
  const auto nl = rationale.rfind('\n');
  const std::string last = text::trim(nl == std::string::npos ? rationale : rationale.substr(nl + 1));
  if (last == tag) return rationale;
  return rationale.empty() ? tag : rationale + "\n" + tag;
}

void export_sft(const std::vector<corpus::CotRecord>& records, const corpus::CohortManifest& manifest,
                const prompts::PromptTemplate& cls_template, LabelScheme scheme, const std::filesystem::path& path) {
  if (cls_template.id != prompts::TemplateId::Cls) throw ConfigError("SFT export needs the cls template");
  std::string out;
  for (const auto& c : records) {
    const auto* s = manifest.find(c.sample_id);
    if (!s) throw Error("UnresolvedSample", fmt::format("sample {} is not in the manifest", c.sample_id));
    const bool has_audio = !s->audio.path.empty();
    const auto prompt = prompts::render(cls_template, {{"transcript", s->transcript},
                                                       {"audio_note", audio_note(cls_template.language, has_audio)},
                                                       {"label_options", prompts::label_options(scheme, cls_template.language)},
                                                       {"language", language_name(cls_template.language)}});
    json messages = json::array();
    for (const auto& m : prompt.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    messages.push_back({{"role", "assistant"}, {"content", with_final_tag(c.rationale, c.label)}});
    json line{{"sample_id", c.sample_id},
              {"label", to_string(c.label)},
              {"messages", messages},
              {"audio", {{"path", s->audio.path}, {"checksum", s->audio.checksum}}},
              {"prompt_version", hex64(cls_template.version_hash)}};
    out += line.dump() + "\n";
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  text::write_file(path.string(), out);
}

}  // namespace syncog::pipeline
