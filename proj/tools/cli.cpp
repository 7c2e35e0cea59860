#include "cli.hpp"
#include "figures.hpp"

#include "syncog/corpus.hpp"
#include "syncog/evaluate.hpp"
#include "syncog/hash.hpp"
#include "syncog/pipeline.hpp"
#include "syncog/preprocess.hpp"
#include "syncog/prompts.hpp"
#include "syncog/rubric.hpp"
#include "syncog/seed.hpp"
#include "syncog/stub.hpp"
#include "syncog/text.hpp"
#include "syncog/timbre.hpp"

#include <algorithm>
#include <functional>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

namespace syncog::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::string seed;
  int jobs = 1;
  bool stub = false;
  std::string run_dir;
};

RunConfig load(const Globals& g) {
  Overrides ov;
  if (!g.seed.empty()) {
    try {
      std::size_t used = 0;
      ov.seed = std::stoull(g.seed, &used, 0);
      if (used != g.seed.size()) throw std::invalid_argument(g.seed);
    } catch (const std::logic_error&) {
      throw ConfigError("--seed must be an unsigned integer: " + g.seed);
    }
  }
  if (!g.run_dir.empty()) ov.run_dir = fs::path(g.run_dir);
  ov.stub = g.stub;
  return load_config(g.config.empty() ? std::nullopt : std::optional<fs::path>(g.config), ov);
}

fs::path reports_dir(const RunConfig& c) { return c.run_dir / "reports"; }

void write_text(const fs::path& path, std::string_view body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  text::write_file(path.string(), body);
}

json provenance(const RunConfig& c) {
  return {{"config_hash", c.hash}, {"master_seed", c.master_seed}, {"master_seed_hex", hex64(c.master_seed)}};
}

void add_provenance(const RunConfig& c, json& body) {
  const json p = provenance(c);
  for (const auto& [k, v] : p.items()) body[k] = v;
}

fs::path write_report(const RunConfig& c, const std::string& name, json body) {
  add_provenance(c, body);
  body["tool_version"] = std::string(corpus::kToolVersion);
  const auto path = reports_dir(c) / (name + ".json");
  write_text(path, body.dump(2) + "\n");
  fmt::print(stderr, "report: {}\n", path.string());
  return path;
}

std::shared_ptr<services::ServiceClient> make_client(const RunConfig& c, const EndpointSetting& e) {
  std::shared_ptr<services::Transport> transport =
      e.fixtures_dir.empty() ? services::make_http_transport()
                             : std::make_shared<services::FixtureTransport>(e.fixtures_dir);
  if (!e.record_dir.empty()) transport = std::make_shared<services::RecordingTransport>(transport, e.record_dir);
  services::ClientHooks hooks;
  hooks.log = [](const std::string& m) { fmt::print(stderr, "{}\n", m); };
  auto client = std::make_shared<services::ServiceClient>(e.endpoint, transport, hooks);
  client->set_attachment_root(c.run_dir);
  return client;
}

std::shared_ptr<const rubric::Lexicons> load_lexicons(const RunConfig& c, Language language) {
  return std::make_shared<const rubric::Lexicons>(rubric::Lexicons::load(c.lexicon_dir, language));
}

prompts::PromptTemplate load_tmpl(const RunConfig& c, prompts::TemplateId id) {
  return prompts::load_template(prompts::template_path(c.template_dir, id, c.language), id, c.language);
}

fs::path or_default(const std::string& value, const fs::path& fallback) {
  return value.empty() ? fallback : fs::path(value);
}

fs::path default_manifest(const RunConfig& c) { return c.run_dir / "manifest.jsonl"; }
fs::path default_predictions(const RunConfig& c) { return c.run_dir / "eval" / "predictions.jsonl"; }

json histogram_json(const std::map<Label, int>& h) {
  json j = json::object();
  for (const auto& [l, n] : h) j[std::string(to_string(l))] = n;
  return j;
}

/// Labelled records, restricted to the split when one is given.
corpus::DatasetSplit selection(const corpus::CohortManifest& m, const std::string& split_path) {
  if (!split_path.empty()) return corpus::read_split(split_path);
  return corpus::split_from_manifest(m, "all");
}

// ---- cohort ---------------------------------------------------------------------

int cohort_plan(const Globals& g, const std::string& out) {
  const auto c = load(g);
  const auto plan = persona::plan_cohort(c.cohort);
  const auto path = or_default(out, c.run_dir / "plan.json");
  write_text(path, persona::to_json(plan).dump(2) + "\n");
  std::map<Label, int> labels;
  std::map<std::string, int> sexes;
  for (const auto& s : plan.slots) {
    ++labels[s.status.label()];
    ++sexes[std::string(to_string(s.demographics.sex))];
  }
  write_report(c, "cohort_plan",
               {{"plan", path.string()}, {"slots", plan.slots.size()}, {"labels", histogram_json(labels)},
                {"sex", sexes}});
  return kOk;
}

int cohort_generate(const Globals& g, const std::string& plan_path, std::optional<int> stop_after) {
  const auto c = load(g);
  const auto plan = plan_path.empty() ? persona::plan_cohort(c.cohort)
                                      : persona::cohort_plan_from_json(json::parse(text::read_file(plan_path)));
  const auto lex = load_lexicons(c, plan.spec.language);

  pipeline::PipelineDeps deps;
  deps.lexicons = lex;
  if (c.generator.stub) {
    deps.generator = std::make_shared<services::StubNarrativeGenerator>(lex);
  } else {
    deps.generator = std::make_shared<services::LiveNarrativeGenerator>(
        std::make_shared<services::LiveChatModel>(make_client(c, c.generator)), c.synthesis_decode);
  }
  if (c.tts.stub) {
    deps.tts = std::make_shared<services::StubSpeechSynthesizer>();
  } else {
    deps.tts = std::make_shared<services::LiveSpeechSynthesizer>(make_client(c, c.tts));
  }
  if (!c.timbre_dir.empty()) {
    deps.timbres = std::make_shared<const timbre::TimbreLibrary>(timbre::TimbreLibrary::load(c.timbre_dir));
  } else if (c.tts.stub) {
    deps.timbres = std::make_shared<const timbre::TimbreLibrary>(timbre::stub_library());
  } else {
    throw ConfigError("live speech synthesis needs timbre_dir");
  }
  deps.syn_template = load_tmpl(c, prompts::TemplateId::Syn);
  deps.sampler = c.sampler;
  deps.stimulus.description = c.stimulus;
  deps.run_dir = c.run_dir;
  deps.cohort_id = c.cohort_id;

  pipeline::CohortOptions opt;
  opt.manifest_path = default_manifest(c);
  opt.jobs = g.jobs;
  opt.stop_after = stop_after;
  opt.progress = [](int done, int total) {
    if (done == total || done % 25 == 0) fmt::print(stderr, "generated {}/{}\n", done, total);
  };
  fs::create_directories(c.run_dir);
  const auto run = pipeline::generate_cohort(plan, deps, c.policy, opt, c.resolved);

  std::map<Label, int> labels;
  std::map<std::string, int> sexes;
  for (const auto& r : run.manifest.records) {
    if (r.label) ++labels[r.label->label()];
    if (r.persona) ++sexes[std::string(to_string(r.persona->demographics.sex))];
  }
  json failures = json::array();
  bool all_unreachable = !run.failures.empty();
  for (const auto& f : run.failures) {
    failures.push_back({{"slot", f.slot}, {"persona_id", f.persona_id}, {"kind", f.kind}, {"message", f.message}});
    all_unreachable = all_unreachable && f.kind == "Unreachable";
  }
  write_report(c, "cohort_generate",
               {{"manifest", opt.manifest_path.string()},
                {"slots", plan.slots.size()},
                {"records", run.manifest.records.size()},
                {"generated", run.generated},
                {"skipped", run.skipped},
                {"flagged", run.flagged},
                {"sealed", run.sealed},
                {"labels", histogram_json(labels)},
                {"sex", sexes},
                {"failures", failures},
                {"over_threshold", run.over_threshold}});
  if (all_unreachable && run.generated == 0) return kUnreachable;
  return run.over_threshold ? kPartialFailure : kOk;
}

int cohort_stats(const Globals& g, const std::string& manifest_path, bool svg) {
  const auto c = load(g);
  const auto m = corpus::read_manifest(or_default(manifest_path, default_manifest(c)));
  std::map<Language, std::shared_ptr<const rubric::Lexicons>> lex;
  ProfilesByLabel profiles;
  for (const auto& r : m.records) {
    if (!r.label || r.flagged()) continue;
    if (r.feature_profile) {
      profiles[r.label->label()].push_back(*r.feature_profile);
      continue;
    }
    auto& l = lex[r.language];
    if (!l) l = load_lexicons(c, r.language);
    profiles[r.label->label()].push_back(rubric::analyze(r.transcript, *l));
  }
  std::vector<evaluate::GroupComparison> rows;
  json skipped = json::array();
  for (auto feature : rubric::kFeatureNames) {
    try {
      auto part = evaluate::group_compare(profiles, feature);
      rows.insert(rows.end(), part.begin(), part.end());
    } catch (const Error& e) {
      skipped.push_back({{"feature", feature}, {"reason", e.kind()}});
    }
  }
  const auto dir = reports_dir(c);
  write_text(dir / "feature_summary.csv", summaries_csv(profiles));
  write_text(dir / "group_compare.csv", comparisons_csv(rows));
  if (svg) {
    for (auto feature : rubric::kFeatureNames) {
      std::map<Label, FiveNumber> boxes;
      for (const auto& [label, group] : profiles) {
        std::vector<double> v;
        for (const auto& p : group) v.push_back(rubric::feature_value(p, feature));
        boxes[label] = five_number(std::move(v));
      }
      write_text(dir / "figures" / (std::string(feature) + ".svg"), box_plot_svg(feature, boxes));
    }
  }
  json comparisons = json::array();
  for (const auto& r : rows) {
    comparisons.push_back({{"feature", r.feature},
                           {"group_a", to_string(r.a)},
                           {"group_b", to_string(r.b)},
                           {"median_a", r.median_a},
                           {"median_b", r.median_b},
                           {"u", r.test.u},
                           {"z", r.test.z},
                           {"p_value", r.test.p_value}});
  }
  std::map<Label, int> sizes;
  for (const auto& [l, v] : profiles) sizes[l] = static_cast<int>(v.size());
  write_report(c, "cohort_stats",
               {{"cohort_id", m.cohort_id},
                {"groups", histogram_json(sizes)},
                {"comparisons", comparisons},
                {"skipped", skipped},
                {"summary_csv", (dir / "feature_summary.csv").string()}});
  return kOk;
}

// ---- rubric -----------------------------------------------------------------------

int rubric_analyze(const Globals& g, const std::string& file, const std::string& language) {
  const auto c = load(g);
  const Language lang = language.empty() ? c.language : parse_language(language);
  const auto lex = load_lexicons(c, lang);
  const auto profile = rubric::analyze(text::read_file(file), *lex);
  json out = {{"file", file},
              {"language", to_string(lang)},
              {"profile", rubric::to_json(profile)},
              {"scores", persona::to_json(rubric::score(profile))}};
  add_provenance(c, out);
  std::cout << out.dump(2) << "\n";
  return kOk;
}

// ---- preprocess -------------------------------------------------------------------

int preprocess_run(const Globals& g, const std::string& input, const std::string& cohort_id,
                   const std::string& manifest_path) {
  const auto c = load(g);
  preprocess::BatchOptions opt;
  opt.input_dir = input;
  opt.run_dir = c.run_dir;
  opt.language = c.language;
  opt.scheme = c.scheme;
  opt.cohort_id = cohort_id;
  opt.jobs = g.jobs;
  if (!fs::is_directory(opt.input_dir)) throw ConfigError("input directory " + input + " does not exist");

  std::unique_ptr<services::Transcriber> asr;
  if (!c.asr.stub) asr = std::make_unique<services::LiveTranscriber>(make_client(c, c.asr));
  auto result = preprocess::run_batch(opt, asr.get());
  result.manifest.spec = c.resolved;
  result.manifest.master_seed = c.master_seed;
  const auto path = or_default(manifest_path, c.run_dir / "real_manifest.jsonl");
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  corpus::write_manifest(result.manifest, path);

  json failures = json::array();
  bool all_unreachable = !result.failures.empty();
  for (const auto& f : result.failures) {
    failures.push_back({{"recording", f.recording}, {"kind", f.kind}, {"message", f.message}});
    all_unreachable = all_unreachable && f.kind == "Unreachable";
  }
  const std::size_t total = result.manifest.records.size() + result.failures.size();
  write_report(c, "preprocess",
               {{"manifest", path.string()},
                {"records", result.manifest.records.size()},
                {"failures", failures}});
  if (all_unreachable && result.manifest.records.empty()) return kUnreachable;
  if (total > 0 && static_cast<double>(result.failures.size()) / static_cast<double>(total) >
                       c.policy.failure_threshold)
    return kPartialFailure;
  return kOk;
}

// ---- distillation and SFT export --------------------------------------------------

int distill(const Globals& g, const std::string& manifest_path, const std::string& split_path,
            const std::string& out, double inconsistent_rate) {
  const auto c = load(g);
  const auto m = corpus::read_manifest(or_default(manifest_path, default_manifest(c)));
  const auto split = selection(m, split_path);
  std::vector<corpus::SampleRecord> samples;
  for (const auto& e : split.entries) {
    const auto* r = m.find(e.sample_id);
    if (!r) throw Error("UnresolvedSample", fmt::format("sample {} is not in the manifest", e.sample_id));
    samples.push_back(*r);
  }

  std::shared_ptr<services::ChatModel> model;
  if (c.distill.stub) {
    auto stub = std::make_shared<services::StubRationaleModel>(load_lexicons(c, c.language), c.scheme);
    if (inconsistent_rate > 0.0) {
      // The lowest-ranked fraction of samples by a seeded hash always concludes inconsistently.
      std::vector<std::pair<std::uint64_t, std::string>> ranked;
      for (const auto& s : samples)
        ranked.emplace_back(corpus::derive_seed(c.master_seed, "stub-inconsistent/" + s.sample_id, 0),
                            s.transcript_hash);
      std::sort(ranked.begin(), ranked.end());
      const auto n = static_cast<std::size_t>(std::llround(inconsistent_rate * static_cast<double>(samples.size())));
      auto chosen = std::make_shared<std::set<std::string>>();
      for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) chosen->insert(ranked[i].second);
      stub->set_inconsistent([chosen](const prompts::RenderedPrompt& p) {
        const auto it = p.bindings.find("transcript");
        return it != p.bindings.end() && chosen->count(sha256_hex(it->second)) > 0;
      });
    }
    model = stub;
  } else {
    model = std::make_shared<services::LiveChatModel>(make_client(c, c.distill));
  }

  pipeline::DistillOptions opt;
  opt.scheme = c.scheme;
  opt.language = c.language;
  opt.decode = c.distill_decode;
  opt.master_seed = c.master_seed;
  opt.attach_audio = c.distill_attach_audio;
  opt.jobs = g.jobs;
  const auto result = pipeline::distill_cot(samples, *model, load_tmpl(c, prompts::TemplateId::Cot), opt);

  const auto path = or_default(out, c.run_dir / "cot" / "cot.jsonl");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  corpus::write_cot_records(result.records, path);
  json dropped = json::array();
  bool all_unreachable = !result.dropped.empty();
  for (const auto& d : result.dropped) {
    dropped.push_back({{"sample_id", d.sample_id}, {"reason", d.reason}});
    all_unreachable = all_unreachable && d.reason == "Unreachable";
  }
  write_report(c, "distill",
               {{"cot", path.string()},
                {"samples", samples.size()},
                {"kept", result.records.size()},
                {"dropped_inconsistent", result.dropped_inconsistent},
                {"dropped", dropped}});
  if (all_unreachable && result.records.empty()) return kUnreachable;
  const std::size_t service_drops = result.dropped.size() - static_cast<std::size_t>(result.dropped_inconsistent);
  if (!samples.empty() &&
      static_cast<double>(service_drops) / static_cast<double>(samples.size()) > c.policy.failure_threshold)
    return kPartialFailure;
  return kOk;
}

int sft_export(const Globals& g, const std::string& cot_path, const std::string& manifest_path,
               const std::string& out) {
  const auto c = load(g);
  const auto m = corpus::read_manifest(or_default(manifest_path, default_manifest(c)));
  const auto records = corpus::read_cot_records(or_default(cot_path, c.run_dir / "cot" / "cot.jsonl"));
  const auto path = or_default(out, c.run_dir / "sft" / "train.jsonl");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  pipeline::export_sft(records, m, load_tmpl(c, prompts::TemplateId::Cls), c.scheme, path);
  std::map<Label, int> labels;
  for (const auto& r : records) ++labels[r.label];
  write_report(c, "sft_export", {{"output", path.string()}, {"examples", records.size()}, {"labels", histogram_json(labels)}});
  return kOk;
}

// ---- evaluation -------------------------------------------------------------------

std::vector<std::vector<evaluate::ParsedLabel>> prediction_matrix(const std::vector<evaluate::Prediction>& preds,
                                                                   const std::vector<evaluate::EvalItem>& items,
                                                                   int n_rollouts) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < items.size(); ++i) index[items[i].sample_id] = i;
  std::vector<std::vector<evaluate::ParsedLabel>> out(static_cast<std::size_t>(n_rollouts),
                                                      std::vector<evaluate::ParsedLabel>(items.size()));
  for (const auto& p : preds) {
    const auto it = index.find(p.sample_id);
    if (it == index.end() || p.rollout < 0 || p.rollout >= n_rollouts)
      throw Error("LengthMismatch", fmt::format("prediction ({}, {}) matches no sample/rollout", p.sample_id, p.rollout));
    out[static_cast<std::size_t>(p.rollout)][it->second] = p.parsed;
  }
  return out;
}

int rollouts_in(const std::vector<evaluate::Prediction>& preds) {
  int n = 0;
  for (const auto& p : preds) n = std::max(n, p.rollout + 1);
  return n;
}

void write_metrics(const RunConfig& c, const evaluate::MetricsReport& report, const json& extra) {
  const auto dir = reports_dir(c);
  write_text(dir / "eval_rollouts.csv", evaluate::rollouts_csv(report));
  write_text(dir / "eval_confusion.csv", evaluate::confusion_csv(report));
  json body = evaluate::to_json(report);
  for (auto& [k, v] : extra.items()) body[k] = v;
  write_report(c, "eval_metrics", body);
}

int eval_run(const Globals& g, const std::string& manifest_path, const std::string& split_path,
             std::optional<int> rollouts) {
  const auto c = load(g);
  const auto m = corpus::read_manifest(or_default(manifest_path, default_manifest(c)));
  const auto split = selection(m, split_path);
  const auto items = evaluate::eval_items(m, split);

  std::shared_ptr<services::ChatModel> model;
  if (c.eval.stub) {
    auto stub = std::make_shared<services::StubClassifier>(load_lexicons(c, c.language), c.scheme);
    if (c.stub_classifier == "oracle") {
      std::map<std::string, Label> truth;
      for (const auto& it : items) truth[sha256_hex(it.transcript)] = it.truth;
      stub->set_oracle(std::move(truth));
    }
    stub->set_noise(c.stub_noise);
    model = stub;
  } else {
    model = std::make_shared<services::LiveChatModel>(make_client(c, c.eval));
  }

  evaluate::EvalConfig ec;
  ec.n_rollouts = rollouts.value_or(c.n_rollouts);
  ec.decode = c.eval_decode;
  ec.scheme = c.scheme;
  ec.language = c.language;
  ec.master_seed = c.master_seed;
  ec.jobs = g.jobs;
  ec.attach_audio = c.eval_attach_audio;
  ec.run_dir = c.run_dir;

  std::vector<evaluate::Prediction> preds;
  try {
    preds = evaluate::run_rollouts(items, *model, load_tmpl(c, prompts::TemplateId::Cls), ec);
  } catch (const services::ServiceError& e) {
    if (e.service_kind() != services::ServiceErrorKind::Unreachable) throw;
    fmt::print(stderr, "error: evaluation endpoint unreachable: {}\n", e.what());
    return kUnreachable;
  }
  const auto pred_path = default_predictions(c);
  fs::create_directories(pred_path.parent_path());
  evaluate::write_predictions(preds, pred_path);
  const auto report = evaluate::compute_metrics(preds, items, ec.n_rollouts);
  write_metrics(c, report, {{"predictions", pred_path.string()}, {"split", split.name}});
  const double total = static_cast<double>(preds.size());
  return total > 0 && report.error_count / total > c.policy.failure_threshold ? kPartialFailure : kOk;
}

int eval_report(const Globals& g, const std::string& manifest_path, const std::string& split_path,
                const std::string& pred_path) {
  const auto c = load(g);
  const auto m = corpus::read_manifest(or_default(manifest_path, default_manifest(c)));
  const auto split = selection(m, split_path);
  const auto items = evaluate::eval_items(m, split);
  const auto path = or_default(pred_path, default_predictions(c));
  const auto preds = evaluate::read_predictions(path);
  const auto report = evaluate::compute_metrics(preds, items, rollouts_in(preds));
  write_metrics(c, report, {{"predictions", path.string()}, {"split", split.name}});
  return kOk;
}

int eval_stratify(const Globals& g, const std::string& manifest_path, const std::string& split_path,
                  const std::string& pred_path, const std::vector<std::string>& transitions) {
  const auto c = load(g);
  const auto m = corpus::read_manifest(or_default(manifest_path, default_manifest(c)));
  const auto items = evaluate::eval_items(m, selection(m, split_path));
  const auto preds = evaluate::read_predictions(or_default(pred_path, default_predictions(c)));
  const auto matrix = prediction_matrix(preds, items, rollouts_in(preds));
  std::vector<Label> truths;
  for (const auto& it : items) truths.push_back(it.truth);

  std::vector<evaluate::Transition> wanted;
  if (transitions.empty()) {
    wanted = {evaluate::Transition::MCI_vs_HC, evaluate::Transition::AD_vs_HC, evaluate::Transition::Impaired_vs_HC};
  } else {
    for (const auto& t : transitions) wanted.push_back(evaluate::parse_transition(t));
  }
  json rows = json::array();
  for (auto t : wanted) {
    try {
      rows.push_back(evaluate::to_json(evaluate::stratify(matrix, truths, t)));
    } catch (const Error& e) {
      if (e.kind() != "EmptyStratum") throw;
      rows.push_back({{"transition", to_string(t)}, {"skipped", e.what()}});
    }
  }
  write_report(c, "eval_stratify", {{"transitions", rows}});
  return kOk;
}

// ---- mixing -----------------------------------------------------------------------

int mix_cmd(const Globals& g, const std::string& real_path, const std::string& synth_path,
            const std::vector<int>& ratios, double test_fraction) {
  const auto c = load(g);
  const auto real_m = corpus::read_manifest(or_default(real_path, c.run_dir / "real_manifest.jsonl"));
  const auto synth_m = corpus::read_manifest(or_default(synth_path, default_manifest(c)));
  auto real = corpus::split_from_manifest(real_m, "real");
  const auto synth = corpus::split_from_manifest(synth_m, "synthetic");
  const auto dir = c.run_dir / "splits";
  fs::create_directories(dir);

  json files = json::array();
  if (test_fraction > 0.0) {
    Rng rng(corpus::derive_seed(c.master_seed, "split", 0));
    auto [train, test] = corpus::stratified_split(real, test_fraction, rng);
    corpus::check_disjoint(train, test);
    train.name = "real";
    test.name = "test";
    corpus::write_split(test, dir / "test.json");
    files.push_back((dir / "test.json").string());
    real = std::move(train);
  }

  std::string ladder = "ratio,label,real,synthetic,total\n";
  json rungs = json::array();
  for (int r : ratios) {
    if (r < 0) throw ConfigError("--ratios must be non-negative");
    Rng rng(corpus::derive_seed(c.master_seed, "mix", static_cast<std::uint64_t>(r)));
    const auto split = corpus::mix(real, synth, r, rng);
    const auto path = dir / (split.name + ".json");
    corpus::write_split(split, path);
    files.push_back(path.string());
    const auto hr = split.histogram(corpus::Provenance::Real);
    const auto hs = split.histogram(corpus::Provenance::Synthetic);
    for (auto label : labels_of(c.scheme)) {
      const int nr = hr.count(label) ? hr.at(label) : 0;
      const int ns = hs.count(label) ? hs.at(label) : 0;
      ladder += fmt::format("{},{},{},{},{}\n", r, to_string(label), nr, ns, nr + ns);
    }
    rungs.push_back({{"ratio", r},
                     {"split", split.name},
                     {"real", histogram_json(hr)},
                     {"synthetic", histogram_json(hs)},
                     {"size", split.entries.size()}});
  }
  write_text(reports_dir(c) / "mix_ladder.csv", ladder);
  write_report(c, "mix", {{"splits", files}, {"ladder", rungs}});
  return kOk;
}

// ---- timbre -----------------------------------------------------------------------

fs::path timbre_root(const RunConfig& c, const std::string& dir) {
  const auto root = dir.empty() ? c.timbre_dir : fs::path(dir);
  if (root.empty()) throw ConfigError("no timbre directory: set timbre_dir or pass --dir");
  return root;
}

int timbre_audit(const Globals& g, const std::string& dir) {
  const auto c = load(g);
  const auto lib = timbre::TimbreLibrary::load(timbre_root(c, dir));
  const auto audit = timbre::audit_library(lib);
  json failures = json::array();
  for (const auto& [id, reason] : audit.failures) failures.push_back({{"timbre_id", id}, {"reason", reason}});
  write_report(c, "timbre_audit",
               {{"library", lib.root().string()},
                {"checked", audit.checked},
                {"female", audit.female},
                {"male", audit.male},
                {"failures", failures}});
  return audit.failures.empty() ? kOk : kPartialFailure;
}

int timbre_register(const Globals& g, const std::string& dir, const std::string& file, const std::string& sex,
                    const std::string& bucket, const std::string& id) {
  const auto c = load(g);
  const auto root = timbre_root(c, dir);
  fs::create_directories(root);
  auto lib = timbre::TimbreLibrary::load(root);
  timbre::TimbreMetadata meta;
  meta.timbre_id = id;
  meta.sex = parse_sex(sex);
  meta.age_bucket = timbre::parse_age_bucket(bucket);
  timbre::audit_reference(file, meta);
  auto target = fs::path(file);
  const auto rel = fs::relative(fs::absolute(target), fs::absolute(root));
  if (rel.empty() || rel.native().rfind("..", 0) == 0) {
    target = root / target.filename();
    if (fs::exists(target)) throw ConfigError(fmt::format("{} already exists in the library", target.string()));
    fs::copy_file(file, target);
  }
  const auto& entry = lib.register_file(target, meta);
  lib.save();
  json out = timbre::to_json(entry);
  add_provenance(c, out);
  std::cout << out.dump(2) << "\n";
  return kOk;
}

std::vector<int> parse_ratios(const std::string& s) {
  std::vector<int> out;
  for (const auto& part : text::split(s, ',')) {
    const auto t = text::trim(part);
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::logic_error&) {
      throw ConfigError("--ratios expects comma-separated integers, got '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("--ratios is empty");
  return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Synthetic cognitive-screening cohorts and their evaluation", "syncog"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed (decimal or 0x hex)");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::Range(1, 4096));
  app.add_flag("--stub", g.stub, "Use offline doubles for every endpoint");
  app.add_option("--run-dir", g.run_dir, "Output directory");

  std::function<int()> action;

  auto* cohort = app.add_subcommand("cohort", "Cohort generation and statistics");
  cohort->require_subcommand(1);
  std::string plan_out;
  cohort->add_subcommand("plan", "Write the cohort plan")
      ->callback([&] { action = [&] { return cohort_plan(g, plan_out); }; })
      ->add_option("--out", plan_out, "Plan file (default <run-dir>/plan.json)");
  std::string plan_in;
  std::optional<int> stop_after;
  auto* gen = cohort->add_subcommand("generate", "Generate the synthetic cohort");
  gen->add_option("--plan", plan_in, "Existing plan file")->check(CLI::ExistingFile);
  gen->add_option("--stop-after", stop_after, "Stop after this many new records");
  gen->callback([&] { action = [&] { return cohort_generate(g, plan_in, stop_after); }; });
  std::string stats_manifest;
  bool svg = false;
  auto* stats = cohort->add_subcommand("stats", "Feature summaries and group comparisons");
  stats->add_option("--manifest", stats_manifest, "Manifest (default <run-dir>/manifest.jsonl)");
  stats->add_flag("--svg", svg, "Also write box plots");
  stats->callback([&] { action = [&] { return cohort_stats(g, stats_manifest, svg); }; });

  auto* rubric_cmd = app.add_subcommand("rubric", "Rubric scoring");
  rubric_cmd->require_subcommand(1);
  std::string analyze_file, analyze_lang;
  auto* analyze = rubric_cmd->add_subcommand("analyze", "Feature profile and style scores of a transcript");
  analyze->add_option("file", analyze_file, "Transcript text file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--language", analyze_lang, "en or zh");
  analyze->callback([&] { action = [&] { return rubric_analyze(g, analyze_file, analyze_lang); }; });

  auto* pre = app.add_subcommand("preprocess", "Real recordings");
  pre->require_subcommand(1);
  std::string pre_input, pre_cohort = "real", pre_manifest;
  auto* pre_run = pre->add_subcommand("run", "Standardize, isolate the participant and pair with transcripts");
  pre_run->add_option("--input", pre_input, "Directory of recordings and sidecars")->required();
  pre_run->add_option("--cohort-id", pre_cohort, "Cohort id of the records");
  pre_run->add_option("--manifest", pre_manifest, "Output manifest (default <run-dir>/real_manifest.jsonl)");
  pre_run->callback([&] { action = [&] { return preprocess_run(g, pre_input, pre_cohort, pre_manifest); }; });

  std::string d_manifest, d_split, d_out;
  double d_inconsistent = 0.0;
  auto* dist = app.add_subcommand("distill", "Label-conditioned rationales");
  dist->add_option("--manifest", d_manifest, "Manifest (default <run-dir>/manifest.jsonl)");
  dist->add_option("--split", d_split, "Restrict to a split file");
  dist->add_option("--out", d_out, "Output (default <run-dir>/cot/cot.jsonl)");
  dist->add_option("--stub-inconsistent", d_inconsistent, "Fraction of stub rationales that contradict the label")
      ->check(CLI::Range(0.0, 1.0));
  dist->callback([&] { action = [&] { return distill(g, d_manifest, d_split, d_out, d_inconsistent); }; });

  auto* sft = app.add_subcommand("sft", "Fine-tuning data");
  sft->require_subcommand(1);
  std::string s_cot, s_manifest, s_out;
  auto* sft_exp = sft->add_subcommand("export", "Write chat-format training examples");
  sft_exp->add_option("--cot", s_cot, "Rationales (default <run-dir>/cot/cot.jsonl)");
  sft_exp->add_option("--manifest", s_manifest, "Manifest (default <run-dir>/manifest.jsonl)");
  sft_exp->add_option("--out", s_out, "Output (default <run-dir>/sft/train.jsonl)");
  sft_exp->callback([&] { action = [&] { return sft_export(g, s_cot, s_manifest, s_out); }; });

  auto* ev = app.add_subcommand("eval", "Diagnostic evaluation");
  ev->require_subcommand(1);
  std::string e_manifest, e_split, e_pred;
  std::optional<int> e_rollouts;
  std::vector<std::string> e_transitions;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--manifest", e_manifest, "Manifest (default <run-dir>/manifest.jsonl)");
    s->add_option("--split", e_split, "Split file to evaluate");
  };
  auto* ev_run = ev->add_subcommand("run", "Run N rollouts and compute metrics");
  add_common(ev_run);
  ev_run->add_option("--rollouts", e_rollouts, "Number of rollouts")->check(CLI::Range(1, 4096));
  ev_run->callback([&] { action = [&] { return eval_run(g, e_manifest, e_split, e_rollouts); }; });
  auto* ev_rep = ev->add_subcommand("report", "Recompute metrics from stored predictions");
  add_common(ev_rep);
  ev_rep->add_option("--predictions", e_pred, "Predictions (default <run-dir>/eval/predictions.jsonl)");
  ev_rep->callback([&] { action = [&] { return eval_report(g, e_manifest, e_split, e_pred); }; });
  auto* ev_str = ev->add_subcommand("stratify", "Binary transition reports");
  add_common(ev_str);
  ev_str->add_option("--predictions", e_pred, "Predictions (default <run-dir>/eval/predictions.jsonl)");
  ev_str->add_option("--transition", e_transitions, "MCI_vs_HC, AD_vs_HC or Impaired_vs_HC (default all)");
  ev_str->callback([&] { action = [&] { return eval_stratify(g, e_manifest, e_split, e_pred, e_transitions); }; });

  std::string m_real, m_synth, m_ratios = "0,1,2,3,4,5";
  double m_test = 0.0;
  auto* mx = app.add_subcommand("mix", "Real plus synthetic training splits");
  mx->add_option("--real", m_real, "Real manifest (default <run-dir>/real_manifest.jsonl)");
  mx->add_option("--synthetic", m_synth, "Synthetic manifest (default <run-dir>/manifest.jsonl)");
  mx->add_option("--ratios", m_ratios, "Synthetic-to-real ratios, comma separated");
  mx->add_option("--test-fraction", m_test, "Hold out this fraction of real samples per class first")
      ->check(CLI::Range(0.0, 0.9));
  mx->callback([&] { action = [&] { return mix_cmd(g, m_real, m_synth, parse_ratios(m_ratios), m_test); }; });

  auto* tb = app.add_subcommand("timbre", "Reference voice library");
  tb->require_subcommand(1);
  std::string t_dir, t_file, t_sex, t_bucket = "unknown", t_id;
  auto* tb_audit = tb->add_subcommand("audit", "Re-check every reference");
  tb_audit->add_option("--dir", t_dir, "Library directory (default timbre_dir)");
  tb_audit->callback([&] { action = [&] { return timbre_audit(g, t_dir); }; });
  auto* tb_reg = tb->add_subcommand("register", "Audit and add a reference recording");
  tb_reg->add_option("file", t_file, "Mono 16 kHz WAV, at least 3 s")->required()->check(CLI::ExistingFile);
  tb_reg->add_option("--sex", t_sex, "female or male")->required();
  tb_reg->add_option("--age-bucket", t_bucket, "60s, 70s, 80s or unknown");
  tb_reg->add_option("--id", t_id, "Timbre id (default: file stem)");
  tb_reg->add_option("--dir", t_dir, "Library directory (default timbre_dir)");
  tb_reg->callback([&] { action = [&] { return timbre_register(g, t_dir, t_file, t_sex, t_bucket, t_id); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  if (!action) return kUsage;

  try {
    return action();
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigInvalid;
  } catch (const services::ServiceError& e) {
    fmt::print(stderr, "service error ({}): {}\n", e.kind(), e.what());
    return e.service_kind() == services::ServiceErrorKind::Unreachable ? kUnreachable : kPartialFailure;
  } catch (const Error& e) {
    fmt::print(stderr, "error ({}): {}\n", e.kind(), e.what());
    return kUsage;
  } catch (const json::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("syncog");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(storage.size()), argv.data());
}

}  // namespace syncog::cli
