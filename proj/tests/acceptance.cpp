// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include "oracles.hpp"
#include "support.hpp"

#include "cli.hpp"

#include "syncog/corpus.hpp"
#include "syncog/evaluate.hpp"
#include "syncog/hash.hpp"
#include "syncog/persona.hpp"
#include "syncog/preprocess.hpp"
#include "syncog/rubric.hpp"
#include "syncog/services.hpp"
#include "syncog/text.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

using namespace syncog;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int invoke(std::vector<std::string> args) { return cli::run_cli(args); }

fs::path write_config(const fs::path& dir, const json& j) {
  fs::create_directories(dir);
  const auto p = dir / "config.json";
  text::write_file(p.string(), j.dump(2));
  return p;
}

json read_json(const fs::path& p) { return json::parse(text::read_file(p.string())); }

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

/// Manifest lines with the header's creation time removed.
std::vector<std::string> comparable_manifest(const fs::path& p) {
  auto lines = lines_of(p);
  if (!lines.empty()) {
    auto header = json::parse(lines[0]);
    header.erase("created_at");
    lines[0] = header.dump();
  }
  return lines;
}

const rubric::Lexicons& en_lexicons() {
  static const rubric::Lexicons lex = rubric::Lexicons::load(testing::data_dir() / "lexicons", Language::EN);
  return lex;
}

// ---- 1 ------------------------------------------------------------------------------

Outcome metric_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(20240601);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto scheme = rng.index(2) ? LabelScheme::Ternary : LabelScheme::Binary;
    const auto labels = labels_of(scheme);
    const std::size_t m = 1 + rng.index(50);
    const std::size_t n = 1 + rng.index(8);
    std::vector<Label> truths;
    std::vector<int> truth_ids;
    for (std::size_t i = 0; i < m; ++i) {
      const auto l = labels[rng.index(labels.size())];
      truths.push_back(l);
      truth_ids.push_back(static_cast<int>(l));
    }
    std::vector<std::vector<evaluate::ParsedLabel>> preds(n);
    std::vector<std::vector<int>> pred_ids(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < m; ++i) {
        const auto k = rng.index(labels.size() + 1);
        preds[r].push_back(k < labels.size() ? evaluate::ParsedLabel(labels[k]) : std::nullopt);
        pred_ids[r].push_back(k < labels.size() ? static_cast<int>(labels[k]) : -1);
      }
    }
    const auto got = evaluate::compute_metrics(preds, truths);
    const auto want = oracle::metrics(pred_ids, truth_ids);
    if (std::abs(got.macro_f1.mean - want.macro_f1) > 1e-9 || std::abs(got.avs.mean - want.avs) > 1e-9 ||
        std::abs(got.bon - want.bon) > 1e-9)
      ++mismatches;
  }
  const double elapsed = seconds_since(t0);
  o.require(mismatches == 0, fmt::format("{} of 200 instances disagree", mismatches));
  o.require(elapsed < 5.0, fmt::format("took {:.2f} s", elapsed));
  if (o.pass) o.detail = fmt::format("200 instances agree within 1e-9 in {:.3f} s", elapsed);
  return o;
}

// ---- 2 ------------------------------------------------------------------------------

Outcome worked_examples() {
  Outcome o;
  const std::vector<Label> truths{Label::AD, Label::NonAD, Label::NonAD, Label::NonAD};
  const auto r = evaluate::rollout_metrics({Label::AD, Label::AD, Label::NonAD, Label::NonAD}, truths);
  o.require(std::abs(r.macro_f1 - 11.0 / 15.0) < 1e-12, fmt::format("macro-F1 {}", r.macro_f1));
  o.require(std::abs(r.accuracy - 0.75) < 1e-12, fmt::format("accuracy {}", r.accuracy));

  std::vector<std::vector<evaluate::ParsedLabel>> rollouts;
  for (int correct : {10, 15, 12}) {
    std::vector<evaluate::ParsedLabel> row(20, Label::NonAD);
    for (int i = 0; i < correct; ++i) row[static_cast<std::size_t>(i)] = Label::AD;
    rollouts.push_back(row);
  }
  const auto m = evaluate::compute_metrics(rollouts, std::vector<Label>(20, Label::AD));
  o.require(std::abs(m.avs.mean - 0.6167) < 1e-4, fmt::format("AVS {}", m.avs.mean));
  o.require(m.bon == 0.75, fmt::format("BoN {}", m.bon));

  Rng rng(7);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.index(8), samples = 1 + rng.index(40);
    std::vector<Label> tr;
    for (std::size_t i = 0; i < samples; ++i) tr.push_back(labels_of(LabelScheme::Ternary)[rng.index(3)]);
    std::vector<std::vector<evaluate::ParsedLabel>> p(n);
    for (auto& row : p)
      for (std::size_t i = 0; i < samples; ++i) {
        const auto k = rng.index(4);
        row.push_back(k < 3 ? evaluate::ParsedLabel(labels_of(LabelScheme::Ternary)[k]) : std::nullopt);
      }
    const auto rep = evaluate::compute_metrics(p, tr);
    if (rep.bon + 1e-12 < rep.avs.mean) ++violations;
  }
  o.require(violations == 0, fmt::format("BoN < AVS in {} sets", violations));
  if (o.pass) o.detail = fmt::format("macro-F1 {:.4f}, AVS {:.4f}, BoN {:.2f}; BoN >= AVS on 1000 sets", r.macro_f1,
                                     m.avs.mean, m.bon);
  return o;
}

// ---- 3 ------------------------------------------------------------------------------

Outcome sampler_fidelity() {
  Outcome o;
  const auto t0 = Clock::now();
  struct Setting {
    double mu, alpha, beta, sigma;
    int age, education;  // g = (age - 60) / 30, h = education / 3
  };
  const Setting settings[] = {
      {2.0, 0.5, 0.3, 0.6, 90, 0},  // latent mean 1.5, on a rounding boundary
      {2.6, 0.5, 0.3, 0.6, 60, 0},  {1.4, 0.5, 0.3, 0.6, 75, 1}, {3.6, 0.0, 0.0, 0.3, 70, 2},
      {0.5, 0.5, 0.3, 0.4, 90, 0},  // saturated low
      {2.0, 0.5, 0.3, 1.5, 75, 2},  {2.5, 0.0, 0.0, 0.05, 60, 0}, {1.5, 0.5, 0.3, 0.2, 60, 3},
      {3.0, 0.5, 0.3, 1.0, 90, 3},
  };
  double worst = 0.0;
  for (const auto& s : settings) {
    const auto params = persona::StyleSamplerParams::uniform(s.mu, s.alpha, s.beta, s.sigma);
    persona::Demographics d;
    d.age = s.age;
    d.education = s.education;
    const auto cov = persona::normalize_covariates(d, params);
    const double mean = s.mu - s.alpha * cov.g + s.beta * cov.h;
    const auto expected = oracle::level_probabilities(mean, s.sigma);
    Rng rng(corpus::derive_seed(99, "fidelity", static_cast<std::uint64_t>(s.age * 10 + s.education)));
    std::array<int, 3> counts{};
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto v = persona::sample_style(CognitiveStatus(LabelScheme::Ternary, Label::MCI), d, params, rng);
      ++counts[static_cast<std::size_t>(v[StyleDimension::Clarity] - 1)];
    }
    for (std::size_t k = 0; k < 3; ++k) worst = std::max(worst, std::abs(counts[k] / double(n) - expected[k]));
  }
  const double elapsed = seconds_since(t0);
  o.require(worst <= 0.01, fmt::format("max deviation {:.4f}", worst));
  o.require(elapsed < 10.0, fmt::format("took {:.2f} s", elapsed));
  if (o.pass) o.detail = fmt::format("9 settings, max |freq - oracle| = {:.4f}, {:.2f} s", worst, elapsed);
  return o;
}

// ---- 4 ------------------------------------------------------------------------------

Outcome rubric_golden() {
  Outcome o;
  const auto dir = testing::fixture_dir() / "golden";
  const auto doc = read_json(dir / "annotations.json");
  const auto zh = rubric::Lexicons::load(testing::data_dir() / "lexicons", Language::ZH);
  int matched = 0, total = 0;
  for (const auto& f : doc.at("fixtures")) {
    ++total;
    const auto lang = parse_language(f.at("language").get<std::string>());
    const auto profile =
        rubric::analyze(text::read_file((dir / f.at("file").get<std::string>()).string()),
                        lang == Language::EN ? en_lexicons() : zh);
    auto expected = rubric::profile_from_json(f.at("profile"));
    const bool sd_close = std::abs(profile.sentence_len_sd - expected.sentence_len_sd) < 1e-6;
    const bool mean_close = std::abs(profile.mean_sentence_len - expected.mean_sentence_len) < 1e-9;
    expected.sentence_len_sd = profile.sentence_len_sd;
    expected.mean_sentence_len = profile.mean_sentence_len;
    const bool ok = sd_close && mean_close && profile == expected &&
                    rubric::score(profile).values() == f.at("scores").get<std::array<int, 5>>();
    if (ok) ++matched;
    else o.require(false, f.at("file").get<std::string>() + " differs");
  }
  o.require(total == 15, fmt::format("{} fixtures", total));

  std::vector<int> fluency, spatial;
  for (int k = 1; k <= 4; ++k) {
    std::string text = "The boy takes a cookie";
    for (int i = 0; i < k; ++i) text += " um";
    text += ".";
    fluency.push_back(rubric::score(rubric::analyze(text, en_lexicons()))[StyleDimension::Fluency]);
  }
  const char* spatial_texts[] = {"The boy takes a cookie.", "The boy is behind the girl.",
                                 "The boy is behind the girl and above the sink.",
                                 "The boy is behind the girl, above the sink and next to the window."};
  for (const char* t : spatial_texts)
    spatial.push_back(rubric::score(rubric::analyze(t, en_lexicons()))[StyleDimension::SpatialReference]);
  o.require(fluency == std::vector<int>{3, 2, 2, 1}, "fluency sweep " + fmt::format("{}", fmt::join(fluency, ",")));
  o.require(spatial == std::vector<int>{1, 1, 2, 3}, "spatial sweep " + fmt::format("{}", fmt::join(spatial, ",")));
  if (o.pass)
    o.detail = fmt::format("{}/{} golden fixtures exact; fluency {{3,2,2,1}}, spatial {{1,1,2,3}}", matched, total);
  return o;
}

// ---- 5 ------------------------------------------------------------------------------

Outcome stub_closure(const fs::path& root) {
  Outcome o;
  const auto requests_before = services::network_requests_issued();
  const auto t0 = Clock::now();
  const auto run_a = root / "closure-a", run_b = root / "closure-b", run_c = root / "closure-c";
  const int rc_a = invoke({"cohort", "generate", "--stub", "--seed", "42", "--jobs", "8", "--run-dir", run_a.string()});
  const double elapsed = seconds_since(t0);
  const int rc_b = invoke({"cohort", "generate", "--stub", "--seed", "42", "--jobs", "1", "--run-dir", run_b.string()});
  const int rc_c = invoke({"cohort", "generate", "--stub", "--seed", "42", "--jobs", "8", "--run-dir", run_c.string()});
  o.require(rc_a == 0 && rc_b == 0 && rc_c == 0, fmt::format("exit codes {} {} {}", rc_a, rc_b, rc_c));
  o.require(elapsed < 30.0, fmt::format("took {:.1f} s", elapsed));
  if (!o.pass) return o;

  const auto m = corpus::read_manifest(run_a / "manifest.jsonl");
  std::map<Label, int> labels;
  std::map<std::pair<Label, Sex>, int> cells;
  int flagged = 0;
  for (const auto& r : m.records) {
    ++labels[r.label->label()];
    ++cells[{r.label->label(), r.persona->demographics.sex}];
    flagged += r.flagged();
  }
  o.require(m.records.size() == 60, fmt::format("{} records", m.records.size()));
  o.require(m.seal.has_value(), "manifest not sealed");
  o.require(flagged == 0, fmt::format("{} flagged", flagged));
  for (auto l : {Label::HC, Label::MCI, Label::AD}) {
    o.require(labels[l] == 20, fmt::format("{} {}", to_string(l), labels[l]));
    o.require(cells[{l, Sex::Female}] == 10 && cells[{l, Sex::Male}] == 10,
              fmt::format("{} sex split {}/{}", to_string(l), cells[{l, Sex::Female}], cells[{l, Sex::Male}]));
  }
  const auto a = comparable_manifest(run_a / "manifest.jsonl");
  o.require(a == comparable_manifest(run_b / "manifest.jsonl"), "--jobs 1 and --jobs 8 manifests differ");
  o.require(a == comparable_manifest(run_c / "manifest.jsonl"), "rerun manifest differs");
  o.require(services::network_requests_issued() == requests_before, "stub run touched the network");
  if (o.pass)
    o.detail = fmt::format("60 records, 0 flagged, 20/20/20, 10/10 per label, identical across jobs and reruns, {:.2f} s",
                           elapsed);
  return o;
}

// ---- 6 ------------------------------------------------------------------------------

Outcome phenotype_separation(const fs::path& root) {
  Outcome o;
  const auto dir = root / "phenotype";
  const auto cfg = write_config(dir, {{"cohort", {{"counts", {{"AD", 50}, {"HC", 50}}}}}});
  const int rc = invoke({"--config", cfg.string(), "--stub", "--jobs", "8", "--run-dir", (dir / "run").string(), "cohort",
                      "generate"});
  o.require(rc == 0, fmt::format("generate exit {}", rc));
  if (!o.pass) return o;
  const int rc_stats = invoke({"--config", cfg.string(), "--run-dir", (dir / "run").string(), "cohort", "stats"});
  o.require(rc_stats == 0, fmt::format("stats exit {}", rc_stats));

  const auto m = corpus::read_manifest(dir / "run" / "manifest.jsonl");
  std::map<Label, std::vector<rubric::FeatureProfile>> groups;
  for (const auto& r : m.records) groups[r.label->label()].push_back(rubric::analyze(r.transcript, en_lexicons()));
  auto find = [&](const char* feature) {
    const auto rows = evaluate::group_compare(groups, feature);
    for (const auto& row : rows)
      if ((row.a == Label::AD && row.b == Label::HC) || (row.a == Label::HC && row.b == Label::AD)) return row;
    throw std::runtime_error("no AD/HC comparison");
  };
  auto median_of = [](const evaluate::GroupComparison& row, Label l) {
    return row.a == l ? row.median_a : row.median_b;
  };
  const auto words = find("total_words");
  const auto fillers = find("filler_frequency");
  o.require(words.test.p_value < 0.001, fmt::format("word-count p = {:.3g}", words.test.p_value));
  o.require(fillers.test.p_value < 0.001, fmt::format("filler p = {:.3g}", fillers.test.p_value));
  o.require(median_of(words, Label::AD) < median_of(words, Label::HC), "AD word count not below HC");
  o.require(median_of(fillers, Label::AD) > median_of(fillers, Label::HC), "AD filler frequency not above HC");
  if (o.pass)
    o.detail = fmt::format("words: AD {} vs HC {} (p = {:.2g}); fillers: AD {:.4f} vs HC {:.4f} (p = {:.2g})",
                           median_of(words, Label::AD), median_of(words, Label::HC), words.test.p_value,
                           median_of(fillers, Label::AD), median_of(fillers, Label::HC), fillers.test.p_value);
  return o;
}

// ---- 7 ------------------------------------------------------------------------------

/// Recordings with transcript and label sidecars, standing in for a real corpus.
void write_real_corpus(const fs::path& dir, int per_label) {
  fs::create_directories(dir);
  const Label labels[3] = {Label::HC, Label::MCI, Label::AD};
  int i = 0;
  for (auto l : labels) {
    for (int k = 0; k < per_label; ++k, ++i) {
      const auto name = fmt::format("rec{:02d}", i);
      audio::write_wav(dir / (name + ".wav"), testing::tone(6.0 + i, 44100, 2, 150.0 + 10 * i));
      text::write_file((dir / (name + ".segments")).string(), fmt::format("INV 0 1.5\nPAR 1.5 {}\n", 6.0 + i));
      text::write_file((dir / (name + ".txt")).string(),
                       fmt::format("The boy, um, takes cookie {} from the jar while the sink overflows.", i));
      text::write_file((dir / (name + ".label")).string(), std::string(to_string(l)));
    }
  }
}

Outcome mixing(const fs::path& root) {
  Outcome o;
  const auto run = root / "closure-a";
  if (!fs::exists(run / "manifest.jsonl"))
    o.require(invoke({"cohort", "generate", "--stub", "--seed", "42", "--run-dir", run.string()}) == 0,
              "synthetic cohort generation failed");
  write_real_corpus(root / "real-input", 4);
  const int rc_pre = invoke({"preprocess", "run", "--input", (root / "real-input").string(), "--run-dir", run.string()});
  o.require(rc_pre == 0, fmt::format("preprocess exit {}", rc_pre));
  const int rc = invoke({"mix", "--ratios", "0,1,2,3,4,5", "--run-dir", run.string()});
  o.require(rc == 0, fmt::format("mix exit {}", rc));
  if (!o.pass) return o;

  const auto real_m = corpus::read_manifest(run / "real_manifest.jsonl");
  const auto real = corpus::split_from_manifest(real_m, "real");
  const auto real_hist = real.histogram();
  int files = 0;
  for (int r = 0; r <= 5; ++r) {
    const auto path = run / "splits" / fmt::format("real_mix{}.json", r);
    if (!fs::exists(path)) {
      o.require(false, "missing " + path.filename().string());
      continue;
    }
    ++files;
    const auto split = corpus::read_split(path);
    const auto synth = split.histogram(corpus::Provenance::Synthetic);
    const auto reals = split.histogram(corpus::Provenance::Real);
    for (const auto& [label, n] : real_hist) {
      const int s = synth.count(label) ? synth.at(label) : 0;
      o.require(s == r * n, fmt::format("ratio {} {}: {} synthetic for {} real", r, to_string(label), s, n));
      o.require(reals.count(label) && reals.at(label) == n, fmt::format("ratio {} real count changed", r));
    }
    if (r == 0) o.require(split.entries == real.entries, "ratio 0 differs from the real split");
  }
  if (o.pass) o.detail = fmt::format("{} splits, synthetic = ratio x real per class (real {} per class)", files, real_hist.begin()->second);
  return o;
}

// ---- 8 ------------------------------------------------------------------------------

Outcome cot_invariant(const fs::path& root) {
  Outcome o;
  const auto dir = root / "cot";
  const auto run = (dir / "run").string();
  const auto cfg = write_config(dir, {{"cohort", {{"counts", {{"HC", 7}, {"MCI", 7}, {"AD", 6}}}}}});
  auto step = [&](std::vector<std::string> args, const char* what) {
    args.insert(args.begin(), {"--config", cfg.string(), "--stub", "--run-dir", run});
    const int rc = invoke(args);
    o.require(rc == 0, fmt::format("{} exit {}", what, rc));
  };
  step({"cohort", "generate"}, "generate");
  step({"distill"}, "distill");
  step({"sft", "export"}, "sft export");
  if (!o.pass) return o;

  const auto m = corpus::read_manifest(dir / "run" / "manifest.jsonl");
  const auto lines = lines_of(dir / "run" / "sft" / "train.jsonl");
  int good = 0;
  for (const auto& line : lines) {
    const auto j = json::parse(line);
    const auto* rec = m.find(j.at("sample_id").get<std::string>());
    const auto answer = j.at("messages").back().at("content").get<std::string>();
    const auto tail = "FINAL: " + std::string(to_string(rec ? rec->label->label() : Label::AD));
    if (rec && answer.size() >= tail.size() && answer.compare(answer.size() - tail.size(), tail.size(), tail) == 0 &&
        j.at("label") == to_string(rec->label->label()))
      ++good;
  }
  o.require(lines.size() == 20, fmt::format("{} SFT lines", lines.size()));
  o.require(good == static_cast<int>(lines.size()), fmt::format("{}/{} lines end in the matching FINAL tag", good,
                                                                lines.size()));

  step({"distill", "--stub-inconsistent", "0.1", "--out", (dir / "run" / "cot" / "inconsistent.jsonl").string()},
       "distill with inconsistent stub");
  const auto rep = read_json(dir / "run" / "reports" / "distill.json");
  const int dropped = rep.at("dropped_inconsistent").get<int>();
  o.require(dropped == 2, fmt::format("{} DroppedInconsistent, expected 2", dropped));
  o.require(rep.at("kept") == 18, fmt::format("{} kept", rep.at("kept").dump()));
  if (o.pass) o.detail = fmt::format("20/20 FINAL tags match ground truth; 10% inconsistent -> {} dropped", dropped);
  return o;
}

// ---- 9 ------------------------------------------------------------------------------

Outcome preprocessing() {
  Outcome o;
  const auto long_audio = testing::tone(150.0);
  const auto segs = preprocess::parse_segments("PAR 0 70\nINV 70 80\nPAR 80 130\nINV 130 150\n");
  const auto capped = preprocess::isolate_participant(long_audio, segs, std::string("PAR"));
  o.require(capped.duration_s() == 90.0, fmt::format("capped duration {}", capped.duration_s()));

  const auto two = preprocess::parse_segments("A 0 30\nB 30 40\n");
  o.require(preprocess::majority_speaker(two) == "A", "majority speaker");
  const auto isolated = preprocess::isolate_participant(testing::tone(40.0), two);
  o.require(std::abs(isolated.duration_s() - 30.0) < 1e-9, "majority isolation length");
  const auto interview = preprocess::parse_segments("interviewer 0 5\nsubject 5 20\n");
  o.require(std::abs(preprocess::isolate_participant(testing::tone(20.0), interview, std::string("subject"))
                         .duration_s() - 15.0) < 1e-9, "15 s subject segment");

  const auto dir = testing::scratch_dir("acceptance-pre");
  const auto mono = testing::tone(5.0);
  audio::write_wav(dir / "mono.wav", mono);
  const auto once = preprocess::standardize(preprocess::RawRecording::probe(dir / "mono.wav"));
  o.require(once == mono, "conformant input changed");
  o.require(audio::to_pipeline_format(once) == once, "standardization not idempotent");
  audio::write_wav(dir / "cd.wav", testing::tone(10.0, 44100, 2));
  const auto resampled = preprocess::standardize(preprocess::RawRecording::probe(dir / "cd.wav"));
  o.require(resampled.conforms() && std::abs(static_cast<long>(resampled.samples.size()) - 160000) <= 1,
            fmt::format("44.1 kHz stereo -> {} samples", resampled.samples.size()));
  if (o.pass) o.detail = "90.0 s cap, majority speaker, mono/16 kHz pass-through and resampling";
  return o;
}

// ---- 10 -----------------------------------------------------------------------------

Outcome wire_conformance() {
  Outcome o;
  const auto http = testing::fixture_dir() / "http";
  std::vector<std::chrono::milliseconds> sleeps;
  services::ClientHooks hooks;
  hooks.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };
  const auto endpoint = testing::fixture_endpoint();
  services::ServiceClient replay(endpoint, std::make_shared<services::FixtureTransport>(http), hooks);

  const auto prompt = testing::fixture_prompt(testing::kChatOkPrompt);
  const auto first = replay.chat_complete(prompt, testing::fixture_decode());
  const auto second = replay.chat_complete(prompt, testing::fixture_decode());
  o.require(first.text == testing::kChatOkAnswer && first.raw_payload_hash == second.raw_payload_hash,
            "chat replay");
  services::HttpRequest req;
  req.url = endpoint.base_url + "/chat/completions";
  req.body = services::chat_request_body(endpoint, prompt, testing::fixture_decode(), {}).dump();
  const auto stored = read_json(http / (services::fixture_key(req) + ".request.json")).at("body").get<std::string>();
  o.require(stored == req.body, "chat request body is not byte-identical to the recording");

  const auto speech = replay.synthesize_speech(testing::kTtsText, testing::fixture_voice(), http / "ref_female.wav");
  o.require(speech.conforms() && speech.samples.size() == 4000, "speech replay");
  o.require(replay.transcribe(testing::fixture_asr_audio()) == testing::kAsrNormalized, "transcription replay");

  auto kind_of = [&](const std::string& user) -> std::string {
    try {
      replay.chat_complete(testing::fixture_prompt(user), testing::fixture_decode());
      return "none";
    } catch (const services::ServiceError& e) {
      return e.kind();
    }
  };
  o.require(kind_of(testing::kChatTimeoutPrompt) == "Timeout", "timeout fixture");
  o.require(kind_of(testing::kChatRateLimitedPrompt) == "RateLimited", "429 fixture");
  o.require(kind_of(testing::kChatMalformedPrompt) == "ProtocolError", "malformed fixture");

  // 429 with backoff, then success, inside a batch that also meets a timeout,
  // a malformed payload and a server error. The batch completes.
  auto script = std::make_shared<services::ScriptedTransport>();
  auto ok = [](const char* content) {
    json body{{"choices", {{{"message", {{"content", content}}}, {"finish_reason", "stop"}}}}};
    return services::HttpResponse{200, body.dump(), "application/json"};
  };
  script->push(ok("FINAL: AD"));
  script->push({429, "{}", "application/json"});
  script->push(ok("FINAL: HC"));
  script->push_failure(services::TransportFailure::Reason::Timeout);
  script->push_failure(services::TransportFailure::Reason::Timeout);
  script->push({200, R"({"choices":[]})", "application/json"});
  script->push({503, "", "text/plain"});
  script->push({503, "", "text/plain"});
  script->push(ok("inconclusive"));
  auto batch_endpoint = endpoint;
  batch_endpoint.retry.max_attempts = 2;
  sleeps.clear();
  services::LiveChatModel model(std::make_shared<services::ServiceClient>(batch_endpoint, script, hooks));
  evaluate::EvalConfig cfg;
  cfg.n_rollouts = 2;
  cfg.jobs = 1;
  std::vector<evaluate::EvalItem> items;
  for (int i = 0; i < 3; ++i)
    items.push_back({"s" + std::to_string(i), i == 1 ? Label::HC : Label::AD, "the boy takes a cookie", {}});
  const auto cls = prompts::load_template(
      prompts::template_path(testing::data_dir() / "templates", prompts::TemplateId::Cls, Language::EN),
      prompts::TemplateId::Cls, Language::EN);
  std::vector<evaluate::Prediction> preds;
  try {
    preds = evaluate::run_rollouts(items, model, cls, cfg);
  } catch (const std::exception& e) {
    o.require(false, std::string("batch aborted: ") + e.what());
    return o;
  }
  std::map<std::string, int> errors;
  int parsed = 0, unparsed = 0;
  for (const auto& p : preds) {
    if (p.error) ++errors[p.error_kind];
    else if (p.parsed) ++parsed;
    else ++unparsed;
  }
  o.require(preds.size() == 6, fmt::format("{} predictions", preds.size()));
  o.require(parsed == 2 && unparsed == 1, fmt::format("{} parsed, {} unparsed", parsed, unparsed));
  o.require(errors["Timeout"] == 1 && errors["ProtocolError"] == 1 && errors["ServerError"] == 1,
            "error kinds recorded");
  o.require(sleeps.size() == 3 && sleeps[0].count() >= 8, fmt::format("{} backoff sleeps", sleeps.size()));
  const auto report = evaluate::compute_metrics(preds, items, 2);
  o.require(report.error_count == 3, fmt::format("error_count {}", report.error_count));
  if (o.pass)
    o.detail = "chat/TTS/ASR replay byte-stable; timeout, 429 backoff, malformed and 5xx recorded without aborting";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  const auto root = testing::scratch_dir(only ? fmt::format("acceptance-{}", only) : "acceptance");
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence", metric_oracle},
      {2, "metric worked examples", worked_examples},
      {3, "sampler fidelity", sampler_fidelity},
      {4, "rubric golden corpus", rubric_golden},
      {5, "stub-closure end-to-end", [&] { return stub_closure(root); }},
      {6, "phenotype separation", [&] { return phenotype_separation(root); }},
      {7, "mixing arithmetic", [&] { return mixing(root); }},
      {8, "CoT dataset invariant", [&] { return cot_invariant(root); }},
      {9, "preprocessing contract", preprocessing},
      {10, "wire conformance", wire_conformance},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (only && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
