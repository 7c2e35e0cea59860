#include "oracles.hpp"
#include "support.hpp"

#include "syncog/evaluate.hpp"
#include "syncog/hash.hpp"
#include "syncog/stub.hpp"

#include <doctest.h>

using namespace syncog;
using namespace syncog::evaluate;

namespace {

const ParseRules& rules() {
  static const ParseRules r = ParseRules::defaults();
  return r;
}

prompts::PromptTemplate cls_template() {
  return prompts::load_template(
      prompts::template_path(testing::data_dir() / "templates", prompts::TemplateId::Cls, Language::EN),
      prompts::TemplateId::Cls, Language::EN);
}

std::vector<EvalItem> items_of(const std::vector<Label>& truths) {
  std::vector<EvalItem> out;
  for (std::size_t i = 0; i < truths.size(); ++i)
    out.push_back({"s" + std::to_string(i), truths[i], "the boy takes cookie number " + std::to_string(i), {}});
  return out;
}

}  // namespace

TEST_CASE("label parsing") {
  CHECK(parse_label("...reasoning... FINAL: AD", LabelScheme::Ternary, rules()) == Label::AD);
  CHECK(parse_label("the subject appears cognitively normal overall", LabelScheme::Ternary, rules()) == Label::HC);
  CHECK(parse_label("inconclusive", LabelScheme::Ternary, rules()) == std::nullopt);
  CHECK(parse_label("FINAL: MCI\nlater FINAL: HC", LabelScheme::Ternary, rules()) == Label::HC);
  CHECK(parse_label("**FINAL:** mci", LabelScheme::Ternary, rules()) == Label::MCI);
  CHECK(parse_label("FINAL：AD", LabelScheme::Ternary, rules()) == Label::AD);
  CHECK(parse_label("FINAL: MCI", LabelScheme::Binary, rules()) == Label::NonAD);
  CHECK(parse_label("FINAL: NonAD", LabelScheme::Ternary, rules()) == std::nullopt);
  CHECK(parse_label("mild cognitive impairment is likely", LabelScheme::Ternary, rules()) == Label::MCI);
  CHECK(parse_label("最终判断：阿尔茨海默病", LabelScheme::Ternary, rules()) == Label::AD);
}

TEST_CASE("worked metric examples") {
  // truths [A,B,B,B], predictions [A,A,B,B]
  const std::vector<Label> truths{Label::AD, Label::NonAD, Label::NonAD, Label::NonAD};
  const std::vector<ParsedLabel> preds{Label::AD, Label::AD, Label::NonAD, Label::NonAD};
  const auto r = rollout_metrics(preds, truths);
  CHECK(r.accuracy == doctest::Approx(0.75));
  CHECK(r.per_class.at(Label::AD).precision == doctest::Approx(0.5));
  CHECK(r.per_class.at(Label::AD).recall == doctest::Approx(1.0));
  CHECK(r.per_class.at(Label::AD).f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class.at(Label::NonAD).precision == doctest::Approx(1.0));
  CHECK(r.per_class.at(Label::NonAD).recall == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class.at(Label::NonAD).f1 == doctest::Approx(0.8));
  CHECK(r.macro_f1 == doctest::Approx(11.0 / 15.0).epsilon(1e-12));

  // Rollout accuracies 10/20, 15/20, 12/20.
  std::vector<Label> t20(20, Label::AD);
  std::vector<std::vector<ParsedLabel>> rollouts;
  for (int correct : {10, 15, 12}) {
    std::vector<ParsedLabel> row(20, Label::NonAD);
    for (int i = 0; i < correct; ++i) row[static_cast<std::size_t>(i)] = Label::AD;
    rollouts.push_back(row);
  }
  const auto m = compute_metrics(rollouts, t20);
  CHECK(m.avs.mean == doctest::Approx(0.6166666666).epsilon(1e-9));
  CHECK(m.bon == doctest::Approx(0.75));
  CHECK(m.n_rollouts == 3);

  const auto perfect = compute_metrics({std::vector<ParsedLabel>(truths.begin(), truths.end())}, truths);
  CHECK(perfect.macro_f1.mean == 1.0);
  CHECK(perfect.avs.mean == 1.0);
  CHECK(perfect.bon == 1.0);
  CHECK(perfect.macro_f1.sd == 0.0);
}

TEST_CASE("unparseable answers count against the true class") {
  const std::vector<Label> truths{Label::AD, Label::HC};
  const auto r = rollout_metrics({std::nullopt, Label::HC}, truths);
  CHECK(r.unparseable == 1);
  CHECK(r.accuracy == doctest::Approx(0.5));
  CHECK(r.per_class.at(Label::AD).recall == 0.0);
  CHECK(r.per_class.at(Label::HC).precision == 1.0);
  CHECK(r.macro_f1 == doctest::Approx(0.5));
  CHECK_THROWS(rollout_metrics({Label::AD}, truths));
}

TEST_CASE("metrics agree with the brute-force oracle") {
  Rng rng(31337);
  for (int trial = 0; trial < 200; ++trial) {
    const bool ternary = rng.index(2) == 1;
    const auto labels = labels_of(ternary ? LabelScheme::Ternary : LabelScheme::Binary);
    const std::size_t m = 1 + rng.index(50);
    const std::size_t n = 1 + rng.index(8);
    std::vector<Label> truths;
    std::vector<int> truth_ids;
    for (std::size_t i = 0; i < m; ++i) {
      const auto k = rng.index(labels.size());
      truths.push_back(labels[k]);
      truth_ids.push_back(static_cast<int>(labels[k]));
    }
    std::vector<std::vector<ParsedLabel>> preds(n);
    std::vector<std::vector<int>> pred_ids(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t i = 0; i < m; ++i) {
        const auto k = rng.index(labels.size() + 1);
        if (k == labels.size()) {
          preds[r].push_back(std::nullopt);
          pred_ids[r].push_back(-1);
        } else {
          preds[r].push_back(labels[k]);
          pred_ids[r].push_back(static_cast<int>(labels[k]));
        }
      }
    const auto got = compute_metrics(preds, truths);
    const auto want = oracle::metrics(pred_ids, truth_ids);
    CHECK(std::abs(got.macro_f1.mean - want.macro_f1) < 1e-9);
    CHECK(std::abs(got.avs.mean - want.avs) < 1e-9);
    CHECK(std::abs(got.bon - want.bon) < 1e-9);
    CHECK(got.bon >= got.avs.mean - 1e-12);
  }
}

TEST_CASE("stratified transitions") {
  {
    const std::vector<Label> truths{Label::MCI, Label::MCI, Label::HC, Label::HC};
    const auto r = stratify({{Label::MCI, Label::HC, Label::HC, Label::MCI}}, truths, Transition::MCI_vs_HC);
    CHECK(r.sensitivity.mean == doctest::Approx(0.5));
    CHECK(r.specificity.mean == doctest::Approx(0.5));
    CHECK(r.f1.mean == doctest::Approx(0.5));
  }
  {
    const std::vector<Label> truths{Label::AD, Label::MCI, Label::HC};
    const auto r = stratify({{Label::MCI, Label::AD, Label::HC}}, truths, Transition::Impaired_vs_HC);
    CHECK(r.sensitivity.mean == doctest::Approx(1.0));
    CHECK(r.specificity.mean == doctest::Approx(1.0));
  }
  {
    const std::vector<Label> truths{Label::AD, Label::HC, Label::MCI};
    const auto r = stratify({{Label::AD, Label::HC, Label::AD}}, truths, Transition::AD_vs_HC);
    CHECK(r.n_samples == 2);
    CHECK(r.sensitivity.mean == 1.0);
    CHECK(r.specificity.mean == 1.0);
  }
  CHECK_THROWS(stratify({{Label::HC}}, {Label::HC}, Transition::MCI_vs_HC));
}

TEST_CASE("Mann-Whitney U") {
  const auto r = mann_whitney({1, 2, 3}, {4, 5, 6});
  CHECK(r.u == 0.0);
  CHECK(r.z < 0.0);
  const auto same = mann_whitney({1, 2, 3}, {1, 2, 3});
  CHECK(same.p_value == doctest::Approx(1.0));
  CHECK(mann_whitney({4, 5, 6}, {1, 2, 3}).u == 9.0);
  CHECK_THROWS(mann_whitney({1, 1}, {1, 1}));
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);

  // Enumerated small case with ties: x = {1, 2, 2}, y = {2, 3}.
  // Pairs where x > y count 1, ties 0.5: U_x = 0 + 0.5 + 0.5 = 1.
  CHECK(mann_whitney({1, 2, 2}, {2, 3}).u == doctest::Approx(1.0));
}

TEST_CASE("rollouts: cardinality, default N, oracle stub") {
  EvalConfig cfg;
  CHECK(cfg.n_rollouts == 8);
  cfg.n_rollouts = 2;
  const auto items = items_of({Label::HC, Label::MCI, Label::AD, Label::AD});
  auto lex = std::make_shared<const rubric::Lexicons>(rubric::Lexicons::load(testing::data_dir() / "lexicons", Language::EN));
  services::StubClassifier model(lex, LabelScheme::Ternary);
  std::map<std::string, Label> truth;
  for (const auto& it : items) truth[sha256_hex(it.transcript)] = it.truth;
  model.set_oracle(truth);
  const auto preds = run_rollouts(items, model, cls_template(), cfg);
  REQUIRE(preds.size() == 8);
  for (const auto& p : preds) {
    const auto it = std::find_if(items.begin(), items.end(), [&](const EvalItem& e) { return e.sample_id == p.sample_id; });
    CHECK(p.parsed == it->truth);
  }
  const auto report = compute_metrics(preds, items, 2);
  CHECK(report.avs.mean == 1.0);

  cfg.jobs = 4;
  const auto again = run_rollouts(items, model, cls_template(), cfg);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(again[i].sample_id == preds[i].sample_id);
    CHECK(again[i].rollout == preds[i].rollout);
    CHECK(again[i].raw_text == preds[i].raw_text);
  }
}

TEST_CASE("rollouts record service failures and abort when unreachable") {
  auto script = std::make_shared<services::ScriptedTransport>();
  script->push({500, "", "text/plain"});
  auto endpoint = testing::fixture_endpoint();
  endpoint.retry.max_attempts = 1;
  services::ClientHooks hooks;
  hooks.sleep = [](std::chrono::milliseconds) {};
  services::LiveChatModel model(std::make_shared<services::ServiceClient>(endpoint, script, hooks));
  EvalConfig cfg;
  cfg.n_rollouts = 1;
  const auto items = items_of({Label::AD, Label::HC});
  try {
    run_rollouts(items, model, cls_template(), cfg);
    FAIL("expected Unreachable");
  } catch (const services::ServiceError& e) {
    CHECK(e.service_kind() == services::ServiceErrorKind::Unreachable);
  }
}

TEST_CASE("group comparison over label pairs") {
  std::map<Label, std::vector<rubric::FeatureProfile>> groups;
  for (int i = 0; i < 6; ++i) {
    rubric::FeatureProfile a, b;
    a.total_words = 80 + i;
    b.total_words = 150 + i;
    groups[Label::AD].push_back(a);
    groups[Label::HC].push_back(b);
  }
  const auto rows = group_compare(groups, "total_words");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].a == Label::AD);
  CHECK(rows[0].b == Label::HC);
  CHECK(rows[0].median_a < rows[0].median_b);
  CHECK(rows[0].test.p_value < 0.01);
}

TEST_CASE("prediction files round trip") {
  const auto dir = testing::scratch_dir("preds");
  std::vector<Prediction> preds{{"a", 0, "FINAL: AD", Label::AD, false, ""},
                                {"a", 1, "", std::nullopt, true, "Timeout"}};
  write_predictions(preds, dir / "p.jsonl");
  const auto back = read_predictions(dir / "p.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].error);
  CHECK(back[1].error_kind == "Timeout");
  CHECK(back[0].parsed == Label::AD);
}
