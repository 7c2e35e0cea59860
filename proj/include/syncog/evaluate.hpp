#pragma once

#include "syncog/corpus.hpp"
#include "syncog/prompts.hpp"
#include "syncog/rubric.hpp"
#include "syncog/services.hpp"
#include "syncog/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace syncog::evaluate {

/// Final-answer tag plus a synonym table per label.
struct ParseRules {
  std::string final_tag = "FINAL";
  std::map<Label, std::vector<std::string>> synonyms;

  /// Canonical codes and common names in English and Chinese.
  static ParseRules defaults();
};

/// `std::nullopt` means Unparseable.
using ParsedLabel = std::optional<Label>;

/// 1. The last `FINAL: <token>` line, matched against codes and synonyms.
/// 2. Without a tag, the last synonym occurrence anywhere in the text.
/// 3. Otherwise Unparseable. In the binary scheme HC and MCI terms map to NonAD.
ParsedLabel parse_label(std::string_view text, LabelScheme scheme, const ParseRules& rules);

struct EvalConfig {
  int n_rollouts = 8;
  services::DecodeParams decode{0.2, 1024, 1.0, std::nullopt};
  LabelScheme scheme = LabelScheme::Ternary;
  Language language = Language::EN;
  ParseRules rules = ParseRules::defaults();
  std::uint64_t master_seed = 42;
  int jobs = 1;
  bool attach_audio = false;
  std::filesystem::path run_dir;

  void validate() const;
};

struct Prediction {
  std::string sample_id;
  int rollout = 0;
  std::string raw_text;
  ParsedLabel parsed;
  bool error = false;
  std::string error_kind;
};

struct EvalItem {
  std::string sample_id;
  Label truth = Label::AD;
  std::string transcript;
  corpus::AudioRef audio;
};

std::vector<EvalItem> eval_items(const corpus::CohortManifest& manifest, const corpus::DatasetSplit& split);

/// N passes over all items, ordered sample-major. Service failures become
/// Unparseable predictions with the error flag set.
std::vector<Prediction> run_rollouts(const std::vector<EvalItem>& items, services::ChatModel& model,
                                     const prompts::PromptTemplate& cls_template, const EvalConfig& cfg);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample sd over rollouts (0 for a single rollout)
};

MeanSd mean_sd(const std::vector<double>& v);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;
};

struct RolloutMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::map<Label, ClassScores> per_class;
  /// confusion[truth][prediction]; an unparsed prediction is recorded under nullopt.
  std::map<Label, std::map<ParsedLabel, int>> confusion;
  int unparseable = 0;
};

struct MetricsReport {
  int n_samples = 0;
  int n_rollouts = 0;
  MeanSd macro_f1;
  MeanSd avs;
  double bon = 0.0;
  std::vector<RolloutMetrics> rollouts;
  int unparseable_count = 0;
  int error_count = 0;
};

/// `predictions[n][i]` is rollout n's answer for sample i. Classes are those
/// present among the truths and that rollout's parsed predictions; an
/// unparsed answer counts against the true class only.
RolloutMetrics rollout_metrics(const std::vector<ParsedLabel>& predictions, const std::vector<Label>& truths);
MetricsReport compute_metrics(const std::vector<std::vector<ParsedLabel>>& predictions,
                              const std::vector<Label>& truths);
/// Arranges predictions by (rollout, sample) using the items' order.
MetricsReport compute_metrics(const std::vector<Prediction>& predictions, const std::vector<EvalItem>& items,
                              int n_rollouts);

enum class Transition { MCI_vs_HC, AD_vs_HC, Impaired_vs_HC };
std::string_view to_string(Transition t);
Transition parse_transition(std::string_view s);

struct StratifiedReport {
  Transition transition = Transition::MCI_vs_HC;
  int n_samples = 0;
  MeanSd sensitivity;
  MeanSd specificity;
  MeanSd f1;
};

StratifiedReport stratify(const std::vector<std::vector<ParsedLabel>>& predictions, const std::vector<Label>& truths,
                          Transition transition);

struct MannWhitney {
  double u = 0.0;  // U of the first group
  double z = 0.0;
  double p_value = 1.0;  // two-sided, normal approximation with tie correction
};

MannWhitney mann_whitney(const std::vector<double>& x, const std::vector<double>& y);

struct GroupComparison {
  Label a = Label::AD;
  Label b = Label::AD;
  std::string feature;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double median_a = 0.0;
  double median_b = 0.0;
  MannWhitney test;
};

/// Mann-Whitney U for every label pair on one feature.
std::vector<GroupComparison> group_compare(const std::map<Label, std::vector<rubric::FeatureProfile>>& profiles,
                                           std::string_view feature);

double median(std::vector<double> v);

nlohmann::json to_json(const MeanSd& m);
nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const StratifiedReport& r);
nlohmann::json to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);

/// One row per rollout: accuracy, macro-F1, per-class precision/recall/F1.
std::string rollouts_csv(const MetricsReport& r);
/// rollout,truth,prediction,count
std::string confusion_csv(const MetricsReport& r);

void write_predictions(const std::vector<Prediction>& predictions, const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace syncog::evaluate
