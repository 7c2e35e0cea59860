#include "syncog/evaluate.hpp"

#include "syncog/parallel.hpp"
#include "syncog/seed.hpp"
#include "syncog/text.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace syncog::evaluate {

using nlohmann::json;

// ---- label parsing ----------------------------------------------------------------------

ParseRules ParseRules::defaults() {
  ParseRules r;
  r.synonyms[Label::AD] = {"ad",       "alzheimer's disease", "alzheimer’s disease", "alzheimers disease",
                           "alzheimer's", "alzheimer",        "dementia",            "阿尔茨海默病",
                           "阿尔茨海默", "痴呆"};
  r.synonyms[Label::HC] = {"hc",      "healthy control", "healthy", "normal", "cognitively normal",
                           "cognitively healthy", "no impairment", "健康对照", "健康", "正常"};
  r.synonyms[Label::MCI] = {"mci", "mild cognitive impairment", "轻度认知障碍", "轻度认知损害"};
  r.synonyms[Label::NonAD] = {"nonad",       "non-ad",      "non ad",           "not ad",
                              "no dementia", "no alzheimer's disease", "非ad", "非阿尔茨海默病"};
  return r;
}

namespace {

bool ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

std::optional<Label> map_to_scheme(Label l, LabelScheme scheme) {
  if (scheme == LabelScheme::Binary) return l == Label::AD ? Label::AD : Label::NonAD;
  if (l == Label::NonAD) return std::nullopt;
  return l;
}

struct Hit {
  std::size_t pos;
  std::size_t len;
  Label label;
};

// Whole-word occurrences of every synonym; a hit inside a longer hit is dropped.
std::vector<Hit> find_hits(const std::string& lower, const ParseRules& rules) {
  std::vector<Hit> hits;
  for (const auto& [label, words] : rules.synonyms) {
    for (const auto& w : words) {
      const auto needle = text::to_lower_ascii(w);
      if (needle.empty()) continue;
      for (auto pos = lower.find(needle); pos != std::string::npos; pos = lower.find(needle, pos + 1)) {
        const std::size_t end = pos + needle.size();
        const bool left_ok = !ascii_alnum(needle.front()) || pos == 0 || !ascii_alnum(lower[pos - 1]);
        const bool right_ok = !ascii_alnum(needle.back()) || end >= lower.size() || !ascii_alnum(lower[end]);
        if (left_ok && right_ok) hits.push_back({pos, needle.size(), label});
      }
    }
  }
  std::vector<Hit> kept;
  for (const auto& h : hits) {
    const bool inside = std::any_of(hits.begin(), hits.end(), [&](const Hit& o) {
      return o.len > h.len && o.pos <= h.pos && h.pos + h.len <= o.pos + o.len;
    });
    if (!inside) kept.push_back(h);
  }
  std::sort(kept.begin(), kept.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
  return kept;
}

}  // namespace

ParsedLabel parse_label(std::string_view text_in, LabelScheme scheme, const ParseRules& rules) {
  const std::string lower = text::to_lower_ascii(text_in);
  const std::string tag = text::to_lower_ascii(rules.final_tag);

  // Last tag followed by ':' or a full-width colon.
  std::optional<std::size_t> token_start;
  for (auto pos = lower.find(tag); pos != std::string::npos; pos = lower.find(tag, pos + 1)) {
    std::size_t p = pos + tag.size();
    while (p < lower.size() && (lower[p] == ' ' || lower[p] == '*')) ++p;
    if (p < lower.size() && lower[p] == ':') token_start = p + 1;
    else if (lower.compare(p, 3, "\xEF\xBC\x9A") == 0) token_start = p + 3;
  }

  if (token_start) {
    const auto eol = lower.find('\n', *token_start);
    const std::string token = lower.substr(*token_start, eol == std::string::npos ? std::string::npos
                                                                                  : eol - *token_start);
    std::set<Label> found;
    for (const auto& h : find_hits(token, rules))
      if (auto m = map_to_scheme(h.label, scheme)) found.insert(*m);
    if (found.size() == 1) return *found.begin();
    return std::nullopt;
  }

  const auto hits = find_hits(lower, rules);
  for (auto it = hits.rbegin(); it != hits.rend(); ++it)
    if (auto m = map_to_scheme(it->label, scheme)) return m;
  return std::nullopt;
}

// ---- rollouts -------------------------------------------------------------------------------

void EvalConfig::validate() const {
  if (n_rollouts < 1) throw ConfigError("n_rollouts must be >= 1");
  decode.validate();
}

std::vector<EvalItem> eval_items(const corpus::CohortManifest& manifest, const corpus::DatasetSplit& split) {
  std::vector<EvalItem> items;
  for (const auto& e : split.entries) {
    const auto* r = manifest.find(e.sample_id);
    if (!r) throw Error("UnresolvedSample", fmt::format("sample {} is not in manifest {}", e.sample_id,
                                                        manifest.cohort_id));
    items.push_back({e.sample_id, e.label, r->transcript, r->audio});
  }
  return items;
}

std::vector<Prediction> run_rollouts(const std::vector<EvalItem>& items, services::ChatModel& model,
                                     const prompts::PromptTemplate& cls_template, const EvalConfig& cfg) {
  cfg.validate();
  const bool en = cfg.language == Language::EN;
  std::vector<prompts::RenderedPrompt> rendered;
  rendered.reserve(items.size());
  for (const auto& item : items) {
    std::map<std::string, std::string> b;
    b["transcript"] = item.transcript;
    const bool attach = cfg.attach_audio && !item.audio.path.empty();
    b["audio_note"] = attach ? (en ? "The audio recording of this sample is attached." : "本样本的录音已附上。") : "";
    b["label_options"] = prompts::label_options(cfg.scheme, cfg.language);
    b["language"] = en ? "English" : "中文";
    for (const auto& [k, v] : b)
      if (k != "label_options" && prompts::contains_label_token(v, cfg.scheme))
        throw Error("LabelLeak", fmt::format("binding '{}' of sample {} contains a label token", k, item.sample_id));
    auto p = prompts::render(cls_template, b);
    if (attach) p.attachments.push_back({item.audio.path, item.audio.checksum});
    rendered.push_back(std::move(p));
  }

  const auto n = static_cast<std::size_t>(cfg.n_rollouts);
  std::vector<Prediction> out(items.size() * n);
  parallel_for(out.size(), cfg.jobs, [&](std::size_t k) {
    const std::size_t i = k / n;
    const int rollout = static_cast<int>(k % n);
    Prediction pred;
    pred.sample_id = items[i].sample_id;
    pred.rollout = rollout;
    services::DecodeParams d = cfg.decode;
    d.request_seed = corpus::derive_seed(cfg.master_seed, "rollout/" + items[i].sample_id,
                                         static_cast<std::uint64_t>(rollout));
    try {
      pred.raw_text = model.complete(rendered[i], d).text;
      pred.parsed = parse_label(pred.raw_text, cfg.scheme, cfg.rules);
    } catch (const services::ServiceError& e) {
      if (e.service_kind() == services::ServiceErrorKind::Unreachable) throw;
      pred.error = true;
      pred.error_kind = e.kind();
    }
    out[k] = std::move(pred);
  });
  return out;
}

// ---- metrics ----------------------------------------------------------------------------------

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

RolloutMetrics rollout_metrics(const std::vector<ParsedLabel>& pred, const std::vector<Label>& truths) {
  if (pred.size() != truths.size())
    throw Error("LengthMismatch", fmt::format("{} predictions for {} truths", pred.size(), truths.size()));
  RolloutMetrics r;
  std::set<Label> classes(truths.begin(), truths.end());
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i]) classes.insert(*pred[i]);
    else ++r.unparseable;
    if (pred[i] == truths[i]) ++correct;
    ++r.confusion[truths[i]][pred[i]];
  }
  r.accuracy = truths.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truths.size());
  double sum_f1 = 0.0;
  for (Label c : classes) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == c;
      const bool t = truths[i] == c;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    ClassScores s;
    s.support = tp + fn;
    s.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    r.per_class[c] = s;
    sum_f1 += s.f1;
  }
  r.macro_f1 = classes.empty() ? 0.0 : sum_f1 / static_cast<double>(classes.size());
  return r;
}

MetricsReport compute_metrics(const std::vector<std::vector<ParsedLabel>>& predictions,
                              const std::vector<Label>& truths) {
  if (predictions.empty()) throw Error("LengthMismatch", "no rollouts");
  MetricsReport rep;
  rep.n_samples = static_cast<int>(truths.size());
  rep.n_rollouts = static_cast<int>(predictions.size());
  std::vector<double> f1s, accs;
  for (const auto& row : predictions) {
    rep.rollouts.push_back(rollout_metrics(row, truths));
    f1s.push_back(rep.rollouts.back().macro_f1);
    accs.push_back(rep.rollouts.back().accuracy);
    rep.unparseable_count += rep.rollouts.back().unparseable;
  }
  rep.macro_f1 = mean_sd(f1s);
  rep.avs = mean_sd(accs);
  rep.bon = *std::max_element(accs.begin(), accs.end());
  return rep;
}

MetricsReport compute_metrics(const std::vector<Prediction>& predictions, const std::vector<EvalItem>& items,
                              int n_rollouts) {
  if (n_rollouts < 1) throw ConfigError("n_rollouts must be >= 1");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < items.size(); ++i) index[items[i].sample_id] = i;
  std::vector<std::vector<ParsedLabel>> matrix(static_cast<std::size_t>(n_rollouts),
                                               std::vector<ParsedLabel>(items.size()));
  std::vector<std::vector<bool>> seen(matrix.size(), std::vector<bool>(items.size(), false));
  int errors = 0;
  for (const auto& p : predictions) {
    const auto it = index.find(p.sample_id);
    if (it == index.end() || p.rollout < 0 || p.rollout >= n_rollouts)
      throw Error("LengthMismatch", fmt::format("prediction ({}, {}) matches no sample/rollout", p.sample_id,
                                                p.rollout));
    matrix[static_cast<std::size_t>(p.rollout)][it->second] = p.parsed;
    seen[static_cast<std::size_t>(p.rollout)][it->second] = true;
    errors += p.error;
  }
  for (const auto& row : seen)
    if (std::find(row.begin(), row.end(), false) != row.end())
      throw Error("LengthMismatch", "predictions do not cover every (sample, rollout)");
  std::vector<Label> truths;
  for (const auto& item : items) truths.push_back(item.truth);
  auto rep = compute_metrics(matrix, truths);
  rep.error_count = errors;
  return rep;
}

// ---- stratified ---------------------------------------------------------------------------------

std::string_view to_string(Transition t) {
  switch (t) {
    case Transition::MCI_vs_HC: return "MCI_vs_HC";
    case Transition::AD_vs_HC: return "AD_vs_HC";
    case Transition::Impaired_vs_HC: return "Impaired_vs_HC";
  }
  return "MCI_vs_HC";
}

Transition parse_transition(std::string_view s) {
  if (s == "MCI_vs_HC") return Transition::MCI_vs_HC;
  if (s == "AD_vs_HC") return Transition::AD_vs_HC;
  if (s == "Impaired_vs_HC") return Transition::Impaired_vs_HC;
  throw ConfigError(fmt::format("unknown transition '{}'", s));
}

StratifiedReport stratify(const std::vector<std::vector<ParsedLabel>>& predictions, const std::vector<Label>& truths,
                          Transition transition) {
  auto positive = [&](Label l) {
    switch (transition) {
      case Transition::MCI_vs_HC: return l == Label::MCI;
      case Transition::AD_vs_HC: return l == Label::AD;
      case Transition::Impaired_vs_HC: return l == Label::MCI || l == Label::AD;
    }
    return false;
  };
  std::vector<std::size_t> keep;
  int n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] == Label::NonAD) throw ConfigError("stratify needs ternary labels");
    if (positive(truths[i])) {
      keep.push_back(i);
      ++n_pos;
    } else if (truths[i] == Label::HC) {
      keep.push_back(i);
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0)
    throw Error("EmptyStratum", fmt::format("{}: {} impaired and {} HC samples", to_string(transition), n_pos, n_neg));

  std::vector<double> sens, spec, f1s;
  for (const auto& row : predictions) {
    if (row.size() != truths.size()) throw Error("LengthMismatch", "rollout length differs from truths");
    int tp = 0, tn = 0, pred_pos = 0;
    for (std::size_t i : keep) {
      const bool p = row[i] && positive(*row[i]);
      const bool t = positive(truths[i]);
      pred_pos += p;
      tp += p && t;
      tn += !t && row[i] == Label::HC;
    }
    const double s = static_cast<double>(tp) / n_pos;
    const double precision = pred_pos > 0 ? static_cast<double>(tp) / pred_pos : 0.0;
    sens.push_back(s);
    spec.push_back(static_cast<double>(tn) / n_neg);
    f1s.push_back(precision + s > 0.0 ? 2.0 * precision * s / (precision + s) : 0.0);
  }
  StratifiedReport r;
  r.transition = transition;
  r.n_samples = static_cast<int>(keep.size());
  r.sensitivity = mean_sd(sens);
  r.specificity = mean_sd(spec);
  r.f1 = mean_sd(f1s);
  return r;
}

// ---- group comparison ------------------------------------------------------------------------------

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MannWhitney mann_whitney(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw Error("DegenerateGroup", "Mann-Whitney needs two nonempty groups");
  std::vector<std::pair<double, int>> all;
  for (double v : x) all.emplace_back(v, 0);
  for (double v : y) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  const double n1 = static_cast<double>(x.size());
  const double n2 = static_cast<double>(y.size());
  const double n = n1 + n2;
  double rank_sum_x = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) rank_sum_x += avg_rank;
    i = j;
  }
  MannWhitney r;
  r.u = rank_sum_x - n1 * (n1 + 1.0) / 2.0;
  const double variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(variance > 0.0)) throw Error("DegenerateGroup", "all values are identical in both groups");
  r.z = (r.u - n1 * n2 / 2.0) / std::sqrt(variance);
  r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

std::vector<GroupComparison> group_compare(const std::map<Label, std::vector<rubric::FeatureProfile>>& profiles,
                                           std::string_view feature) {
  std::vector<std::pair<Label, std::vector<double>>> groups;
  for (const auto& [label, ps] : profiles) {
    if (ps.empty()) continue;
    std::vector<double> v;
    for (const auto& p : ps) v.push_back(rubric::feature_value(p, feature));
    groups.emplace_back(label, std::move(v));
  }
  if (groups.size() < 2) throw ConfigError("group_compare needs at least two nonempty groups");
  std::vector<GroupComparison> out;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      GroupComparison g;
      g.a = groups[a].first;
      g.b = groups[b].first;
      g.feature = std::string(feature);
      g.n_a = groups[a].second.size();
      g.n_b = groups[b].second.size();
      g.median_a = median(groups[a].second);
      g.median_b = median(groups[b].second);
      g.test = mann_whitney(groups[a].second, groups[b].second);
      out.push_back(std::move(g));
    }
  }
  return out;
}

// ---- reports -----------------------------------------------------------------------------------------

namespace {

std::string parsed_name(const ParsedLabel& p) {
  return p ? std::string(syncog::to_string(*p)) : std::string("Unparseable");
}

std::set<Label> all_classes(const MetricsReport& r) {
  std::set<Label> s;
  for (const auto& ro : r.rollouts)
    for (const auto& [c, _] : ro.per_class) s.insert(c);
  return s;
}

}  // namespace

json to_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd}}; }

json to_json(const MetricsReport& r) {
  json rollouts = json::array();
  for (std::size_t n = 0; n < r.rollouts.size(); ++n) {
    const auto& ro = r.rollouts[n];
    json per_class = json::object();
    for (const auto& [c, s] : ro.per_class)
      per_class[std::string(syncog::to_string(c))] = {
          {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
    json confusion = json::object();
    for (const auto& [t, row] : ro.confusion)
      for (const auto& [p, count] : row) confusion[std::string(syncog::to_string(t))][parsed_name(p)] = count;
    rollouts.push_back({{"rollout", n},
                        {"accuracy", ro.accuracy},
                        {"macro_f1", ro.macro_f1},
                        {"unparseable", ro.unparseable},
                        {"per_class", per_class},
                        {"confusion", confusion}});
  }
  return {{"n_samples", r.n_samples},
          {"n_rollouts", r.n_rollouts},
          {"macro_f1", to_json(r.macro_f1)},
          {"avs", to_json(r.avs)},
          {"bon", r.bon},
          {"sd_over", "rollouts"},
          {"unparseable_count", r.unparseable_count},
          {"error_count", r.error_count},
          {"rollouts", rollouts}};
}

json to_json(const StratifiedReport& r) {
  return {{"transition", to_string(r.transition)},
          {"n_samples", r.n_samples},
          {"sensitivity", to_json(r.sensitivity)},
          {"specificity", to_json(r.specificity)},
          {"f1", to_json(r.f1)}};
}

json to_json(const Prediction& p) {
  json j{{"sample_id", p.sample_id}, {"rollout", p.rollout}, {"raw_text", p.raw_text},
         {"parsed", parsed_name(p.parsed)}};
  if (p.error) j["error"] = p.error_kind;
  return j;
}

Prediction prediction_from_json(const json& j) {
  Prediction p;
  p.sample_id = j.at("sample_id").get<std::string>();
  p.rollout = j.at("rollout").get<int>();
  p.raw_text = j.value("raw_text", std::string());
  const auto parsed = j.at("parsed").get<std::string>();
  if (parsed != "Unparseable") p.parsed = syncog::parse_label(parsed);
  if (j.contains("error")) {
    p.error = true;
    p.error_kind = j.at("error").get<std::string>();
  }
  return p;
}

std::string rollouts_csv(const MetricsReport& r) {
  const auto classes = all_classes(r);
  std::string out = "rollout,accuracy,macro_f1,unparseable";
  for (Label c : classes) {
    const auto name = syncog::to_string(c);
    out += fmt::format(",{0}_precision,{0}_recall,{0}_f1", name);
  }
  out += "\n";
  for (std::size_t n = 0; n < r.rollouts.size(); ++n) {
    const auto& ro = r.rollouts[n];
    out += fmt::format("{},{:.6f},{:.6f},{}", n, ro.accuracy, ro.macro_f1, ro.unparseable);
    for (Label c : classes) {
      const auto it = ro.per_class.find(c);
      const ClassScores s = it == ro.per_class.end() ? ClassScores{} : it->second;
      out += fmt::format(",{:.6f},{:.6f},{:.6f}", s.precision, s.recall, s.f1);
    }
    out += "\n";
  }
  return out;
}

std::string confusion_csv(const MetricsReport& r) {
  std::string out = "rollout,truth,prediction,count\n";
  for (std::size_t n = 0; n < r.rollouts.size(); ++n)
    for (const auto& [t, row] : r.rollouts[n].confusion)
      for (const auto& [p, count] : row)
        out += fmt::format("{},{},{},{}\n", n, syncog::to_string(t), parsed_name(p), count);
  return out;
}

void write_predictions(const std::vector<Prediction>& predictions, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : predictions) out += to_json(p).dump() + "\n";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  text::write_file(path.string(), out);
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  std::istringstream in(text::read_file(path.string()));
  std::string line;
  while (std::getline(in, line))
    if (!text::trim(line).empty()) out.push_back(prediction_from_json(json::parse(line)));
  return out;
}

}  // namespace syncog::evaluate
