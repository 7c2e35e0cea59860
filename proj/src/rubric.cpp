#include "syncog/rubric.hpp"

#include "syncog/text.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

namespace syncog::rubric {

using nlohmann::json;

WordList::WordList(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_)
    for (const auto& f : e.forms) max_len_ = std::max(max_len_, f.size());
}

std::vector<WordList::Match> WordList::match(const std::vector<std::string>& tokens,
                                             std::size_t begin, std::size_t end) const {
  std::vector<Match> out;
  std::size_t i = begin;
  while (i < end) {
    std::size_t best_len = 0;
    std::size_t best_entry = 0;
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      for (const auto& form : entries_[e].forms) {
        if (form.size() <= best_len || i + form.size() > end) continue;
        if (std::equal(form.begin(), form.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
          best_len = form.size();
          best_entry = e;
        }
      }
    }
    if (best_len > 0) {
      out.push_back({i, best_len, best_entry});
      i += best_len;
    } else {
      ++i;
    }
  }
  return out;
}

bool WordList::contains_token(std::string_view token) const {
  for (const auto& e : entries_)
    for (const auto& f : e.forms)
      if (f.size() == 1 && f.front() == token) return true;
  return false;
}

std::vector<LexiconEntry> parse_lexicon(std::string_view body, Language language) {
  std::vector<LexiconEntry> out;
  for (auto line : text::split(body, '\n')) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = text::trim(line);
    if (line.empty()) continue;
    LexiconEntry entry;
    for (const auto& variant_raw : text::split(line, '|')) {
      const auto variant = text::trim(variant_raw);
      if (variant.empty()) continue;
      std::vector<std::string> form;
      if (language == Language::EN) {
        form = text::split_whitespace(text::to_lower_ascii(variant));
      } else {
        form = {variant};
      }
      if (entry.canonical.empty()) entry.canonical = text::join(form, " ");
      entry.forms.push_back(std::move(form));
    }
    if (!entry.forms.empty()) out.push_back(std::move(entry));
  }
  return out;
}

Lexicons Lexicons::load(const std::filesystem::path& dir, Language language) {
  const auto base = dir / std::string(to_string(language));
  auto read = [&](const char* name, bool required) {
    const auto path = base / (std::string(name) + ".txt");
    if (!std::filesystem::exists(path)) {
      if (required) throw ConfigError(fmt::format("missing lexicon file {}", path.string()));
      return WordList{};
    }
    auto entries = parse_lexicon(text::read_file(path.string()), language);
    if (required && entries.empty())
      throw ConfigError(fmt::format("lexicon {} is empty", path.string()));
    return WordList(std::move(entries));
  };
  Lexicons lex;
  lex.language = language;
  lex.fillers = read("fillers", true);
  lex.vague_terms = read("vague_terms", true);
  lex.spatial_terms = read("spatial_terms", true);
  lex.key_nouns = read("key_nouns", true);
  lex.subordinators = read("subordinators", true);
  lex.conjunctions = read("conjunctions", true);
  lex.repair_markers = read("repair_markers", false);
  return lex;
}

std::vector<std::string> Lexicons::all_surface_forms() const {
  std::vector<std::string> out;
  for (const WordList* wl : {&fillers, &vague_terms, &spatial_terms, &key_nouns, &subordinators,
                             &conjunctions, &repair_markers})
    for (const auto& e : wl->entries())
      for (const auto& f : e.forms) out.push_back(text::join(f, " "));
  return out;
}

namespace {

bool is_sentence_end(char32_t c) {
  return c == '.' || c == '!' || c == '?' || c == '\n' || c == U'。' || c == U'！' ||
         c == U'？';
}

bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }

bool is_word_char(char32_t c) { return !text::is_space(c) && !text::is_punct(c); }

class TokenizerState {
 public:
  explicit TokenizerState(Tokenized& out) : out_(out) {}

  void push_char(char32_t c) {
    if (c >= 'A' && c <= 'Z') c = c - 'A' + 'a';
    text::append_utf8(word_, c);
  }
  bool has_word() const { return !word_.empty(); }
  void flush() {
    if (!word_.empty()) out_.tokens.push_back(std::move(word_));
    word_.clear();
  }
  void push_token(std::string tok) {
    flush();
    out_.tokens.push_back(std::move(tok));
  }
  void close_sentence() {
    flush();
    if (out_.tokens.size() > sentence_start_)
      out_.sentences.push_back({sentence_start_, out_.tokens.size()});
    sentence_start_ = out_.tokens.size();
  }

 private:
  Tokenized& out_;
  std::string word_;
  std::size_t sentence_start_ = 0;
};

}  // namespace

Tokenized tokenize(std::string_view input, Language language, const Lexicons* lexicons) {
  Tokenized out;
  const auto cps = text::decode_utf8(input);

  // Dictionary for CJK segmentation, keyed by code-point sequence.
  std::unordered_set<std::string> dict;
  std::size_t max_dict_len = 0;
  if (lexicons && language == Language::ZH) {
    for (const auto& form : lexicons->all_surface_forms()) {
      const auto n = text::decode_utf8(form).size();
      dict.insert(form);
      max_dict_len = std::max(max_dict_len, n);
    }
  }

  TokenizerState st(out);
  const std::size_t n = cps.size();
  auto at = [&](std::size_t i) -> char32_t { return i < n ? cps[i] : 0; };

  std::size_t i = 0;
  while (i < n) {
    const char32_t c = cps[i];
    if (text::is_cjk(c)) {
      st.flush();
      std::size_t len = 1;
      for (std::size_t k = std::min(max_dict_len, n - i); k > 1; --k) {
        std::string cand;
        bool all_cjk = true;
        for (std::size_t m = 0; m < k; ++m) {
          all_cjk = all_cjk && text::is_cjk(cps[i + m]);
          text::append_utf8(cand, cps[i + m]);
        }
        if (all_cjk && dict.count(cand)) {
          len = k;
          break;
        }
      }
      std::string tok;
      for (std::size_t m = 0; m < len; ++m) text::append_utf8(tok, cps[i + m]);
      st.push_token(std::move(tok));
      i += len;
      continue;
    }
    if (is_word_char(c)) {
      st.push_char(c);
      ++i;
      continue;
    }
    // Joiners inside a word: don't, cookie-jar, 3.5
    const bool joiner = c == '\'' || c == U'’' || c == '-';
    if (joiner && st.has_word() && is_word_char(at(i + 1)) && !text::is_cjk(at(i + 1))) {
      st.push_char(c == U'’' ? U'\'' : c);
      ++i;
      continue;
    }
    if (c == '.' && st.has_word() && i > 0 && is_digit(cps[i - 1]) && is_digit(at(i + 1))) {
      st.push_char(c);
      ++i;
      continue;
    }
    if (c == '.' && at(i + 1) == '.') {
      st.flush();
      while (at(i) == '.') ++i;
      ++out.ellipsis_count;
      continue;
    }
    if (c == U'…') {
      st.flush();
      while (at(i) == U'…' || at(i) == '.') ++i;
      ++out.ellipsis_count;
      continue;
    }
    if (is_sentence_end(c)) {
      st.close_sentence();
      ++i;
      continue;
    }
    st.flush();
    ++i;
  }
  st.close_sentence();
  return out;
}

FeatureProfile analyze(std::string_view text_in, const Lexicons& lex) {
  const auto tk = tokenize(text_in, lex.language, &lex);
  FeatureProfile p;
  p.total_words = static_cast<int>(tk.tokens.size());
  p.sentence_count = static_cast<int>(tk.sentences.size());
  p.mean_sentence_len = static_cast<double>(p.total_words) / std::max(p.sentence_count, 1);
  if (!tk.sentences.empty()) {
    double ss = 0.0;
    for (const auto& s : tk.sentences) {
      const double d = static_cast<double>(s.size()) - p.mean_sentence_len;
      ss += d * d;
    }
    p.sentence_len_sd = std::sqrt(ss / static_cast<double>(tk.sentences.size()));
  }

  std::set<std::size_t> nouns_seen;
  for (const auto& s : tk.sentences) {
    p.filler_count += static_cast<int>(lex.fillers.match(tk.tokens, s.begin, s.end).size());
    p.vague_count += static_cast<int>(lex.vague_terms.match(tk.tokens, s.begin, s.end).size());
    p.spatial_count += static_cast<int>(lex.spatial_terms.match(tk.tokens, s.begin, s.end).size());
    p.conjunction_count += static_cast<int>(lex.conjunctions.match(tk.tokens, s.begin, s.end).size());
    p.subordinate_marker_count +=
        static_cast<int>(lex.subordinators.match(tk.tokens, s.begin, s.end).size());
    p.repair_count += static_cast<int>(lex.repair_markers.match(tk.tokens, s.begin, s.end).size());
    for (const auto& m : lex.key_nouns.match(tk.tokens, s.begin, s.end)) nouns_seen.insert(m.entry);
    for (std::size_t t = s.begin + 1; t < s.end; ++t) {
      // Repeated fillers are already counted as fillers.
      if (tk.tokens[t] == tk.tokens[t - 1] && !lex.fillers.contains_token(tk.tokens[t]))
        ++p.repetition_count;
    }
  }
  p.repair_count += static_cast<int>(tk.ellipsis_count);
  p.key_noun_count = static_cast<int>(nouns_seen.size());
  p.disfluency_events = p.filler_count + p.repetition_count + p.repair_count;
  return p;
}

int score_narrative_length(int total_words) {
  if (total_words <= 100) return 1;
  if (total_words <= 135) return 2;
  return 3;
}

int score_syntactic_complexity(const FeatureProfile& p) {
  const int needed = (p.sentence_count + 2) / 3;  // ceil(sentence_count / 3)
  if (p.subordinate_marker_count >= needed && p.sentence_len_sd >= 3.0) return 3;
  if (p.subordinate_marker_count == 0 && p.mean_sentence_len <= 8.0) return 1;
  return 2;
}

int score_spatial(int spatial_count) {
  if (spatial_count <= 1) return 1;
  if (spatial_count == 2) return 2;
  return 3;
}

int score_fluency(int disfluency_events) {
  if (disfluency_events >= 4) return 1;
  if (disfluency_events >= 2) return 2;
  return 3;
}

int score_clarity(int vague_count, int key_noun_count) {
  const int from_vague = vague_count >= 4 ? 1 : (vague_count >= 2 ? 2 : 3);
  const int from_nouns = key_noun_count <= 1 ? 1 : (key_noun_count == 2 ? 2 : 3);
  return std::min(from_vague, from_nouns);
}

StyleScores score(const FeatureProfile& p) {
  StyleScores s;
  s.set(StyleDimension::NarrativeLength, score_narrative_length(p.total_words));
  s.set(StyleDimension::SyntacticComplexity, score_syntactic_complexity(p));
  s.set(StyleDimension::SpatialReference, score_spatial(p.spatial_count));
  s.set(StyleDimension::Fluency, score_fluency(p.disfluency_events));
  s.set(StyleDimension::Clarity, score_clarity(p.vague_count, p.key_noun_count));
  return s;
}

void ValidationPolicy::validate() const {
  if (min_matching_dims < 0 || min_matching_dims > 5)
    throw ConfigError("min_matching_dims must lie in 0..5");
  if (static_cast<std::size_t>(min_matching_dims) > dims_considered.size())
    throw ConfigError("min_matching_dims exceeds the number of considered dimensions");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

ValidationResult validate(const StyleScores& scores, const StyleVector& target,
                          const ValidationPolicy& policy) {
  ValidationResult r;
  for (auto d : kStyleDimensions) {
    r.per_dim_delta[index_of(d)] = target[d] - scores[d];
    if (policy.dims_considered.count(d) && scores[d] == target[d]) ++r.matched_dims;
  }
  r.pass = r.matched_dims >= policy.min_matching_dims;
  return r;
}

json to_json(const FeatureProfile& p) {
  return {{"total_words", p.total_words},
          {"sentence_count", p.sentence_count},
          {"mean_sentence_len", p.mean_sentence_len},
          {"sentence_len_sd", p.sentence_len_sd},
          {"filler_count", p.filler_count},
          {"vague_count", p.vague_count},
          {"spatial_count", p.spatial_count},
          {"key_noun_count", p.key_noun_count},
          {"conjunction_count", p.conjunction_count},
          {"subordinate_marker_count", p.subordinate_marker_count},
          {"repetition_count", p.repetition_count},
          {"repair_count", p.repair_count},
          {"disfluency_events", p.disfluency_events}};
}

FeatureProfile profile_from_json(const json& j) {
  FeatureProfile p;
  p.total_words = j.at("total_words").get<int>();
  p.sentence_count = j.at("sentence_count").get<int>();
  p.mean_sentence_len = j.at("mean_sentence_len").get<double>();
  p.sentence_len_sd = j.value("sentence_len_sd", 0.0);
  p.filler_count = j.at("filler_count").get<int>();
  p.vague_count = j.at("vague_count").get<int>();
  p.spatial_count = j.at("spatial_count").get<int>();
  p.key_noun_count = j.at("key_noun_count").get<int>();
  p.conjunction_count = j.at("conjunction_count").get<int>();
  p.subordinate_marker_count = j.at("subordinate_marker_count").get<int>();
  p.repetition_count = j.value("repetition_count", 0);
  p.repair_count = j.value("repair_count", 0);
  p.disfluency_events = j.at("disfluency_events").get<int>();
  return p;
}

double feature_value(const FeatureProfile& p, std::string_view feature) {
  const double words = static_cast<double>(p.total_words);
  auto freq = [&](int count) { return p.total_words > 0 ? count / words : 0.0; };
  if (feature == "total_words") return words;
  if (feature == "filler_frequency") return freq(p.filler_count);
  if (feature == "spatial_frequency") return freq(p.spatial_count);
  if (feature == "vague_frequency") return freq(p.vague_count);
  if (feature == "mean_sentence_len") return p.mean_sentence_len;
  if (feature == "disfluency_events") return p.disfluency_events;
  if (feature == "key_noun_count") return p.key_noun_count;
  if (feature == "subordinate_marker_count") return p.subordinate_marker_count;
  throw ConfigError(fmt::format("unknown feature '{}'", feature));
}

}  // namespace syncog::rubric
