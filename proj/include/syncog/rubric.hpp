#pragma once

#include "syncog/types.hpp"

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace syncog::rubric {

/// One lexicon entry: a canonical form plus variants, each stored as a token
/// sequence so multi-word phrases ("next to", "in front of") match as a unit.
struct LexiconEntry {
  std::string canonical;
  std::vector<std::vector<std::string>> forms;
};

/// Phrase matching is greedy, longest form first, non-overlapping.
class WordList {
 public:
  WordList() = default;
  explicit WordList(std::vector<LexiconEntry> entries);

  struct Match {
    std::size_t pos;
    std::size_t len;
    std::size_t entry;
  };

  std::vector<Match> match(const std::vector<std::string>& tokens, std::size_t begin,
                           std::size_t end) const;
  std::vector<Match> match(const std::vector<std::string>& tokens) const {
    return match(tokens, 0, tokens.size());
  }

  bool contains_token(std::string_view token) const;
  const std::vector<LexiconEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  std::vector<LexiconEntry> entries_;
  std::size_t max_len_ = 0;
};

struct Lexicons {
  Language language = Language::EN;
  WordList fillers;
  WordList vague_terms;
  WordList spatial_terms;
  WordList key_nouns;
  WordList subordinators;
  WordList conjunctions;
  WordList repair_markers;

  /// Loads `<dir>/<lang>/<list>.txt` for every list. One entry per line,
  /// `#` starts a comment, `|` separates variants of one entry.
  static Lexicons load(const std::filesystem::path& dir, Language language);

  /// Every surface form across lists; used to segment Chinese text.
  std::vector<std::string> all_surface_forms() const;
};

/// Parses one lexicon file body.
std::vector<LexiconEntry> parse_lexicon(std::string_view body, Language language);

struct Sentence {
  std::size_t begin = 0;  // token index range [begin, end)
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

struct Tokenized {
  std::vector<std::string> tokens;
  std::vector<Sentence> sentences;
  std::size_t ellipsis_count = 0;  // runs of "..", "..." or "…"
};

/// EN: whitespace/punctuation split, lowercased; sentences end at . ! ? and
/// line breaks (ellipses and decimal points are not boundaries).
/// ZH: greedy longest match against the lexicon surface forms with a
/// per-character fallback; sentences end at 。！？ and line breaks.
Tokenized tokenize(std::string_view text, Language language, const Lexicons* lexicons = nullptr);

struct FeatureProfile {
  int total_words = 0;
  int sentence_count = 0;
  double mean_sentence_len = 0.0;
  double sentence_len_sd = 0.0;  // population sd of tokens per sentence
  int filler_count = 0;
  int vague_count = 0;
  int spatial_count = 0;
  int key_noun_count = 0;  // distinct key nouns
  int conjunction_count = 0;
  int subordinate_marker_count = 0;
  int repetition_count = 0;
  int repair_count = 0;
  int disfluency_events = 0;

  friend bool operator==(const FeatureProfile&, const FeatureProfile&) = default;
};

FeatureProfile analyze(std::string_view text, const Lexicons& lexicons);

StyleScores score(const FeatureProfile& profile);

// Per-dimension band functions, exposed for boundary tests.
int score_narrative_length(int total_words);
int score_syntactic_complexity(const FeatureProfile& profile);
int score_spatial(int spatial_count);
int score_fluency(int disfluency_events);
int score_clarity(int vague_count, int key_noun_count);

struct ValidationPolicy {
  int min_matching_dims = 5;
  std::set<StyleDimension> dims_considered{kStyleDimensions.begin(), kStyleDimensions.end()};
  int max_retries = 4;

  void validate() const;
};

struct ValidationResult {
  bool pass = false;
  std::array<int, 5> per_dim_delta{};  // target - scored
  int matched_dims = 0;
};

ValidationResult validate(const StyleScores& scores, const StyleVector& target,
                          const ValidationPolicy& policy);

nlohmann::json to_json(const FeatureProfile& p);
FeatureProfile profile_from_json(const nlohmann::json& j);

/// Named numeric features used by group comparisons and figure export.
/// Frequencies are counts per word (0 for empty transcripts).
inline constexpr std::array<std::string_view, 8> kFeatureNames = {
    "total_words",        "filler_frequency",   "spatial_frequency", "vague_frequency",
    "mean_sentence_len",  "disfluency_events",  "key_noun_count",    "subordinate_marker_count"};

double feature_value(const FeatureProfile& p, std::string_view feature);

}  // namespace syncog::rubric
