#include "syncog/stub.hpp"

#include "syncog/hash.hpp"
#include "syncog/text.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace syncog::services {

namespace {

struct Bank {
  bool spaced = true;
  std::string filler_sep;
  std::string sentence_end;
  std::vector<std::string> fillers;
  std::vector<std::string> vague;
  std::vector<std::string> nouns;
  std::vector<std::string> spatial;
  std::vector<std::string> subordinate;
  std::vector<std::string> neutral;
  std::vector<std::string> pads;  // one token each
};

const Bank& bank_for(Language language) {
  static const Bank en{
      true,
      ",",
      ".",
      {"um", "uh", "er", "hmm"},
      {"something", "some stuff", "that thing", "someone there"},
      {"the boy", "the girl", "the mother", "the stool", "the sink", "the jar", "the curtains",
       "the plates", "the window"},
      {"behind it", "next to it", "near the door", "beside the table", "under the counter",
       "above the shelf", "in front of it", "on top of it"},
      {"because it might tip", "while the tap keeps running", "although nobody looks",
       "when it starts to tip", "if it tips over", "before anyone notices"},
      {"the picture shows a kitchen scene", "it is a warm afternoon", "the room looks busy",
       "there is a lot going on", "everybody seems occupied", "the floor is clean",
       "a towel hangs by the counter", "light comes in from the garden", "the cupboard door is open",
       "nobody seems to notice", "the scene feels calm", "the family is at home", "the tap is running",
       "a small bush grows in the garden", "the kitchen has white tiles", "it seems an ordinary day",
       "all is quiet", "it is sunny", "very quiet", "quite ordinary"},
      {"today", "indeed", "overall", "quietly"}};
  static const Bank zh{
      false,
      "，",
      "。",
      {"嗯", "呃", "额"},
      {"一些东西", "有人", "某个", "什么的"},
      {"男孩", "女孩", "妈妈", "凳子", "水槽", "盘子", "窗帘", "窗户", "罐子"},
      {"在旁边", "在后面", "在上面", "在下面", "在中间", "在对面"},
      {"因为快要倒了", "虽然没人注意", "如果它掉下来", "洗碗的时候"},
      {"图里是一个厨房", "天气很好", "屋里很忙", "大家都在做事", "地板很干净", "毛巾挂在柜台边",
       "阳光照进来", "柜门开着", "一家人在家", "花园里有树", "厨房很整洁", "今天很平常", "很静", "挺好", "安静"},
      {"也", "真", "都", "呀"}};
  return language == Language::ZH ? zh : en;
}

struct Piece {
  std::vector<std::string> tokens;  // surface units joined by the bank's separator
  int words = 0;                    // token count under the rubric tokenizer
};

Piece make_piece(std::string_view s, Language language, const rubric::Lexicons& lex) {
  Piece p;
  const auto tk = rubric::tokenize(s, language, &lex);
  p.tokens = tk.tokens;
  p.words = static_cast<int>(tk.tokens.size());
  return p;
}

std::vector<int> design_lengths(int words, int syntactic_level) {
  std::vector<int> lengths;
  auto even = [&](int n) {
    for (int i = 0; i < n; ++i) lengths.push_back(words / n + (i < words % n ? 1 : 0));
  };
  if (syntactic_level == 1) {
    even((words + 6) / 7);
  } else if (syntactic_level == 2) {
    even((words + 11) / 12);
  } else {
    constexpr int kShort = 5;
    const int pairs = std::max(1, words / 26);
    const int long_total = words - pairs * kShort;
    for (int i = 0; i < pairs; ++i) {
      lengths.push_back(long_total / pairs + (i < long_total % pairs ? 1 : 0));
      lengths.push_back(kShort);
    }
  }
  return lengths;
}

class NeutralStream {
 public:
  NeutralStream(const Bank& bank, Language language, const rubric::Lexicons& lex, Rng& rng) {
    for (const auto& phrase : bank.neutral) phrases_.push_back(rubric::tokenize(phrase, language, &lex).tokens);
    for (const auto& pad : bank.pads) pads_.push_back(rubric::tokenize(pad, language, &lex).tokens);
    cursor_ = rng.index(phrases_.size());
  }

  // Emits exactly `k` tokens as whole phrases, topped up with one-word pads.
  // Never repeats the previous token and never ends on `following`.
  void take(int k, std::vector<std::string>& out, const std::string& following) {
    int remaining = k;
    while (remaining > 0) {
      if (!append_from(phrases_, cursor_, remaining, out, following)) {
        std::size_t pad_cursor = 0;
        append_from(pads_, pad_cursor, remaining, out, following);
      }
    }
  }

 private:
  bool append_from(const std::vector<std::vector<std::string>>& pool, std::size_t& cursor, int& remaining,
                   std::vector<std::string>& out, const std::string& following) {
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const auto& ph = pool[(cursor + j) % pool.size()];
      const int len = static_cast<int>(ph.size());
      if (len > remaining) continue;
      if (!out.empty() && out.back() == ph.front()) continue;
      if (len == remaining && ph.back() == following) continue;
      out.insert(out.end(), ph.begin(), ph.end());
      remaining -= len;
      cursor = (cursor + j + 1) % pool.size();
      return true;
    }
    return false;
  }

  std::vector<std::vector<std::string>> phrases_;
  std::vector<std::vector<std::string>> pads_;
  std::size_t cursor_ = 0;
};

std::string build_once(const persona::Persona& persona, const rubric::Lexicons& lex, Rng& rng) {
  const Bank& bank = bank_for(persona.language);
  const auto& style = persona.style;
  const int words = stub_word_target(style[StyleDimension::NarrativeLength]);
  const int syn = style[StyleDimension::SyntacticComplexity];
  const int fillers = stub_filler_target(style[StyleDimension::Fluency]);
  const int spatial = stub_spatial_target(style[StyleDimension::SpatialReference]);
  const int clarity = style[StyleDimension::Clarity];
  const int vague = clarity == 1 ? 4 : (clarity == 2 ? 2 : 0);
  const int nouns = clarity == 1 ? 1 : (clarity == 2 ? 3 : 4);

  const auto lengths = design_lengths(words, syn);
  const std::size_t n = lengths.size();
  struct Slot {
    std::string filler;
    std::vector<Piece> pieces;
    int used = 0;
  };
  std::vector<Slot> slots(n);

  auto pick = [&](const std::vector<std::string>& pool, std::size_t offset, int k) {
    std::vector<Piece> out;
    for (int i = 0; i < k; ++i)
      out.push_back(make_piece(pool[(offset + static_cast<std::size_t>(i)) % pool.size()], persona.language, lex));
    return out;
  };

  // Subordinate clauses: one per long sentence at level 3, a single one at level 2.
  const auto subs = pick(bank.subordinate, rng.index(bank.subordinate.size()),
                         syn == 3 ? static_cast<int>(n / 2) : (syn == 2 ? 1 : 0));
  for (std::size_t i = 0; i < subs.size(); ++i) {
    auto& s = slots[syn == 3 ? 2 * i : 0];
    s.used += subs[i].words;
    s.pieces.push_back(subs[i]);
  }

  const std::size_t filler_offset = rng.index(bank.fillers.size());
  for (int k = 0; k < fillers; ++k) {
    auto& s = slots[static_cast<std::size_t>(k) * n / static_cast<std::size_t>(fillers)];
    s.filler = bank.fillers[(filler_offset + static_cast<std::size_t>(k)) % bank.fillers.size()];
    s.used += 1;
  }

  std::vector<Piece> rest;
  for (auto* group : {&bank.spatial, &bank.vague, &bank.nouns}) {
    const int k = group == &bank.spatial ? spatial : (group == &bank.vague ? vague : nouns);
    auto ps = pick(*group, rng.index(group->size()), k);
    rest.insert(rest.end(), ps.begin(), ps.end());
  }
  for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[rng.index(i)]);

  constexpr int kMinNeutral = 2;
  const std::size_t rotate = rng.index(n);
  for (auto& piece : rest) {
    std::size_t best = rotate;
    int best_room = lengths[best] - kMinNeutral - slots[best].used;
    for (std::size_t j = 1; j < n; ++j) {
      const std::size_t i = (rotate + j) % n;
      const int room = lengths[i] - kMinNeutral - slots[i].used;
      if (room > best_room) {
        best = i;
        best_room = room;
      }
    }
    slots[best].used += piece.words;
    slots[best].pieces.push_back(std::move(piece));
  }

  NeutralStream neutral(bank, persona.language, lex, rng);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = slots[i];
    const int free = std::max(0, lengths[i] - s.used);
    const std::size_t chunks = s.pieces.size() + 1;
    std::vector<std::string> toks;
    if (!s.filler.empty()) toks.push_back(s.filler + bank.filler_sep);
    for (std::size_t c = 0; c < chunks; ++c) {
      const int k = free / static_cast<int>(chunks) + (static_cast<int>(c) < free % static_cast<int>(chunks) ? 1 : 0);
      const std::string following = c < s.pieces.size() ? s.pieces[c].tokens.front() : std::string();
      neutral.take(k, toks, following);
      if (c < s.pieces.size()) toks.insert(toks.end(), s.pieces[c].tokens.begin(), s.pieces[c].tokens.end());
    }
    std::string sentence = text::join(toks, bank.spaced ? " " : "");
    if (bank.spaced && !sentence.empty() && sentence[0] >= 'a' && sentence[0] <= 'z')
      sentence[0] = static_cast<char>(sentence[0] - 'a' + 'A');
    if (!out.empty()) out += bank.spaced ? " " : "";
    out += sentence + bank.sentence_end;
  }
  return out;
}

}  // namespace

int stub_word_target(int level) { return level == 1 ? 80 : (level == 2 ? 118 : 160); }
int stub_filler_target(int level) { return level == 1 ? 5 : (level == 2 ? 2 : 1); }
int stub_spatial_target(int level) { return level == 1 ? 1 : (level == 2 ? 2 : 4); }

std::string stub_generate(const persona::Persona& persona, const rubric::Lexicons& lexicons, Rng& rng) {
  if (lexicons.language != persona.language)
    throw ConfigError("lexicon language does not match the persona language");
  constexpr int kAttempts = 24;
  std::string text;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    text = build_once(persona, lexicons, rng);
    if (rubric::score(rubric::analyze(text, lexicons)) == persona.style) break;
  }
  return text;
}

ModelResponse stub_response(std::string text) {
  ModelResponse r;
  r.raw_payload_hash = sha256_hex(text);
  r.text = std::move(text);
  return r;
}

ModelResponse LiveNarrativeGenerator::generate(const persona::Persona&, const prompts::RenderedPrompt& prompt,
                                               std::uint64_t seed) {
  DecodeParams d = decode_;
  d.request_seed = seed;
  return model_->complete(prompt, d);
}

ModelResponse StubNarrativeGenerator::generate(const persona::Persona& persona, const prompts::RenderedPrompt&,
                                               std::uint64_t seed) {
  persona::Persona target = persona;
  if (mismatch_) {
    const int level = target.style[*mismatch_];
    target.style.set(*mismatch_, level % 3 + 1);
  }
  Rng rng(seed);
  return stub_response(stub_generate(target, *lexicons_, rng));
}

audio::AudioBlob StubSpeechSynthesizer::synthesize(std::string_view text, const timbre::TimbreEntry& reference,
                                                   const std::filesystem::path&, std::uint64_t seed) {
  const auto words = rubric::tokenize(text, Language::EN).tokens.size();
  if (words == 0) throw ServiceError(ServiceErrorKind::InvalidInput, "refusing to synthesize empty text", 0);
  const auto per_word = static_cast<std::size_t>(kStubSecondsPerWord * audio::kPipelineRate);
  const auto voiced = per_word * 4 / 5;
  const double amplitude = reference.sex == Sex::Female ? 4000.0 : 5000.0;
  Rng rng(seed);
  audio::AudioBlob out;
  out.samples.resize(words * per_word);
  for (std::size_t w = 0; w < words; ++w) {
    for (std::size_t i = 0; i < voiced; ++i) {
      const double env = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(voiced));
      const double v = (2.0 * rng.uniform() - 1.0) * amplitude * env;
      out.samples[w * per_word + i] = static_cast<std::int16_t>(std::lround(v));
    }
  }
  return out;
}

void StubTranscriber::remember(const audio::AudioBlob& audio, std::string transcript) {
  std::lock_guard lock(mu_);
  by_hash_[audio::content_hash(audio)] = std::move(transcript);
}

std::string StubTranscriber::transcribe(const audio::AudioBlob& audio) {
  if (audio.samples.empty())
    throw ServiceError(ServiceErrorKind::InvalidInput, "cannot transcribe zero-length audio", 0);
  std::lock_guard lock(mu_);
  const auto it = by_hash_.find(audio::content_hash(audio));
  if (it == by_hash_.end())
    throw ServiceError(ServiceErrorKind::ProtocolError, "no stored transcript for this audio", 1);
  return it->second;
}

namespace {

std::string evidence(const rubric::FeatureProfile& p, const StyleScores& s) {
  auto level = [&](StyleDimension d) { return prompts::level_name(s[d]); };
  return fmt::format(
      "Evidence from the transcript: {} words in {} sentences (mean sentence length {:.1f}); "
      "{} filler tokens and {} disfluency events; {} spatial references; {} distinct picture elements "
      "named; {} vague terms; {} subordinate clauses.\n"
      "Narrative length is {}, syntactic complexity is {}, spatial description is {}, fluency is {}, "
      "and lexical clarity is {}.",
      p.total_words, p.sentence_count, p.mean_sentence_len, p.filler_count, p.disfluency_events,
      p.spatial_count, p.key_noun_count, p.vague_count, p.subordinate_marker_count,
      level(StyleDimension::NarrativeLength), level(StyleDimension::SyntacticComplexity),
      level(StyleDimension::SpatialReference), level(StyleDimension::Fluency), level(StyleDimension::Clarity));
}

Label other_label(LabelScheme scheme, Label label) {
  const auto labels = labels_of(scheme);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return labels[(i + 1) % labels.size()];
  return labels.front();
}

const std::string& binding(const prompts::RenderedPrompt& prompt, const std::string& name) {
  const auto it = prompt.bindings.find(name);
  if (it == prompt.bindings.end())
    throw ServiceError(ServiceErrorKind::InvalidInput, fmt::format("prompt has no '{}' binding", name), 0);
  return it->second;
}

}  // namespace

ModelResponse StubRationaleModel::complete(const prompts::RenderedPrompt& prompt, const DecodeParams&) {
  Label label = parse_label(binding(prompt, "label"));
  const auto& transcript = binding(prompt, "transcript");
  const auto profile = rubric::analyze(transcript, *lexicons_);
  if (inconsistent_ && inconsistent_(prompt)) label = other_label(scheme_, label);
  return stub_response(fmt::format("{}\nThis pattern is taken as the basis for the diagnosis.\nFINAL: {}",
                                   evidence(profile, rubric::score(profile)), to_string(label)));
}

Label StubClassifier::decide(std::string_view transcript) const {
  const auto s = rubric::score(rubric::analyze(transcript, *lexicons_));
  double mean = 0.0;
  for (int v : s.values()) mean += v;
  mean /= 5.0;
  if (scheme_ == LabelScheme::Binary) return mean >= 2.0 ? Label::NonAD : Label::AD;
  if (mean >= 2.3) return Label::HC;
  if (mean >= 1.7) return Label::MCI;
  return Label::AD;
}

ModelResponse StubClassifier::complete(const prompts::RenderedPrompt& prompt, const DecodeParams& decode) {
  const auto& transcript = binding(prompt, "transcript");
  Label label = decide(transcript);
  if (oracle_) {
    const auto it = oracle_->find(sha256_hex(transcript));
    if (it != oracle_->end()) label = it->second;
  }
  if (noise_ > 0.0) {
    Rng rng(decode.request_seed.value_or(0) ^ stable_hash64(transcript));
    if (rng.uniform() < noise_) {
      const auto labels = labels_of(scheme_);
      label = labels[rng.index(labels.size())];
    }
  }
  const auto profile = rubric::analyze(transcript, *lexicons_);
  return stub_response(fmt::format("{}\nFINAL: {}", evidence(profile, rubric::score(profile)), to_string(label)));
}

}  // namespace syncog::services
