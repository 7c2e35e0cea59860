#include "syncog/prompts.hpp"

#include "syncog/hash.hpp"
#include "syncog/text.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

namespace syncog::prompts {

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::Syn: return "syn";
    case TemplateId::Cot: return "cot";
    case TemplateId::Cls: return "cls";
  }
  return "?";
}

TemplateId parse_template_id(std::string_view s) {
  const auto v = text::to_lower_ascii(s);
  if (v == "syn") return TemplateId::Syn;
  if (v == "cot") return TemplateId::Cot;
  if (v == "cls") return TemplateId::Cls;
  throw ParseError(fmt::format("unknown template id '{}'", s));
}

std::uint64_t body_hash(const std::vector<Message>& body) {
  std::string canon;
  for (const auto& m : body) {
    canon += m.role;
    canon += '\n';
    canon += m.content;
    canon += '\0';
  }
  return stable_hash64(canon);
}

namespace {

bool is_ident_char(char c, bool first) {
  if (c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
  return !first && c >= '0' && c <= '9';
}

// Calls on_text for literal runs and on_placeholder for {name} slots.
template <typename OnText, typename OnPlaceholder>
void scan_placeholders(std::string_view s, const std::string& origin, OnText on_text,
                       OnPlaceholder on_placeholder) {
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '{' && i + 1 < s.size() && s[i + 1] == '{') {
      on_text("{");
      i += 2;
    } else if (c == '}' && i + 1 < s.size() && s[i + 1] == '}') {
      on_text("}");
      i += 2;
    } else if (c == '{') {
      std::size_t j = i + 1;
      while (j < s.size() && is_ident_char(s[j], j == i + 1)) ++j;
      if (j == i + 1 || j >= s.size() || s[j] != '}')
        throw ParseError(fmt::format("{}: malformed placeholder near offset {}", origin, i));
      on_placeholder(std::string(s.substr(i + 1, j - i - 1)));
      i = j + 1;
    } else {
      std::size_t j = i;
      while (j < s.size() && s[j] != '{' && s[j] != '}') ++j;
      if (j == i) {
        // lone '}'
        on_text("}");
        ++i;
      } else {
        on_text(s.substr(i, j - i));
        i = j;
      }
    }
  }
}

}  // namespace

PromptTemplate parse_template(std::string_view source, const std::string& origin) {
  PromptTemplate t;
  std::optional<std::uint64_t> stored_hash;
  bool have_id = false, have_lang = false, have_placeholders = false;

  const auto lines = text::split(source, '\n');
  std::size_t i = 0;
  for (; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("===", 0) == 0) break;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const auto colon = trimmed.find(':');
    if (colon == std::string::npos)
      throw ParseError(fmt::format("{}: header line without ':': '{}'", origin, trimmed));
    const auto key = text::trim(trimmed.substr(0, colon));
    const auto value = text::trim(trimmed.substr(colon + 1));
    if (key == "id") {
      t.id = parse_template_id(value);
      have_id = true;
    } else if (key == "language") {
      t.language = parse_language(value);
      have_lang = true;
    } else if (key == "placeholders") {
      for (const auto& p : text::split(value, ',')) {
        const auto name = text::trim(p);
        if (!name.empty()) t.placeholders.push_back(name);
      }
      have_placeholders = true;
    } else if (key == "hash") {
      stored_hash = parse_hex64(value);
    } else {
      throw ParseError(fmt::format("{}: unknown header key '{}'", origin, key));
    }
  }
  if (!have_id || !have_lang || !have_placeholders)
    throw ParseError(fmt::format("{}: header must declare id, language and placeholders", origin));

  Message* current = nullptr;
  for (; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("===", 0) == 0) {
      const auto role = text::trim(line.substr(3));
      if (role != "system" && role != "user")
        throw ParseError(fmt::format("{}: unsupported message role '{}'", origin, role));
      t.body.push_back({role, ""});
      current = &t.body.back();
      continue;
    }
    if (!current->content.empty() || !line.empty()) {
      if (!current->content.empty()) current->content += '\n';
      current->content += line;
    }
  }
  for (auto& m : t.body) {
    // Leading blank lines are skipped above; drop trailing ones.
    while (!m.content.empty() && (m.content.back() == '\n' || m.content.back() == ' '))
      m.content.pop_back();
  }
  if (t.body.empty()) throw ParseError(fmt::format("{}: template has no message blocks", origin));

  const std::set<std::string> declared(t.placeholders.begin(), t.placeholders.end());
  for (const auto& m : t.body) {
    scan_placeholders(
        m.content, origin, [](std::string_view) {},
        [&](const std::string& name) {
          if (!declared.count(name))
            throw ParseError(fmt::format("{}: undeclared placeholder {{{}}}", origin, name));
        });
  }
  if (t.id == TemplateId::Cls && declared.count("label"))
    throw ParseError(fmt::format("{}: a Cls template may not declare a label placeholder", origin));

  t.version_hash = body_hash(t.body);
  if (stored_hash && *stored_hash != t.version_hash)
    throw ParseError(fmt::format("{}: stored hash {} does not match body hash {}", origin,
                                 hex64(*stored_hash), hex64(t.version_hash)));
  return t;
}

PromptTemplate load_template(const std::filesystem::path& path, TemplateId id, Language language) {
  if (!std::filesystem::exists(path))
    throw ConfigError(fmt::format("template file {} not found", path.string()));
  auto t = parse_template(text::read_file(path.string()), path.string());
  if (t.id != id || t.language != language)
    throw ConfigError(fmt::format("{}: expected {}/{} template, found {}/{}", path.string(),
                                  to_string(id), syncog::to_string(language), to_string(t.id),
                                  syncog::to_string(t.language)));
  return t;
}

std::filesystem::path template_path(const std::filesystem::path& dir, TemplateId id, Language language) {
  return dir / fmt::format("{}_{}.tmpl", to_string(id), syncog::to_string(language));
}

RenderedPrompt render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings) {
  if (tmpl.id == TemplateId::Cls && bindings.count("label"))
    throw ConfigError("a Cls prompt may not be rendered with a label binding");
  RenderedPrompt out;
  out.template_version = tmpl.version_hash;
  for (const auto& name : tmpl.placeholders) {
    const auto it = bindings.find(name);
    if (it == bindings.end())
      throw ConfigError(fmt::format("missing binding for placeholder {{{}}}", name));
    out.bindings[name] = it->second;
  }
  for (const auto& m : tmpl.body) {
    std::string content;
    scan_placeholders(
        m.content, "render", [&](std::string_view s) { content += s; },
        [&](const std::string& name) { content += out.bindings.at(name); });
    out.messages.push_back({m.role, std::move(content)});
  }
  return out;
}

// ------------------------------------------------------------ bindings

std::string_view level_name(int level) {
  switch (level) {
    case 1: return "poor";
    case 2: return "normal";
    case 3: return "good";
  }
  throw ConfigError(fmt::format("style level {} outside 1..3", level));
}

namespace {

struct BandText {
  const char* en;
  const char* zh;
};

// [dimension][level - 1]
constexpr BandText kBands[5][3] = {
    {{"at most 100 words; only 2-3 key elements; minimal descriptive detail",
      "不超过100个词；只提到2-3个关键元素；几乎没有细节描述"},
     {"101-135 words; covers the main content with 3-4 descriptive details",
      "101-135个词；涵盖主要内容，有3-4处细节描述"},
     {"at least 136 words; a relatively complete, well-organized description with 4 or more details",
      "不少于136个词；描述较完整、条理清楚，有4处以上细节"}},
    {{"predominantly short, simple sentences; rare conjunctions; no subordinate clauses",
      "以简短的简单句为主；很少用连接词；没有从句"},
     {"a mix of short and medium-length sentences; occasional conjunctions; at most simple subordinate clauses",
      "长短句混合；偶尔使用连接词；可有简单从句"},
     {"alternating short and long sentences with causal, temporal or conditional relations",
      "长短句交替，包含因果、时间或条件关系"}},
    {{"0-1 spatial reference; vague or imprecise positioning", "0-1处空间描述；方位模糊"},
     {"exactly 2 explicit spatial references; basic relative positioning",
      "恰好2处明确的空间描述；基本的相对位置"},
     {"3 or more explicit spatial references; comprehensive spatial relations",
      "3处以上明确的空间描述；空间关系表达完整"}},
    {{"4 or more fillers or word-search events; frequent pauses; disrupted flow",
      "4个以上填充词或找词停顿；停顿频繁；语流中断"},
     {"2-3 disfluency events; occasional pauses or self-repairs; overall understandable",
      "2-3处不流畅；偶有停顿或自我修正；整体可理解"},
     {"at most 1 disfluency event; natural speech rate; minimal word-searching",
      "不超过1处不流畅；语速自然；几乎不找词"}},
    {{"4 or more vague terms; at most 1 key noun; frequent pronoun reliance",
      "4个以上模糊词；最多1个关键名词；频繁使用代词"},
     {"2-3 vague terms; exactly 2 key nouns; occasional pronoun substitution",
      "2-3个模糊词；恰好2个关键名词；偶尔用代词替代"},
     {"at most 1 vague term; 3 or more key nouns; predominantly specific references",
      "不超过1个模糊词；3个以上关键名词；指称具体"}},
};

constexpr const char* kDimNames[5][2] = {
    {"Narrative length", "叙述长度"},   {"Syntactic complexity", "句法复杂度"},
    {"Spatial reference", "空间表达"},  {"Fluency", "言语流畅度"},
    {"Clarity", "表达清晰度"}};

constexpr const char* kZhLevelNames[3] = {"差", "一般", "好"};

}  // namespace

std::string style_block(const StyleVector& style, Language language) {
  std::string out;
  for (auto d : kStyleDimensions) {
    const auto k = index_of(d);
    const int level = style[d];
    const auto& band = kBands[k][level - 1];
    if (language == Language::EN) {
      out += fmt::format("- {}: {} (level {}): {}\n", kDimNames[k][0], level_name(level), level,
                         band.en);
    } else {
      out += fmt::format("- {}：{}（等级{}）：{}\n", kDimNames[k][1], kZhLevelNames[level - 1],
                         level, band.zh);
    }
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string label_description(Label label, Language language) {
  const bool en = language == Language::EN;
  switch (label) {
    case Label::AD: return en ? "Alzheimer's disease (AD)" : "阿尔茨海默病（AD）";
    case Label::NonAD: return en ? "no Alzheimer's disease (NonAD)" : "非阿尔茨海默病（NonAD）";
    case Label::HC: return en ? "healthy control (HC)" : "健康对照（HC）";
    case Label::MCI: return en ? "mild cognitive impairment (MCI)" : "轻度认知障碍（MCI）";
  }
  return "";
}

std::string label_options(LabelScheme scheme, Language) {
  std::vector<std::string> names;
  for (auto l : labels_of(scheme)) names.emplace_back(syncog::to_string(l));
  return text::join(names, ", ");
}

std::map<std::string, std::string> syn_bindings(const persona::Persona& p, const StimulusInfo& stimulus) {
  const bool en = p.language == Language::EN;
  std::map<std::string, std::string> b;
  b["age"] = std::to_string(p.demographics.age);
  if (en) {
    b["sex"] = std::string(syncog::to_string(p.demographics.sex));
    std::string edu(persona::kEducationNames[static_cast<std::size_t>(p.demographics.education)]);
    std::replace(edu.begin(), edu.end(), '_', ' ');
    b["education"] = edu;
    b["language"] = "English";
    b["register_note"] =
        "Speak the way an older adult talks out loud in a clinic: colloquial, spontaneous oral "
        "discourse, not a written summary. Do not use lists, headings or quotation marks.";
  } else {
    b["sex"] = p.demographics.sex == Sex::Female ? "女" : "男";
    constexpr const char* kEdu[4] = {"小学及以下", "初中", "高中", "大学及以上"};
    b["education"] = kEdu[p.demographics.education];
    b["language"] = "普通话";
    b["register_note"] = "请模仿老年人在诊室里的口语表达：自然、口语化，而不是书面总结。不要使用列表、标题或引号。";
  }
  b["style_block"] = style_block(p.style, p.language);
  b["stimulus"] = stimulus.description;
  return b;
}

bool contains_label_token(std::string_view s, LabelScheme) {
  // Codes are matched case-sensitively as whole words; names case-insensitively.
  static const std::vector<std::string> codes = {"AD", "NonAD", "Non-AD", "HC", "MCI"};
  static const std::vector<std::string> names = {"alzheimer", "dementia", "cognitive impairment",
                                                 "healthy control", "阿尔茨海默", "痴呆",
                                                 "认知障碍", "健康对照"};
  auto boundary = [&](std::size_t pos) {
    if (pos >= s.size()) return true;
    const char c = s[pos];
    return !((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'));
  };
  for (const auto& code : codes) {
    for (std::size_t pos = s.find(code); pos != std::string_view::npos; pos = s.find(code, pos + 1)) {
      if ((pos == 0 || boundary(pos - 1)) && boundary(pos + code.size())) return true;
    }
  }
  const auto lower = text::to_lower_ascii(s);
  for (const auto& name : names)
    if (lower.find(name) != std::string::npos) return true;
  return false;
}

}  // namespace syncog::prompts
