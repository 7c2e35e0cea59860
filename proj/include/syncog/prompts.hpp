#pragma once

#include "syncog/persona.hpp"
#include "syncog/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace syncog::prompts {

enum class TemplateId { Syn, Cot, Cls };

std::string_view to_string(TemplateId id);
TemplateId parse_template_id(std::string_view s);

struct Message {
  std::string role;  // "system" or "user" (or "assistant" in exported data)
  std::string content;
  friend bool operator==(const Message&, const Message&) = default;
};

struct AudioAttachment {
  std::string path;  // relative to the run directory
  std::string checksum;
  friend bool operator==(const AudioAttachment&, const AudioAttachment&) = default;
};

/// A prompt template loaded from disk. Placeholders are written `{name}`;
/// `{{` and `}}` produce literal braces.
struct PromptTemplate {
  TemplateId id = TemplateId::Syn;
  Language language = Language::EN;
  std::vector<std::string> placeholders;
  std::vector<Message> body;
  std::uint64_t version_hash = 0;
};

struct RenderedPrompt {
  std::vector<Message> messages;
  std::map<std::string, std::string> bindings;
  std::uint64_t template_version = 0;
  std::vector<AudioAttachment> attachments;
};

/// Stable hash over the role-tagged message bodies.
std::uint64_t body_hash(const std::vector<Message>& body);

/// Parses a template file body. Throws ParseError on malformed input,
/// undeclared placeholders, or a stored `hash:` that does not match.
PromptTemplate parse_template(std::string_view source, const std::string& origin = "<memory>");

PromptTemplate load_template(const std::filesystem::path& path, TemplateId id, Language language);

/// `<dir>/<id>_<lang>.tmpl`
std::filesystem::path template_path(const std::filesystem::path& dir, TemplateId id, Language language);

/// Substitutes every declared placeholder. Bindings must cover all of them.
/// A Cls template never accepts a `label` binding.
RenderedPrompt render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings);

// Binding helpers shared by the pipeline and evaluator.

std::string_view level_name(int level);
/// One line per dimension: name, ordinal level name, and the rubric band it implies.
std::string style_block(const StyleVector& style, Language language);
std::string label_description(Label label, Language language);
/// The scheme's labels listed for the final-answer instruction.
std::string label_options(LabelScheme scheme, Language language);

struct StimulusInfo {
  std::string description;
};

std::map<std::string, std::string> syn_bindings(const persona::Persona& persona,
                                                const StimulusInfo& stimulus);

/// Scans for label tokens of the scheme (canonical codes and names) as whole words.
bool contains_label_token(std::string_view text, LabelScheme scheme);

}  // namespace syncog::prompts
