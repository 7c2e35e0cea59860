#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace syncog {

/// Base of every error raised by the library. `kind()` is a stable short tag
/// used in reports and per-sample failure flags.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("ParseError", what) {}
};

enum class Language { EN, ZH };
enum class LabelScheme { Binary, Ternary };
enum class Label { AD, NonAD, HC, MCI };
enum class Sex { Female, Male };

enum class StyleDimension {
  NarrativeLength,
  SyntacticComplexity,
  SpatialReference,
  Fluency,
  Clarity,
};

inline constexpr std::array<StyleDimension, 5> kStyleDimensions = {
    StyleDimension::NarrativeLength, StyleDimension::SyntacticComplexity,
    StyleDimension::SpatialReference, StyleDimension::Fluency,
    StyleDimension::Clarity};

constexpr std::size_t index_of(StyleDimension d) noexcept {
  return static_cast<std::size_t>(d);
}

std::string_view to_string(Language l);
std::string_view to_string(LabelScheme s);
std::string_view to_string(Label l);
std::string_view to_string(Sex s);
std::string_view to_string(StyleDimension d);

Language parse_language(std::string_view s);
LabelScheme parse_scheme(std::string_view s);
Label parse_label(std::string_view s);
Sex parse_sex(std::string_view s);
StyleDimension parse_dimension(std::string_view s);

/// Labels of a scheme in canonical order (Binary: AD, NonAD; Ternary: HC, MCI, AD).
std::span<const Label> labels_of(LabelScheme scheme);
bool scheme_contains(LabelScheme scheme, Label label);

/// A diagnostic label together with the scheme it belongs to.
class CognitiveStatus {
 public:
  CognitiveStatus(LabelScheme scheme, Label label);
  LabelScheme scheme() const noexcept { return scheme_; }
  Label label() const noexcept { return label_; }
  friend bool operator==(const CognitiveStatus&, const CognitiveStatus&) = default;

 private:
  LabelScheme scheme_;
  Label label_;
};

/// Five ordinal levels in {1,2,3}, one per style dimension. Used both as the
/// persona's target style and as rubric scores.
class StyleLevels {
 public:
  StyleLevels() { levels_.fill(2); }
  explicit StyleLevels(std::array<int, 5> levels);

  int operator[](StyleDimension d) const noexcept { return levels_[index_of(d)]; }
  void set(StyleDimension d, int level);
  const std::array<int, 5>& values() const noexcept { return levels_; }

  friend bool operator==(const StyleLevels&, const StyleLevels&) = default;

 private:
  std::array<int, 5> levels_{};
};

using StyleVector = StyleLevels;
using StyleScores = StyleLevels;

}  // namespace syncog
