#include "syncog/rng.hpp"
#include "syncog/text.hpp"
#include "syncog/types.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace syncog {

namespace {

constexpr std::array<Label, 2> kBinary = {Label::AD, Label::NonAD};
constexpr std::array<Label, 3> kTernary = {Label::HC, Label::MCI, Label::AD};

}  // namespace

std::string_view to_string(Language l) { return l == Language::EN ? "en" : "zh"; }

std::string_view to_string(LabelScheme s) {
  return s == LabelScheme::Binary ? "binary" : "ternary";
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::AD: return "AD";
    case Label::NonAD: return "NonAD";
    case Label::HC: return "HC";
    case Label::MCI: return "MCI";
  }
  return "?";
}

std::string_view to_string(Sex s) { return s == Sex::Female ? "female" : "male"; }

std::string_view to_string(StyleDimension d) {
  switch (d) {
    case StyleDimension::NarrativeLength: return "narrative_length";
    case StyleDimension::SyntacticComplexity: return "syntactic_complexity";
    case StyleDimension::SpatialReference: return "spatial_reference";
    case StyleDimension::Fluency: return "fluency";
    case StyleDimension::Clarity: return "clarity";
  }
  return "?";
}

Language parse_language(std::string_view s) {
  const auto v = text::to_lower_ascii(s);
  if (v == "en") return Language::EN;
  if (v == "zh") return Language::ZH;
  throw ParseError(fmt::format("unknown language '{}'", s));
}

LabelScheme parse_scheme(std::string_view s) {
  const auto v = text::to_lower_ascii(s);
  if (v == "binary") return LabelScheme::Binary;
  if (v == "ternary") return LabelScheme::Ternary;
  throw ParseError(fmt::format("unknown label scheme '{}'", s));
}

Label parse_label(std::string_view s) {
  const auto v = text::to_lower_ascii(s);
  if (v == "ad") return Label::AD;
  if (v == "nonad" || v == "non-ad") return Label::NonAD;
  if (v == "hc") return Label::HC;
  if (v == "mci") return Label::MCI;
  throw ParseError(fmt::format("unknown label '{}'", s));
}

Sex parse_sex(std::string_view s) {
  const auto v = text::to_lower_ascii(s);
  if (v == "female" || v == "f") return Sex::Female;
  if (v == "male" || v == "m") return Sex::Male;
  throw ParseError(fmt::format("unknown sex '{}'", s));
}

StyleDimension parse_dimension(std::string_view s) {
  for (auto d : kStyleDimensions)
    if (to_string(d) == s) return d;
  throw ParseError(fmt::format("unknown style dimension '{}'", s));
}

std::span<const Label> labels_of(LabelScheme scheme) {
  if (scheme == LabelScheme::Binary) return kBinary;
  return kTernary;
}

bool scheme_contains(LabelScheme scheme, Label label) {
  for (auto l : labels_of(scheme))
    if (l == label) return true;
  return false;
}

CognitiveStatus::CognitiveStatus(LabelScheme scheme, Label label)
    : scheme_(scheme), label_(label) {
  if (!scheme_contains(scheme, label))
    throw ConfigError(fmt::format("label {} is not part of the {} scheme",
                                  to_string(label), to_string(scheme)));
}

StyleLevels::StyleLevels(std::array<int, 5> levels) : levels_(levels) {
  for (int v : levels_)
    if (v < 1 || v > 3) throw ConfigError(fmt::format("style level {} outside 1..3", v));
}

void StyleLevels::set(StyleDimension d, int level) {
  if (level < 1 || level > 3)
    throw ConfigError(fmt::format("style level {} outside 1..3", level));
  levels_[index_of(d)] = level;
}

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::uint64_t Rng::index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

}  // namespace syncog
