#include "figures.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace syncog::cli {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> values_of(const std::vector<rubric::FeatureProfile>& profiles, std::string_view feature) {
  std::vector<double> v;
  v.reserve(profiles.size());
  for (const auto& p : profiles) v.push_back(rubric::feature_value(p, feature));
  return v;
}

}  // namespace

FiveNumber five_number(std::vector<double> values) {
  FiveNumber f;
  f.n = values.size();
  if (values.empty()) return f;
  std::sort(values.begin(), values.end());
  f.min = values.front();
  f.q1 = quantile(values, 0.25);
  f.median = quantile(values, 0.5);
  f.q3 = quantile(values, 0.75);
  f.max = values.back();
  return f;
}

std::string summaries_csv(const ProfilesByLabel& profiles) {
  std::string out = "feature,label,n,min,q1,median,q3,max\n";
  for (auto feature : rubric::kFeatureNames) {
    for (const auto& [label, group] : profiles) {
      const auto f = five_number(values_of(group, feature));
      out += fmt::format("{},{},{},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g}\n", feature, to_string(label), f.n, f.min, f.q1,
                         f.median, f.q3, f.max);
    }
  }
  return out;
}

std::string comparisons_csv(const std::vector<evaluate::GroupComparison>& rows) {
  std::string out = "feature,group_a,group_b,n_a,n_b,median_a,median_b,u,z,p_value\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g}\n", r.feature, to_string(r.a),
                       to_string(r.b), r.n_a, r.n_b, r.median_a, r.median_b, r.test.u, r.test.z, r.test.p_value);
  }
  return out;
}

std::string box_plot_svg(std::string_view feature, const std::map<Label, FiveNumber>& boxes) {
  constexpr double kWidth = 420, kHeight = 300, kLeft = 60, kTop = 30, kBottom = 40, kBox = 50;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (const auto& [label, f] : boxes) {
    if (f.n == 0) continue;
    lo = first ? f.min : std::min(lo, f.min);
    hi = first ? f.max : std::max(hi, f.max);
    first = false;
  }
  if (hi <= lo) hi = lo + 1.0;
  const double plot_h = kHeight - kTop - kBottom;
  auto y = [&](double v) { return kTop + plot_h * (1.0 - (v - lo) / (hi - lo)); };
  const double step = (kWidth - kLeft - 20) / static_cast<double>(std::max<std::size_t>(boxes.size(), 1));

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{3}</text>\n"
      "<line x1=\"{4}\" y1=\"{5}\" x2=\"{4}\" y2=\"{6}\" stroke=\"black\"/>\n",
      kWidth, kHeight, kWidth / 2, feature, kLeft, kTop, kTop + plot_h);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", kLeft - 5, y(v) + 4, v);
  }
  int i = 0;
  for (const auto& [label, f] : boxes) {
    const double cx = kLeft + step * (i++ + 0.5);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{} (n={})</text>\n", cx,
                       kHeight - kBottom + 18, to_string(label), f.n);
    if (f.n == 0) continue;
    svg += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n"
        "<line x1=\"{0:.1f}\" y1=\"{3:.1f}\" x2=\"{0:.1f}\" y2=\"{4:.1f}\" stroke=\"black\"/>\n"
        "<rect x=\"{5:.1f}\" y=\"{2:.1f}\" width=\"{6}\" height=\"{7:.1f}\" fill=\"#9ecae1\" stroke=\"black\"/>\n"
        "<line x1=\"{5:.1f}\" y1=\"{8:.1f}\" x2=\"{9:.1f}\" y2=\"{8:.1f}\" stroke=\"black\" stroke-width=\"2\"/>\n",
        cx, y(f.max), y(f.q3), y(f.q1), y(f.min), cx - kBox / 2, kBox, y(f.q1) - y(f.q3), y(f.median),
        cx + kBox / 2);
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace syncog::cli
