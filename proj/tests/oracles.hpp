#pragma once

// Independent reference computations the library is checked against. None of
// these call into the library's metric or sampling code.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <vector>

namespace syncog::oracle {

/// Composite Simpson rule with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  if (b <= a) return 0.0;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

/// P(level = 1, 2, 3) for round(clip(X, 1, 3)), X ~ Normal(mean, sd): the
/// density integrated over (-inf, 1.5), [1.5, 2.5), [2.5, inf).
inline std::array<double, 3> level_probabilities(double mean, double sd) {
  const double lo = mean - 12.0 * sd;
  const double hi = mean + 12.0 * sd;
  auto pdf = [&](double x) { return normal_pdf(x, mean, sd); };
  auto mass = [&](double a, double b) { return simpson(pdf, std::max(a, lo), std::min(b, hi)); };
  const double p1 = mass(lo, 1.5);
  const double p2 = mass(1.5, 2.5);
  const double p3 = mass(2.5, hi);
  return {p1, p2, p3};
}

/// E[round_half_up(clip(X, low, high))], X ~ Normal(mean, sd).
inline double clipped_rounded_mean(double mean, double sd, double low, double high) {
  double expectation = 0.0;
  auto pdf = [&](double x) { return normal_pdf(x, mean, sd); };
  const double far_lo = mean - 12.0 * sd;
  const double far_hi = mean + 12.0 * sd;
  for (int k = static_cast<int>(std::floor(low)); k <= static_cast<int>(std::ceil(high)); ++k) {
    double a = k - 0.5, b = k + 0.5;
    if (a > high || b <= low) continue;
    if (a <= low) a = far_lo;   // clipped mass below the bound lands on the lowest age
    if (b > high) b = far_hi;   // and above the bound on the highest
    expectation += k * simpson(pdf, std::max(a, far_lo), std::min(b, far_hi), 4000);
  }
  return expectation;
}

struct Metrics {
  double macro_f1 = 0.0;  // mean over rollouts
  double avs = 0.0;       // mean accuracy over rollouts
  double bon = 0.0;       // best rollout accuracy
};

/// Brute-force confusion counting. Labels are ints; -1 means unparsed.
/// Classes of a rollout are those among the truths and its parsed answers.
inline Metrics metrics(const std::vector<std::vector<int>>& predictions, const std::vector<int>& truths) {
  Metrics m;
  m.bon = -1.0;
  for (const auto& row : predictions) {
    std::set<int> classes(truths.begin(), truths.end());
    for (int p : row)
      if (p >= 0) classes.insert(p);
    double f1_sum = 0.0;
    for (int c : classes) {
      int tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < truths.size(); ++i) {
        const bool is_truth = truths[i] == c;
        const bool is_pred = row[i] == c;
        if (is_truth && is_pred) ++tp;
        else if (is_pred) ++fp;
        else if (is_truth) ++fn;
      }
      const double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
      const double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
      f1_sum += prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    int correct = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) correct += row[i] == truths[i];
    const double acc = truths.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truths.size());
    m.macro_f1 += classes.empty() ? 0.0 : f1_sum / static_cast<double>(classes.size());
    m.avs += acc;
    m.bon = std::max(m.bon, acc);
  }
  const auto n = static_cast<double>(predictions.size());
  m.macro_f1 /= n;
  m.avs /= n;
  return m;
}

}  // namespace syncog::oracle
