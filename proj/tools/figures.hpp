#pragma once

#include "syncog/evaluate.hpp"
#include "syncog/rubric.hpp"

#include <map>
#include <string>
#include <vector>

namespace syncog::cli {

struct FiveNumber {
  std::size_t n = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
FiveNumber five_number(std::vector<double> values);

using ProfilesByLabel = std::map<Label, std::vector<rubric::FeatureProfile>>;

/// feature,label,n,min,q1,median,q3,max
std::string summaries_csv(const ProfilesByLabel& profiles);

/// feature,group_a,group_b,n_a,n_b,median_a,median_b,u,z,p_value
std::string comparisons_csv(const std::vector<evaluate::GroupComparison>& rows);

/// Static box plot of one feature, one box per label.
std::string box_plot_svg(std::string_view feature, const std::map<Label, FiveNumber>& boxes);

}  // namespace syncog::cli
