#pragma once

#include <vector>

namespace aqsgee {

/// Linear-interpolation quantile (type 7); NaN for empty input.
double quantile(std::vector<double> values, double q);
inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

/// Mean and standard error of the mean (NaN se for fewer than two values).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& values);

}  // namespace aqsgee
