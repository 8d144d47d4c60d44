#pragma once

#include <utility>
#include <vector>

namespace pessim {

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  /// Some values were at or below the floor and were clipped up to it.
  bool clipped = false;
};

/// Smallest positive value admitted by rate_fit before taking logs.
inline constexpr double kRateFloor = 1e-300;

/// Ordinary least squares of ln(value) on ln(n). Needs at least two distinct
/// n and at least one value above the floor.
RateFit rate_fit(const std::vector<std::pair<double, double>>& points);

/// Ordinary least squares y = intercept + slope * x.
RateFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Median with the mean of the two central values for even sizes.
double median(std::vector<double> values);

double mean(const std::vector<double>& values);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(const std::vector<double>& values);

}  // namespace pessim
