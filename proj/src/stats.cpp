#include "pessim/stats.hpp"

#include "pessim/common.hpp"

#include <algorithm>
#include <cmath>

namespace pessim {

RateFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("linear_fit needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw InvalidInput("linear_fit needs at least two distinct abscissae");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - fit.intercept - fit.slope * x[i];
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& points) {
  std::vector<double> x, y;
  bool clipped = false;
  bool any_above = false;
  for (const auto& [n, v] : points) {
    if (!(n > 0.0) || !std::isfinite(v)) throw InvalidInput("rate_fit: n must be positive and values finite");
    double value = v;
    if (value <= kRateFloor) {
      value = kRateFloor;
      clipped = true;
    } else {
      any_above = true;
    }
    x.push_back(std::log(n));
    y.push_back(std::log(value));
  }
  if (!any_above) throw InvalidInput("rate_fit: every value is at the floor");
  RateFit fit = linear_fit(x, y);
  fit.clipped = clipped;
  return fit;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 == 1 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw InvalidInput("mean of an empty set");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size() - 1));
}

}  // namespace pessim
