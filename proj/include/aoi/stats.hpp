#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace aoi {

/// Point estimate with a symmetric confidence half-width.
struct Interval {
  double mean = 0.0;
  double half_width = 0.0;

  double low() const noexcept { return mean - half_width; }
  double high() const noexcept { return mean + half_width; }
  bool contains(double x) const noexcept { return x >= low() && x <= high(); }
  bool overlaps(const Interval& o) const noexcept { return low() <= o.high() && o.low() <= high(); }
};

inline double sample_mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs) {
  const double m = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

/// Two-sided Student-t quantile t_{(1+level)/2, df}.
inline double student_t_quantile(double level, std::size_t df) {
  boost::math::students_t_distribution<double> dist(static_cast<double>(df));
  return boost::math::quantile(dist, 0.5 + level / 2.0);
}

/// Student-t interval for the mean of independent replications.
inline Interval student_t_interval(std::span<const double> xs, double level) {
  if (xs.size() < 2) throw std::invalid_argument("confidence interval needs at least two replications");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0, 1)");
  const double n = static_cast<double>(xs.size());
  return {sample_mean(xs), student_t_quantile(level, xs.size() - 1) * std::sqrt(sample_variance(xs) / n)};
}

}  // namespace aoi
