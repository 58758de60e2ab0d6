#pragma once

#include <array>
#include <cmath>
#include <string>

#include "aoi/errors.hpp"

namespace aoi {

struct DiffOptions {
  double step = 1e-4;
  // Two Richardson refinements on top of the base difference.
  int levels = 2;
  // Maximum relative change allowed when the base step is halved.
  double tolerance = 1e-6;
  bool check = true;
};

namespace detail {

// Richardson table: estimates[i] computed with step h / 2^i, leading error
// O(h^{p}), O(h^{p+q}), ... for successive eliminations.
template <std::size_t N>
double richardson(std::array<double, N> estimates, int levels, int order, int order_step) {
  int p = order;
  for (int lvl = 0; lvl < levels; ++lvl) {
    const double f = std::pow(2.0, p);
    for (int i = 0; i + 1 < static_cast<int>(N) - lvl; ++i) {
      estimates[i] = (f * estimates[i + 1] - estimates[i]) / (f - 1.0);
    }
    p += order_step;
  }
  return estimates[0];
}

template <class F>
double central_first(F& f, double x, double h, int levels) {
  std::array<double, 3> d{};
  for (int i = 0; i < 3; ++i) {
    const double hi = h / std::pow(2.0, i);
    d[i] = (f(x + hi) - f(x - hi)) / (2.0 * hi);
  }
  return richardson(d, levels, 2, 2);
}

template <class F>
double backward_first(F& f, double x, double h, int levels) {
  std::array<double, 3> d{};
  const double f0 = f(x);
  for (int i = 0; i < 3; ++i) {
    const double hi = h / std::pow(2.0, i);
    d[i] = (f0 - f(x - hi)) / hi;
  }
  return richardson(d, levels, 1, 1);
}

template <class F>
double central_second(F& f, double x, double h, int levels) {
  std::array<double, 3> d{};
  const double f0 = f(x);
  for (int i = 0; i < 3; ++i) {
    const double hi = h / std::pow(2.0, i);
    d[i] = (f(x + hi) - 2.0 * f0 + f(x - hi)) / (hi * hi);
  }
  return richardson(d, levels, 2, 2);
}

template <class F>
double backward_second(F& f, double x, double h, int levels) {
  std::array<double, 3> d{};
  const double f0 = f(x);
  for (int i = 0; i < 3; ++i) {
    const double hi = h / std::pow(2.0, i);
    d[i] = (f0 - 2.0 * f(x - hi) + f(x - 2.0 * hi)) / (hi * hi);
  }
  return richardson(d, levels, 1, 1);
}

inline void check_converged(double a, double b, double tol, const char* what) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (std::abs(a - b) > tol * std::max(scale, 1e-300)) {
    throw ConvergenceError(std::string(what) + " did not converge under step halving (" +
                           std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail

/// First derivative of f at x by Richardson-extrapolated central differences.
///
/// Falls back to backward differences when f is undefined to the right of x,
/// i.e. throws DomainError or ConvergenceError there (MGFs at the edge of
/// their convergence region).
template <class F>
double derivative(F&& f, double x, const DiffOptions& opt = {}) {
  auto run = [&](double h) {
    try {
      return detail::central_first(f, x, h, opt.levels);
    } catch (const DomainError&) {
      return detail::backward_first(f, x, h, opt.levels);
    } catch (const ConvergenceError&) {
      return detail::backward_first(f, x, h, opt.levels);
    }
  };
  const double d = run(opt.step);
  if (opt.check) detail::check_converged(d, run(opt.step / 2.0), opt.tolerance, "first derivative");
  return d;
}

/// Second derivative; same fallback rule as derivative().
template <class F>
double second_derivative(F&& f, double x, const DiffOptions& opt = {}) {
  auto run = [&](double h) {
    try {
      return detail::central_second(f, x, h, opt.levels);
    } catch (const DomainError&) {
      return detail::backward_second(f, x, h, opt.levels);
    } catch (const ConvergenceError&) {
      return detail::backward_second(f, x, h, opt.levels);
    }
  };
  const double d = run(opt.step);
  if (opt.check) detail::check_converged(d, run(opt.step / 2.0), opt.tolerance, "second derivative");
  return d;
}

}  // namespace aoi
