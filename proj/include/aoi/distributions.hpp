#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "aoi/errors.hpp"
#include "aoi/rng.hpp"

namespace aoi {

struct Exponential {
  double rate;
};

struct Erlang {
  int shape;
  double rate;
};

struct Pareto {
  double scale;
  double shape;
};

// Two-branch hyper-exponential: rate1 with probability p, rate2 otherwise.
struct HyperExp2 {
  double p;
  double rate1;
  double rate2;
};

struct Deterministic {
  double value;
};

using ServiceVariant = std::variant<Exponential, Erlang, Pareto, HyperExp2, Deterministic>;

namespace detail {

inline constexpr int kMaxDerivOrder = 3;
inline constexpr double kParetoQuadTolerance = 1e-14;
inline constexpr unsigned kParetoQuadDepth = 30;

// n (n+1) ... (n+j-1)
inline double rising_factorial(double n, int j) {
  double r = 1.0;
  for (int i = 0; i < j; ++i) r *= n + i;
  return r;
}

inline double factorial(int j) { return rising_factorial(1.0, j); }

// d^j/ds^j (rate / (rate - s))^shape
inline double gamma_mgf_deriv(double shape, double rate, double s, int j) {
  return rising_factorial(shape, j) * std::pow(rate, shape) / std::pow(rate - s, shape + j);
}

// E_p(z) = int_1^inf w^{-p} e^{-z w} dw for z > 0 and real p.
inline double generalized_expint(double p, double z) {
  if (p < 1.0) return std::pow(z, p - 1.0) * boost::math::tgamma(1.0 - p, z);
  if (p == std::floor(p)) return boost::math::expint(static_cast<int>(p), z);
  // Upward recurrence E_{q+1} = (e^{-z} - z E_q) / q from q in (0, 1); it
  // cancels for large z, where direct quadrature is well conditioned instead.
  if (z <= 1.0) {
    double q = p - std::floor(p);
    double e = std::pow(z, q - 1.0) * boost::math::tgamma(1.0 - q, z);
    for (; q < p - 0.5; q += 1.0) e = (std::exp(-z) - z * e) / q;
    return e;
  }
  auto integrand = [p, z](double u) {
    if (u <= 0.0) return 0.0;
    return std::exp((p - 2.0) * std::log(u) - z / u);
  };
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, 1.0, kParetoQuadDepth,
                                                                      kParetoQuadTolerance, &error);
}

// E[S^k e^{sS}] for Pareto(scale, shape) at s < 0: shape scale^k E_{shape+1-k}(-s scale).
inline double pareto_partial_moment(const Pareto& d, double s, int k) {
  return d.shape * std::pow(d.scale, k) * generalized_expint(d.shape + 1.0 - k, -s * d.scale);
}

}  // namespace detail

/// Service-time distribution of a status update.
///
/// MGF evaluation is restricted to the convergence region: s < rate for the
/// exponential family, s <= 0 for Pareto, anywhere for a point mass. Asking
/// for an argument outside it throws DomainError rather than returning inf.
class ServiceModel {
 public:
  ServiceModel(Exponential d) : dist_(d) { validate(); }
  ServiceModel(Erlang d) : dist_(d) { validate(); }
  ServiceModel(Pareto d) : dist_(d) { validate(); }
  ServiceModel(HyperExp2 d) : dist_(d) { validate(); }
  ServiceModel(Deterministic d) : dist_(d) { validate(); }

  static ServiceModel exponential(double rate) { return Exponential{rate}; }
  static ServiceModel erlang(int shape, double rate) { return Erlang{shape, rate}; }
  static ServiceModel pareto(double scale, double shape) { return Pareto{scale, shape}; }
  static ServiceModel hyperexp2(double p, double rate1, double rate2) {
    return HyperExp2{p, rate1, rate2};
  }
  static ServiceModel deterministic(double value) { return Deterministic{value}; }

  const ServiceVariant& variant() const noexcept { return dist_; }

  std::string kind() const {
    return std::visit(
        [](const auto& d) -> std::string {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) return "exponential";
          else if constexpr (std::is_same_v<T, Erlang>) return "erlang";
          else if constexpr (std::is_same_v<T, Pareto>) return "pareto";
          else if constexpr (std::is_same_v<T, HyperExp2>) return "hyperexp2";
          else return "deterministic";
        },
        dist_);
  }

  /// Supremum of the MGF domain. `abscissa_inclusive()` tells whether the
  /// supremum itself belongs to it (only Pareto at 0).
  double abscissa() const noexcept {
    return std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return d.rate;
          } else if constexpr (std::is_same_v<T, Erlang>) {
            return d.rate;
          } else if constexpr (std::is_same_v<T, Pareto>) {
            return 0.0;
          } else if constexpr (std::is_same_v<T, HyperExp2>) {
            if (d.p == 0.0) return d.rate2;
            if (d.p == 1.0) return d.rate1;
            return std::min(d.rate1, d.rate2);
          } else {
            return std::numeric_limits<double>::infinity();
          }
        },
        dist_);
  }

  bool abscissa_inclusive() const noexcept { return std::holds_alternative<Pareto>(dist_); }

  bool in_domain(double s) const noexcept {
    const double a = abscissa();
    return abscissa_inclusive() ? s <= a : s < a;
  }

  double mean() const { return moment(1); }

  /// E[S^k] in closed form.
  double moment(int k) const {
    if (k < 0) throw std::invalid_argument("moment order must be non-negative");
    return std::visit(
        [k](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return detail::factorial(k) / std::pow(d.rate, k);
          } else if constexpr (std::is_same_v<T, Erlang>) {
            return detail::rising_factorial(d.shape, k) / std::pow(d.rate, k);
          } else if constexpr (std::is_same_v<T, Pareto>) {
            if (k >= d.shape) {
              throw UndefinedMomentError("Pareto moment of order " + std::to_string(k) +
                                         " requires shape > " + std::to_string(k));
            }
            return d.shape * std::pow(d.scale, k) / (d.shape - k);
          } else if constexpr (std::is_same_v<T, HyperExp2>) {
            const double f = detail::factorial(k);
            return d.p * f / std::pow(d.rate1, k) + (1.0 - d.p) * f / std::pow(d.rate2, k);
          } else {
            return std::pow(d.value, k);
          }
        },
        dist_);
  }

  double mgf(double s) const { return mgf_deriv(s, 0); }

  /// d^order/ds^order E[e^{sS}] = E[S^order e^{sS}], order in [0, 3].
  double mgf_deriv(double s, int order) const {
    if (order < 0 || order > detail::kMaxDerivOrder) {
      throw std::invalid_argument("mgf derivative order must be in [0, 3]");
    }
    if (!in_domain(s)) {
      throw DomainError(kind() + " MGF evaluated at s=" + std::to_string(s) +
                        " outside its convergence region");
    }
    if (s == 0.0) return moment(order);
    return std::visit(
        [s, order](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return detail::gamma_mgf_deriv(1.0, d.rate, s, order);
          } else if constexpr (std::is_same_v<T, Erlang>) {
            return detail::gamma_mgf_deriv(d.shape, d.rate, s, order);
          } else if constexpr (std::is_same_v<T, Pareto>) {
            return detail::pareto_partial_moment(d, s, order);
          } else if constexpr (std::is_same_v<T, HyperExp2>) {
            double v = 0.0;
            if (d.p > 0.0) v += d.p * detail::gamma_mgf_deriv(1.0, d.rate1, s, order);
            if (d.p < 1.0) v += (1.0 - d.p) * detail::gamma_mgf_deriv(1.0, d.rate2, s, order);
            return v;
          } else {
            return std::pow(d.value, order) * std::exp(s * d.value);
          }
        },
        dist_);
  }

  /// E[H^k; H < S] for an independent clock H ~ Exp(rate), rate > 0, k in
  /// {0, 1, 2}: the integral of t^k rate e^{-rate t} P(S > t). Free of the
  /// cancellation in (1 - M(-rate)) / rate - M'(-rate) for small rates.
  double interrupted_moment(double rate, int k) const {
    if (!(rate > 0.0)) throw std::invalid_argument("interrupted moment needs a positive rate");
    if (k < 0 || k > 2) throw std::invalid_argument("interrupted moment order must be in [0, 2]");
    auto exp_part = [rate, k](double mu, int n) {
      // int t^k rate e^{-rate t} e^{-mu t} (mu t)^n / n! dt
      return rate * std::pow(mu, n) * detail::factorial(k + n) / detail::factorial(n) /
             std::pow(mu + rate, k + n + 1);
    };
    auto head = [rate, k](double upto) {
      // int_0^upto t^k rate e^{-rate t} dt
      return boost::math::tgamma_lower(k + 1.0, rate * upto) / std::pow(rate, k);
    };
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return exp_part(d.rate, 0);
          } else if constexpr (std::is_same_v<T, Erlang>) {
            double v = 0.0;
            for (int n = 0; n < d.shape; ++n) v += exp_part(d.rate, n);
            return v;
          } else if constexpr (std::is_same_v<T, Pareto>) {
            return head(d.scale) +
                   rate * std::pow(d.scale, k + 1) * detail::generalized_expint(d.shape - k, rate * d.scale);
          } else if constexpr (std::is_same_v<T, HyperExp2>) {
            return d.p * exp_part(d.rate1, 0) + (1.0 - d.p) * exp_part(d.rate2, 0);
          } else {
            return head(d.value);
          }
        },
        dist_);
  }

  double cdf(double t) const {
    if (t < 0.0) return 0.0;
    return std::visit(
        [t](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return -std::expm1(-d.rate * t);
          } else if constexpr (std::is_same_v<T, Erlang>) {
            const double x = d.rate * t;
            double term = 1.0;
            double sum = 1.0;
            for (int n = 1; n < d.shape; ++n) {
              term *= x / n;
              sum += term;
            }
            return 1.0 - std::exp(-x) * sum;
          } else if constexpr (std::is_same_v<T, Pareto>) {
            return t < d.scale ? 0.0 : 1.0 - std::pow(d.scale / t, d.shape);
          } else if constexpr (std::is_same_v<T, HyperExp2>) {
            return d.p * -std::expm1(-d.rate1 * t) + (1.0 - d.p) * -std::expm1(-d.rate2 * t);
          } else {
            return t < d.value ? 0.0 : 1.0;
          }
        },
        dist_);
  }

  /// Density. A point mass has none.
  double pdf(double t) const {
    if (t < 0.0) return 0.0;
    return std::visit(
        [t](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return d.rate * std::exp(-d.rate * t);
          } else if constexpr (std::is_same_v<T, Erlang>) {
            return std::pow(d.rate, d.shape) * std::pow(t, d.shape - 1) * std::exp(-d.rate * t) /
                   detail::factorial(d.shape - 1);
          } else if constexpr (std::is_same_v<T, Pareto>) {
            return t < d.scale ? 0.0 : d.shape * std::pow(d.scale, d.shape) / std::pow(t, d.shape + 1);
          } else if constexpr (std::is_same_v<T, HyperExp2>) {
            return d.p * d.rate1 * std::exp(-d.rate1 * t) +
                   (1.0 - d.p) * d.rate2 * std::exp(-d.rate2 * t);
          } else {
            throw DomainError("deterministic service has no density");
          }
        },
        dist_);
  }

  double sample(Rng& rng) const {
    return std::visit(
        [&rng](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return rng.exponential(d.rate);
          } else if constexpr (std::is_same_v<T, Erlang>) {
            double v = 0.0;
            for (int n = 0; n < d.shape; ++n) v += rng.exponential(d.rate);
            return v;
          } else if constexpr (std::is_same_v<T, Pareto>) {
            return d.scale * std::pow(rng.uniform(), -1.0 / d.shape);
          } else if constexpr (std::is_same_v<T, HyperExp2>) {
            const double u = rng.uniform();
            return rng.exponential(u < d.p ? d.rate1 : d.rate2);
          } else {
            return d.value;
          }
        },
        dist_);
  }

 private:
  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(what) + " must be positive and finite");
      }
    };
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            positive(d.rate, "exponential rate");
          } else if constexpr (std::is_same_v<T, Erlang>) {
            if (d.shape < 1) throw std::invalid_argument("erlang shape must be a positive integer");
            positive(d.rate, "erlang rate");
          } else if constexpr (std::is_same_v<T, Pareto>) {
            positive(d.scale, "pareto scale");
            positive(d.shape, "pareto shape");
          } else if constexpr (std::is_same_v<T, HyperExp2>) {
            if (!(d.p >= 0.0 && d.p <= 1.0)) {
              throw std::invalid_argument("hyperexp2 p must lie in [0, 1]");
            }
            positive(d.rate1, "hyperexp2 rate1");
            positive(d.rate2, "hyperexp2 rate2");
          } else {
            positive(d.value, "deterministic value");
          }
        },
        dist_);
  }

  ServiceVariant dist_;
};

/// Slow-mode service S_s = beta * S_n.
class SlowdownModel {
 public:
  SlowdownModel(ServiceModel base, double beta) : base_(std::move(base)), beta_(beta) {
    if (!(beta >= 1.0) || !std::isfinite(beta)) {
      throw std::invalid_argument("slowdown factor must be >= 1");
    }
  }

  const ServiceModel& base() const noexcept { return base_; }
  double beta() const noexcept { return beta_; }

  bool in_domain(double s) const noexcept { return base_.in_domain(beta_ * s); }
  double mean() const { return beta_ * base_.mean(); }
  double moment(int k) const { return std::pow(beta_, k) * base_.moment(k); }
  double mgf(double s) const { return base_.mgf(beta_ * s); }
  double mgf_deriv(double s, int order) const {
    return std::pow(beta_, order) * base_.mgf_deriv(beta_ * s, order);
  }
  double cdf(double t) const { return base_.cdf(t / beta_); }
  double interrupted_moment(double rate, int k) const {
    return std::pow(beta_, k) * base_.interrupted_moment(rate * beta_, k);
  }
  double sample(Rng& rng) const { return beta_ * base_.sample(rng); }

 private:
  ServiceModel base_;
  double beta_;
};

/// Anything exposing E[X^k e^{sX}] and its domain.
template <class M>
concept MgfModel = requires(const M& m, double s, int k) {
  { m.mgf_deriv(s, k) } -> std::convertible_to<double>;
  { m.in_domain(s) } -> std::convertible_to<bool>;
  { m.moment(k) } -> std::convertible_to<double>;
  { m.interrupted_moment(s, k) } -> std::convertible_to<double>;
};

}  // namespace aoi
