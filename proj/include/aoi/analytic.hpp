#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "aoi/distributions.hpp"
#include "aoi/errors.hpp"
#include "aoi/numdiff.hpp"
#include "aoi/scenario.hpp"

namespace aoi::analytic {

/// `paper` evaluates the semi-Markov sojourn/inter-departure MGFs literally;
/// `exact` uses first-step analysis of the simulated (canonical) system.
enum class Mode { paper, exact };

inline std::string to_string(Mode m) { return m == Mode::paper ? "paper" : "exact"; }

/// Half-width of the band around a removable pole where series are used.
inline constexpr double kPoleBand = 1e-7;

/// Base step of numerical differentiation at s = 0, in units of 1 / total rate.
inline constexpr double kDiffStep = 1e-4;
inline constexpr double kSecondDiffStep = 1e-2;

inline DiffOptions first_diff(const Scenario& scn) {
  DiffOptions o;
  o.step = kDiffStep / scn.total_rate();
  return o;
}

inline DiffOptions second_diff(const Scenario& scn) {
  DiffOptions o;
  o.step = kSecondDiffStep / scn.total_rate();
  o.tolerance = 1e-5;
  return o;
}

namespace detail {

// Value and first two derivatives of a function at one point.
struct Jet {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

inline Jet operator*(const Jet& a, const Jet& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
inline Jet operator*(double c, const Jet& a) { return {c * a.v, c * a.d1, c * a.d2}; }
inline Jet operator-(double c, const Jet& a) { return {c - a.v, -a.d1, -a.d2}; }
inline Jet operator/(const Jet& a, const Jet& b) {
  const double q = a.v / b.v;
  const double q1 = (a.d1 - q * b.d1) / b.v;
  const double q2 = (a.d2 - 2.0 * q1 * b.d1 - q * b.d2) / b.v;
  return {q, q1, q2};
}

// s -> M(s + shift) at s = 0.
template <MgfModel M>
Jet mgf_jet(const M& m, double shift) {
  return {m.mgf_deriv(shift, 0), m.mgf_deriv(shift, 1), m.mgf_deriv(shift, 2)};
}

// (1 - M(x)) / (-x) near x = 0, i.e. M'(0) + x M''(0) / 2 + O(x^2).
template <MgfModel M>
double one_minus_mgf_over_minus_x(const M& m, double x) {
  double v = m.moment(1);
  try {
    v += x * m.moment(2) / 2.0;
  } catch (const UndefinedMomentError&) {
  }
  return v;
}

}  // namespace detail

/// E[e^{sH}; H < X] for a clock H ~ Exp(rate) racing X:
/// rate (1 - M_X(s - rate)) / (rate - s), continuous through s = rate.
template <MgfModel M>
double interrupted_transform(const M& m, double rate, double s) {
  if (rate == 0.0) return 0.0;
  const double x = s - rate;
  if (std::abs(x) < kPoleBand) return rate * detail::one_minus_mgf_over_minus_x(m, x);
  return rate * (1.0 - m.mgf_deriv(x, 0)) / (rate - s);
}

// ---------------------------------------------------------------------------
// System time (conditional on completing before the first negative arrival)
// ---------------------------------------------------------------------------

/// Probability that a normal-mode service beats the adversary: M_Sn(-lambda_c).
inline double delivery_probability(const Scenario& scn) {
  return scn.service().mgf(-scn.attack_rate());
}

/// M_Sn(s - lambda_c) / M_Sn(-lambda_c).
inline double system_time_mgf(const Scenario& scn, double s) {
  const double lc = scn.attack_rate();
  return scn.service().mgf(s - lc) / scn.service().mgf(-lc);
}

/// M'_Sn(-lambda_c) / M_Sn(-lambda_c).
inline double system_time_mean(const Scenario& scn) {
  const double lc = scn.attack_rate();
  return scn.service().mgf_deriv(-lc, 1) / scn.service().mgf(-lc);
}

// ---------------------------------------------------------------------------
// Paper mode: semi-Markov sojourns and the published inter-departure MGF
// ---------------------------------------------------------------------------

/// Rates entering the sojourn MGFs for one benign source.
struct SojournRates {
  double benign;  // lambda_i
  double attack;  // lambda_c
  double total;   // Lambda
};

/// The five normalized sojourn MGFs of the q0/q1/q2 cycle and the branch
/// probabilities p_D = M_Sn(-lambda_c), p_F = M_Ss(-Lambda).
class SojournSet {
 public:
  SojournSet(SojournRates rates, ServiceModel normal, double beta)
      : rates_(rates), normal_(normal), slow_(std::move(normal), beta) {
    if (!(rates_.attack > 0.0)) {
      throw InvalidScenarioError("sojourn MGFs require a positive attack rate");
    }
    p_d_ = normal_.mgf(-rates_.attack);
    p_f_ = slow_.mgf(-rates_.total);
  }

  const SojournRates& rates() const noexcept { return rates_; }
  double p_d() const noexcept { return p_d_; }
  double p_f() const noexcept { return p_f_; }

  double w1(double s) const { return rates_.benign / (rates_.benign - s); }

  double w2(double s) const { return normal_.mgf(s - rates_.attack) / p_d_; }

  double w3(double s) const {
    const double lc = rates_.attack;
    if (std::abs(s - lc) < kPoleBand) {
      return lc * detail::one_minus_mgf_over_minus_x(normal_, s - lc) / (1.0 - p_d_);
    }
    return lc * (1.0 - normal_.mgf(s - lc)) / ((s - lc) * (p_d_ - 1.0));
  }

  double w4(double s) const { return slow_.mgf(s - rates_.total) / p_f_; }

  double w5(double s) const {
    const double big = rates_.total;
    if (std::abs(s - big) < kPoleBand) {
      return big * detail::one_minus_mgf_over_minus_x(slow_, s - big) / (1.0 - p_f_);
    }
    return big * (1.0 - slow_.mgf(s - big)) / ((s - big) * (p_f_ - 1.0));
  }

  /// Geometric sum over m of the path weights, as printed. Equals
  /// p_D (1 - p_D) at s = 0.
  double interdeparture_mgf(double s) const {
    const double ratio = (1.0 - p_f_) * w4(s);
    if (!(ratio < 1.0)) {
      throw ConvergenceError("inter-departure series diverges: (1 - p_F) E[e^{sW4}] >= 1");
    }
    return p_d_ * p_f_ * (1.0 - p_d_) * w1(s) * w2(s) * w3(s) * w5(s) / (1.0 - ratio);
  }

  /// Same series summed term by term for m = 0..max_m.
  double interdeparture_mgf_truncated(double s, int max_m) const {
    const double head = p_d_ * p_f_ * (1.0 - p_d_) * w1(s) * w2(s) * w3(s) * w5(s);
    const double ratio = (1.0 - p_f_) * w4(s);
    double sum = 0.0;
    double term = head;
    for (int m = 0; m <= max_m; ++m) {
      sum += term;
      term *= ratio;
    }
    return sum;
  }

  double interdeparture_mgf_normalized(double s) const {
    return interdeparture_mgf(s) / interdeparture_mgf(0.0);
  }

  /// Literal inter-departure MGF and its first two derivatives at s = 0,
  /// propagated exactly through the sojourn factors.
  detail::Jet interdeparture_jet() const {
    using detail::Jet;
    const double lc = rates_.attack;
    const double big = rates_.total;
    const double l = rates_.benign;
    const Jet w1{1.0, 1.0 / l, 2.0 / (l * l)};
    const Jet w2 = (1.0 / p_d_) * detail::mgf_jet(normal_, -lc);
    const Jet w3 = (lc * (1.0 - detail::mgf_jet(normal_, -lc))) / Jet{-lc * (p_d_ - 1.0), p_d_ - 1.0, 0.0};
    const Jet w4 = (1.0 / p_f_) * detail::mgf_jet(slow_, -big);
    const Jet w5 = (big * (1.0 - detail::mgf_jet(slow_, -big))) / Jet{-big * (p_f_ - 1.0), p_f_ - 1.0, 0.0};
    const Jet head = (p_d_ * p_f_ * (1.0 - p_d_)) * (w1 * w2 * w3 * w5);
    return head / (1.0 - (1.0 - p_f_) * w4);
  }

 private:
  SojournRates rates_;
  ServiceModel normal_;
  SlowdownModel slow_;
  double p_d_ = 0.0;
  double p_f_ = 0.0;
};

/// Sojourn MGFs for benign source i (lambda_1 -> lambda_i, lambda_2 -> lambda_c).
inline SojournSet sojourn_mgfs(const Scenario& scn, std::size_t i) {
  scn.require_benign(i);
  if (scn.is_baseline()) throw InvalidScenarioError("sojourn MGFs are undefined without an adversary");
  return SojournSet({scn.rate(i), scn.attack_rate(), scn.total_rate()}, scn.service(), scn.beta());
}

inline SojournSet sojourn_mgfs(const Scenario& scn) { return sojourn_mgfs(scn, scn.first_benign()); }

inline double interdeparture_mgf_paper(const Scenario& scn, std::size_t i, double s) {
  return sojourn_mgfs(scn, i).interdeparture_mgf(s);
}

inline double interdeparture_mgf_paper_normalized(const Scenario& scn, std::size_t i, double s) {
  return sojourn_mgfs(scn, i).interdeparture_mgf_normalized(s);
}

namespace detail {

// AoI/PAoI transforms assembled from a system-time MGF and a normalized
// inter-departure MGF with known mean.
template <class SystemMgf, class InterMgf>
struct AgeTransform {
  SystemMgf system;
  InterMgf inter;
  double inter_mean;

  double aoi(double s) const {
    if (s == 0.0) return 1.0;
    return system(s) * (inter(s) - 1.0) / (s * inter_mean);
  }
  double paoi(double s) const { return system(s) * inter(s); }
};

inline auto paper_transform(SojournRates rates, const ServiceModel& service, double beta) {
  SojournSet set(rates, service, beta);
  const double lc = rates.attack;
  const Jet y = set.interdeparture_jet();
  auto system = [service, lc](double s) { return service.mgf(s - lc) / service.mgf(-lc); };
  auto inter = [set](double s) { return set.interdeparture_mgf_normalized(s); };
  return AgeTransform<decltype(system), decltype(inter)>{system, inter, y.d1 / y.v};
}

}  // namespace detail

/// Semi-Markov two-source formulas with explicit (lambda1, lambda2).
namespace two_source {

inline double aoi_mgf_paper(double lambda1, double lambda2, const ServiceModel& service, double beta,
                            double s) {
  const double total = lambda1 + lambda2;
  return detail::paper_transform({lambda1, lambda2, total}, service, beta).aoi(s);
}

inline double paoi_mgf_paper(double lambda1, double lambda2, const ServiceModel& service, double beta,
                             double s) {
  const double total = lambda1 + lambda2;
  return detail::paper_transform({lambda1, lambda2, total}, service, beta).paoi(s);
}

}  // namespace two_source

// ---------------------------------------------------------------------------
// Exact mode: first-step analysis of the canonical semantics
// ---------------------------------------------------------------------------

/// Partial moments of min(X, H) for X racing an independent H ~ Exp(rate),
/// split by which of the two finishes first.
struct RaceMoments {
  double p_done = 1.0;  // P(X < H)
  double done1 = 0.0;   // E[X; X < H]
  double done2 = 0.0;   // E[X^2; X < H]
  double p_cut = 0.0;   // P(H < X)
  double cut1 = 0.0;    // E[H; H < X]
  double cut2 = 0.0;    // E[H^2; H < X]
};

template <MgfModel M>
RaceMoments race_moments(const M& m, double rate) {
  RaceMoments r;
  if (rate == 0.0) {
    r.done1 = m.moment(1);
    r.done2 = m.moment(2);
    return r;
  }
  r.p_done = m.mgf_deriv(-rate, 0);
  r.done1 = m.mgf_deriv(-rate, 1);
  r.done2 = m.mgf_deriv(-rate, 2);
  r.p_cut = m.interrupted_moment(rate, 0);
  r.cut1 = m.interrupted_moment(rate, 1);
  r.cut2 = m.interrupted_moment(rate, 2);
  return r;
}

/// First two moments of a service block: the time from the start of normal
/// service (server leaving idle) to the delivery that ends it.
struct BlockMoments {
  double mean = 0.0;
  double second = 0.0;
};

/// Solves the first-step equations of the normal (q1) and slow (q2) states.
///
/// In q1 the service races the adversary (rate lambda_c); in q2 the slowed
/// service races the adversary and the slow-state expiry clock (rate Lambda).
inline BlockMoments service_block_moments(const Scenario& scn) {
  const double lc = scn.attack_rate();
  const double total = scn.total_rate();
  const double slow_rate = lc + total;
  const double to_slow = lc / slow_rate;     // restart in q2
  const double to_normal = total / slow_rate;  // expiry back to q1

  const RaceMoments n = race_moments(scn.service(), lc);
  if (n.p_cut == 0.0) return {n.done1, n.done2};
  const RaceMoments q = race_moments(scn.slow_service(), slow_rate);

  // [1, -n.p_cut; -to_normal q.p_cut, 1 - to_slow q.p_cut] [x_normal; x_slow] = rhs
  const double a11 = 1.0;
  const double a12 = -n.p_cut;
  const double a21 = -to_normal * q.p_cut;
  const double a22 = 1.0 - to_slow * q.p_cut;
  const double det = a11 * a22 - a12 * a21;
  auto solve = [&](double b1, double b2) {
    return std::pair{(b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det};
  };

  const auto [m_normal, m_slow] = solve(n.done1 + n.cut1, q.done1 + q.cut1);
  const auto [s_normal, s_slow] =
      solve(n.done2 + n.cut2 + 2.0 * n.cut1 * m_slow,
            q.done2 + q.cut2 + 2.0 * q.cut1 * (to_slow * m_slow + to_normal * m_normal));
  (void)s_slow;
  return {m_normal, s_normal};
}

/// MGF of the service block, from the same first-step equations in transform
/// form. Independent of service_block_moments() except for the model.
inline double service_block_mgf(const Scenario& scn, double s) {
  const double lc = scn.attack_rate();
  const double total = scn.total_rate();
  const double slow_rate = lc + total;
  const ServiceModel& normal = scn.service();
  const SlowdownModel slow = scn.slow_service();

  const double a = normal.mgf(s - lc);
  const double cut = interrupted_transform(normal, lc, s);
  if (lc == 0.0) return a;
  const double b = slow.mgf(s - slow_rate);
  const double slow_cut = interrupted_transform(slow, slow_rate, s);
  const double restart = (lc / slow_rate) * slow_cut;
  const double expire = (total / slow_rate) * slow_cut;
  return (a * (1.0 - restart) + cut * b) / (1.0 - restart - cut * expire);
}

struct InterdepartureMoments {
  double mean = 0.0;
  double second = 0.0;
};

/// Inter-departure moments of source i. After a delivery the server idles for
/// Exp(benign rate); the next accepted update belongs to i with probability
/// lambda_i / benign rate, so Y_i is a geometric sum of idle-plus-block cycles.
inline InterdepartureMoments interdeparture_moments_exact(const Scenario& scn, std::size_t i) {
  scn.require_benign(i);
  const double benign = scn.benign_rate();
  const double p = scn.rate(i) / benign;
  const BlockMoments b = service_block_moments(scn);
  const double c1 = 1.0 / benign + b.mean;
  const double c2 = 2.0 / (benign * benign) + 2.0 * b.mean / benign + b.second;
  return {c1 / p, c2 / p + 2.0 * (1.0 - p) / (p * p) * c1 * c1};
}

inline double interdeparture_mgf_exact(const Scenario& scn, std::size_t i, double s) {
  scn.require_benign(i);
  const double benign = scn.benign_rate();
  const double p = scn.rate(i) / benign;
  const double cycle = benign / (benign - s) * service_block_mgf(scn, s);
  return p * cycle / (1.0 - (1.0 - p) * cycle);
}

namespace detail {

inline auto exact_transform(const Scenario& scn, std::size_t i) {
  const double inter_mean = interdeparture_moments_exact(scn, i).mean;
  auto system = [scn](double s) { return service_block_mgf(scn, s); };
  auto inter = [scn, i](double s) { return interdeparture_mgf_exact(scn, i, s); };
  return AgeTransform<decltype(system), decltype(inter)>{system, inter, inter_mean};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Age metrics
// ---------------------------------------------------------------------------

/// M_A(s) = M_T(s) (M_Y(s) - 1) / (s M_Y'(0)); 1 at s = 0.
inline double aoi_mgf(const Scenario& scn, std::size_t i, Mode mode, double s) {
  scn.require_benign(i);
  if (mode == Mode::exact) return detail::exact_transform(scn, i).aoi(s);
  return detail::paper_transform({scn.rate(i), scn.attack_rate(), scn.total_rate()}, scn.service(), scn.beta())
      .aoi(s);
}

/// M_P(s) = M_T(s) M_Y(s).
inline double paoi_mgf(const Scenario& scn, std::size_t i, Mode mode, double s) {
  scn.require_benign(i);
  if (mode == Mode::exact) return detail::exact_transform(scn, i).paoi(s);
  return detail::paper_transform({scn.rate(i), scn.attack_rate(), scn.total_rate()}, scn.service(), scn.beta())
      .paoi(s);
}

/// Per-source age summary.
struct AgeMoments {
  Mode mode = Mode::exact;
  std::size_t source = 0;
  double mean_system_time = 0.0;
  double mean_interdeparture = 0.0;
  double second_interdeparture = 0.0;
  double average_aoi = 0.0;
  double average_paoi = 0.0;
  std::optional<double> second_system_time;
  std::optional<double> second_paoi;
};

inline AgeMoments age_moments(const Scenario& scn, std::size_t i, Mode mode) {
  scn.require_benign(i);
  AgeMoments out;
  out.mode = mode;
  out.source = i;
  if (mode == Mode::exact) {
    const BlockMoments t = service_block_moments(scn);
    const InterdepartureMoments y = interdeparture_moments_exact(scn, i);
    out.mean_system_time = t.mean;
    out.mean_interdeparture = y.mean;
    out.second_interdeparture = y.second;
    out.average_aoi = t.mean + y.second / (2.0 * y.mean);
    out.average_paoi = t.mean + y.mean;
    out.second_system_time = t.second;
    // T_{j-1} and Y_j are independent: the system regenerates at deliveries.
    out.second_paoi = t.second + 2.0 * t.mean * y.mean + y.second;
    return out;
  }
  // Exact derivatives of the normalized transforms at 0:
  // M_A'(0) = E[T] + E[Y^2] / (2 E[Y]) and M_P'(0) = E[T] + E[Y].
  const detail::Jet y = sojourn_mgfs(scn, i).interdeparture_jet();
  const double lc = scn.attack_rate();
  const double p_d = scn.service().mgf(-lc);
  const double t1 = scn.service().mgf_deriv(-lc, 1) / p_d;
  const double t2 = scn.service().mgf_deriv(-lc, 2) / p_d;
  out.mean_system_time = t1;
  out.mean_interdeparture = y.d1 / y.v;
  out.second_interdeparture = y.d2 / y.v;
  out.average_aoi = t1 + out.second_interdeparture / (2.0 * out.mean_interdeparture);
  out.average_paoi = t1 + out.mean_interdeparture;
  out.second_system_time = t2;
  out.second_paoi = t2 + 2.0 * t1 * out.mean_interdeparture + out.second_interdeparture;
  return out;
}

inline double average_aoi(const Scenario& scn, std::size_t i, Mode mode) {
  return age_moments(scn, i, mode).average_aoi;
}

inline double average_paoi(const Scenario& scn, std::size_t i, Mode mode) {
  return age_moments(scn, i, mode).average_paoi;
}

}  // namespace aoi::analytic
