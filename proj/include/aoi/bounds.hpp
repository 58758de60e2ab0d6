#pragma once

#include <cstddef>

#include "aoi/analytic.hpp"
#include "aoi/scenario.hpp"

namespace aoi::bounds {

/// Where the upper bound evaluates its mean-system-time term.
enum class DelayReading {
  scenario,  // the scenario's own attack (literal reading, default)
  caps,      // the worst-case attack (lambda_max, beta_max)
};

/// AAoI lower bound E[T_i] + 1/lambda_i (exponential inter-arrivals of i).
///
/// With `baseline` the system time is that of the attack-free system, so the
/// bound is E[S] + 1/lambda_i.
inline double lower_bound(const Scenario& scn, std::size_t i, bool baseline) {
  scn.require_benign(i);
  const double delay = baseline ? scn.service().mean() : analytic::system_time_mean(scn);
  return delay + 1.0 / scn.rate(i);
}

/// Worst-case AAoI over every admissible attack: the renewal-reward age with
/// inter-departure moments taken at (lambda_max, beta_max).
inline double upper_bound(const Scenario& scn, std::size_t i, DelayReading reading = DelayReading::scenario) {
  scn.require_benign(i);
  const ThreatCaps& caps = scn.caps();
  if (scn.attack_rate() > caps.lambda_max || scn.beta() > caps.beta_max) {
    throw InvalidScenarioError("scenario exceeds its threat caps");
  }
  const Scenario worst = scn.with_attack(caps.lambda_max, caps.beta_max);
  const analytic::InterdepartureMoments y = analytic::interdeparture_moments_exact(worst, i);
  const Scenario& delay_scn = reading == DelayReading::caps ? worst : scn;
  const double delay = analytic::service_block_moments(delay_scn).mean;
  return delay + y.second / (2.0 * y.mean);
}

struct BoundPair {
  std::size_t source = 0;
  double lower = 0.0;              // baseline lower bound
  double lower_with_attack = 0.0;  // lower bound at the scenario's attack
  double upper = 0.0;              // DelayReading::scenario
  double upper_conservative = 0.0; // DelayReading::caps
  double attack_rate = 0.0;
  double beta = 1.0;
  ThreatCaps caps;
};

inline BoundPair bound_pair(const Scenario& scn, std::size_t i) {
  BoundPair b;
  b.source = i;
  b.lower = lower_bound(scn, i, true);
  b.lower_with_attack = lower_bound(scn, i, false);
  b.upper = upper_bound(scn, i, DelayReading::scenario);
  b.upper_conservative = upper_bound(scn, i, DelayReading::caps);
  b.attack_rate = scn.attack_rate();
  b.beta = scn.beta();
  b.caps = scn.caps();
  return b;
}

}  // namespace aoi::bounds
