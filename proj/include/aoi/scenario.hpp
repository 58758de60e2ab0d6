#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "aoi/distributions.hpp"
#include "aoi/errors.hpp"

namespace aoi {

/// Bounded-threat limits on the adversary.
struct ThreatCaps {
  double lambda_max = 2.0;
  double beta_max = 2.0;
};

/// Sources, adversary, service law and slowdown of one M/G/1/1 system.
///
/// `rates()[adversary()]` is the attack rate; every other entry is a benign
/// update rate. The total rate is always recomputed from the list.
class Scenario {
 public:
  /// Adversarial system: 0 < attack rate <= lambda_max, 1 < beta <= beta_max.
  static Scenario adversarial(std::vector<double> rates, std::size_t adversary, ServiceModel service,
                              double beta, ThreatCaps caps = {}) {
    Scenario scn(std::move(rates), adversary, std::move(service), beta, caps);
    scn.check_common();
    const double lc = scn.attack_rate();
    if (!(lc > 0.0)) throw InvalidScenarioError("attack rate must be positive (use baseline() for none)");
    if (lc > caps.lambda_max) {
      std::ostringstream os;
      os << "attack rate " << lc << " exceeds lambda_max " << caps.lambda_max
         << " (bounded-threat constraint)";
      throw InvalidScenarioError(os.str());
    }
    if (!(beta > 1.0)) throw InvalidScenarioError("slowdown factor beta must exceed 1");
    if (beta > caps.beta_max) {
      std::ostringstream os;
      os << "slowdown factor " << beta << " exceeds beta_max " << caps.beta_max
         << " (bounded-threat constraint)";
      throw InvalidScenarioError(os.str());
    }
    return scn;
  }

  /// No-adversary system: the adversary slot carries rate 0 and beta is 1.
  static Scenario baseline(std::vector<double> rates, std::size_t adversary, ServiceModel service,
                           ThreatCaps caps = {}) {
    if (adversary < rates.size()) rates[adversary] = 0.0;
    Scenario scn(std::move(rates), adversary, std::move(service), 1.0, caps);
    scn.check_common();
    return scn;
  }

  /// Benign source 0 at rate lambda1, adversary 1 at rate lambda2.
  static Scenario two_source(double lambda1, double lambda2, ServiceModel service, double beta,
                             ThreatCaps caps = {}) {
    if (lambda2 == 0.0) return baseline({lambda1, 0.0}, 1, std::move(service), caps);
    return adversarial({lambda1, lambda2}, 1, std::move(service), beta, caps);
  }

  /// Same system with a different attack (lambda_c = 0 gives the baseline).
  Scenario with_attack(double attack_rate, double beta) const {
    std::vector<double> r = rates_;
    r[adversary_] = attack_rate;
    if (attack_rate == 0.0) return baseline(std::move(r), adversary_, service_, caps_);
    return adversarial(std::move(r), adversary_, service_, beta, caps_);
  }

  Scenario with_caps(ThreatCaps caps) const {
    if (is_baseline()) return baseline(rates_, adversary_, service_, caps);
    return adversarial(rates_, adversary_, service_, beta_, caps);
  }

  Scenario with_rate(std::size_t source, double rate) const {
    std::vector<double> r = rates_;
    r.at(source) = rate;
    if (is_baseline()) return baseline(std::move(r), adversary_, service_, caps_);
    return adversarial(std::move(r), adversary_, service_, beta_, caps_);
  }

  std::span<const double> rates() const noexcept { return rates_; }
  double rate(std::size_t i) const { return rates_.at(i); }
  std::size_t num_sources() const noexcept { return rates_.size(); }
  std::size_t adversary() const noexcept { return adversary_; }
  double attack_rate() const noexcept { return rates_[adversary_]; }
  double total_rate() const noexcept { return std::accumulate(rates_.begin(), rates_.end(), 0.0); }
  double benign_rate() const noexcept { return total_rate() - attack_rate(); }
  double beta() const noexcept { return beta_; }
  const ThreatCaps& caps() const noexcept { return caps_; }
  const ServiceModel& service() const noexcept { return service_; }
  SlowdownModel slow_service() const { return SlowdownModel(service_, beta_); }
  bool is_baseline() const noexcept { return attack_rate() == 0.0; }

  /// First benign source index.
  std::size_t first_benign() const noexcept { return adversary_ == 0 ? 1 : 0; }

  /// Throws unless `i` names a benign source.
  void require_benign(std::size_t i) const {
    if (i >= rates_.size()) throw InvalidScenarioError("source index " + std::to_string(i) + " out of range");
    if (i == adversary_) throw InvalidScenarioError("source " + std::to_string(i) + " is the adversary");
  }

 private:
  Scenario(std::vector<double> rates, std::size_t adversary, ServiceModel service, double beta,
           ThreatCaps caps)
      : rates_(std::move(rates)), adversary_(adversary), service_(std::move(service)), beta_(beta), caps_(caps) {}

  void check_common() const {
    if (rates_.size() < 2) throw InvalidScenarioError("need at least one benign source and the adversary");
    if (adversary_ >= rates_.size()) throw InvalidScenarioError("adversary index out of range");
    for (std::size_t i = 0; i < rates_.size(); ++i) {
      if (i == adversary_) continue;
      if (!(rates_[i] > 0.0) || !std::isfinite(rates_[i])) {
        throw InvalidScenarioError("benign rate of source " + std::to_string(i) + " must be positive");
      }
    }
    if (!(caps_.lambda_max > 0.0) || !(caps_.beta_max > 1.0)) {
      throw InvalidScenarioError("caps require lambda_max > 0 and beta_max > 1");
    }
  }

  std::vector<double> rates_;
  std::size_t adversary_;
  ServiceModel service_;
  double beta_;
  ThreatCaps caps_;
};

}  // namespace aoi
