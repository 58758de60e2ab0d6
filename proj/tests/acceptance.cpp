// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/analytic.hpp"
#include "aoi/bounds.hpp"
#include "aoi/experiments.hpp"
#include "aoi/numdiff.hpp"
#include "aoi/simulator.hpp"
#include "aoi/stats.hpp"

namespace {

using aoi::Interval;
using aoi::Scenario;
using aoi::ServiceModel;
namespace an = aoi::analytic;
namespace bd = aoi::bounds;
namespace ex = aoi::experiments;
namespace sim = aoi::sim;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

std::vector<ServiceModel> presets() {
  return {ServiceModel::pareto(1.0, 3.0), ServiceModel::erlang(2, 4.0 / 3.0), ServiceModel::hyperexp2(0.5, 1.0, 0.5)};
}

std::vector<ServiceModel> all_models() {
  auto v = presets();
  v.push_back(ServiceModel::exponential(2.0));
  v.push_back(ServiceModel::deterministic(1.5));
  return v;
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::string fmt(const Interval& iv) { return fmt(iv.mean) + " +- " + fmt(iv.half_width, 3); }

Interval simulate(const Scenario& scn, std::size_t source, std::uint64_t deliveries, double confidence,
                  std::uint64_t seed, bool paoi = false) {
  sim::SimOptions opt;
  opt.horizon = sim::Horizon::deliveries(deliveries);
  const auto est = sim::run_batch(scn, opt, 12, seed, confidence).source(source);
  return paoi ? est.paoi : est.aaoi;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// 1. Service-mean parity.
void service_mean_parity(Outcome& out) {
  std::uint64_t seed = 101;
  double worst_z = 0.0;
  for (const auto& m : presets()) {
    out.require(std::abs(m.mean() - 1.5) <= 1e-9, m.kind() + " analytic mean " + fmt(m.mean(), 17));
    aoi::Rng rng(seed++);
    const std::size_t n = 1'000'000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = m.sample(rng);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / (n - 1));
    const double z = std::abs(mean - 1.5) / se;
    worst_z = std::max(worst_z, z);
    out.require(z <= 3.0, m.kind() + " sample mean " + fmt(mean) + " is " + fmt(z, 3) + " SE from 1.5");
  }
  if (out.pass) out.detail << "analytic means 1.5, worst sample mean " << fmt(worst_z, 3) << " SE off (10^6 draws)";
}

// 2. No-adversary closed form.
void no_adversary_closed_form(Outcome& out) {
  const auto scn = Scenario::baseline({1.0, 0.0}, 1, ServiceModel::exponential(2.0 / 3.0));
  const auto m = an::age_moments(scn, 0, an::Mode::exact);
  out.require(std::abs(m.average_aoi - 3.4) <= 1e-12, "exact AAoI " + fmt(m.average_aoi, 17));
  out.require(std::abs(m.average_paoi - 4.0) <= 1e-12, "exact PAoI " + fmt(m.average_paoi, 17));
  sim::SimOptions opt;
  opt.horizon = sim::Horizon::deliveries(100'000);
  const auto est = sim::run_batch(scn, opt, 12, 2, 0.99).source(0);
  out.require(est.aaoi.contains(3.4), "AAoI CI " + fmt(est.aaoi) + " misses 3.4");
  out.require(est.paoi.contains(4.0), "PAoI CI " + fmt(est.paoi) + " misses 4.0");
  if (out.pass) out.detail << "exact 3.4 / 4.0; 99% CIs " << fmt(est.aaoi) << " / " << fmt(est.paoi);
}

// 3. Ordering of the presets under attack.
void preset_ordering(Outcome& out) {
  std::vector<Interval> ci;
  for (const auto& m : presets()) {
    ci.push_back(simulate(Scenario::two_source(1.0, 1.5, m, 1.5), 0, 100'000, 0.95, 3));
  }
  out.require(ci[0].low() > ci[1].high(), "Par " + fmt(ci[0]) + " not above Erl " + fmt(ci[1]));
  out.require(ci[1].low() > ci[2].high(), "Erl " + fmt(ci[1]) + " not above Hyp " + fmt(ci[2]));
  if (out.pass) out.detail << "Par " << fmt(ci[0]) << " > Erl " << fmt(ci[1]) << " > Hyp " << fmt(ci[2]);
}

// 4. Bound sandwich and the effect of more sources.
void bound_sandwich(Outcome& out) {
  ex::PointOptions opt;
  opt.sim.runs = 12;
  opt.sim.deliveries_per_run = 50'000;
  opt.sim.seed = 4;
  opt.sim.confidence = 0.95;
  opt.reading = bd::DelayReading::caps;
  int checked = 0;
  double min_lower_gap = std::numeric_limits<double>::infinity();
  double min_upper_gap = std::numeric_limits<double>::infinity();
  for (auto d : {ex::PresetDist::pareto, ex::PresetDist::erlang, ex::PresetDist::hyperexp}) {
    const auto two = ex::preset_fig4(d, 2, opt);
    const auto four = ex::preset_fig4(d, 4, opt);
    for (std::size_t k = 0; k < two.rows.size(); ++k) {
      const auto& a = two.rows[k];
      const auto& b = four.rows[k];
      const std::string at = ex::to_string(d) + " lambda_1=" + fmt(a.value);
      out.require(*a.lb <= *a.sim_ci_low, at + ": LB " + fmt(*a.lb) + " > sim low " + fmt(*a.sim_ci_low));
      out.require(*a.sim_ci_high <= *a.ub, at + ": sim high " + fmt(*a.sim_ci_high) + " > UB " + fmt(*a.ub));
      out.require(*b.sim_ci_high >= *a.sim_ci_low, at + ": N=4 " + fmt(*b.sim_mean) + " below N=2 " + fmt(*a.sim_mean));
      min_lower_gap = std::min(min_lower_gap, *a.sim_ci_low - *a.lb);
      min_upper_gap = std::min(min_upper_gap, *a.ub - *a.sim_ci_high);
      ++checked;
    }
  }
  if (out.pass) {
    out.detail << checked << " points; min margins: sim-CI above LB " << fmt(min_lower_gap, 3) << ", UB above sim-CI "
               << fmt(min_upper_gap, 3) << "; N=4 >= N=2 everywhere";
  }
}

// 5. Monotonicity in the attack rate and the slowdown factor.
void monotonicity(Outcome& out) {
  const std::vector<double> rates{0.25, 0.5, 1.0, 1.5, 2.0};
  const std::vector<double> betas{1.1, 1.5, 2.0};
  int exact_pairs = 0, sim_pairs = 0;
  std::uint64_t seed = 500;
  for (const auto& m : presets()) {
    std::vector<std::vector<double>> exact(rates.size(), std::vector<double>(betas.size()));
    std::vector<std::vector<Interval>> ci(rates.size(), std::vector<Interval>(betas.size()));
    for (std::size_t a = 0; a < rates.size(); ++a) {
      for (std::size_t b = 0; b < betas.size(); ++b) {
        const auto scn = Scenario::two_source(1.0, rates[a], m, betas[b]);
        exact[a][b] = an::average_aoi(scn, 0, an::Mode::exact);
        ci[a][b] = simulate(scn, 0, 50'000, 0.95, seed);
      }
    }
    ++seed;
    auto compare = [&](std::size_t a0, std::size_t b0, std::size_t a1, std::size_t b1) {
      const std::string at = m.kind() + " (" + fmt(rates[a0]) + "," + fmt(betas[b0]) + ") -> (" + fmt(rates[a1]) +
                             "," + fmt(betas[b1]) + ")";
      out.require(exact[a1][b1] >= exact[a0][b0], at + ": exact decreases");
      out.require(ci[a1][b1].high() >= ci[a0][b0].low(), at + ": simulated CIs separate downward");
      ++exact_pairs;
      ++sim_pairs;
    };
    for (std::size_t b = 0; b < betas.size(); ++b) {
      for (std::size_t a0 = 0; a0 < rates.size(); ++a0) {
        for (std::size_t a1 = a0 + 1; a1 < rates.size(); ++a1) compare(a0, b, a1, b);
      }
    }
    for (std::size_t a = 0; a < rates.size(); ++a) {
      for (std::size_t b0 = 0; b0 < betas.size(); ++b0) {
        for (std::size_t b1 = b0 + 1; b1 < betas.size(); ++b1) compare(a, b0, a, b1);
      }
    }
  }
  if (out.pass) out.detail << exact_pairs << " ordered pairs, exact nondecreasing, simulation consistent";
}

// 6. Exact mode inside the simulator's 99% interval.
void oracle_equivalence(Outcome& out) {
  int inside = 0, total = 0;
  std::uint64_t seed = 600;
  for (const auto& m : presets()) {
    for (double lc : {0.5, 1.5}) {
      for (double beta : {1.25, 2.0}) {
        const auto scn = Scenario::two_source(1.0, lc, m, beta);
        const auto exact = an::age_moments(scn, 0, an::Mode::exact);
        sim::SimOptions opt;
        opt.horizon = sim::Horizon::deliveries(100'000);
        const auto est = sim::run_batch(scn, opt, 12, seed++, 0.99).source(0);
        const std::string at = m.kind() + " lc=" + fmt(lc) + " beta=" + fmt(beta);
        const bool a = est.aaoi.contains(exact.average_aoi);
        const bool p = est.paoi.contains(exact.average_paoi);
        out.require(a, at + ": AAoI " + fmt(exact.average_aoi) + " outside " + fmt(est.aaoi));
        out.require(p, at + ": PAoI " + fmt(exact.average_paoi) + " outside " + fmt(est.paoi));
        inside += a + p;
        total += 2;
      }
    }
  }
  if (out.pass) out.detail << inside << "/" << total << " values inside 99% CIs over 12 scenarios";
}

// 7. Formula-fidelity checks.
void formula_fidelity(Outcome& out) {
  int scenarios = 0, strict = 0, tail_only = 0;
  double worst_norm = 0.0, worst_w = 0.0, worst_mt = 0.0;
  for (const auto& m : all_models()) {
    for (double lc : {0.75, 1.5}) {
      const auto scn = Scenario::two_source(1.0, lc, m, 1.5);
      const auto set = an::sojourn_mgfs(scn);
      const std::string at = m.kind() + " lc=" + fmt(lc);
      const double norm = std::abs(set.interdeparture_mgf(0.0) - set.p_d() * (1.0 - set.p_d()));
      worst_norm = std::max(worst_norm, norm);
      out.require(norm <= 1e-12, at + ": inter-departure MGF at 0 off by " + fmt(norm, 3));
      for (double w : {set.w1(0.0), set.w2(0.0), set.w3(0.0), set.w4(0.0), set.w5(0.0)}) {
        worst_w = std::max(worst_w, std::abs(w - 1.0));
        out.require(std::abs(w - 1.0) <= 1e-12, at + ": sojourn MGF at 0 is " + fmt(w, 17));
      }
      for (double s : {0.0, -0.5, -1.0, -2.0}) {
        const double closed = set.interdeparture_mgf(s);
        const double truncated = set.interdeparture_mgf_truncated(s, 200);
        const double ratio = (1.0 - set.p_f()) * set.w4(s);
        const double tail = closed * std::pow(ratio, 201);
        out.require(std::abs(truncated + tail - closed) <= 1e-12, at + " s=" + fmt(s) + ": tail identity fails");
        if (std::pow(ratio, 201) < 1e-12) {
          out.require(std::abs(truncated - closed) <= 1e-10, at + " s=" + fmt(s) + ": truncated sum off");
          ++strict;
        } else {
          ++tail_only;
        }
      }
      const double d = aoi::derivative([&](double s) { return an::system_time_mgf(scn, s); }, 0.0, an::first_diff(scn));
      const double r = rel(d, an::system_time_mean(scn));
      worst_mt = std::max(worst_mt, r);
      out.require(r <= 1e-6, at + ": M_T'(0) relative error " + fmt(r, 3));
      ++scenarios;
    }
  }
  if (out.pass) {
    out.detail << scenarios << " scenarios; |M_Y(0) - pD(1-pD)| <= " << fmt(worst_norm, 2) << ", |W_k(0) - 1| <= "
               << fmt(worst_w, 2) << ", M_T'(0) rel err <= " << fmt(worst_mt, 2) << "; truncated sum within 1e-10 at "
               << strict << " points, tail identity only at " << tail_only
               << " points where (1-pF)W4(s) is too close to 1 for 200 terms";
  }
}

// 8. Baseline lower bound reduces to E[S] + 1/lambda_1.
void lower_bound_reduction(Outcome& out) {
  int points = 0;
  double worst = 0.0;
  for (auto d : {ex::PresetDist::pareto, ex::PresetDist::erlang, ex::PresetDist::hyperexp}) {
    for (double l1 : ex::preset_rate_grid()) {
      const auto scn = ex::fig4_scenario(d, 2, l1);
      const double lb = bd::lower_bound(scn, 0, true);
      const double ref = scn.service().mean() + 1.0 / l1;
      const double ulps = std::abs(lb - ref) / (std::numeric_limits<double>::epsilon() * ref);
      worst = std::max(worst, ulps);
      out.require(ulps <= 1.0, ex::to_string(d) + " lambda_1=" + fmt(l1) + ": " + fmt(ulps, 3) + " ulp off");
      ++points;
    }
  }
  if (out.pass) out.detail << points << " points, max deviation " << fmt(worst, 2) << " ulp";
}

// 9. Byte-identical CLI output for identical config and seed.
std::string run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + AOI_CLI_PATH + "\" " + args;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string text;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) text.append(buf.data(), n);
  const int status = ::pclose(pipe);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw std::runtime_error("'" + args + "' failed");
  return text;
}

void determinism(Outcome& out) {
  const std::string config = std::string(AOI_SOURCE_DIR) + "/configs/two_source_erlang.json";
  const std::string a = run_cli("simulate --config \"" + config + "\"");
  const std::string b = run_cli("simulate --config \"" + config + "\"");
  out.require(!a.empty() && a == b, "outputs differ");
  if (out.pass) out.detail << "two runs, " << a.size() << " identical bytes";
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "service-mean parity", 5, service_mean_parity},
      {2, "no-adversary closed form", 30, no_adversary_closed_form},
      {3, "Par > Erl > Hyp ordering", 120, preset_ordering},
      {4, "bound sandwich, N=4 above N=2", 600, bound_sandwich},
      {5, "monotone in attack rate and slowdown", 300, monotonicity},
      {6, "exact mode inside simulation CIs", 600, oracle_equivalence},
      {7, "formula fidelity", 60, formula_fidelity},
      {8, "baseline lower bound reduction", 5, lower_bound_reduction},
      {9, "simulate is byte-reproducible", 120, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.require(seconds <= c.limit_seconds, "took " + fmt(seconds, 3) + " s, limit " + fmt(c.limit_seconds) + " s");
    failed += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << out.detail.str() << " ("
              << fmt(seconds, 3) << " s)" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
