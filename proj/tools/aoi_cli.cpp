// aoi: age-of-information analysis for M/G/1/1 systems under negative arrivals.
//
// Exit codes: 0 success, 1 validation failure (exact value outside a
// simulation CI), 2 configuration or usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "aoi/analytic.hpp"
#include "aoi/bounds.hpp"
#include "aoi/config.hpp"
#include "aoi/experiments.hpp"
#include "aoi/simulator.hpp"

namespace {

using aoi::json;

constexpr int kOk = 0;
constexpr int kValidationFailed = 1;
constexpr int kConfigError = 2;

std::size_t pick_source(const aoi::Scenario& scn, std::optional<std::size_t> source) {
  const std::size_t i = source.value_or(scn.first_benign());
  scn.require_benign(i);
  return i;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_analytic(const std::string& config, std::optional<std::size_t> source, const std::string& mode) {
  const auto cfg = aoi::load_config(config);
  const std::size_t i = pick_source(cfg.scenario, source);
  json out = {{"config", cfg.document}, {"source", i}};
  if (mode == "exact" || mode == "both") {
    out["exact"] = aoi::experiments::to_json(aoi::analytic::age_moments(cfg.scenario, i, aoi::analytic::Mode::exact));
  }
  if (mode == "paper" || mode == "both") {
    if (cfg.scenario.is_baseline()) {
      if (mode == "paper") throw aoi::ConfigError("$.adversary.rate", "paper mode needs a positive attack rate");
      out["paper"] = {{"skipped", "paper-mode formulas need a positive attack rate"}};
    } else {
      out["paper"] =
          aoi::experiments::to_json(aoi::analytic::age_moments(cfg.scenario, i, aoi::analytic::Mode::paper));
    }
  }
  print(out);
  return kOk;
}

void write_trace(const aoi::ScenarioConfig& cfg, const std::string& path, std::size_t max_events) {
  aoi::sim::SimOptions opt = cfg.sim.options();
  opt.trace_limit = max_events;
  const auto run = aoi::sim::run_single(cfg.scenario, opt, aoi::derive_seed(cfg.sim.seed, 0));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace " + path);
  out << "time,event,source,server_state,age\n";
  char buf[64];
  for (const auto& r : run.trace) {
    std::snprintf(buf, sizeof buf, "%.17g", r.time);
    out << buf << "," << aoi::sim::to_string(r.event) << "," << r.source << "," << aoi::sim::to_string(r.state) << ",";
    if (r.age == r.age) {
      std::snprintf(buf, sizeof buf, "%.17g", r.age);
      out << buf;
    }
    out << "\n";
  }
}

int cmd_simulate(const std::string& config, const std::string& trace, std::size_t max_events) {
  const auto cfg = aoi::load_config(config);
  const auto est = aoi::sim::run_batch(cfg.scenario, cfg.sim.options(), cfg.sim.runs, cfg.sim.seed, cfg.sim.confidence);
  if (!trace.empty()) write_trace(cfg, trace, max_events);
  print({{"config", cfg.document},
         {"estimate", aoi::experiments::to_json(est)},
         {"seed_ledger", aoi::experiments::seed_ledger(est)}});
  return kOk;
}

int cmd_bounds(const std::string& config, std::optional<std::size_t> source) {
  const auto cfg = aoi::load_config(config);
  json list = json::array();
  for (std::size_t i = 0; i < cfg.scenario.num_sources(); ++i) {
    if (i == cfg.scenario.adversary() || (source && *source != i)) continue;
    list.push_back(aoi::experiments::to_json(aoi::bounds::bound_pair(cfg.scenario, i)));
  }
  if (source) pick_source(cfg.scenario, source);
  print({{"config", cfg.document}, {"bounds", list}});
  return kOk;
}

int cmd_sweep(const std::string& config, const std::string& out, std::optional<std::size_t> source, bool no_sim) {
  const auto cfg = aoi::load_config(config);
  const std::size_t i = pick_source(cfg.scenario, source);
  aoi::experiments::emit_csv(aoi::experiments::run_sweep(cfg, i, !no_sim), out);
  return kOk;
}

int cmd_validate(const std::string& config, const std::string& out) {
  const auto cfg = aoi::load_config(config);
  const auto v = aoi::experiments::validate(cfg);
  if (out.empty() || out == "-") {
    print(v.report);
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << v.report.dump(2) << "\n";
  }
  if (!v.all_inside) {
    std::cerr << "validation failed: an exact-mode value lies outside the simulation confidence interval\n";
    return kValidationFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-of-information metrics for bufferless M/G/1/1 systems with adversarial negative arrivals"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string mode = "both";
  std::string trace;
  std::size_t max_events = 10000;
  std::optional<std::size_t> source;
  bool no_sim = false;

  auto* analytic = app.add_subcommand("analytic", "Closed-form age moments as JSON");
  analytic->add_option("--config", config, "Scenario config (JSON)")->required();
  analytic->add_option("--source", source, "Benign source index (default: first benign)");
  analytic->add_option("--mode", mode, "paper | exact | both")->check(CLI::IsMember({"paper", "exact", "both"}));

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate as JSON");
  simulate->add_option("--config", config, "Scenario config (JSON)")->required();
  simulate->add_option("--trace", trace, "Write an event trace CSV of replication 0");
  simulate->add_option("--max-events", max_events, "Trace row cap");

  auto* bounds = app.add_subcommand("bounds", "AAoI lower/upper bounds as JSON");
  bounds->add_option("--config", config, "Scenario config (JSON)")->required();
  bounds->add_option("--source", source, "Benign source index (default: all)");

  auto* sweep = app.add_subcommand("sweep", "Sweep the config's sweep.parameter and write CSV");
  sweep->add_option("--config", config, "Scenario config (JSON)")->required();
  sweep->add_option("--out", out, "Output CSV")->required();
  sweep->add_option("--source", source, "Benign source index (default: first benign)");
  sweep->add_flag("--no-sim", no_sim, "Analytic columns only");

  std::string dist = "erlang";
  int n_sources = 2;
  aoi::experiments::PointOptions preset_opt;
  bool delay_at_caps = false;
  auto* preset = app.add_subcommand("preset", "Reproduce the figure data sets");
  preset->require_subcommand(1);
  auto add_preset_options = [&](CLI::App* p) {
    p->add_option("--dist", dist, "pareto | erlang | hyperexp")->check(CLI::IsMember({"pareto", "erlang", "hyperexp"}));
    p->add_option("--out", out, "Output CSV")->required();
    p->add_option("--runs", preset_opt.sim.runs, "Replications per point (default 12)");
    p->add_option("--deliveries", preset_opt.sim.deliveries_per_run, "Deliveries per replication (default 100000)");
    p->add_option("--seed", preset_opt.sim.seed, "Base seed (default 1)");
    p->add_option("--confidence", preset_opt.sim.confidence, "CI level (default 0.95)");
    p->add_flag("--no-sim", no_sim, "Analytic columns only");
    p->add_flag("--delay-at-caps", delay_at_caps, "Evaluate the UB delay term at (lambda_max, beta_max)");
  };
  auto* fig3 = preset->add_subcommand(
      "fig3",
      "Two sources, lambda_1 in {0.2, 0.4, ..., 3.0}, attack rate lambda_2 in {0, 0.75, 1.5}, beta = 1.5");
  add_preset_options(fig3);
  auto* fig4 = preset->add_subcommand(
      "fig4",
      "LB / UB / Num. versus lambda_1 in {0.2, ..., 3.0}; Num. uses lambda_c = 1, beta = 1.5; "
      "all N-1 benign sources share lambda_1; caps lambda_max = beta_max = 2");
  add_preset_options(fig4);
  fig4->add_option("--n", n_sources, "Number of sources (2 or 4)")->check(CLI::IsMember({2, 4}));

  auto* validate = app.add_subcommand("validate", "Compare paper mode, exact mode, bounds and simulation");
  validate->add_option("--config", config, "Scenario config (JSON)")->required();
  validate->add_option("--out", out, "Report path (JSON); '-' for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*analytic) return cmd_analytic(config, source, mode);
    if (*simulate) return cmd_simulate(config, trace, max_events);
    if (*bounds) return cmd_bounds(config, source);
    if (*sweep) return cmd_sweep(config, out, source, no_sim);
    if (*validate) return cmd_validate(config, out);
    if (*preset) {
      preset_opt.simulate = !no_sim;
      if (delay_at_caps) preset_opt.reading = aoi::bounds::DelayReading::caps;
      if (preset_opt.sim.runs < 2) throw aoi::ConfigError("--runs", "must be at least 2");
      const auto d = aoi::experiments::parse_preset_dist(dist);
      const auto result = *fig3 ? aoi::experiments::preset_fig3(d, preset_opt)
                                : aoi::experiments::preset_fig4(d, n_sources, preset_opt);
      aoi::experiments::emit_csv(result, out);
      return kOk;
    }
  } catch (const aoi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const aoi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
