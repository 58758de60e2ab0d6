#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aoi/analytic.hpp"
#include "aoi/bounds.hpp"
#include "aoi/config.hpp"
#include "aoi/simulator.hpp"

namespace aoi::experiments {

/// One sweep point. Empty optionals become empty CSV cells.
struct SweepRow {
  std::string series;
  double value = 0.0;
  std::optional<double> analytic_paper;
  std::optional<double> analytic_exact;
  std::optional<double> lb;
  std::optional<double> ub;
  std::optional<double> sim_mean;
  std::optional<double> sim_ci_low;
  std::optional<double> sim_ci_high;
  std::optional<std::uint64_t> runs;
  std::optional<std::uint64_t> seed;

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  json provenance;  // resolved configuration(s) and seed ledger

  bool operator==(const SweepResult& o) const { return rows == o.rows; }
};

inline constexpr const char* kCsvHeader =
    "series,value,analytic_paper,analytic_exact,lb,ub,sim_mean,sim_ci_low,sim_ci_high,runs,seed";

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <class T>
std::string cell(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

inline std::optional<std::uint64_t> parse_u64(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stoull(s);
}

}  // namespace detail

inline std::string to_csv(const SweepResult& result) {
  using detail::cell;
  std::string out = std::string(kCsvHeader) + "\n";
  for (const SweepRow& r : result.rows) {
    out += detail::quote_field(r.series) + "," + detail::format_double(r.value) + "," + cell(r.analytic_paper) + "," +
           cell(r.analytic_exact) + "," + cell(r.lb) + "," + cell(r.ub) + "," + cell(r.sim_mean) + "," +
           cell(r.sim_ci_low) + "," + cell(r.sim_ci_high) + "," + cell(r.runs) + "," + cell(r.seed) + "\n";
  }
  return out;
}

inline SweepResult parse_csv(std::string_view text) {
  SweepResult result;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (header) {
      if (line != kCsvHeader) throw std::runtime_error("unexpected CSV header");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 11) throw std::runtime_error("CSV row has " + std::to_string(f.size()) + " fields, expected 11");
    SweepRow r;
    r.series = f[0];
    r.value = std::stod(f[1]);
    r.analytic_paper = detail::parse_double(f[2]);
    r.analytic_exact = detail::parse_double(f[3]);
    r.lb = detail::parse_double(f[4]);
    r.ub = detail::parse_double(f[5]);
    r.sim_mean = detail::parse_double(f[6]);
    r.sim_ci_low = detail::parse_double(f[7]);
    r.sim_ci_high = detail::parse_double(f[8]);
    r.runs = detail::parse_u64(f[9]);
    r.seed = detail::parse_u64(f[10]);
    result.rows.push_back(std::move(r));
  }
  if (header) throw std::runtime_error("missing CSV header");
  return result;
}

/// Writes the CSV and, next to it, `<path>.meta.json` with the provenance.
inline void emit_csv(const SweepResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_csv(result);
  if (!out) throw std::runtime_error("I/O error writing " + path.string());
  if (!result.provenance.is_null()) {
    std::ofstream meta(path.string() + ".meta.json", std::ios::binary);
    if (!meta) throw std::runtime_error("cannot write " + path.string() + ".meta.json");
    meta << result.provenance.dump(2) << "\n";
  }
}

// ---------------------------------------------------------------------------
// JSON views of results
// ---------------------------------------------------------------------------

inline json to_json(const analytic::AgeMoments& m) {
  json j = {{"mode", analytic::to_string(m.mode)},
            {"source", m.source},
            {"mean_system_time", m.mean_system_time},
            {"mean_interdeparture", m.mean_interdeparture},
            {"second_interdeparture", m.second_interdeparture},
            {"average_aoi", m.average_aoi},
            {"average_paoi", m.average_paoi}};
  if (m.second_system_time) j["second_system_time"] = *m.second_system_time;
  if (m.second_paoi) j["second_paoi"] = *m.second_paoi;
  return j;
}

inline json to_json(const Interval& iv) {
  return {{"mean", iv.mean}, {"half_width", iv.half_width}, {"low", iv.low()}, {"high", iv.high()}};
}

inline json to_json(const sim::SourceEstimate& s) {
  return {{"source", s.source},
          {"aaoi", to_json(s.aaoi)},
          {"paoi", to_json(s.paoi)},
          {"mean_system_time", to_json(s.system_time)},
          {"mean_interdeparture", to_json(s.interdeparture)},
          {"second_interdeparture", to_json(s.interdeparture_sq)},
          {"drop_fraction", s.drop_fraction},
          {"min_cycles_per_run", s.min_cycles}};
}

inline json seed_ledger(const sim::SimEstimate& e) {
  return {{"base_seed", e.base_seed}, {"runs", e.runs}, {"seeds", e.seeds}, {"rule", "splitmix64(base ^ 0x9E3779B97F4A7C15*(r+1))"}};
}

inline json to_json(const sim::SimEstimate& e) {
  json sources = json::array();
  for (const auto& s : e.sources) sources.push_back(to_json(s));
  return {{"runs", e.runs}, {"confidence", e.confidence}, {"sources", sources}};
}

inline json to_json(const bounds::BoundPair& b) {
  return {{"source", b.source},
          {"lower", b.lower},
          {"lower_at_scenario_attack", b.lower_with_attack},
          {"upper", b.upper},
          {"upper_delay_at_caps", b.upper_conservative},
          {"attack_rate", b.attack_rate},
          {"beta", b.beta},
          {"lambda_max", b.caps.lambda_max},
          {"beta_max", b.caps.beta_max}};
}

// ---------------------------------------------------------------------------
// Sweeps and presets
// ---------------------------------------------------------------------------

struct PointOptions {
  bool simulate = true;
  SimSettings sim;
  bounds::DelayReading reading = bounds::DelayReading::scenario;
  std::size_t threads = 0;
};

/// Paper-mode AAoI, or nothing when the semi-Markov formulas do not apply
/// (no adversary, divergent series).
inline std::optional<double> try_paper_aoi(const Scenario& scn, std::size_t i) {
  if (scn.is_baseline()) return std::nullopt;
  try {
    return analytic::average_aoi(scn, i, analytic::Mode::paper);
  } catch (const ConvergenceError&) {
    return std::nullopt;
  }
}

inline SweepRow evaluate_point(const Scenario& scn, std::size_t i, const PointOptions& opt, std::string series,
                               double value) {
  SweepRow row;
  row.series = std::move(series);
  row.value = value;
  row.analytic_paper = try_paper_aoi(scn, i);
  row.analytic_exact = analytic::average_aoi(scn, i, analytic::Mode::exact);
  row.lb = bounds::lower_bound(scn, i, true);
  row.ub = bounds::upper_bound(scn, i, opt.reading);
  if (opt.simulate) {
    const sim::SimEstimate est =
        sim::run_batch(scn, opt.sim.options(), opt.sim.runs, opt.sim.seed, opt.sim.confidence, opt.threads);
    const Interval& iv = est.source(i).aaoi;
    row.sim_mean = iv.mean;
    row.sim_ci_low = iv.low();
    row.sim_ci_high = iv.high();
    row.runs = est.runs;
    row.seed = est.base_seed;
  }
  return row;
}

inline SweepResult run_sweep(const ScenarioConfig& cfg, std::size_t source, bool simulate = true) {
  if (!cfg.sweep) throw ConfigError("$.sweep", "configuration has no sweep");
  SweepResult result;
  result.provenance = {{"config", cfg.document}, {"source", source}, {"points", json::array()}};
  for (double v : cfg.sweep->values) {
    const ScenarioConfig point = config_at(cfg, v);
    PointOptions opt{simulate, point.sim, point.delay_reading, 0};
    result.rows.push_back(evaluate_point(point.scenario, source, opt, cfg.sweep->parameter, v));
    result.provenance["points"].push_back(point.document);
  }
  return result;
}

enum class PresetDist { pareto, erlang, hyperexp };

inline PresetDist parse_preset_dist(std::string_view name) {
  if (name == "pareto") return PresetDist::pareto;
  if (name == "erlang") return PresetDist::erlang;
  if (name == "hyperexp" || name == "hyperexp2") return PresetDist::hyperexp;
  throw ConfigError("--dist", "unknown preset distribution '" + std::string(name) + "'");
}

inline std::string to_string(PresetDist d) {
  switch (d) {
    case PresetDist::pareto: return "pareto";
    case PresetDist::erlang: return "erlang";
    case PresetDist::hyperexp: return "hyperexp";
  }
  return "?";
}

/// Pareto(1, 3), Erlang(2, 4/3), HyperExp2(0.5, 1, 0.5): all with mean 1.5.
inline ServiceModel preset_service(PresetDist d) {
  switch (d) {
    case PresetDist::pareto: return ServiceModel::pareto(1.0, 3.0);
    case PresetDist::erlang: return ServiceModel::erlang(2, 4.0 / 3.0);
    case PresetDist::hyperexp: return ServiceModel::hyperexp2(0.5, 1.0, 0.5);
  }
  throw std::logic_error("unreachable");
}

/// lambda_1 in {0.2, 0.4, ..., 3.0}.
inline std::vector<double> preset_rate_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 15; ++k) g.push_back(k / 5.0);
  return g;
}

inline const std::vector<double>& fig3_attack_rates() {
  static const std::vector<double> rates{0.0, 0.75, 1.5};
  return rates;
}

inline constexpr double kPresetBeta = 1.5;
inline constexpr double kFig4AttackRate = 1.0;

inline json preset_provenance(const std::string& name, PresetDist d, const PointOptions& opt) {
  return {{"preset", name},
          {"dist", to_string(d)},
          {"service", service_to_json(preset_service(d))},
          {"beta", kPresetBeta},
          {"caps", {{"lambda_max", ThreatCaps{}.lambda_max}, {"beta_max", ThreatCaps{}.beta_max}}},
          {"lambda_grid", preset_rate_grid()},
          {"sim",
           {{"enabled", opt.simulate},
            {"runs", opt.sim.runs},
            {"deliveries_per_run", opt.sim.deliveries_per_run},
            {"warmup_fraction", opt.sim.warmup_fraction},
            {"seed", opt.sim.seed},
            {"confidence", opt.sim.confidence}}}};
}

/// Two sources, attack rate in {0, 0.75, 1.5}, beta = 1.5; lambda_1 swept.
inline SweepResult preset_fig3(PresetDist d, const PointOptions& opt) {
  SweepResult result;
  result.provenance = preset_provenance("fig3", d, opt);
  result.provenance["attack_rates"] = fig3_attack_rates();
  for (double lc : fig3_attack_rates()) {
    std::ostringstream series;
    series << "lambda_2=" << lc;
    for (double l1 : preset_rate_grid()) {
      const Scenario scn = Scenario::two_source(l1, lc, preset_service(d), kPresetBeta);
      result.rows.push_back(evaluate_point(scn, 0, opt, series.str(), l1));
    }
  }
  return result;
}

/// N sources (N - 1 benign, all at lambda_1; adversary last at rate 1,
/// beta = 1.5); LB at the attack-free system, UB at (lambda_max, beta_max).
inline Scenario fig4_scenario(PresetDist d, int n, double lambda1) {
  if (n < 2) throw ConfigError("--n", "need at least two sources");
  std::vector<double> rates(static_cast<std::size_t>(n), lambda1);
  rates.back() = kFig4AttackRate;
  return Scenario::adversarial(rates, rates.size() - 1, preset_service(d), kPresetBeta);
}

inline SweepResult preset_fig4(PresetDist d, int n, const PointOptions& opt) {
  SweepResult result;
  result.provenance = preset_provenance("fig4", d, opt);
  result.provenance["sources"] = n;
  result.provenance["attack_rate"] = kFig4AttackRate;
  const std::string series = "N=" + std::to_string(n);
  for (double l1 : preset_rate_grid()) {
    result.rows.push_back(evaluate_point(fig4_scenario(d, n, l1), 0, opt, series, l1));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Validation report
// ---------------------------------------------------------------------------

struct ValidationReport {
  json report;
  bool all_inside = true;
};

/// Compares paper mode, exact mode, bounds and simulation for every benign
/// source. `all_inside` is false iff some exact-mode AAoI or mean PAoI falls
/// outside the simulation CI at the configured level.
inline ValidationReport validate(const ScenarioConfig& cfg, std::size_t threads = 0) {
  const Scenario& scn = cfg.scenario;
  const SimSettings& s = cfg.sim;
  const sim::SimEstimate est = sim::run_batch(scn, s.options(), s.runs, s.seed, s.confidence, threads);

  ValidationReport out;
  json sources = json::array();
  for (std::size_t i = 0; i < scn.num_sources(); ++i) {
    if (i == scn.adversary()) continue;
    json src;
    src["source"] = i;
    const analytic::AgeMoments exact = analytic::age_moments(scn, i, analytic::Mode::exact);
    src["exact"] = to_json(exact);
    if (scn.is_baseline()) {
      src["paper"] = {{"skipped", "paper-mode formulas need a positive attack rate"}};
    } else {
      try {
        const analytic::AgeMoments paper = analytic::age_moments(scn, i, analytic::Mode::paper);
        src["paper"] = to_json(paper);
        src["paper_minus_exact"] = {{"average_aoi", paper.average_aoi - exact.average_aoi},
                                    {"average_paoi", paper.average_paoi - exact.average_paoi}};
      } catch (const Error& e) {
        src["paper"] = {{"error", e.what()}};
      }
      const analytic::SojournSet set = analytic::sojourn_mgfs(scn, i);
      src["interdeparture_normalization"] = {{"literal_at_zero", set.interdeparture_mgf(0.0)},
                                             {"p_d_times_one_minus_p_d", set.p_d() * (1.0 - set.p_d())},
                                             {"normalized_at_zero", set.interdeparture_mgf_normalized(0.0)},
                                             {"p_d", set.p_d()},
                                             {"p_f", set.p_f()}};
    }
    src["bounds"] = to_json(bounds::bound_pair(scn, i));
    const sim::SourceEstimate& se = est.source(i);
    src["simulation"] = to_json(se);
    json checks = json::array();
    auto check = [&](const char* metric, double value, const Interval& iv) {
      const bool inside = iv.contains(value);
      out.all_inside = out.all_inside && inside;
      checks.push_back({{"metric", metric},
                        {"exact", value},
                        {"ci_low", iv.low()},
                        {"ci_high", iv.high()},
                        {"inside", inside}});
    };
    check("average_aoi", exact.average_aoi, se.aaoi);
    check("average_paoi", exact.average_paoi, se.paoi);
    src["checks"] = checks;
    src["sandwich"] = {{"lower_le_exact", bounds::lower_bound(scn, i, true) <= exact.average_aoi},
                       {"exact_le_upper", exact.average_aoi <= bounds::upper_bound(scn, i, cfg.delay_reading)}};
    sources.push_back(src);
  }
  out.report = {{"config", cfg.document},
                {"confidence", s.confidence},
                {"sources", sources},
                {"seed_ledger", seed_ledger(est)},
                {"all_inside", out.all_inside}};
  return out;
}

}  // namespace aoi::experiments
