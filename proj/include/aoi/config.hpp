#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aoi/bounds.hpp"
#include "aoi/distributions.hpp"
#include "aoi/errors.hpp"
#include "aoi/scenario.hpp"
#include "aoi/simulator.hpp"

namespace aoi {

using nlohmann::json;

struct SimSettings {
  std::size_t runs = 12;
  std::uint64_t deliveries_per_run = 100000;
  std::optional<double> time_horizon;  // replaces the delivery horizon when set
  double warmup_fraction = 0.1;
  std::uint64_t seed = 1;
  double confidence = 0.95;

  sim::SimOptions options() const {
    sim::SimOptions o;
    o.horizon = time_horizon ? sim::Horizon::time(*time_horizon) : sim::Horizon::deliveries(deliveries_per_run);
    o.warmup_fraction = warmup_fraction;
    return o;
  }
};

struct SweepSpec {
  std::string parameter;  // dotted path into the config, e.g. "sources.0.rate"
  std::vector<double> values;
};

/// A validated scenario configuration. `document` is the resolved JSON with
/// every default filled in; re-parsing it yields the same configuration.
struct ScenarioConfig {
  json document;
  Scenario scenario;
  SimSettings sim;
  std::optional<SweepSpec> sweep;
  bounds::DelayReading delay_reading = bounds::DelayReading::scenario;
};

namespace detail {

inline std::string child(const std::string& path, const std::string& key) { return path + "." + key; }
inline std::string child(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(child(path, key), "unknown key");
  }
}

inline double get_number(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) throw ConfigError(child(path, key), "missing required number");
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(child(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(child(path, key), "must be finite");
  return d;
}

inline double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
  return obj.contains(key) ? get_number(obj, path, key) : fallback;
}

inline double get_positive(const json& obj, const std::string& path, const char* key) {
  const double d = get_number(obj, path, key);
  if (!(d > 0.0)) throw ConfigError(child(path, key), "must be positive");
  return d;
}

inline std::uint64_t get_count(const json& obj, const std::string& path, const char* key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ConfigError(child(path, key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline ServiceModel parse_service(const json& j, const std::string& path) {
  require_object(j, path);
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError(child(path, "kind"), "expected a string");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "exponential") {
      allow_keys(j, path, {"kind", "rate"});
      return ServiceModel::exponential(get_positive(j, path, "rate"));
    }
    if (kind == "erlang") {
      allow_keys(j, path, {"kind", "shape", "rate"});
      const std::uint64_t k = get_count(j, path, "shape", 0);
      if (k < 1) throw ConfigError(child(path, "shape"), "must be a positive integer");
      return ServiceModel::erlang(static_cast<int>(k), get_positive(j, path, "rate"));
    }
    if (kind == "pareto") {
      allow_keys(j, path, {"kind", "scale", "shape"});
      return ServiceModel::pareto(get_positive(j, path, "scale"), get_positive(j, path, "shape"));
    }
    if (kind == "hyperexp2") {
      allow_keys(j, path, {"kind", "p", "rate1", "rate2"});
      const double p = get_number(j, path, "p");
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(child(path, "p"), "must lie in [0, 1]");
      return ServiceModel::hyperexp2(p, get_positive(j, path, "rate1"), get_positive(j, path, "rate2"));
    }
    if (kind == "deterministic") {
      allow_keys(j, path, {"kind", "value"});
      return ServiceModel::deterministic(get_positive(j, path, "value"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(child(path, "kind"),
                    "unknown distribution '" + kind + "' (expected pareto, erlang, hyperexp2, exponential, deterministic)");
}

inline json service_to_json(const ServiceModel& m) {
  return std::visit(
      [](const auto& d) -> json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Exponential>) {
          return {{"kind", "exponential"}, {"rate", d.rate}};
        } else if constexpr (std::is_same_v<T, Erlang>) {
          return {{"kind", "erlang"}, {"shape", d.shape}, {"rate", d.rate}};
        } else if constexpr (std::is_same_v<T, Pareto>) {
          return {{"kind", "pareto"}, {"scale", d.scale}, {"shape", d.shape}};
        } else if constexpr (std::is_same_v<T, HyperExp2>) {
          return {{"kind", "hyperexp2"}, {"p", d.p}, {"rate1", d.rate1}, {"rate2", d.rate2}};
        } else {
          return {{"kind", "deterministic"}, {"value", d.value}};
        }
      },
      m.variant());
}

// "sources.0.rate" -> "/sources/0/rate"
inline json::json_pointer sweep_pointer(const std::string& dotted) {
  std::string ptr;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("$.sweep.parameter", "malformed path '" + dotted + "'");
    ptr += "/" + part;
  }
  return json::json_pointer(ptr);
}

}  // namespace detail

inline json service_to_json(const ServiceModel& m) { return detail::service_to_json(m); }

/// Validates `j` against the scenario schema. Unknown keys, missing fields and
/// bounded-threat violations raise ConfigError naming the JSON path.
inline ScenarioConfig parse_config(const json& j) {
  using namespace detail;
  const std::string root = "$";
  require_object(j, root);
  allow_keys(j, root, {"sources", "adversary", "caps", "service", "sim", "sweep", "bounds"});

  // sources
  if (!j.contains("sources") || !j.at("sources").is_array() || j.at("sources").empty()) {
    throw ConfigError("$.sources", "expected a non-empty array of {\"rate\": ...}");
  }
  std::vector<double> benign;
  for (std::size_t k = 0; k < j.at("sources").size(); ++k) {
    const json& s = j.at("sources")[k];
    const std::string p = child("$.sources", k);
    require_object(s, p);
    allow_keys(s, p, {"rate"});
    benign.push_back(get_positive(s, p, "rate"));
  }

  // caps
  ThreatCaps caps;
  if (j.contains("caps")) {
    const json& c = j.at("caps");
    require_object(c, "$.caps");
    allow_keys(c, "$.caps", {"lambda_max", "beta_max"});
    caps.lambda_max = get_number(c, "$.caps", "lambda_max", caps.lambda_max);
    caps.beta_max = get_number(c, "$.caps", "beta_max", caps.beta_max);
    if (!(caps.lambda_max > 0.0)) throw ConfigError("$.caps.lambda_max", "must be positive");
    if (!(caps.beta_max > 1.0)) throw ConfigError("$.caps.beta_max", "must exceed 1");
  }

  // adversary
  if (!j.contains("adversary")) throw ConfigError("$.adversary", "missing required object");
  const json& a = j.at("adversary");
  require_object(a, "$.adversary");
  allow_keys(a, "$.adversary", {"index", "rate", "beta"});
  const std::uint64_t index = get_count(a, "$.adversary", "index", benign.size());
  if (index > benign.size()) {
    throw ConfigError("$.adversary.index", "must be in [0, " + std::to_string(benign.size()) + "]");
  }
  const double attack = get_number(a, "$.adversary", "rate");
  if (attack < 0.0) throw ConfigError("$.adversary.rate", "must be non-negative");
  if (attack > caps.lambda_max) {
    std::ostringstream os;
    os << "attack rate " << attack << " exceeds lambda_max " << caps.lambda_max << " (bounded-threat constraint)";
    throw ConfigError("$.adversary.rate", os.str());
  }
  double beta = 1.0;
  if (attack > 0.0) {
    beta = get_number(a, "$.adversary", "beta");
    if (!(beta > 1.0)) throw ConfigError("$.adversary.beta", "must exceed 1 when the attack rate is positive");
    if (beta > caps.beta_max) {
      std::ostringstream os;
      os << "slowdown factor " << beta << " exceeds beta_max " << caps.beta_max << " (bounded-threat constraint)";
      throw ConfigError("$.adversary.beta", os.str());
    }
  } else if (a.contains("beta")) {
    const double b = get_number(a, "$.adversary", "beta");
    if (!(b >= 1.0)) throw ConfigError("$.adversary.beta", "must be at least 1");
  }

  // service
  if (!j.contains("service")) throw ConfigError("$.service", "missing required object");
  ServiceModel service = parse_service(j.at("service"), "$.service");

  std::vector<double> rates = benign;
  rates.insert(rates.begin() + static_cast<std::ptrdiff_t>(index), attack);
  std::optional<Scenario> scn;
  try {
    scn = attack > 0.0 ? Scenario::adversarial(rates, index, service, beta, caps)
                       : Scenario::baseline(rates, index, service, caps);
  } catch (const InvalidScenarioError& e) {
    throw ConfigError("$", e.what());
  }

  // sim
  SimSettings sim;
  if (j.contains("sim")) {
    const json& s = j.at("sim");
    const std::string p = "$.sim";
    require_object(s, p);
    allow_keys(s, p, {"runs", "deliveries_per_run", "time_horizon", "warmup_fraction", "seed", "confidence"});
    sim.runs = get_count(s, p, "runs", sim.runs);
    sim.deliveries_per_run = get_count(s, p, "deliveries_per_run", sim.deliveries_per_run);
    if (s.contains("time_horizon") && !s.at("time_horizon").is_null()) sim.time_horizon = get_positive(s, p, "time_horizon");
    sim.warmup_fraction = get_number(s, p, "warmup_fraction", sim.warmup_fraction);
    sim.seed = get_count(s, p, "seed", sim.seed);
    sim.confidence = get_number(s, p, "confidence", sim.confidence);
    if (sim.runs < 2) throw ConfigError("$.sim.runs", "must be at least 2 (confidence intervals need variance)");
    if (!(sim.warmup_fraction >= 0.0 && sim.warmup_fraction < 1.0)) {
      throw ConfigError("$.sim.warmup_fraction", "must lie in [0, 1)");
    }
    if (!(sim.confidence > 0.0 && sim.confidence < 1.0)) throw ConfigError("$.sim.confidence", "must lie in (0, 1)");
  }
  try {
    sim::validate(sim.options());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("$.sim", e.what());
  }

  // bounds
  bounds::DelayReading reading = bounds::DelayReading::scenario;
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    require_object(b, "$.bounds");
    allow_keys(b, "$.bounds", {"delay_at_caps"});
    if (b.contains("delay_at_caps")) {
      if (!b.at("delay_at_caps").is_boolean()) throw ConfigError("$.bounds.delay_at_caps", "expected a boolean");
      if (b.at("delay_at_caps").get<bool>()) reading = bounds::DelayReading::caps;
    }
  }

  json doc;
  doc["sources"] = json::array();
  for (double r : benign) doc["sources"].push_back({{"rate", r}});
  doc["adversary"] = {{"index", index}, {"rate", attack}, {"beta", beta}};
  doc["caps"] = {{"lambda_max", caps.lambda_max}, {"beta_max", caps.beta_max}};
  doc["service"] = detail::service_to_json(service);
  doc["sim"] = {{"runs", sim.runs},
                {"deliveries_per_run", sim.deliveries_per_run},
                {"time_horizon", sim.time_horizon ? json(*sim.time_horizon) : json(nullptr)},
                {"warmup_fraction", sim.warmup_fraction},
                {"seed", sim.seed},
                {"confidence", sim.confidence}};
  doc["bounds"] = {{"delay_at_caps", reading == bounds::DelayReading::caps}};

  // sweep
  std::optional<SweepSpec> sweep;
  if (j.contains("sweep")) {
    const json& w = j.at("sweep");
    require_object(w, "$.sweep");
    allow_keys(w, "$.sweep", {"parameter", "values"});
    if (!w.contains("parameter") || !w.at("parameter").is_string()) {
      throw ConfigError("$.sweep.parameter", "expected a dotted path string");
    }
    if (!w.contains("values") || !w.at("values").is_array()) throw ConfigError("$.sweep.values", "expected an array");
    SweepSpec spec;
    spec.parameter = w.at("parameter").get<std::string>();
    const auto ptr = sweep_pointer(spec.parameter);
    if (!doc.contains(ptr) || !doc.at(ptr).is_number()) {
      throw ConfigError("$.sweep.parameter", "'" + spec.parameter + "' does not name a numeric field");
    }
    for (std::size_t k = 0; k < w.at("values").size(); ++k) {
      const json& v = w.at("values")[k];
      if (!v.is_number()) throw ConfigError(child("$.sweep.values", k), "expected a number");
      spec.values.push_back(v.get<double>());
    }
    doc["sweep"] = {{"parameter", spec.parameter}, {"values", spec.values}};
    sweep = std::move(spec);
  }

  return ScenarioConfig{std::move(doc), std::move(*scn), sim, std::move(sweep), reading};
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("", path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Configuration with `value` written at the sweep parameter (sweep removed).
inline ScenarioConfig config_at(const ScenarioConfig& cfg, double value) {
  if (!cfg.sweep) throw ConfigError("$.sweep", "configuration has no sweep");
  json doc = cfg.document;
  doc.erase("sweep");
  doc[detail::sweep_pointer(cfg.sweep->parameter)] = value;
  // A zero attack rate needs no slowdown factor.
  if (doc["adversary"]["rate"].get<double>() == 0.0) doc["adversary"]["beta"] = 1.0;
  return parse_config(doc);
}

}  // namespace aoi
