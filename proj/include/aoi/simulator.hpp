#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "aoi/errors.hpp"
#include "aoi/rng.hpp"
#include "aoi/scenario.hpp"
#include "aoi/stats.hpp"

namespace aoi::sim {

struct Horizon {
  enum class Kind { deliveries, time };

  Kind kind = Kind::deliveries;
  double amount = 1e5;

  /// Run until every benign source has delivered `n` updates.
  static Horizon deliveries(std::uint64_t n) { return {Kind::deliveries, static_cast<double>(n)}; }
  /// Run for a fixed amount of simulated time.
  static Horizon time(double t) { return {Kind::time, t}; }
};

struct SimOptions {
  Horizon horizon;
  // Leading share of the horizon whose statistics are discarded.
  double warmup_fraction = 0.1;
  // Keep per-delivery (delivery time, generation time) pairs.
  bool record_samples = false;
  // Maximum number of trace rows; 0 disables tracing.
  std::size_t trace_limit = 0;
  // Source whose age is written in the trace (default: first benign).
  std::optional<std::size_t> trace_source;
};

enum class ServerMode : std::uint8_t { idle, normal, slow };

inline const char* to_string(ServerMode m) {
  switch (m) {
    case ServerMode::idle: return "idle";
    case ServerMode::normal: return "normal";
    case ServerMode::slow: return "slow";
  }
  return "?";
}

/// What happened at a trace row.
enum class TraceEvent : std::uint8_t {
  arrival,       // positive update entered service
  drop,          // positive update blocked by a busy server
  attack_noop,   // negative arrival at an idle server
  preempt,       // negative arrival during normal service
  restart,       // negative arrival during slow service
  expiry,        // slow state ended, normal service resumes
  delivery,
};

inline const char* to_string(TraceEvent e) {
  switch (e) {
    case TraceEvent::arrival: return "arrival";
    case TraceEvent::drop: return "drop";
    case TraceEvent::attack_noop: return "attack_noop";
    case TraceEvent::preempt: return "preempt";
    case TraceEvent::restart: return "restart";
    case TraceEvent::expiry: return "expiry";
    case TraceEvent::delivery: return "delivery";
  }
  return "?";
}

struct TraceRecord {
  double time;
  TraceEvent event;
  std::size_t source;
  ServerMode state;  // after the event
  double age;        // age of the tagged source, NaN before its first delivery
};

/// Sawtooth bookkeeping for one source.
///
/// The first counted delivery anchors the age process; every later delivery
/// closes an inter-delivery cycle whose area is the exact trapezoid
/// T_prev * Y + Y^2 / 2.
class AgeTracker {
 public:
  explicit AgeTracker(bool keep_samples = false) : keep_samples_(keep_samples) {}

  bool anchored() const noexcept { return anchored_; }

  void on_delivery(double now, double generation) {
    if (keep_samples_) {
      delivery_times_.push_back(now);
      generation_times_.push_back(generation);
    }
    if (!anchored_) {
      anchored_ = true;
      start_ = now;
      last_delivery_ = now;
      last_generation_ = generation;
      return;
    }
    const double y = now - last_delivery_;
    const double t_prev = last_delivery_ - last_generation_;
    const double t = now - generation;
    const double peak = y + t_prev;
    area_ += t_prev * y + 0.5 * y * y;
    sum_t_ += t;
    sum_t2_ += t * t;
    sum_y_ += y;
    sum_y2_ += y * y;
    sum_peak_ += peak;
    sum_peak2_ += peak * peak;
    ++cycles_;
    last_delivery_ = now;
    last_generation_ = generation;
  }

  /// A(t) = t - generation time of the freshest delivered update.
  double age_at(double now) const {
    return anchored_ ? now - last_generation_ : std::numeric_limits<double>::quiet_NaN();
  }

  std::uint64_t cycles() const noexcept { return cycles_; }
  double area() const noexcept { return area_; }
  double observed_time() const noexcept { return anchored_ ? last_delivery_ - start_ : 0.0; }
  double last_delivery() const noexcept { return last_delivery_; }
  double last_generation() const noexcept { return last_generation_; }

  double average_aoi() const { return require(), area_ / sum_y_; }
  double mean_paoi() const { return require(), sum_peak_ / n(); }
  double second_paoi() const { return require(), sum_peak2_ / n(); }
  double mean_system_time() const { return require(), sum_t_ / n(); }
  double second_system_time() const { return require(), sum_t2_ / n(); }
  double mean_interdeparture() const { return require(), sum_y_ / n(); }
  double second_interdeparture() const { return require(), sum_y2_ / n(); }

  const std::vector<double>& delivery_times() const noexcept { return delivery_times_; }
  const std::vector<double>& generation_times() const noexcept { return generation_times_; }

 private:
  double n() const noexcept { return static_cast<double>(cycles_); }
  void require() const {
    if (cycles_ == 0) throw InsufficientDataError("no complete inter-delivery cycle recorded");
  }

  bool keep_samples_;
  bool anchored_ = false;
  double start_ = 0.0;
  double last_delivery_ = 0.0;
  double last_generation_ = 0.0;
  double area_ = 0.0;
  double sum_t_ = 0.0, sum_t2_ = 0.0;
  double sum_y_ = 0.0, sum_y2_ = 0.0;
  double sum_peak_ = 0.0, sum_peak2_ = 0.0;
  std::uint64_t cycles_ = 0;
  std::vector<double> delivery_times_;
  std::vector<double> generation_times_;
};

/// Per-delivery peaks P_j = Y_j + T_{j-1} = t'_j - t_{j-1} from recorded samples.
inline std::vector<double> peak_age_samples(const AgeTracker& tracker) {
  const auto& d = tracker.delivery_times();
  const auto& g = tracker.generation_times();
  if (d.size() < 2) throw InsufficientDataError("peak age needs at least two recorded deliveries");
  std::vector<double> peaks;
  peaks.reserve(d.size() - 1);
  for (std::size_t j = 1; j < d.size(); ++j) peaks.push_back((d[j] - d[j - 1]) + (d[j - 1] - g[j - 1]));
  return peaks;
}

struct SourceCounters {
  std::uint64_t arrivals = 0;
  std::uint64_t accepted = 0;
  std::uint64_t dropped = 0;
  std::uint64_t delivered = 0;
  std::uint64_t preemptions = 0;  // negative arrivals hitting this source's update
};

struct RunResult {
  std::uint64_t seed = 0;
  double end_time = 0.0;
  double busy_time = 0.0;
  std::uint64_t events = 0;
  std::uint64_t attacks = 0;
  std::uint64_t idle_attacks = 0;
  std::vector<SourceCounters> counters;  // indexed by source; adversary slot unused
  std::vector<AgeTracker> trackers;      // indexed by source
  std::optional<std::size_t> owner_at_end;
  std::vector<TraceRecord> trace;
};

namespace detail {

// Pending events, one slot each: service completion, slow-state expiry, and
// the next arrival of every source (the adversary's slot carries attacks).
// Ordered by time, then kind (completion < expiry < arrival), then the order
// in which events were scheduled.
class EventCalendar {
 public:
  static constexpr std::size_t kCompletion = 0;
  static constexpr std::size_t kExpiry = 1;
  static constexpr std::size_t kFirstArrival = 2;

  explicit EventCalendar(std::size_t sources) : slots_(kFirstArrival + sources) {}

  void schedule(std::size_t slot, double time) { slots_[slot] = {time, next_seq_++}; }
  void cancel(std::size_t slot) { slots_[slot].time = kNever; }

  std::size_t next() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < slots_.size(); ++k) {
      if (before(k, best)) best = k;
    }
    return best;
  }

  double time(std::size_t slot) const { return slots_[slot].time; }

 private:
  static constexpr double kNever = std::numeric_limits<double>::infinity();
  struct Slot {
    double time = kNever;
    std::uint64_t seq = 0;
  };

  static int priority(std::size_t slot) { return slot < kFirstArrival ? static_cast<int>(slot) : 2; }

  bool before(std::size_t a, std::size_t b) const {
    const Slot& x = slots_[a];
    const Slot& y = slots_[b];
    if (x.time != y.time) return x.time < y.time;
    if (priority(a) != priority(b)) return priority(a) < priority(b);
    return x.seq < y.seq;
  }

  std::vector<Slot> slots_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace detail

inline void validate(const SimOptions& opt) {
  if (!(opt.warmup_fraction >= 0.0 && opt.warmup_fraction < 1.0)) {
    throw std::invalid_argument("warmup fraction must lie in [0, 1)");
  }
  if (!(opt.horizon.amount > 0.0) || !std::isfinite(opt.horizon.amount)) {
    throw std::invalid_argument("horizon must be positive");
  }
  if (opt.horizon.kind == Horizon::Kind::deliveries) {
    const double d = opt.horizon.amount;
    if (d != std::floor(d) || d < 2.0 || std::floor(opt.warmup_fraction * d) > d - 2.0) {
      throw std::invalid_argument("delivery horizon must leave at least one counted cycle after warmup");
    }
  }
}

/// One replication of the bufferless server with negative arrivals.
///
/// Semantics: benign Poisson arrivals enter an idle server and start normal
/// service, and are dropped when it is busy. A negative arrival is a no-op on
/// an idle server; during normal service it moves the update to slow service
/// (fresh beta * S_n draw plus a fresh Exp(Lambda) expiry clock); during slow
/// service it restarts both draws. Expiry returns the update to normal service
/// with a fresh S_n draw. Completion in either mode delivers the update, whose
/// generation time is its original arrival instant.
inline RunResult run_single(const Scenario& scn, const SimOptions& opt, std::uint64_t seed) {
  validate(opt);
  const std::size_t n = scn.num_sources();
  const std::size_t adversary = scn.adversary();
  const double total = scn.total_rate();
  const double beta = scn.beta();
  const ServiceModel& service = scn.service();
  const bool by_deliveries = opt.horizon.kind == Horizon::Kind::deliveries;
  const std::uint64_t target = by_deliveries ? static_cast<std::uint64_t>(opt.horizon.amount) : 0;
  const std::uint64_t warmup_deliveries =
      by_deliveries ? static_cast<std::uint64_t>(std::floor(opt.warmup_fraction * opt.horizon.amount)) : 0;
  const double end_time = by_deliveries ? std::numeric_limits<double>::infinity() : opt.horizon.amount;
  const double warmup_time = by_deliveries ? 0.0 : opt.warmup_fraction * opt.horizon.amount;
  const std::size_t tagged = opt.trace_source.value_or(scn.first_benign());

  RunResult out;
  out.seed = seed;
  out.counters.assign(n, {});
  out.trackers.assign(n, AgeTracker(opt.record_samples));

  Rng rng(seed);
  detail::EventCalendar cal(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (scn.rate(j) > 0.0) cal.schedule(detail::EventCalendar::kFirstArrival + j, rng.exponential(scn.rate(j)));
  }

  ServerMode mode = ServerMode::idle;
  std::size_t owner = 0;
  double generation = 0.0;
  double busy_since = 0.0;
  double now = 0.0;
  std::size_t sources_done = 0;
  const std::size_t benign_sources = n - 1;
  std::vector<std::uint64_t> delivered_total(n, 0);

  auto trace = [&](TraceEvent e, std::size_t src) {
    if (out.trace.size() < opt.trace_limit) {
      out.trace.push_back({now, e, src, mode, out.trackers[tagged].age_at(now)});
    }
  };
  auto start_slow = [&] {
    mode = ServerMode::slow;
    cal.schedule(detail::EventCalendar::kCompletion, now + beta * service.sample(rng));
    cal.schedule(detail::EventCalendar::kExpiry, now + rng.exponential(total));
  };

  while (true) {
    const std::size_t slot = cal.next();
    const double t = cal.time(slot);
    if (t > end_time) break;
    now = t;
    ++out.events;

    if (slot == detail::EventCalendar::kCompletion) {
      cal.cancel(detail::EventCalendar::kCompletion);
      cal.cancel(detail::EventCalendar::kExpiry);
      out.busy_time += now - busy_since;
      mode = ServerMode::idle;
      ++out.counters[owner].delivered;
      const std::uint64_t index = delivered_total[owner]++;
      const bool counted = by_deliveries ? (index >= warmup_deliveries && index < target) : now >= warmup_time;
      if (counted) out.trackers[owner].on_delivery(now, generation);
      trace(TraceEvent::delivery, owner);
      if (by_deliveries && index + 1 == target && ++sources_done == benign_sources) break;
    } else if (slot == detail::EventCalendar::kExpiry) {
      cal.cancel(detail::EventCalendar::kExpiry);
      mode = ServerMode::normal;
      cal.schedule(detail::EventCalendar::kCompletion, now + service.sample(rng));
      trace(TraceEvent::expiry, owner);
    } else {
      const std::size_t src = slot - detail::EventCalendar::kFirstArrival;
      cal.schedule(slot, now + rng.exponential(scn.rate(src)));
      if (src == adversary) {
        ++out.attacks;
        if (mode == ServerMode::idle) {
          ++out.idle_attacks;
          trace(TraceEvent::attack_noop, src);
        } else {
          const bool was_normal = mode == ServerMode::normal;
          ++out.counters[owner].preemptions;
          start_slow();
          trace(was_normal ? TraceEvent::preempt : TraceEvent::restart, owner);
        }
      } else {
        ++out.counters[src].arrivals;
        if (mode == ServerMode::idle) {
          ++out.counters[src].accepted;
          mode = ServerMode::normal;
          owner = src;
          generation = now;
          busy_since = now;
          cal.schedule(detail::EventCalendar::kCompletion, now + service.sample(rng));
          trace(TraceEvent::arrival, src);
        } else {
          ++out.counters[src].dropped;
          trace(TraceEvent::drop, src);
        }
      }
    }
  }

  if (mode != ServerMode::idle) {
    out.owner_at_end = owner;
    if (!by_deliveries) out.busy_time += end_time - busy_since;
  }
  out.end_time = by_deliveries ? now : end_time;
  return out;
}

/// Batch estimate for one benign source.
struct SourceEstimate {
  std::size_t source = 0;
  Interval aaoi;
  Interval paoi;
  Interval system_time;
  Interval interdeparture;
  Interval interdeparture_sq;
  double drop_fraction = 0.0;  // mean over runs of dropped / arrivals
  std::uint64_t min_cycles = 0;
};

struct SimEstimate {
  std::vector<SourceEstimate> sources;  // benign sources in index order
  std::size_t runs = 0;
  double confidence = 0.95;
  std::uint64_t base_seed = 0;
  std::vector<std::uint64_t> seeds;

  const SourceEstimate& source(std::size_t i) const {
    for (const auto& s : sources) {
      if (s.source == i) return s;
    }
    throw std::out_of_range("no estimate for source " + std::to_string(i));
  }
};

/// Degree of parallelism: AOI_THREADS if set, else hardware concurrency.
inline std::size_t default_parallelism() {
  if (const char* env = std::getenv("AOI_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Across-run Student-t summary of finished replications.
inline SimEstimate summarize(const Scenario& scn, const std::vector<RunResult>& runs, double confidence,
                             std::uint64_t base_seed) {
  if (runs.size() < 2) throw std::invalid_argument("a confidence interval needs runs >= 2");
  SimEstimate est;
  est.runs = runs.size();
  est.confidence = confidence;
  est.base_seed = base_seed;
  for (const auto& r : runs) est.seeds.push_back(r.seed);
  const std::size_t k = runs.size();
  for (std::size_t i = 0; i < scn.num_sources(); ++i) {
    if (i == scn.adversary()) continue;
    std::vector<double> aaoi(k), paoi(k), t(k), y(k), y2(k);
    SourceEstimate se;
    se.source = i;
    se.min_cycles = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t r = 0; r < k; ++r) {
      const AgeTracker& tr = runs[r].trackers[i];
      aaoi[r] = tr.average_aoi();
      paoi[r] = tr.mean_paoi();
      t[r] = tr.mean_system_time();
      y[r] = tr.mean_interdeparture();
      y2[r] = tr.second_interdeparture();
      const auto& c = runs[r].counters[i];
      se.drop_fraction += static_cast<double>(c.dropped) / static_cast<double>(std::max<std::uint64_t>(c.arrivals, 1));
      se.min_cycles = std::min(se.min_cycles, tr.cycles());
    }
    se.drop_fraction /= static_cast<double>(k);
    se.aaoi = student_t_interval(aaoi, confidence);
    se.paoi = student_t_interval(paoi, confidence);
    se.system_time = student_t_interval(t, confidence);
    se.interdeparture = student_t_interval(y, confidence);
    se.interdeparture_sq = student_t_interval(y2, confidence);
    est.sources.push_back(se);
  }
  return est;
}

/// Independent replications with seeds derive_seed(base_seed, r), r = 0..runs-1.
/// Replications may run on several threads; results do not depend on it.
inline SimEstimate run_batch(const Scenario& scn, const SimOptions& opt, std::size_t runs, std::uint64_t base_seed,
                             double confidence, std::size_t threads = 0) {
  if (runs < 2) throw std::invalid_argument("a confidence interval needs runs >= 2");
  validate(opt);
  SimOptions quiet = opt;
  quiet.trace_limit = 0;
  quiet.record_samples = false;

  std::vector<RunResult> results(runs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t r = next++; r < runs; r = next++) {
      try {
        results[r] = run_single(scn, quiet, derive_seed(base_seed, r));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(runs, threads == 0 ? default_parallelism() : threads);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return summarize(scn, results, confidence, base_seed);
}

}  // namespace aoi::sim
