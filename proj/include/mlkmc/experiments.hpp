#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mlkmc/ensemble.hpp"
#include "mlkmc/observables.hpp"
#include "mlkmc/potentials.hpp"
#include "mlkmc/rates.hpp"
#include "mlkmc/samplers.hpp"

namespace mlkmc {

/// Forwards to several observers; the run stops if any of them asks to.
class ObserverList final : public Observer {
 public:
  ObserverList(std::initializer_list<Observer*> obs) : obs_(obs) {}
  void hold(double t0, double t1, const Sampler& s) override {
    for (Observer* o : obs_) o->hold(t0, t1, s);
  }
  bool event(const EventRecord& ev, const Sampler& s) override {
    bool go = true;
    for (Observer* o : obs_) go = o->event(ev, s) && go;
    return go;
  }

 private:
  std::vector<Observer*> obs_;
};

/// Everything that defines one sampler run besides the seed.
struct RunSetup {
  LatticeSpec lattice{2};
  PotentialSpec potential{};
  SamplerOptions sampler{};
  Variant mlkmc_variant = Variant::two_level_split;
  BoundMode bound = BoundMode::crude;
  int q = 1;  // ignored by the microscopic samplers
  MicroConfig initial{};

  RateModel model() const {
    Variant v = default_variant(sampler.type, mlkmc_variant);
    return RateModel(lattice, potential, v, v == Variant::microscopic ? 1 : q, bound);
  }
};

struct EventTotals {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  std::uint64_t null_events = 0;
  std::uint64_t absorbed = 0;
  std::uint64_t stopped = 0;

  void add(const TrajectoryStats& s) {
    proposals += s.proposals;
    accepted += s.accepted;
    null_events += s.null_events;
    absorbed += s.absorbed;
    stopped += s.stopped;
  }
  double rejection_rate() const {
    return proposals ? static_cast<double>(null_events) / static_cast<double>(proposals) : 0.0;
  }
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- exit times -----------------------------------------------------------

struct ExitTimeRun {
  std::vector<ExitTimeSample> samples;
  ExitTimeSummary summary;
  EventTotals events;
  double wall_seconds = 0.0;

  /// Mean with censored samples counted at T_final (a lower bound on E[tau]).
  double censored_lower_bound() const {
    double s = 0.0;
    for (const auto& e : samples) s += e.tau;
    return samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
  }
};

inline ExitTimeRun run_exit_times(const RunSetup& setup, double threshold, double t_final, int replicas,
                                  std::uint64_t seed, unsigned threads) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigurationError("exit threshold C must lie in (0, 1]");
  RateModel model = setup.model();
  struct One {
    ExitTimeSample sample;
    TrajectoryStats stats;
  };
  auto t0 = std::chrono::steady_clock::now();
  auto runs = run_replicas<One>(static_cast<std::uint64_t>(replicas), seed, threads, [&](std::uint64_t, Rng& rng) {
    auto s = make_sampler(setup.sampler, model, setup.initial);
    One r;
    if (s->coverage() >= threshold) return r;
    ExitTimeObserver obs(threshold);
    r.stats = run_trajectory(*s, t_final, rng, &obs);
    r.sample = obs.hit() ? ExitTimeSample{obs.tau(), false} : ExitTimeSample{t_final, true};
    return r;
  });
  ExitTimeRun out;
  out.wall_seconds = seconds_since(t0);
  for (const auto& r : runs) {
    out.samples.push_back(r.sample);
    out.events.add(r.stats);
  }
  out.summary = summarize(out.samples);
  return out;
}

// ---- coverage trajectories ----------------------------------------------

struct TrajectoryRun {
  std::vector<double> times;
  std::vector<std::vector<double>> coverage;  // [replica][grid point]
  std::vector<TrajectoryStats> stats;
  EventTotals events;
  double wall_seconds = 0.0;

  std::vector<RunningStats> pointwise() const {
    std::vector<RunningStats> out(times.size());
    for (const auto& row : coverage) {
      for (std::size_t i = 0; i < row.size(); ++i) out[i].add(row[i]);
    }
    return out;
  }
};

inline TrajectoryRun run_trajectories(const RunSetup& setup, double t_final, int grid_points, int replicas,
                                      std::uint64_t seed, unsigned threads) {
  RateModel model = setup.model();
  struct One {
    std::vector<double> grid;
    TrajectoryStats stats;
  };
  auto t0 = std::chrono::steady_clock::now();
  auto runs = run_replicas<One>(static_cast<std::uint64_t>(replicas), seed, threads, [&](std::uint64_t, Rng& rng) {
    auto s = make_sampler(setup.sampler, model, setup.initial);
    GridObserver g(t_final, grid_points);
    One r;
    r.stats = run_trajectory(*s, t_final, rng, &g);
    g.finish(*s);
    r.grid = g.values();
    return r;
  });
  TrajectoryRun out;
  out.wall_seconds = seconds_since(t0);
  GridObserver g(t_final, grid_points);
  for (int i = 0; i < grid_points; ++i) out.times.push_back(g.time_at(i));
  for (auto& r : runs) {
    out.coverage.push_back(std::move(r.grid));
    out.events.add(r.stats);
    out.stats.push_back(r.stats);
  }
  return out;
}

// ---- long-time averages -------------------------------------------------

struct EquilibriumRun {
  std::vector<BatchMean> replicas;
  double mean = 0.0;
  double stderr_ = 0.0;  // across replicas, or batch means for a single replica
  EventTotals events;
  double wall_seconds = 0.0;
};

inline EquilibriumRun run_equilibrium(const RunSetup& setup, double burn_in, double t_final, int batches, int replicas,
                                      std::uint64_t seed, unsigned threads) {
  if (!(t_final > burn_in)) throw ConfigurationError("equilibrium run needs T_final > burn_in");
  RateModel model = setup.model();
  struct One {
    BatchMean avg;
    TrajectoryStats stats;
  };
  const double window = (t_final - burn_in) / (10.0 * batches);
  auto t0 = std::chrono::steady_clock::now();
  auto runs = run_replicas<One>(static_cast<std::uint64_t>(replicas), seed, threads, [&](std::uint64_t, Rng& rng) {
    auto s = make_sampler(setup.sampler, model, setup.initial);
    TimeAverageObserver obs(burn_in, batches, window);
    One r;
    r.stats = run_trajectory(*s, t_final, rng, &obs);
    r.avg = obs.result();
    return r;
  });
  EquilibriumRun out;
  out.wall_seconds = seconds_since(t0);
  RunningStats across;
  for (const auto& r : runs) {
    out.replicas.push_back(r.avg);
    out.events.add(r.stats);
    across.add(r.avg.mean);
  }
  out.mean = across.mean();
  out.stderr_ = replicas > 1 ? across.stderr_() : runs.front().avg.stderr_;
  return out;
}

// ---- hysteresis ---------------------------------------------------------

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out;
  if (n == 1) return {a};
  for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
  return out;
}

struct HysteresisRun {
  std::vector<HysteresisPoint> points;  // averaged over replicas
  int replicas = 0;
  double wall_seconds = 0.0;
};

inline HysteresisRun run_hysteresis(const RunSetup& setup, const std::vector<double>& h_up, double t_equil,
                                    double t_measure, int batches, int replicas, std::uint64_t seed,
                                    unsigned threads) {
  HysteresisOptions opt;
  opt.sampler = setup.sampler;
  opt.mlkmc_variant = setup.mlkmc_variant;
  opt.bound = setup.bound;
  opt.q = setup.q;
  opt.t_equil = t_equil;
  opt.t_measure = t_measure;
  opt.batches = batches;
  auto t0 = std::chrono::steady_clock::now();
  auto runs = run_replicas<std::vector<HysteresisPoint>>(
      static_cast<std::uint64_t>(replicas), seed, threads, [&](std::uint64_t, Rng& rng) {
        return hysteresis_sweep(setup.lattice, setup.potential, h_up, opt, setup.initial, rng);
      });
  HysteresisRun out;
  out.wall_seconds = seconds_since(t0);
  out.replicas = replicas;
  out.points = runs.front();
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    RunningStats st;
    bool absorbed = false;
    for (const auto& r : runs) {
      st.add(r[i].mean_coverage);
      absorbed = absorbed || r[i].absorbed;
    }
    out.points[i].mean_coverage = st.mean();
    if (replicas > 1) out.points[i].stderr_ = st.stderr_();
    out.points[i].absorbed = absorbed;
  }
  return out;
}

/// Largest |up - down| over the schedule, in units of the combined standard error.
struct LoopGap {
  double h = 0.0;
  double gap = 0.0;
  double z = 0.0;
};

inline LoopGap widest_gap(const std::vector<HysteresisPoint>& pts) {
  LoopGap best;
  const std::size_t m = pts.size() / 2;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& up = pts[i];
    const auto& down = pts[pts.size() - 1 - i];
    double gap = std::abs(up.mean_coverage - down.mean_coverage);
    double se = std::sqrt(up.stderr_ * up.stderr_ + down.stderr_ * down.stderr_);
    double z = se > 0.0 ? gap / se : (gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (gap > best.gap) best = {up.h, gap, z};
  }
  return best;
}

// ---- timing ---------------------------------------------------------------

struct BenchCell {
  SamplerType sampler = SamplerType::null_event;
  int n = 0;
  int q = 1;
  double wall_seconds = 0.0;  // mean over repeats, sampling loop only
  EventTotals events;
};

inline BenchCell bench_cell(const RunSetup& setup, double t_final, int repeats, std::uint64_t seed) {
  RateModel model = setup.model();
  BenchCell c;
  c.sampler = setup.sampler.type;
  c.n = setup.lattice.n;
  c.q = model.q();
  double total = 0.0;
  for (int r = 0; r < repeats; ++r) {
    Rng rng(seed, static_cast<std::uint64_t>(r));
    auto s = make_sampler(setup.sampler, model, setup.initial);
    auto t0 = std::chrono::steady_clock::now();
    TrajectoryStats st = run_trajectory(*s, t_final, rng);
    total += seconds_since(t0);
    c.events.add(st);
  }
  c.wall_seconds = total / repeats;
  return c;
}

}  // namespace mlkmc
