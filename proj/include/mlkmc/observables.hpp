#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mlkmc/errors.hpp"
#include "mlkmc/lattice.hpp"
#include "mlkmc/random.hpp"
#include "mlkmc/rates.hpp"
#include "mlkmc/samplers.hpp"

namespace mlkmc {

inline double coverage(const MicroConfig& sigma) { return sigma.coverage(); }

/// f(sigma; k) = (1/N) sum_x sigma(x) sigma(x + k), periodic.
inline double correlation(const MicroConfig& sigma, int k) {
  const int n = sigma.size();
  if (k < 0 || k >= n) throw ConfigurationError("correlation lag must lie in [0, N)");
  int s = 0;
  for (int x = 0; x < n; ++x) s += sigma[x] * sigma[(x + k) % n];
  return static_cast<double>(s) / n;
}

/// Mean and variance accumulator (Welford), mergeable.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    double n = static_cast<double>(n_ + o.n_);
    double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }
  std::uint64_t count() const { return n_; }
  double mean() const { return n_ ? mean_ : std::numeric_limits<double>::quiet_NaN(); }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double stderr_() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
  double ci95() const { return 1.96 * stderr_(); }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Weighted mean with batch-means standard error.
struct BatchMean {
  double mean = 0.0;
  double stderr_ = 0.0;
  int batches = 0;
};

/// values[i] observed with weights[i], split into n_batches contiguous batches.
inline BatchMean batch_means(std::span<const double> values, std::span<const double> weights, int n_batches = 20) {
  BatchMean r;
  double sw = 0.0, swx = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sw += weights[i];
    swx += weights[i] * values[i];
  }
  if (!(sw > 0.0)) return r;
  r.mean = swx / sw;
  const std::size_t n = values.size();
  int b = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n_batches), n));
  if (b < 2) return r;
  RunningStats bs;
  for (int j = 0; j < b; ++j) {
    std::size_t lo = n * static_cast<std::size_t>(j) / static_cast<std::size_t>(b);
    std::size_t hi = n * static_cast<std::size_t>(j + 1) / static_cast<std::size_t>(b);
    double w = 0.0, wx = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      w += weights[i];
      wx += weights[i] * values[i];
    }
    if (w > 0.0) bs.add(wx / w);
  }
  r.batches = static_cast<int>(bs.count());
  r.stderr_ = bs.stderr_();
  return r;
}

// ---- exit times -----------------------------------------------------------

struct ExitTimeSample {
  double tau = 0.0;
  bool censored = false;
};

/// Stops the run at the first event after which coverage >= threshold.
class ExitTimeObserver final : public Observer {
 public:
  explicit ExitTimeObserver(double threshold) : c_(threshold) {}
  bool event(const EventRecord& ev, const Sampler& s) override {
    if (ev.accepted && s.coverage() >= c_) {
      hit_ = true;
      tau_ = ev.t;
      return false;
    }
    return true;
  }
  bool hit() const { return hit_; }
  double tau() const { return tau_; }

 private:
  double c_;
  bool hit_ = false;
  double tau_ = 0.0;
};

inline ExitTimeSample exit_time(Sampler& s, double threshold, double t_final, Rng& rng) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigurationError("exit threshold C must lie in (0, 1]");
  if (s.coverage() >= threshold) return {0.0, false};
  ExitTimeObserver obs(threshold);
  run_trajectory(s, t_final, rng, &obs);
  if (obs.hit()) return {obs.tau(), false};
  return {t_final, true};
}

struct ExitTimeSummary {
  RunningStats uncensored;
  std::uint64_t censored = 0;
  std::uint64_t total() const { return uncensored.count() + censored; }
};

inline ExitTimeSummary summarize(std::span<const ExitTimeSample> samples) {
  ExitTimeSummary s;
  for (const auto& e : samples) {
    if (e.censored) ++s.censored; else s.uncensored.add(e.tau);
  }
  return s;
}

// ---- coverage on a time grid ---------------------------------------------

/// Coverage at t_i = i * T / (points - 1), read off the piecewise-constant path.
class GridObserver final : public Observer {
 public:
  GridObserver(double t_final, int points) : t_final_(t_final), points_(std::max(points, 1)) {
    values_.reserve(static_cast<std::size_t>(points_));
  }
  double time_at(int i) const { return points_ == 1 ? 0.0 : t_final_ * i / (points_ - 1); }
  void hold(double t0, double t1, const Sampler& s) override {
    (void)t0;
    const bool last = t1 >= t_final_;
    while (static_cast<int>(values_.size()) < points_) {
      double ti = time_at(static_cast<int>(values_.size()));
      if (ti < t1 || (last && ti <= t1)) values_.push_back(s.coverage()); else break;
    }
  }
  /// Fills any grid points left when a run ends early.
  void finish(const Sampler& s) {
    while (static_cast<int>(values_.size()) < points_) values_.push_back(s.coverage());
  }
  const std::vector<double>& values() const { return values_; }

 private:
  double t_final_;
  int points_;
  std::vector<double> values_;
};

/// Time-averaged coverage after a burn-in, with per-interval records for batch means.
class TimeAverageObserver final : public Observer {
 public:
  explicit TimeAverageObserver(double burn_in, int n_batches = 20, double window = 0.0)
      : burn_in_(burn_in), n_batches_(n_batches), window_(window) {}
  void hold(double t0, double t1, const Sampler& s) override {
    double a = std::max(t0, burn_in_);
    if (t1 <= a) return;
    // aggregate into fixed windows to bound memory
    double c = s.coverage();
    if (window_ > 0.0) {
      while (a < t1) {
        int idx = static_cast<int>(std::floor((a - burn_in_) / window_));
        double wend = burn_in_ + (idx + 1.0) * window_;
        if (wend <= a) wend = burn_in_ + (++idx + 1.0) * window_;  // rounding at a window edge
        double b = std::min(t1, wend);
        if (static_cast<int>(vals_.size()) <= idx) {
          vals_.resize(static_cast<std::size_t>(idx) + 1, 0.0);
          wts_.resize(static_cast<std::size_t>(idx) + 1, 0.0);
        }
        vals_[static_cast<std::size_t>(idx)] += c * (b - a);
        wts_[static_cast<std::size_t>(idx)] += b - a;
        a = b;
      }
      return;
    }
    vals_.push_back(c * (t1 - a));
    wts_.push_back(t1 - a);
  }
  BatchMean result() const {
    std::vector<double> v(vals_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = wts_[i] > 0 ? vals_[i] / wts_[i] : 0.0;
    return batch_means(v, wts_, n_batches_);
  }

 private:
  double burn_in_;
  int n_batches_;
  double window_;
  std::vector<double> vals_, wts_;
};

// ---- rejection rate -------------------------------------------------------

inline double empirical_rejection_rate(std::span<const EventRecord> events) {
  if (events.empty()) throw ConfigurationError("empirical_rejection_rate: empty event stream");
  std::size_t nulls = 0;
  for (const auto& e : events) nulls += e.kind == EventKind::null;
  return static_cast<double>(nulls) / static_cast<double>(events.size());
}

/// Counts proposals and null events without storing the stream.
class RejectionCounter final : public Observer {
 public:
  bool event(const EventRecord& ev, const Sampler&) override {
    ++proposals_;
    nulls_ += ev.kind == EventKind::null;
    return true;
  }
  std::uint64_t proposals() const { return proposals_; }
  std::uint64_t nulls() const { return nulls_; }
  double rate() const {
    if (proposals_ == 0) throw ConfigurationError("rejection rate: no proposals");
    return static_cast<double>(nulls_) / static_cast<double>(proposals_);
  }

 private:
  std::uint64_t proposals_ = 0, nulls_ = 0;
};

// ---- relative entropy rate -----------------------------------------------

/// (1/N) sum_x [c(x) - c~(x) + c~(x) log(c~(x) / c(x))] at one state: the
/// per-state information loss rate of the approximate rates c~ against c.
inline double entropy_rate_functional(const MicroConfig& sigma, const RateModel& reference,
                                      const RateModel& approximate) {
  const int n = sigma.size();
  CoarseConfig eta = coarsen(sigma, approximate.coarse());
  double s = 0.0;
  for (int x = 0; x < n; ++x) {
    double c = reference.micro_rate(x, sigma);
    double ct = approximate.combined_rate(x, sigma, eta);
    if (ct > 0.0 && !(c > 0.0)) {
      throw ConfigurationError("entropy rate undefined: reference rate is zero where the approximate rate is positive");
    }
    if (ct == c) continue;
    if (ct == 0.0) {
      s += c;
      continue;
    }
    // c (1 - r + r log r) with r = 1 + d, written to avoid cancellation near r = 1
    double d = (ct - c) / c;
    s += c * ((1.0 + d) * std::log1p(d) - d);
  }
  return s / n;
}

struct EntropyRateEstimate {
  double h_hat = 0.0;
  double stderr_ = 0.0;
  std::uint64_t samples = 0;
};

/// Time-weighted average of the functional over every stride-th holding
/// interval after the burn-in.
class EntropyRateObserver final : public Observer {
 public:
  EntropyRateObserver(const RateModel& reference, const RateModel& approximate, double burn_in, int stride)
      : ref_(&reference), apx_(&approximate), burn_in_(burn_in), stride_(std::max(stride, 1)) {}
  void hold(double t0, double t1, const Sampler& s) override {
    if (t0 < burn_in_) return;
    if (count_++ % static_cast<std::uint64_t>(stride_) != 0) return;
    const MicroConfig* sigma = s.micro();
    if (!sigma) throw ConfigurationError("entropy rate estimator needs a microscopic trajectory");
    vals_.push_back(entropy_rate_functional(*sigma, *ref_, *apx_));
    wts_.push_back(t1 - t0);
  }
  EntropyRateEstimate result() const {
    BatchMean b = batch_means(vals_, wts_, 20);
    return {b.mean, b.stderr_, static_cast<std::uint64_t>(vals_.size())};
  }

 private:
  const RateModel* ref_;
  const RateModel* apx_;
  double burn_in_;
  int stride_;
  std::uint64_t count_ = 0;
  std::vector<double> vals_, wts_;
};

inline EntropyRateEstimate entropy_rate_estimator(Sampler& s, const RateModel& reference, double burn_in,
                                                  double t_final, int stride, Rng& rng) {
  EntropyRateObserver obs(reference, s.model(), burn_in, stride);
  run_trajectory(s, t_final, rng, &obs);
  return obs.result();
}

// ---- hysteresis ---------------------------------------------------------

enum class Direction { up, down };

struct HysteresisPoint {
  double h = 0.0;
  double mean_coverage = 0.0;
  double stderr_ = 0.0;
  Direction direction = Direction::up;
  bool absorbed = false;
};

struct HysteresisOptions {
  SamplerOptions sampler;
  Variant mlkmc_variant = Variant::two_level_split;
  BoundMode bound = BoundMode::crude;
  int q = 1;
  double t_equil = 0.0;
  double t_measure = 0.0;
  int batches = 20;
};

/// Configuration with eta(k) particles packed at the start of each cell.
inline MicroConfig expand(const CoarseConfig& eta, const CoarseSpec& cs) {
  MicroConfig sigma(cs.sites());
  for (int k = 0; k < cs.cells; ++k) {
    for (int i = 0; i < eta[static_cast<std::size_t>(k)]; ++i) sigma.set(cs.first_site(k) + i, 1);
  }
  return sigma;
}

/// Sweeps h through the schedule (up, then reversed), seeding each point with
/// the previous final state.
inline std::vector<HysteresisPoint> hysteresis_sweep(const LatticeSpec& lat, PotentialSpec P,
                                                     const std::vector<double>& h_up, const HysteresisOptions& opt,
                                                     const MicroConfig& initial, Rng& rng) {
  if (!(opt.t_measure > 0.0) || opt.t_equil < 0.0) {
    throw ConfigurationError("hysteresis needs t_equil >= 0 and t_measure > 0");
  }
  std::vector<HysteresisPoint> out;
  MicroConfig sigma = initial;
  std::vector<std::pair<double, Direction>> schedule;
  for (double h : h_up) schedule.emplace_back(h, Direction::up);
  for (auto it = h_up.rbegin(); it != h_up.rend(); ++it) schedule.emplace_back(*it, Direction::down);
  for (auto [h, dir] : schedule) {
    P.h = h;
    Variant v = default_variant(opt.sampler.type, opt.mlkmc_variant);
    RateModel model(lat, P, v, v == Variant::microscopic ? 1 : opt.q, opt.bound);
    auto s = make_sampler(opt.sampler, model, sigma);
    TrajectoryStats eq = run_trajectory(*s, opt.t_equil, rng);
    TimeAverageObserver avg(0.0, opt.batches, opt.t_measure / (10.0 * opt.batches));
    TrajectoryStats ms = run_trajectory(*s, opt.t_measure, rng, &avg);
    BatchMean b = avg.result();
    out.push_back({h, b.mean, b.stderr_, dir, eq.absorbed || ms.absorbed});
    sigma = s->micro() ? *s->micro() : expand(s->coarse(), model.coarse());
  }
  return out;
}

}  // namespace mlkmc
