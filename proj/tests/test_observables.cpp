#include <gtest/gtest.h>

#include <cmath>

#include "mlkmc/ensemble.hpp"
#include "mlkmc/observables.hpp"
#include "mlkmc/oracle.hpp"

using namespace mlkmc;

namespace {

PotentialSpec spec(double K, double J, int L, double h) {
  PotentialSpec P;
  P.K = K;
  P.J = J;
  P.L = L;
  P.h = h;
  return P;
}

}  // namespace

TEST(Observables, CoverageAndCorrelation) {
  MicroConfig s{1, 1, 0, 1, 0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(coverage(s), 3.0 / 8);
  EXPECT_DOUBLE_EQ(correlation(s, 0), 3.0 / 8);
  EXPECT_DOUBLE_EQ(correlation(s, 1), 1.0 / 8);
  EXPECT_DOUBLE_EQ(correlation(s, 2), 1.0 / 8);
  EXPECT_DOUBLE_EQ(correlation(s, 3), 1.0 / 8);
  EXPECT_THROW(correlation(s, 8), ConfigurationError);
}

TEST(RunningStats, MeanVarianceMerge) {
  RunningStats a, b, all;
  std::vector<double> xs{1.0, 2.0, 4.0, 7.0, 11.0, 3.0};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    (i < 2 ? a : b).add(xs[i]);
    all.add(xs[i]);
  }
  EXPECT_DOUBLE_EQ(all.mean(), 28.0 / 6);
  double m = 28.0 / 6, v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  EXPECT_NEAR(all.variance(), v / 5, 1e-12);
  a.merge(b);
  EXPECT_EQ(a.count(), 6u);
  EXPECT_NEAR(a.mean(), all.mean(), 1e-14);
  EXPECT_NEAR(a.variance(), all.variance(), 1e-12);
  EXPECT_TRUE(std::isnan(RunningStats().mean()));
}

TEST(BatchMeans, WeightedMean) {
  std::vector<double> v{1.0, 3.0, 1.0, 3.0};
  std::vector<double> w{1.0, 1.0, 3.0, 3.0};
  BatchMean b = batch_means(v, w, 2);
  EXPECT_DOUBLE_EQ(b.mean, 2.0);
  EXPECT_EQ(b.batches, 2);
  EXPECT_DOUBLE_EQ(b.stderr_, 0.0);
}

TEST(Rejection, EmpiricalRate) {
  std::vector<EventRecord> ev(4);
  ev[0].kind = EventKind::adsorb;
  ev[1].kind = EventKind::null;
  ev[2].kind = EventKind::null;
  ev[3].kind = EventKind::desorb;
  EXPECT_DOUBLE_EQ(empirical_rejection_rate(ev), 0.5);
  EXPECT_THROW(empirical_rejection_rate(std::span<const EventRecord>{}), ConfigurationError);
  RejectionCounter rc;
  EXPECT_THROW(rc.rate(), ConfigurationError);
}

TEST(Rejection, CounterMatchesTrajectoryStats) {
  LatticeSpec lat(64);
  RateModel model(lat, spec(2.0, 0.0, 1, 1.0), Variant::microscopic);
  NullEventSampler s(model, MicroConfig(64));
  RejectionCounter rc;
  Rng rng(1);
  auto st = run_trajectory(s, 10.0, rng, &rc);
  EXPECT_EQ(rc.proposals(), st.proposals);
  EXPECT_EQ(rc.nulls(), st.null_events);
  EXPECT_GT(rc.rate(), 0.0);
}

TEST(ExitTime, TwoSiteMeanFirstPassage) {
  // K = J = h = 0 on two sites: E[tau] to fill both sites from empty is 2
  LatticeSpec lat(2);
  PotentialSpec P = spec(0.0, 0.0, 2, 0.0);
  struct Case {
    SamplerType type;
    Variant v;
    int q;
  };
  for (Case c : {Case{SamplerType::ssa, Variant::microscopic, 1}, Case{SamplerType::null_event, Variant::microscopic, 1},
                 Case{SamplerType::mlkmc, Variant::two_level_split, 2}, Case{SamplerType::cgmc, Variant::coarse_grained, 2}}) {
    RateModel model(lat, P, c.v, c.q);
    auto samples = run_replicas<ExitTimeSample>(20000, 5, 1, [&](std::uint64_t, Rng& rng) {
      auto s = make_sampler({c.type, false}, model, MicroConfig(2));
      return exit_time(*s, 1.0, 1e6, rng);
    });
    ExitTimeSummary sum = summarize(samples);
    EXPECT_EQ(sum.censored, 0u);
    EXPECT_NEAR(sum.uncensored.mean(), 2.0, 4 * sum.uncensored.stderr_()) << to_string(c.type);
  }
}

TEST(ExitTime, EdgeCases) {
  LatticeSpec lat(8);
  RateModel model(lat, spec(0.0, 0.0, 8, 5.0), Variant::microscopic);
  Rng rng(2);
  SsaSampler full(model, MicroConfig(8, 1));
  EXPECT_EQ(exit_time(full, 0.5, 10.0, rng).tau, 0.0);
  SsaSampler empty(model, MicroConfig(8));
  ExitTimeSample c = exit_time(empty, 1.0, 0.01, rng);
  EXPECT_TRUE(c.censored);
  EXPECT_EQ(c.tau, 0.01);
  EXPECT_THROW(exit_time(empty, 0.0, 1.0, rng), ConfigurationError);
  EXPECT_THROW(exit_time(empty, 1.5, 1.0, rng), ConfigurationError);
}

TEST(GridObserver, SamplesPiecewiseConstantPath) {
  LatticeSpec lat(16);
  RateModel model(lat, spec(1.0, 0.0, 1, 0.0), Variant::microscopic);
  SsaSampler s(model, MicroConfig(16));
  GridObserver g(5.0, 11);
  Rng rng(3);
  auto st = run_trajectory(s, 5.0, rng, &g);
  g.finish(s);
  ASSERT_EQ(g.values().size(), 11u);
  EXPECT_EQ(g.values().front(), 0.0);
  EXPECT_EQ(g.values().back(), st.final_coverage);
  EXPECT_DOUBLE_EQ(g.time_at(10), 5.0);
}

TEST(TimeAverage, MatchesTrajectoryArea) {
  LatticeSpec lat(32);
  RateModel model(lat, spec(1.0, 2.0, 4, 0.5), Variant::microscopic);
  NullEventSampler s(model, MicroConfig(32));
  TimeAverageObserver avg(0.0, 10);
  TimeAverageObserver windowed(0.0, 10, 0.5);
  struct Both : Observer {
    Observer* a;
    Observer* b;
    void hold(double t0, double t1, const Sampler& smp) override {
      a->hold(t0, t1, smp);
      b->hold(t0, t1, smp);
    }
  } both;
  both.a = &avg;
  both.b = &windowed;
  Rng rng(4);
  auto st = run_trajectory(s, 20.0, rng, &both);
  EXPECT_NEAR(avg.result().mean, st.time_averaged_coverage, 1e-12);
  EXPECT_NEAR(windowed.result().mean, st.time_averaged_coverage, 1e-12);
}

TEST(TimeAverage, StationaryCoverageMatchesGibbs) {
  const int n = 10;
  LatticeSpec lat(n);
  PotentialSpec P = spec(1.0, 2.0, 3, 1.2);
  EnumeratedMeasure mu = enumerate_gibbs(lat, P);
  double exact = expected_coverage(mu.p, n);
  RateModel model(lat, P, Variant::microscopic);
  NullEventSampler s(model, MicroConfig(n));
  TimeAverageObserver avg(50.0, 40, 50.0);
  Rng rng(5);
  run_trajectory(s, 20000.0, rng, &avg);
  BatchMean b = avg.result();
  EXPECT_NEAR(b.mean, exact, 4 * b.stderr_ + 1e-3);

  // split variant: stationary law is the Gibbs measure of the approximate Hamiltonian
  RateModel split(lat, P, Variant::two_level_split, 5);
  EnumeratedMeasure mut = enumerate_gibbs(lat, P, HamiltonianKind::approximate, 5);
  double approx = expected_coverage(mut.p, n);
  MlkmcSampler ms(split, MicroConfig(n));
  TimeAverageObserver avg2(50.0, 40, 50.0);
  run_trajectory(ms, 20000.0, rng, &avg2);
  BatchMean b2 = avg2.result();
  EXPECT_NEAR(b2.mean, approx, 4 * b2.stderr_ + 1e-3);
}

TEST(EntropyRate, FunctionalProperties) {
  const int n = 24;
  LatticeSpec lat(n);
  PotentialSpec P = spec(1.5, 3.0, 5, 0.5);
  RateModel micro(lat, P, Variant::microscopic);
  RateModel exact(lat, P, Variant::two_level_exact, 4);
  RateModel split(lat, P, Variant::two_level_split, 4);
  RateModel trivial(lat, P, Variant::two_level_split, 1);
  Rng rng(6);
  double worst_exact = 0.0, best_split = 1.0;
  for (int trial = 0; trial < 100; ++trial) {
    MicroConfig s(n);
    for (int x = 0; x < n; ++x) s.set(x, rng.uniform() < 0.5);
    double fe = entropy_rate_functional(s, micro, exact);
    double fs = entropy_rate_functional(s, micro, split);
    EXPECT_GE(fs, 0.0);
    EXPECT_LT(std::abs(entropy_rate_functional(s, micro, trivial)), 1e-20);
    worst_exact = std::max(worst_exact, std::abs(fe));
    best_split = std::min(best_split, fs);
  }
  EXPECT_LT(worst_exact, 1e-20);
  EXPECT_GT(best_split, 0.0);
}

TEST(EntropyRate, EstimatorRanksCoarsening) {
  const int n = 256;
  LatticeSpec lat(n);
  PotentialSpec P = spec(1.0, 4.0, 16, 1.5);
  P.profile = Profile::smooth;
  RateModel micro(lat, P, Variant::microscopic);
  std::vector<double> est;
  for (int q : {2, 8}) {
    RateModel split(lat, P, Variant::two_level_split, q);
    MlkmcSampler s(split, MicroConfig(n));
    Rng rng(7);
    est.push_back(entropy_rate_estimator(s, micro, 5.0, 40.0, 10, rng).h_hat);
  }
  EXPECT_GT(est[0], 0.0);
  EXPECT_GT(est[1], est[0]);
}

TEST(Hysteresis, SweepShapeAndLimits) {
  LatticeSpec lat(64);
  PotentialSpec P = spec(0.0, 2.0, 64, 0.0);
  HysteresisOptions opt;
  opt.sampler.type = SamplerType::mlkmc;
  opt.q = 8;
  opt.t_equil = 5.0;
  opt.t_measure = 10.0;
  Rng rng(8);
  auto pts = hysteresis_sweep(lat, P, {-6.0, 0.0, 8.0}, opt, MicroConfig(64), rng);
  ASSERT_EQ(pts.size(), 6u);
  EXPECT_EQ(pts[0].direction, Direction::up);
  EXPECT_EQ(pts[3].direction, Direction::down);
  EXPECT_EQ(pts[3].h, 8.0);
  EXPECT_EQ(pts[5].h, -6.0);
  EXPECT_GT(pts[0].mean_coverage, 0.9);
  EXPECT_LT(pts[2].mean_coverage, 0.1);
  EXPECT_GT(pts[5].mean_coverage, 0.9);
  opt.t_measure = 0.0;
  EXPECT_THROW(hysteresis_sweep(lat, P, {0.0}, opt, MicroConfig(64), rng), ConfigurationError);
}

TEST(Hysteresis, CoarseSamplerSeedsFromBlockSpins) {
  CoarseSpec cs(LatticeSpec(8), 4);
  MicroConfig s = expand(CoarseConfig{2, 4}, cs);
  EXPECT_EQ(s, (MicroConfig{1, 1, 0, 0, 1, 1, 1, 1}));
  LatticeSpec lat(64);
  HysteresisOptions opt;
  opt.sampler.type = SamplerType::cgmc;
  opt.q = 8;
  opt.t_equil = 2.0;
  opt.t_measure = 5.0;
  Rng rng(9);
  auto pts = hysteresis_sweep(lat, spec(0.0, 2.0, 64, 0.0), {-6.0, 8.0}, opt, MicroConfig(64), rng);
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_GT(pts[0].mean_coverage, 0.9);
  EXPECT_LT(pts[1].mean_coverage, 0.1);
}
