#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "mlkmc/oracle.hpp"
#include "mlkmc/random.hpp"
#include "mlkmc/rates.hpp"

namespace mlkmc {

enum class ValidationLevel { fast, full };

/// Deliberate defects for checking that the suite catches them.
enum class Fault { none, short_sign_flip };

inline Fault fault_from_string(const std::string& s) {
  if (s == "none") return Fault::none;
  if (s == "short-sign-flip") return Fault::short_sign_flip;
  throw ConfigurationError("unknown fault '" + s + "' (expected none|short-sign-flip)");
}

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // the measured quantity
  double tolerance = 0.0;  // pass iff value <= tolerance unless noted in detail
  std::string detail;
};

struct ValidationReport {
  ValidationLevel level = ValidationLevel::fast;
  Fault fault = Fault::none;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
      if (!c.passed) out.push_back(c.name);
    }
    return out;
  }
};

namespace detail {

inline PotentialSpec random_potential(Rng& rng, int n) {
  PotentialSpec P;
  P.K = 4.0 * rng.uniform() - 2.0;
  P.J = 8.0 * rng.uniform() - 3.0;
  P.h = 4.0 * rng.uniform() - 2.0;
  P.beta = 0.5 + rng.uniform();
  P.L = 1 + rng.index(n);
  P.profile = rng.uniform() < 0.5 ? Profile::constant : Profile::smooth;
  return P;
}

/// Split rates, optionally with the sign of U^(s) flipped in the reconstruction.
inline RateFunction split_rates(const RateModel& m, Fault fault) {
  RateFunction base = rate_function(m);
  if (fault == Fault::none) return base;
  return [&m, base](int x, const MicroConfig& s) {
    double r = base(x, s);
    if (!s[x]) return r;
    double us = energy_diff(x, s, m.pairs(), m.potential().h).short_part;
    return r * std::exp(2.0 * m.potential().beta * us);
  };
}

inline CheckResult at_most(std::string name, double value, double tol, std::string detail = {}) {
  return {std::move(name), value <= tol && std::isfinite(value), value, tol, std::move(detail)};
}

inline double exact_identity_error(int n, int sets, std::uint64_t seed) {
  LatticeSpec lat(n);
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < sets; ++i) {
    PotentialSpec P = random_potential(rng, n);
    RateModel micro(lat, P, Variant::microscopic);
    for (int q = 2; q <= n; ++q) {
      if (n % q) continue;
      RateModel ex(lat, P, Variant::two_level_exact, q);
      for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
        MicroConfig sigma = MicroConfig::from_index(s, n);
        CoarseConfig eta = coarsen(sigma, ex.coarse());
        for (int x = 0; x < n; ++x) {
          double c = micro.micro_rate(x, sigma);
          worst = std::max(worst, std::abs(ex.combined_rate(x, sigma, eta) - c) / std::max(1.0, c));
        }
      }
    }
  }
  return worst;
}

inline double micro_db(int n, int sets, std::uint64_t seed) {
  LatticeSpec lat(n);
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < sets; ++i) {
    RateModel m(lat, random_potential(rng, n), Variant::microscopic);
    worst = std::max(worst, detailed_balance_violation(m));
  }
  return worst;
}

inline double split_db(int n, int sets, std::uint64_t seed, Fault fault) {
  LatticeSpec lat(n);
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < sets; ++i) {
    PotentialSpec P = random_potential(rng, n);
    for (int q = 2; q < n; ++q) {
      if (n % q) continue;
      RateModel m(lat, P, Variant::two_level_split, q);
      worst = std::max(worst, detailed_balance_violation(m, split_rates(m, fault)));
    }
  }
  return worst;
}

/// max lambda~ / lambda~* over random states; <= 1 is the bound.
inline double bound_ratio(int n, int states, std::uint64_t seed) {
  LatticeSpec lat(n);
  Rng rng(seed);
  double worst = 0.0;
  const int qs[] = {2, 4, 8};
  for (int i = 0; i < states; ++i) {
    PotentialSpec P = random_potential(rng, n);
    int q = qs[rng.index(3)];
    Variant v = rng.uniform() < 0.5 ? Variant::two_level_split : Variant::two_level_exact;
    BoundMode b = rng.uniform() < 0.5 ? BoundMode::crude : BoundMode::exact_sum;
    RateModel m(lat, P, v, q, b);
    MicroConfig s(n);
    double p = rng.uniform();
    for (int x = 0; x < n; ++x) s.set(x, rng.uniform() < p);
    RateBounds rb = m.rate_bounds(s);
    if (rb.lambda_tilde_star > 0.0) worst = std::max(worst, rb.lambda_tilde / rb.lambda_tilde_star);
  }
  return worst;
}

}  // namespace detail

inline ValidationReport run_validation(ValidationLevel level, Fault fault = Fault::none, std::uint64_t seed = 2024) {
  using namespace detail;
  auto t0 = std::chrono::steady_clock::now();
  ValidationReport r;
  r.level = level;
  r.fault = fault;

  r.checks.push_back(at_most("exact_variant_identity_N8", exact_identity_error(8, 3, seed), 1e-12,
                             "max relative |c~ - c| over all (x, sigma), every q dividing N"));
  r.checks.push_back(at_most("detailed_balance_microscopic_N8", micro_db(8, 5, seed + 1), 1e-10,
                             "max |c w - c^x w^x| / max w against exp(-beta H)"));
  r.checks.push_back(at_most("detailed_balance_split_N8", split_db(8, 5, seed + 2, fault), 1e-10,
                             "split rates against exp(-beta H~)"));
  double ratio = bound_ratio(16, 10000, seed + 3);
  r.checks.push_back(at_most("rate_bound_lambda_tilde", ratio, 1.0 + 1e-12, "max lambda~ / lambda~* over 10^4 states"));

  {
    LatticeSpec lat(8);
    Rng rng(seed + 4);
    PotentialSpec P = random_potential(rng, 8);
    RateModel m(lat, P, Variant::microscopic);
    Generator g = build_generator(m);
    EnumeratedMeasure mu = enumerate_gibbs(lat, P);
    double flux = 0.0;
    for (double f : apply_generator(g, mu.p)) flux = std::max(flux, std::abs(f));
    r.checks.push_back(at_most("gibbs_stationary_N8", flux, 1e-12, "max |(mu Q)_i|"));
    auto p = master_equation_evolve(g, point_mass(8, 0), 3.0);
    double total = 0.0;
    for (double v : p) total += v;
    r.checks.push_back(at_most("master_equation_mass_N8", std::abs(total - 1.0), 1e-12, "|sum p(t) - 1|"));

    RateModel split1(lat, P, Variant::two_level_split, 1);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 256; ++s) {
      MicroConfig sigma = MicroConfig::from_index(s, 8);
      for (int x = 0; x < 8; ++x) {
        double c = m.micro_rate(x, sigma);
        worst = std::max(worst, std::abs(split1.combined_rate(x, sigma) - c) / std::max(1.0, c));
      }
    }
    r.checks.push_back(at_most("split_q1_equals_microscopic_N8", worst, 1e-12));
  }

  if (level == ValidationLevel::full) {
    r.checks.push_back(at_most("exact_variant_identity_N10", exact_identity_error(10, 2, seed + 5), 1e-12));
    r.checks.push_back(at_most("detailed_balance_microscopic_N12", micro_db(12, 2, seed + 6), 1e-10));
    r.checks.push_back(at_most("detailed_balance_split_N12", split_db(12, 1, seed + 7, fault), 1e-10));

    // J = 0: the ring converges to the infinite chain exponentially fast
    {
      const int n = 14;
      double worst = 0.0;
      for (double K : {-1.0, 0.5, 1.5}) {
        for (double h : {-0.5, 0.8}) {
          PotentialSpec P;
          P.K = K;
          P.h = h;
          EnumeratedMeasure mu = enumerate_gibbs(LatticeSpec(n), P);
          worst = std::max(worst, std::abs(expected_coverage(mu.p, n) - closed_form_coverage(P).front().coverage));
        }
      }
      r.checks.push_back(at_most("closed_form_vs_enumeration_J0_N14", worst, 1e-4));
    }

    {
      const int n = 12;
      PotentialSpec P;
      P.K = 1.0;
      P.J = 4.0;
      P.L = 6;
      P.h = 1.0;
      P.profile = Profile::smooth;
      auto scan = weak_error_scan(LatticeSpec(n), P, {1, 2, 4}, 1.0);
      r.checks.push_back(at_most("weak_error_q1_N12", scan[0].error, 1e-11, "exact and split laws coincide at q = 1"));
      bool grows = scan[2].error > scan[1].error && scan[1].error > 0.0;
      r.checks.push_back({"weak_error_grows_with_q_N12", grows, scan[2].error / std::max(scan[1].error, 1e-300), 0.0,
                          "error(q=4) / error(q=2), pass iff > 1"});
    }

    {
      const int n = 12;
      LatticeSpec lat(n);
      PotentialSpec cw;
      cw.K = 1.0;
      cw.J = 4.0;
      cw.L = n;
      cw.h = 1.0;
      double r0 = relative_entropy_per_particle(enumerate_gibbs(lat, cw),
                                                enumerate_gibbs(lat, cw, HamiltonianKind::approximate, 4));
      r.checks.push_back(at_most("relative_entropy_constant_profile_N12", r0, 1e-13));
    }
  }

  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace mlkmc
