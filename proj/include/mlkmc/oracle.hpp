#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mlkmc/errors.hpp"
#include "mlkmc/lattice.hpp"
#include "mlkmc/potentials.hpp"
#include "mlkmc/rates.hpp"

namespace mlkmc {

/// Probabilities over all 2^N configurations, index bit x = sigma(x).
struct EnumeratedMeasure {
  int n = 0;
  std::vector<double> p;
  double log_partition = 0.0;  // log sum_sigma exp(-beta H(sigma))
};

enum class HamiltonianKind { exact, approximate };

namespace detail {
inline void size_guard(int n, int limit, const char* what) {
  if (n > limit) {
    throw SizeLimitError(std::string(what) + ": N=" + std::to_string(n) + " exceeds the enumeration limit " +
                         std::to_string(limit));
  }
}
}  // namespace detail

/// H~(sigma) = -1/2 sum_{x != y} [K(x-y) + Jbar(k(x), k(y))] sigma(x) sigma(y) + h sum sigma.
inline double approximate_hamiltonian(const MicroConfig& sigma, const PairTable& t, const CoarseCoupling& c,
                                      double h) {
  const int n = sigma.size();
  LatticeSpec lat(n);
  double pair = 0.0;
  int occ = 0;
  for (int x = 0; x < n; ++x) {
    if (!sigma[x]) continue;
    ++occ;
    for (int y = 0; y < n; ++y) {
      if (y == x || !sigma[y]) continue;
      pair += t.k(lat.distance(x, y)) + c.jbar_at(c.cs.cell_of(x), c.cs.cell_of(y));
    }
  }
  return -0.5 * pair + h * occ;
}

/// Energies H(sigma) (or H~ for the given coarse spec) for every configuration.
inline std::vector<double> enumerate_energies(const LatticeSpec& lat, const PotentialSpec& P, HamiltonianKind kind,
                                              int q = 1) {
  detail::size_guard(lat.n, 20, "enumerate_gibbs");
  PairTable t = make_pair_table(P, lat);
  CoarseCoupling c = coarse_coupling(t, CoarseSpec(lat, q), P.h);
  const std::uint64_t states = std::uint64_t{1} << lat.n;
  std::vector<double> e(states);
  for (std::uint64_t s = 0; s < states; ++s) {
    MicroConfig sigma = MicroConfig::from_index(s, lat.n);
    e[s] = kind == HamiltonianKind::exact ? hamiltonian(sigma, t, P.h) : approximate_hamiltonian(sigma, t, c, P.h);
  }
  return e;
}

inline EnumeratedMeasure gibbs_from_energies(int n, const std::vector<double>& energies, double beta) {
  EnumeratedMeasure m;
  m.n = n;
  m.p.resize(energies.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double e : energies) mx = std::max(mx, -beta * e);
  double z = 0.0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    m.p[i] = std::exp(-beta * energies[i] - mx);
    z += m.p[i];
  }
  for (double& v : m.p) v /= z;
  m.log_partition = mx + std::log(z);
  return m;
}

inline EnumeratedMeasure enumerate_gibbs(const LatticeSpec& lat, const PotentialSpec& P,
                                         HamiltonianKind kind = HamiltonianKind::exact, int q = 1) {
  return gibbs_from_energies(lat.n, enumerate_energies(lat, P, kind, q), P.beta);
}

/// R(mu | nu) = (1/N) sum mu log(mu / nu).
inline double relative_entropy_per_particle(const EnumeratedMeasure& mu, const EnumeratedMeasure& nu) {
  if (mu.p.size() != nu.p.size()) throw ConfigurationError("relative entropy: measures on different spaces");
  double r = 0.0;
  for (std::size_t i = 0; i < mu.p.size(); ++i) {
    if (mu.p[i] == 0.0) continue;
    if (nu.p[i] == 0.0) throw ConfigurationError("relative entropy: mu is not absolutely continuous w.r.t. nu");
    r += mu.p[i] * std::log(mu.p[i] / nu.p[i]);
  }
  return std::max(0.0, r) / std::max(mu.n, 1);
}

using RateFunction = std::function<double(int, const MicroConfig&)>;

/// Rates of the model as a plain function of (x, sigma).
inline RateFunction rate_function(const RateModel& m) {
  if (m.variant() == Variant::microscopic) {
    return [&m](int x, const MicroConfig& s) { return m.micro_rate(x, s); };
  }
  return [&m](int x, const MicroConfig& s) { return m.combined_rate(x, s); };
}

/// max_{x, sigma} |c(x, sigma) w(sigma) - c(x, sigma^x) w(sigma^x)| / max w,
/// with w = exp(-beta H). The split variant is checked against H~.
inline double detailed_balance_violation(const RateModel& m, const RateFunction& rate) {
  const int n = m.lattice().n;
  detail::size_guard(n, 14, "detailed_balance_check");
  HamiltonianKind kind = m.variant() == Variant::two_level_split ? HamiltonianKind::approximate : HamiltonianKind::exact;
  std::vector<double> e = enumerate_energies(m.lattice(), m.potential(), kind, m.q());
  const double beta = m.potential().beta;
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : e) mx = std::max(mx, -beta * v);
  std::vector<double> w(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) w[i] = std::exp(-beta * e[i] - mx);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < e.size(); ++s) {
    MicroConfig sigma = MicroConfig::from_index(s, n);
    for (int x = 0; x < n; ++x) {
      std::uint64_t sx = s ^ (std::uint64_t{1} << x);
      if (sx < s) continue;
      MicroConfig flipped = MicroConfig::from_index(sx, n);
      double lhs = rate(x, sigma) * w[s];
      double rhs = rate(x, flipped) * w[sx];
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return worst;  // weights are scaled so that max w = 1
}

inline double detailed_balance_violation(const RateModel& m) { return detailed_balance_violation(m, rate_function(m)); }

/// Sparse generator: Q(s, s ^ (1 << x)) = rate[s * N + x], diagonal = -exit[s].
struct Generator {
  int n = 0;
  std::vector<double> rate;
  std::vector<double> exit;

  std::uint64_t states() const { return std::uint64_t{1} << n; }
  double entry(std::uint64_t i, std::uint64_t j) const {
    if (i == j) return -exit[i];
    std::uint64_t d = i ^ j;
    if (std::popcount(d) != 1) return 0.0;
    return rate[i * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(std::countr_zero(d))];
  }
  double max_exit() const { return exit.empty() ? 0.0 : *std::max_element(exit.begin(), exit.end()); }
};

inline Generator build_generator(int n, const RateFunction& rate) {
  detail::size_guard(n, 14, "build_generator");
  Generator g;
  g.n = n;
  const std::uint64_t states = std::uint64_t{1} << n;
  g.rate.assign(states * static_cast<std::uint64_t>(n), 0.0);
  g.exit.assign(states, 0.0);
  for (std::uint64_t s = 0; s < states; ++s) {
    MicroConfig sigma = MicroConfig::from_index(s, n);
    double tot = 0.0;
    for (int x = 0; x < n; ++x) {
      double r = rate(x, sigma);
      g.rate[s * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(x)] = r;
      tot += r;
    }
    g.exit[s] = tot;
  }
  return g;
}

inline Generator build_generator(const RateModel& m) { return build_generator(m.lattice().n, rate_function(m)); }

/// p Q for a row vector p.
inline std::vector<double> apply_generator(const Generator& g, const std::vector<double>& p) {
  std::vector<double> out(p.size(), 0.0);
  const auto n = static_cast<std::uint64_t>(g.n);
  for (std::uint64_t s = 0; s < p.size(); ++s) {
    if (p[s] == 0.0) continue;
    out[s] -= p[s] * g.exit[s];
    for (std::uint64_t x = 0; x < n; ++x) out[s ^ (std::uint64_t{1} << x)] += p[s] * g.rate[s * n + x];
  }
  return out;
}

/// p0 exp(t Q) by uniformisation, in chunks with Lambda * dt <= 30.
inline std::vector<double> master_equation_evolve(const Generator& g, std::vector<double> p, double t,
                                                  double tol = 1e-13) {
  if (p.size() != g.states()) throw ConfigurationError("master equation: distribution has wrong length");
  if (t < 0.0) throw ConfigurationError("master equation: t must be >= 0");
  double lam = g.max_exit();
  if (t == 0.0 || lam == 0.0) return p;
  const double max_chunk = 30.0;
  int chunks = static_cast<int>(std::ceil(lam * t / max_chunk));
  double dt = t / chunks;
  double a = lam * dt;
  const auto n = static_cast<std::uint64_t>(g.n);
  std::vector<double> term(p.size()), next(p.size()), acc(p.size());
  for (int c = 0; c < chunks; ++c) {
    term = p;
    double w = std::exp(-a);
    double wsum = w;
    for (std::size_t i = 0; i < p.size(); ++i) acc[i] = w * term[i];
    for (int k = 1; 1.0 - wsum > tol; ++k) {
      // term <- term P with P = I + Q / lam
      std::fill(next.begin(), next.end(), 0.0);
      for (std::uint64_t s = 0; s < term.size(); ++s) {
        double v = term[s];
        if (v == 0.0) continue;
        next[s] += v * (1.0 - g.exit[s] / lam);
        for (std::uint64_t x = 0; x < n; ++x) next[s ^ (std::uint64_t{1} << x)] += v * g.rate[s * n + x] / lam;
      }
      term.swap(next);
      w *= a / k;
      wsum += w;
      for (std::size_t i = 0; i < p.size(); ++i) acc[i] += w * term[i];
      if (k > 100000) throw InternalLogicError("master equation: Poisson series failed to converge");
    }
    double total = 0.0;
    for (double v : acc) total += v;
    if (std::abs(total - 1.0) > 1e-9) {
      throw InternalLogicError("master equation: probability drift " + std::to_string(total - 1.0));
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = acc[i] / total;
  }
  return p;
}

inline std::vector<double> point_mass(int n, std::uint64_t index) {
  std::vector<double> p(std::uint64_t{1} << n, 0.0);
  p[index] = 1.0;
  return p;
}

/// E[coverage] under a distribution over configurations.
inline double expected_coverage(const std::vector<double>& p, int n) {
  double s = 0.0;
  for (std::uint64_t i = 0; i < p.size(); ++i) s += p[i] * std::popcount(i);
  return s / n;
}

struct WeakErrorPoint {
  int q = 1;
  double exact = 0.0;
  double approximate = 0.0;
  double error = 0.0;
};

/// |E[c(sigma_T)] - E[c(sigma~_T)]| for the split variant at each q, starting from `initial`.
inline std::vector<WeakErrorPoint> weak_error_scan(const LatticeSpec& lat, const PotentialSpec& P,
                                                   const std::vector<int>& qs, double T, std::uint64_t initial = 0) {
  detail::size_guard(lat.n, 12, "weak_error_scan");
  RateModel micro(lat, P, Variant::microscopic);
  std::vector<double> pe = master_equation_evolve(build_generator(micro), point_mass(lat.n, initial), T);
  double ce = expected_coverage(pe, lat.n);
  std::vector<WeakErrorPoint> out;
  for (int q : qs) {
    RateModel split(lat, P, Variant::two_level_split, q);
    std::vector<double> pa = master_equation_evolve(build_generator(split), point_mass(lat.n, initial), T);
    double ca = expected_coverage(pa, lat.n);
    out.push_back({q, ce, ca, std::abs(ce - ca)});
  }
  return out;
}

}  // namespace mlkmc
