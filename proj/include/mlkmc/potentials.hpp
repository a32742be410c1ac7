#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mlkmc/errors.hpp"
#include "mlkmc/lattice.hpp"

namespace mlkmc {

/// Shape V of the long-range kernel on [0, 1].
enum class Profile { constant, smooth };

inline const char* to_string(Profile p) { return p == Profile::constant ? "constant" : "smooth"; }

inline Profile profile_from_string(const std::string& s) {
  if (s == "constant") return Profile::constant;
  if (s == "smooth") return Profile::smooth;
  throw ConfigurationError("unknown profile '" + s + "' (expected constant|smooth)");
}

/// V(s) for s >= 0. The smooth profile is the C^1 cubic (1-s)^2 (1+2s).
inline double profile_value(Profile p, double s) {
  if (s < 0.0) s = -s;
  if (s > 1.0) return 0.0;
  if (p == Profile::constant) return 1.0;
  return (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s);
}

/// Energy a nearest-neighbour bond contributes to U: K (full) or K/2 (half).
enum class BondConvention { full, half };

inline const char* to_string(BondConvention b) { return b == BondConvention::full ? "full" : "half"; }

inline BondConvention bond_from_string(const std::string& s) {
  if (s == "full") return BondConvention::full;
  if (s == "half") return BondConvention::half;
  throw ConfigurationError("unknown bond convention '" + s + "' (expected full|half)");
}

/// Interaction parameters. L >= N selects the Curie-Weiss (all-to-all) long-range part.
struct PotentialSpec {
  double K = 0.0;
  BondConvention bond = BondConvention::full;
  double J = 0.0;
  int L = 1;
  Profile profile = Profile::constant;
  double h = 0.0;
  double beta = 1.0;
  double d0 = 1.0;

  void validate() const {
    if (L < 1) throw ConfigurationError("long-range radius L must be >= 1");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigurationError("beta must be positive and finite");
    if (!(d0 > 0.0) || !std::isfinite(d0)) throw ConfigurationError("d0 must be positive and finite");
    if (!std::isfinite(K) || !std::isfinite(J) || !std::isfinite(h)) {
      throw ConfigurationError("K, J and h must be finite");
    }
  }

  /// Nearest-neighbour coupling K(1) entering U and H.
  double k_bond() const { return bond == BondConvention::full ? K : 0.5 * K; }
};

/// Pair couplings K(r) + J(r) tabulated by ring distance r = 0..N/2.
///
/// Long range: L >= N gives J(r) = (J/N) V(r/N) for every r > 0; L < N gives
/// J(r) = (J/(2L)) V(r/L) for 0 < r <= L.
struct PairTable {
  int n = 0;
  int reach = 0;  // largest r with a nonzero coupling
  std::vector<double> k_by_r;
  std::vector<double> j_by_r;
  std::vector<double> total_by_r;

  // Set when J(r) is a single constant on 1..j_reach, so interaction sums can
  // be kept as integer counts (bit-identical rates across sites).
  bool piecewise_constant = false;
  double j_const = 0.0;
  int j_reach = 0;

  double k(int r) const { return k_by_r[static_cast<std::size_t>(r)]; }
  double j(int r) const { return j_by_r[static_cast<std::size_t>(r)]; }
  double total(int r) const { return total_by_r[static_cast<std::size_t>(r)]; }
  int max_distance() const { return n / 2; }
};

inline PairTable make_pair_table(const PotentialSpec& P, const LatticeSpec& lat) {
  P.validate();
  PairTable t;
  t.n = lat.n;
  const int rmax = lat.n / 2;
  t.k_by_r.assign(static_cast<std::size_t>(rmax) + 1, 0.0);
  t.j_by_r.assign(static_cast<std::size_t>(rmax) + 1, 0.0);
  t.total_by_r.assign(static_cast<std::size_t>(rmax) + 1, 0.0);
  if (rmax >= 1) t.k_by_r[1] = P.k_bond();
  const bool cw = P.L >= lat.n;
  for (int r = 1; r <= rmax; ++r) {
    double v = 0.0;
    if (cw) {
      v = P.J / lat.n * profile_value(P.profile, static_cast<double>(r) / lat.n);
    } else if (r <= P.L) {
      v = P.J / (2.0 * P.L) * profile_value(P.profile, static_cast<double>(r) / P.L);
    }
    t.j_by_r[static_cast<std::size_t>(r)] = v;
  }
  for (int r = 0; r <= rmax; ++r) {
    t.total_by_r[static_cast<std::size_t>(r)] = t.k_by_r[static_cast<std::size_t>(r)] + t.j_by_r[static_cast<std::size_t>(r)];
    if (t.total_by_r[static_cast<std::size_t>(r)] != 0.0) t.reach = r;
  }
  if (P.J == 0.0 || P.profile == Profile::constant) {
    t.piecewise_constant = true;
    t.j_const = 0.0;
    t.j_reach = 0;
    if (P.J != 0.0) {
      t.j_const = t.j_by_r.size() > 1 ? t.j_by_r[1] : 0.0;
      t.j_reach = cw ? rmax : std::min(P.L, rmax);
    }
  }
  return t;
}

/// Calls f(y, r) for each y != x at ring distance r in [1, reach], each site once.
template <class F>
inline void for_each_within(int x, int reach, int n, F&& f) {
  for (int r = 1; r <= reach; ++r) {
    int y1 = x + r;
    if (y1 >= n) y1 -= n;
    f(y1, r);
    if (2 * r != n) {
      int y2 = x - r;
      if (y2 < 0) y2 += n;
      f(y2, r);
    }
  }
}

/// U split into short-range and long-range parts, each carrying -h/2.
struct EnergyDiff {
  double total;
  double short_part;
  double long_part;
};

inline EnergyDiff energy_diff(int x, const MicroConfig& sigma, const PairTable& t, double h) {
  double ks = 0.0, js = 0.0;
  for_each_within(x, t.reach, t.n, [&](int y, int r) {
    if (sigma[y]) {
      ks += t.k(r);
      js += t.j(r);
    }
  });
  return {ks + js - h, ks - 0.5 * h, js - 0.5 * h};
}

inline EnergyDiff energy_diff(int x, const MicroConfig& sigma, const PotentialSpec& P) {
  LatticeSpec lat(sigma.size());
  lat.check_site(x);
  return energy_diff(x, sigma, make_pair_table(P, lat), P.h);
}

/// H(sigma) = -1/2 sum_x sum_{y != x} (K + J)(x - y) sigma(x) sigma(y) + h sum_x sigma(x).
///
/// With this sign of the field term H(sigma^x) - H(sigma) = (2 sigma(x) - 1) U(x, sigma).
inline double hamiltonian(const MicroConfig& sigma, const PairTable& t, double h) {
  double pair = 0.0;
  int occ = 0;
  for (int x = 0; x < t.n; ++x) {
    if (!sigma[x]) continue;
    ++occ;
    for_each_within(x, t.reach, t.n, [&](int y, int r) {
      if (sigma[y]) pair += t.total(r);
    });
  }
  return -0.5 * pair + h * occ;
}

inline double hamiltonian(const MicroConfig& sigma, const PotentialSpec& P) {
  return hamiltonian(sigma, make_pair_table(P, LatticeSpec(sigma.size())), P.h);
}

/// Block-averaged couplings, stored by coarse offset d = (l - k) mod M.
struct CoarseCoupling {
  CoarseSpec cs;
  std::vector<double> kbar;  // short-range part
  std::vector<double> jbar;  // long-range part
  double hbar = 0.0;

  double jbar_at(int k, int l) const { return jbar[static_cast<std::size_t>(offset(k, l))]; }
  double kbar_at(int k, int l) const { return kbar[static_cast<std::size_t>(offset(k, l))]; }
  double full_at(int k, int l) const { return kbar_at(k, l) + jbar_at(k, l); }
  double jbar_diag() const { return jbar[0]; }
  int offset(int k, int l) const {
    int d = (l - k) % cs.cells;
    return d < 0 ? d + cs.cells : d;
  }
};

inline CoarseCoupling coarse_coupling(const PairTable& t, const CoarseSpec& cs, double h) {
  if (cs.sites() != t.n) throw ConfigurationError("coarse spec does not match lattice size");
  CoarseCoupling c;
  c.cs = cs;
  c.hbar = h;
  c.kbar.assign(static_cast<std::size_t>(cs.cells), 0.0);
  c.jbar.assign(static_cast<std::size_t>(cs.cells), 0.0);
  LatticeSpec lat(t.n);
  const int q = cs.q;
  for (int d = 0; d < cs.cells; ++d) {
    double ks = 0.0, js = 0.0;
    for (int x = 0; x < q; ++x) {
      for (int y = d * q; y < (d + 1) * q; ++y) {
        if (y == x) continue;
        int r = lat.distance(x, y);
        ks += t.k(r);
        js += t.j(r);
      }
    }
    double pairs = d == 0 ? static_cast<double>(q) * (q - 1) : static_cast<double>(q) * q;
    c.kbar[static_cast<std::size_t>(d)] = pairs > 0 ? ks / pairs : 0.0;
    c.jbar[static_cast<std::size_t>(d)] = pairs > 0 ? js / pairs : 0.0;
  }
  return c;
}

inline CoarseCoupling coarse_coupling(const PotentialSpec& P, const CoarseSpec& cs) {
  return coarse_coupling(make_pair_table(P, LatticeSpec(cs.sites())), cs, P.h);
}

enum class CoarsePart { full, long_only };

/// Ubar(k, eta): full uses Kbar + Jbar and -h; long_only uses Jbar and -h/2.
inline double coarse_energy_diff(int k, const CoarseConfig& eta, const CoarseCoupling& c, CoarsePart which) {
  const bool full = which == CoarsePart::full;
  double s = 0.0;
  for (int l = 0; l < c.cs.cells; ++l) {
    double coupling = full ? c.full_at(k, l) : c.jbar_at(k, l);
    if (coupling == 0.0) continue;
    int count = l == k ? eta[static_cast<std::size_t>(l)] - 1 : eta[static_cast<std::size_t>(l)];
    s += coupling * count;
  }
  return s - (full ? c.hbar : 0.5 * c.hbar);
}

/// Magnetisation of the 1D nearest-neighbour Ising chain (per-spin coupling K, field h).
inline double ising_chain_magnetisation(double K, double h) {
  double sh = std::sinh(h);
  return sh / std::sqrt(sh * sh + std::exp(-4.0 * K));
}

/// Mean-field free energy per spin of the 1D Ising chain with an added Curie-Weiss term.
inline double chain_free_energy(double K, double J, double h, double m) {
  double a = h + J * m;
  double sh = std::sinh(a);
  return 0.5 * J * m * m -
         std::log(std::exp(K) * std::cosh(a) + std::sqrt(std::exp(2.0 * K) * sh * sh + std::exp(-2.0 * K)));
}

struct CoverageBranch {
  double coverage;
  double magnetisation;
  double free_energy;
};

/// Thermodynamic-limit coverage of the 1D lattice gas with nearest-neighbour K,
/// Curie-Weiss J and field h at inverse temperature beta.
///
/// The lattice gas maps to Ising spins with K' = K/4, J' = J/4,
/// h' = K/2 + J/4 - h/2 (all times beta) and coverage = (1 + m)/2. Returns all
/// local minimisers of the free energy, lowest free energy first.
inline std::vector<CoverageBranch> closed_form_coverage(double K, double J, double h, double beta) {
  if (!std::isfinite(K) || !std::isfinite(J) || !std::isfinite(h) || !(beta > 0.0)) {
    throw ConfigurationError("closed_form_coverage: parameters must be finite and beta > 0");
  }
  const double Ks = beta * K / 4.0;
  const double Js = beta * J / 4.0;
  const double hs = beta * (K / 2.0 + J / 4.0 - h / 2.0);
  auto F = [&](double m) { return chain_free_energy(Ks, Js, hs, m); };
  std::vector<CoverageBranch> out;
  auto push = [&](double m) { out.push_back({0.5 * (1.0 + m), m, F(m)}); };

  if (Js == 0.0) {
    push(ising_chain_magnetisation(Ks, hs));
    return out;
  }
  if (Js < 0.0) {
    // m - m1(h + Jm) is increasing: a single root
    double lo = -1.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      if (mid - ising_chain_magnetisation(Ks, hs + Js * mid) < 0.0) lo = mid; else hi = mid;
    }
    push(0.5 * (lo + hi));
    return out;
  }

  const int steps = 20000;
  const double dm = 2.0 / steps;
  std::vector<double> f(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) f[static_cast<std::size_t>(i)] = F(-1.0 + i * dm);
  for (int i = 0; i <= steps; ++i) {
    double fi = f[static_cast<std::size_t>(i)];
    bool left = i == 0 || fi < f[static_cast<std::size_t>(i - 1)];
    bool right = i == steps || fi <= f[static_cast<std::size_t>(i + 1)];
    if (!(left && right)) continue;
    double a = -1.0 + std::max(0, i - 1) * dm;
    double b = -1.0 + std::min(steps, i + 1) * dm;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = F(c), fd = F(d);
    while (b - a > 1e-10) {
      if (fc < fd) {
        b = d; d = c; fd = fc;
        c = b - g * (b - a); fc = F(c);
      } else {
        a = c; c = d; fc = fd;
        d = a + g * (b - a); fd = F(d);
      }
    }
    double m = 0.5 * (a + b);
    bool dup = false;
    for (const auto& br : out) dup = dup || std::abs(br.magnetisation - m) < 1e-6;
    if (!dup) push(m);
  }
  if (out.empty()) throw InternalLogicError("closed_form_coverage: no minimiser found in [-1, 1]");
  std::sort(out.begin(), out.end(),
            [](const CoverageBranch& x, const CoverageBranch& y) { return x.free_energy < y.free_energy; });
  return out;
}

inline std::vector<CoverageBranch> closed_form_coverage(const PotentialSpec& P) {
  return closed_form_coverage(P.k_bond(), P.J, P.h, P.beta);
}

}  // namespace mlkmc
