#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "mlkmc/errors.hpp"
#include "mlkmc/lattice.hpp"
#include "mlkmc/potentials.hpp"

namespace mlkmc {

enum class Variant { microscopic, coarse_grained, two_level_exact, two_level_split };
enum class BoundMode { crude, exact_sum };
enum class EventKind { adsorb, desorb, null };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::microscopic: return "microscopic";
    case Variant::coarse_grained: return "coarse_grained";
    case Variant::two_level_exact: return "exact";
    case Variant::two_level_split: return "split";
  }
  return "?";
}
inline const char* to_string(BoundMode b) { return b == BoundMode::crude ? "crude" : "exact-sum"; }
inline const char* to_string(EventKind k) {
  return k == EventKind::adsorb ? "adsorb" : k == EventKind::desorb ? "desorb" : "null";
}

namespace detail {
inline std::atomic<bool>& underflow_warned() {
  static std::atomic<bool> flag{false};
  return flag;
}
}  // namespace detail

/// d0 * exp(-beta * U), with results below 1e-300 flushed to zero (warned once per process).
inline double arrhenius(double d0, double beta, double U) {
  double r = d0 * std::exp(-beta * U);
  if (r < 1e-300) {
    if (!detail::underflow_warned().exchange(true)) {
      std::fprintf(stderr, "mlkmc: warning: desorption rate below 1e-300 flushed to 0 (beta*U=%g)\n", beta * U);
    }
    return 0.0;
  }
  return r;
}

struct RateBounds {
  double lambda_bar = 0.0;          // total coarse rate
  double lambda_bar_adsorb = 0.0;
  double lambda_bar_desorb = 0.0;
  double lambda_rf = 0.0;           // reconstruction normalisation
  double lambda_tilde_star = 0.0;   // lambda_bar * lambda_rf
  double lambda_star_loc = 0.0;     // per-site null-event bound
  double lambda_micro = 0.0;        // sum_x c(x, sigma)
  double lambda_tilde = 0.0;        // sum_x c~(x, sigma)
};

struct RejectionProbabilities {
  double multi = 0.0;
  double null = 0.0;
};

/// Rate functions for one lattice, potential, coarse-graining and variant.
class RateModel {
 public:
  RateModel(const LatticeSpec& lat, const PotentialSpec& P, Variant variant, int q = 1,
            BoundMode bound = BoundMode::crude)
      : lat_(lat), P_(P), variant_(variant), bound_(bound) {
    P_.validate();
    if (variant == Variant::microscopic) q = 1;
    cs_ = CoarseSpec(lat, q);
    pairs_ = make_pair_table(P_, lat_);
    coupling_ = coarse_coupling(pairs_, cs_, P_.h);
    compute_extremes();
  }

  const LatticeSpec& lattice() const { return lat_; }
  const PotentialSpec& potential() const { return P_; }
  const CoarseSpec& coarse() const { return cs_; }
  const PairTable& pairs() const { return pairs_; }
  const CoarseCoupling& coupling() const { return coupling_; }
  Variant variant() const { return variant_; }
  BoundMode bound_mode() const { return bound_; }
  int q() const { return cs_.q; }
  int cells() const { return cs_.cells; }

  /// Which coarse energy the first level uses.
  CoarsePart coarse_part() const {
    return variant_ == Variant::two_level_split ? CoarsePart::long_only : CoarsePart::full;
  }

  double u_star() const { return u_star_; }
  double lambda_star_loc() const { return P_.d0 * std::max(1.0, std::exp(-P_.beta * u_star_)); }
  /// Lower bound of the reconstruction exponent: U^(s) (split) or U - Ubar (exact).
  double u_rf_star() const { return u_rf_star_; }
  double ubar_star() const { return ubar_star_; }
  /// Per-cell null-event bound for the coarse-only sampler.
  double cgmc_cell_bound() const {
    return P_.d0 * cs_.q * std::max(1.0, std::exp(-P_.beta * ubar_star_));
  }

  // ---- pointwise rates --------------------------------------------------

  double desorption(double U) const { return arrhenius(P_.d0, P_.beta, U); }

  double micro_rate(int x, const MicroConfig& sigma) const {
    if (!sigma[x]) return P_.d0;
    return desorption(energy_diff(x, sigma, pairs_, P_.h).total);
  }

  double coarse_adsorb(int eta_k) const { return P_.d0 * (cs_.q - eta_k); }
  double coarse_desorb(int eta_k, double ubar) const {
    return eta_k == 0 ? 0.0 : eta_k * arrhenius(P_.d0, P_.beta, ubar);
  }

  std::pair<double, double> coarse_rates(int k, const CoarseConfig& eta, CoarsePart which) const {
    int e = eta[static_cast<std::size_t>(k)];
    return {coarse_adsorb(e), coarse_desorb(e, coarse_energy_diff(k, eta, coupling_, which))};
  }
  std::pair<double, double> coarse_rates(int k, const CoarseConfig& eta) const {
    return coarse_rates(k, eta, coarse_part());
  }

  /// exp(-beta * (exponent)) weight of a desorption reconstruction, given U parts.
  double rf_desorb_weight(const EnergyDiff& U, double ubar_full) const {
    double e = variant_ == Variant::two_level_split ? U.short_part : U.total - ubar_full;
    return std::exp(-P_.beta * e);
  }

  double reconstruction_rate(int x, EventKind kind, const MicroConfig& sigma, const CoarseConfig& eta) const {
    int k = cs_.cell_of(x);
    int e = eta[static_cast<std::size_t>(k)];
    if (kind == EventKind::adsorb) {
      if (e >= cs_.q) throw InternalLogicError("adsorption reconstruction requested in a full cell");
      return static_cast<double>(1 - sigma[x]) / (cs_.q - e);
    }
    if (kind == EventKind::desorb) {
      if (e <= 0) throw InternalLogicError("desorption reconstruction requested in an empty cell");
      if (!sigma[x]) return 0.0;
      EnergyDiff U = energy_diff(x, sigma, pairs_, P_.h);
      double ubar = variant_ == Variant::two_level_split ? 0.0 : coarse_energy_diff(k, eta, coupling_, CoarsePart::full);
      return rf_desorb_weight(U, ubar) / e;
    }
    throw InternalLogicError("reconstruction rate requested for a null event");
  }

  /// c~(x, sigma) = cbar * c_rf; equals micro_rate for the exact variant.
  double combined_rate(int x, const MicroConfig& sigma, const CoarseConfig& eta) const {
    switch (variant_) {
      case Variant::microscopic:
        return micro_rate(x, sigma);
      case Variant::coarse_grained:
        throw ConfigurationError("combined_rate is undefined for the coarse-grained variant");
      default:
        break;
    }
    int k = cs_.cell_of(x);
    auto [ca, cd] = coarse_rates(k, eta);
    if (!sigma[x]) return ca * reconstruction_rate(x, EventKind::adsorb, sigma, eta);
    return cd * reconstruction_rate(x, EventKind::desorb, sigma, eta);
  }

  double combined_rate(int x, const MicroConfig& sigma) const {
    return combined_rate(x, sigma, coarsen(sigma, cs_));
  }

  /// Closed-form reconstruction bound q * max{1/(q - eta), e^{-beta U_rf*}/eta} over feasible cells.
  double crude_lambda_rf(const CoarseConfig& eta) const {
    int max_below = -1, min_above = cs_.q + 1;
    for (int e : eta) {
      if (e < cs_.q) max_below = std::max(max_below, e);
      if (e > 0) min_above = std::min(min_above, e);
    }
    double b = 0.0;
    if (max_below >= 0) b = std::max(b, 1.0 / (cs_.q - max_below));
    if (min_above <= cs_.q) b = std::max(b, std::exp(-P_.beta * u_rf_star_) / min_above);
    return cs_.q * b;
  }

  /// Per-cell reconstruction sums; lambda_rf in exact-sum mode is their maximum.
  struct CellSums {
    std::vector<double> adsorb;  // -1 when the kind is infeasible in the cell
    std::vector<double> desorb;
    double max = 0.0;
  };

  CellSums reconstruction_sums(const MicroConfig& sigma, const CoarseConfig& eta) const {
    CellSums s;
    s.adsorb.assign(static_cast<std::size_t>(cs_.cells), -1.0);
    s.desorb.assign(static_cast<std::size_t>(cs_.cells), -1.0);
    for (int k = 0; k < cs_.cells; ++k) {
      int e = eta[static_cast<std::size_t>(k)];
      if (e < cs_.q) {
        double a = 0.0;
        for (int x = cs_.first_site(k); x < cs_.first_site(k) + cs_.q; ++x) {
          a += reconstruction_rate(x, EventKind::adsorb, sigma, eta);
        }
        s.adsorb[static_cast<std::size_t>(k)] = a;
        s.max = std::max(s.max, a);
      }
      if (e > 0) {
        double d = 0.0;
        for (int x = cs_.first_site(k); x < cs_.first_site(k) + cs_.q; ++x) {
          d += reconstruction_rate(x, EventKind::desorb, sigma, eta);
        }
        s.desorb[static_cast<std::size_t>(k)] = d;
        s.max = std::max(s.max, d);
      }
    }
    return s;
  }

  RateBounds rate_bounds(const MicroConfig& sigma, const CoarseConfig& eta) const {
    RateBounds b;
    b.lambda_star_loc = lambda_star_loc();
    for (int x = 0; x < lat_.n; ++x) b.lambda_micro += micro_rate(x, sigma);
    if (variant_ == Variant::microscopic) {
      b.lambda_bar_adsorb = 0.0;
      b.lambda_tilde = b.lambda_micro;
      return b;
    }
    for (int k = 0; k < cs_.cells; ++k) {
      auto [ca, cd] = coarse_rates(k, eta);
      b.lambda_bar_adsorb += ca;
      b.lambda_bar_desorb += cd;
    }
    b.lambda_bar = b.lambda_bar_adsorb + b.lambda_bar_desorb;
    if (variant_ == Variant::coarse_grained) return b;
    b.lambda_rf = bound_ == BoundMode::crude ? crude_lambda_rf(eta) : reconstruction_sums(sigma, eta).max;
    b.lambda_tilde_star = b.lambda_bar * b.lambda_rf;
    for (int x = 0; x < lat_.n; ++x) b.lambda_tilde += combined_rate(x, sigma, eta);
    return b;
  }

  RateBounds rate_bounds(const MicroConfig& sigma) const { return rate_bounds(sigma, coarsen(sigma, cs_)); }

  RejectionProbabilities rejection_probabilities(const MicroConfig& sigma) const {
    RateBounds b = rate_bounds(sigma);
    RejectionProbabilities p;
    p.null = std::clamp(1.0 - b.lambda_micro / (lat_.n * b.lambda_star_loc), 0.0, 1.0);
    p.multi = b.lambda_tilde_star > 0.0 ? std::clamp(1.0 - b.lambda_tilde / b.lambda_tilde_star, 0.0, 1.0) : 0.0;
    return p;
  }

 private:
  void compute_extremes() {
    const int n = lat_.n;
    double us = 0.0;
    for_each_within(0, pairs_.reach, n, [&](int, int r) { us += std::min(0.0, pairs_.total(r)); });
    u_star_ = us - P_.h;

    if (variant_ == Variant::two_level_split) {
      double ks = 0.0;
      for_each_within(0, pairs_.reach, n, [&](int, int r) { ks += std::min(0.0, pairs_.k(r)); });
      u_rf_star_ = ks - 0.5 * P_.h;
    } else {
      // min over in-cell position of sum_y min(0, P(x-y) - Pbar(k(x), k(y)))
      double best = 0.0;
      for (int x = 0; x < cs_.q; ++x) {
        double s = 0.0;
        for (int y = 0; y < n; ++y) {
          if (y == x) continue;
          double d = pairs_.total(lat_.distance(x, y)) - coupling_.full_at(cs_.cell_of(x), cs_.cell_of(y));
          s += std::min(0.0, d);
        }
        best = std::min(best, s);
      }
      u_rf_star_ = best;
    }

    const CoarsePart part = coarse_part();
    double ub = 0.0;
    for (int d = 0; d < cs_.cells; ++d) {
      double c = part == CoarsePart::full ? coupling_.kbar[static_cast<std::size_t>(d)] + coupling_.jbar[static_cast<std::size_t>(d)]
                                          : coupling_.jbar[static_cast<std::size_t>(d)];
      ub += std::min(0.0, c) * (d == 0 ? cs_.q - 1 : cs_.q);
    }
    ubar_star_ = ub - (part == CoarsePart::full ? P_.h : 0.5 * P_.h);
  }

  LatticeSpec lat_;
  PotentialSpec P_;
  Variant variant_;
  BoundMode bound_;
  CoarseSpec cs_;
  PairTable pairs_;
  CoarseCoupling coupling_;
  double u_star_ = 0.0;
  double u_rf_star_ = 0.0;
  double ubar_star_ = 0.0;
};

}  // namespace mlkmc
