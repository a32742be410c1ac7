#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "mlkmc/lattice.hpp"
#include "mlkmc/potentials.hpp"

namespace mlkmc {

/// Cached interaction sums f(x) = sum_{y != x} w(x - y) sigma(y), updated in
/// O(reach) per flip.
///
/// For piecewise-constant kernels the sums are kept as integer neighbour counts
/// so equal environments give bit-identical values; otherwise doubles with a
/// full rebuild every 2^20 flips.
class SiteField {
 public:
  enum class Parts { short_only, total };

  SiteField() = default;
  SiteField(const PairTable& t, Parts parts, const MicroConfig& sigma) {
    n_ = t.n;
    K_ = t.k_by_r.size() > 1 ? t.k_by_r[1] : 0.0;
    counts_ = t.piecewise_constant || parts == Parts::short_only;
    if (counts_) {
      jc_ = parts == Parts::total ? t.j_const : 0.0;
      jreach_ = jc_ != 0.0 ? t.j_reach : 0;
    } else {
      w_.assign(t.total_by_r.size(), 0.0);
      for (std::size_t r = 0; r < w_.size(); ++r) w_[r] = t.total_by_r[r];
      for (std::size_t r = w_.size(); r-- > 0;) {
        if (w_[r] != 0.0) {
          wreach_ = static_cast<int>(r);
          break;
        }
      }
    }
    rebuild(sigma);
  }

  double operator()(int x) const {
    if (counts_) return K_ * nn_[static_cast<std::size_t>(x)] + jc_ * win_[static_cast<std::size_t>(x)];
    return f_[static_cast<std::size_t>(x)];
  }

  /// Largest distance at which a flip changes f.
  int reach() const {
    if (counts_) return std::max(K_ != 0.0 ? 1 : 0, jreach_);
    return wreach_;
  }

  /// Must be called after sigma(x) changed by delta (+1 or -1).
  void flip(int x, int delta, const MicroConfig& sigma) {
    if (counts_) {
      if (K_ != 0.0) for_each_within(x, 1, n_, [&](int y, int) { nn_[static_cast<std::size_t>(y)] += delta; });
      if (jreach_ > 0) for_each_within(x, jreach_, n_, [&](int y, int) { win_[static_cast<std::size_t>(y)] += delta; });
      return;
    }
    for_each_within(x, wreach_, n_, [&](int y, int r) { f_[static_cast<std::size_t>(y)] += delta * w_[static_cast<std::size_t>(r)]; });
    if (++flips_ % (std::uint64_t{1} << 20) == 0) rebuild(sigma);
  }

  void rebuild(const MicroConfig& sigma) {
    if (counts_) {
      nn_.assign(static_cast<std::size_t>(n_), 0);
      win_.assign(static_cast<std::size_t>(n_), 0);
      for (int x = 0; x < n_; ++x) {
        if (!sigma[x]) continue;
        if (K_ != 0.0) for_each_within(x, 1, n_, [&](int y, int) { ++nn_[static_cast<std::size_t>(y)]; });
        if (jreach_ > 0) for_each_within(x, jreach_, n_, [&](int y, int) { ++win_[static_cast<std::size_t>(y)]; });
      }
      return;
    }
    f_.assign(static_cast<std::size_t>(n_), 0.0);
    for (int x = 0; x < n_; ++x) {
      double s = 0.0;
      for_each_within(x, wreach_, n_, [&](int y, int r) {
        if (sigma[y]) s += w_[static_cast<std::size_t>(r)];
      });
      f_[static_cast<std::size_t>(x)] = s;
    }
  }

 private:
  int n_ = 0;
  bool counts_ = true;
  double K_ = 0.0;
  double jc_ = 0.0;
  int jreach_ = 0;
  std::vector<int> nn_, win_;
  std::vector<double> w_, f_;
  int wreach_ = 0;
  std::uint64_t flips_ = 0;
};

/// Cached coarse sums G(k) = sum_l c(k, l) eta(l) (diagonal included) for the
/// full (Kbar + Jbar) or long-only (Jbar) coupling, so that
/// Ubar(k) = G(k) - c(k, k) - field.
class CoarseField {
 public:
  CoarseField() = default;
  CoarseField(const CoarseCoupling& c, CoarsePart part, const CoarseConfig& eta) {
    m_ = c.cs.cells;
    coef_.assign(static_cast<std::size_t>(m_), 0.0);
    for (int d = 0; d < m_; ++d) {
      coef_[static_cast<std::size_t>(d)] =
          part == CoarsePart::full ? c.kbar[static_cast<std::size_t>(d)] + c.jbar[static_cast<std::size_t>(d)]
                                   : c.jbar[static_cast<std::size_t>(d)];
    }
    field_ = part == CoarsePart::full ? c.hbar : 0.5 * c.hbar;
    for (int d = 0; d < m_; ++d) {
      if (coef_[static_cast<std::size_t>(d)] != 0.0) nonzero_.push_back(d);
    }
    rebuild(eta);
  }

  double ubar(int k) const {
    return g_[static_cast<std::size_t>(k)] - coef_[0] - field_;
  }

  const std::vector<int>& offsets() const { return nonzero_; }
  int cells() const { return m_; }

  /// Must be called after eta(k) changed by delta.
  void change(int k, int delta, const CoarseConfig& eta) {
    for (int d : nonzero_) {
      int l = k - d;
      if (l < 0) l += m_;
      g_[static_cast<std::size_t>(l)] += delta * coef_[static_cast<std::size_t>(d)];
    }
    if (++changes_ % (std::uint64_t{1} << 20) == 0) rebuild(eta);
  }

  void rebuild(const CoarseConfig& eta) {
    g_.assign(static_cast<std::size_t>(m_), 0.0);
    for (int k = 0; k < m_; ++k) {
      double s = 0.0;
      for (int d : nonzero_) {
        int l = (k + d) % m_;
        s += coef_[static_cast<std::size_t>(d)] * eta[static_cast<std::size_t>(l)];
      }
      g_[static_cast<std::size_t>(k)] = s;
    }
  }

 private:
  int m_ = 0;
  std::vector<double> coef_;
  std::vector<int> nonzero_;
  std::vector<double> g_;
  double field_ = 0.0;
  std::uint64_t changes_ = 0;
};

}  // namespace mlkmc
