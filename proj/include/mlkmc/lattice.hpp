#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "mlkmc/errors.hpp"

namespace mlkmc {

/// Periodic lattice with N = n^d sites. Only d = 1 is implemented.
struct LatticeSpec {
  int n = 2;
  int d = 1;

  LatticeSpec() = default;
  explicit LatticeSpec(int sites) : n(sites) {
    if (sites < 2) {
      throw ConfigurationError("lattice must have at least 2 sites, got " + std::to_string(sites));
    }
  }

  int size() const { return n; }

  /// Minimum-image distance on the ring.
  int distance(int x, int y) const {
    int r = std::abs(x - y) % n;
    return std::min(r, n - r);
  }

  int wrap(int x) const {
    int r = x % n;
    return r < 0 ? r + n : r;
  }

  void check_site(int x) const {
    if (x < 0 || x >= n) {
      throw ConfigurationError("site index " + std::to_string(x) + " outside [0, " +
                               std::to_string(n) + ")");
    }
  }

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;
};

/// Partition of the ring into M = N/q contiguous cells C_k = {kq, ..., (k+1)q-1}.
struct CoarseSpec {
  int q = 1;
  int cells = 1;

  CoarseSpec() = default;
  CoarseSpec(const LatticeSpec& lattice, int block) : q(block) {
    if (block < 1 || block > lattice.n) {
      throw ConfigurationError("block size q=" + std::to_string(block) + " must lie in [1, " +
                               std::to_string(lattice.n) + "]");
    }
    if (lattice.n % block != 0) {
      throw ConfigurationError("block size q=" + std::to_string(block) +
                               " does not divide lattice size n=" + std::to_string(lattice.n));
    }
    cells = lattice.n / block;
  }

  int cell_of(int x) const { return x / q; }
  int first_site(int k) const { return k * q; }
  int sites() const { return q * cells; }

  friend bool operator==(const CoarseSpec&, const CoarseSpec&) = default;
};

/// Occupancy sigma in {0,1}^N.
class MicroConfig {
 public:
  MicroConfig() = default;
  explicit MicroConfig(int sites, std::uint8_t fill = 0) : occ_(static_cast<std::size_t>(sites), fill) {
    if (fill > 1) throw ConfigurationError("occupancy must be 0 or 1");
  }
  MicroConfig(std::initializer_list<int> values) {
    occ_.reserve(values.size());
    for (int v : values) {
      if (v != 0 && v != 1) throw ConfigurationError("occupancy must be 0 or 1");
      occ_.push_back(static_cast<std::uint8_t>(v));
    }
  }

  /// Binary encoding: site x is bit x of the index (site 0 least significant).
  static MicroConfig from_index(std::uint64_t index, int sites) {
    MicroConfig c(sites);
    for (int x = 0; x < sites; ++x) c.occ_[static_cast<std::size_t>(x)] = (index >> x) & 1u;
    return c;
  }
  std::uint64_t to_index() const {
    std::uint64_t idx = 0;
    for (std::size_t x = 0; x < occ_.size(); ++x) idx |= static_cast<std::uint64_t>(occ_[x]) << x;
    return idx;
  }

  int size() const { return static_cast<int>(occ_.size()); }
  int operator[](int x) const { return occ_[static_cast<std::size_t>(x)]; }
  void set(int x, int value) { occ_[static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(value != 0); }
  void toggle(int x) { occ_[static_cast<std::size_t>(x)] ^= 1u; }

  int occupied() const {
    int s = 0;
    for (auto v : occ_) s += v;
    return s;
  }
  double coverage() const { return occ_.empty() ? 0.0 : static_cast<double>(occupied()) / size(); }

  std::span<const std::uint8_t> values() const { return occ_; }

  friend bool operator==(const MicroConfig&, const MicroConfig&) = default;

 private:
  std::vector<std::uint8_t> occ_;
};

/// Block spins eta(k) in {0, ..., q}.
using CoarseConfig = std::vector<int>;

inline CoarseConfig coarsen(const MicroConfig& sigma, const CoarseSpec& cs) {
  if (sigma.size() % cs.q != 0 || sigma.size() / cs.q != cs.cells) {
    throw ConfigurationError("coarse spec (q=" + std::to_string(cs.q) +
                             ") incompatible with configuration of size " +
                             std::to_string(sigma.size()));
  }
  CoarseConfig eta(static_cast<std::size_t>(cs.cells), 0);
  for (int x = 0; x < sigma.size(); ++x) eta[static_cast<std::size_t>(cs.cell_of(x))] += sigma[x];
  return eta;
}

inline MicroConfig flip(MicroConfig sigma, int x) {
  if (x < 0 || x >= sigma.size()) {
    throw ConfigurationError("flip: site index " + std::to_string(x) + " outside [0, " +
                             std::to_string(sigma.size()) + ")");
  }
  sigma.toggle(x);
  return sigma;
}

inline int cell_of(int x, const CoarseSpec& cs) {
  if (x < 0 || x >= cs.sites()) {
    throw ConfigurationError("cell_of: site index " + std::to_string(x) + " out of range");
  }
  return cs.cell_of(x);
}

}  // namespace mlkmc
