#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mlkmc/errors.hpp"
#include "mlkmc/fields.hpp"
#include "mlkmc/lattice.hpp"
#include "mlkmc/random.hpp"
#include "mlkmc/rates.hpp"

namespace mlkmc {

/// Index i of the first positive rate with r_0 + ... + r_i >= target
/// (inclusive upper boundary). Falls back to the last positive rate when
/// rounding leaves the target above the final partial sum; -1 if all are zero.
inline int cumulative_search(std::span<const double> rates, double target) {
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    double r = rates[i];
    if (r <= 0.0) continue;
    acc += r;
    last = static_cast<int>(i);
    if (acc >= target) return last;
  }
  return last;
}

struct EventRecord {
  std::uint64_t step = 0;
  double t = 0.0;
  int site = -1;  // micro site, or coarse cell for the coarse-only sampler
  EventKind kind = EventKind::null;
  bool accepted = false;
  double waiting_time = 0.0;
};

/// Outcome of one proposal, not yet applied.
struct Proposal {
  int site = -1;
  EventKind kind = EventKind::null;
  bool accepted = false;
  double dt = 0.0;
};

enum class SamplerType { ssa, bkl, null_event, mlkmc, cgmc };

/// How the null-event sampler gets U(x, sigma): a field cache updated on
/// accepted flips, or a fresh O(L) sum on every proposal.
enum class NullEnergy { cached, direct };

inline NullEnergy null_energy_from_string(const std::string& s) {
  if (s == "cached") return NullEnergy::cached;
  if (s == "direct") return NullEnergy::direct;
  throw ConfigurationError("unknown null-event energy mode '" + s + "' (expected cached|direct)");
}

inline const char* to_string(NullEnergy e) { return e == NullEnergy::direct ? "direct" : "cached"; }

inline const char* to_string(SamplerType s) {
  switch (s) {
    case SamplerType::ssa: return "ssa";
    case SamplerType::bkl: return "bkl";
    case SamplerType::null_event: return "null-event";
    case SamplerType::mlkmc: return "mlkmc";
    case SamplerType::cgmc: return "cgmc";
  }
  return "?";
}

inline SamplerType sampler_from_string(const std::string& s) {
  if (s == "ssa") return SamplerType::ssa;
  if (s == "bkl") return SamplerType::bkl;
  if (s == "null-event" || s == "null") return SamplerType::null_event;
  if (s == "mlkmc") return SamplerType::mlkmc;
  if (s == "cgmc") return SamplerType::cgmc;
  throw ConfigurationError("unknown sampler '" + s + "' (expected ssa|bkl|null-event|mlkmc|cgmc)");
}

/// Common interface. Each step draws a proposal, which the driver commits
/// only if it falls before the final time.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual SamplerType type() const = 0;
  virtual Proposal propose(Rng& rng) = 0;
  virtual void commit(const Proposal& p) = 0;
  virtual int occupied() const = 0;
  virtual const CoarseConfig& coarse() const = 0;
  /// nullptr for the coarse-only sampler.
  virtual const MicroConfig* micro() const = 0;

  int sites() const { return model_->lattice().n; }
  double coverage() const { return static_cast<double>(occupied()) / sites(); }
  const RateModel& model() const { return *model_; }

 protected:
  explicit Sampler(const RateModel& model) : model_(&model) {}
  const RateModel* model_;
};

/// sigma, eta and occupancy kept in step.
class MicroState {
 public:
  MicroState(const MicroConfig& sigma, const CoarseSpec& cs) : sigma_(sigma), cs_(cs) {
    if (sigma.size() != cs.sites()) throw ConfigurationError("initial configuration has wrong size");
    eta_ = coarsen(sigma_, cs_);
    occ_ = sigma_.occupied();
  }
  /// Returns +1 for adsorption, -1 for desorption.
  int flip(int x) {
    int delta = sigma_[x] ? -1 : 1;
    sigma_.toggle(x);
    eta_[static_cast<std::size_t>(cs_.cell_of(x))] += delta;
    occ_ += delta;
    return delta;
  }
  const MicroConfig& sigma() const { return sigma_; }
  const CoarseConfig& eta() const { return eta_; }
  int occupied() const { return occ_; }

 private:
  MicroConfig sigma_;
  CoarseSpec cs_;
  CoarseConfig eta_;
  int occ_ = 0;
};

namespace detail {
inline void require_variant(const RateModel& m, Variant v, const char* who) {
  if (m.variant() != v) {
    throw ConfigurationError(std::string(who) + " requires a rate model of variant '" + to_string(v) +
                             "', got '" + to_string(m.variant()) + "'");
  }
}
}  // namespace detail

/// Direct method: rejection-free, linear search over per-site rates.
class SsaSampler final : public Sampler {
 public:
  SsaSampler(const RateModel& model, const MicroConfig& init)
      : Sampler(model), st_(init, model.coarse()),
        field_(model.pairs(), SiteField::Parts::total, st_.sigma()) {
    detail::require_variant(model, Variant::microscopic, "SSA");
    rates_.resize(static_cast<std::size_t>(init.size()));
    for (int x = 0; x < init.size(); ++x) refresh(x);
  }
  SamplerType type() const override { return SamplerType::ssa; }

  double rate(int x) const { return rates_[static_cast<std::size_t>(x)]; }
  double total_rate() const {
    double s = 0.0;
    for (double r : rates_) s += r;
    return s;
  }

  Proposal propose(Rng& rng) override {
    double total = total_rate();
    if (!(total > 0.0)) throw AbsorbingStateError("SSA: total rate is zero");
    Proposal p;
    p.site = cumulative_search(rates_, rng.uniform() * total);
    p.kind = st_.sigma()[p.site] ? EventKind::desorb : EventKind::adsorb;
    p.accepted = true;
    p.dt = sample_waiting_time(total, rng);
    return p;
  }

  void commit(const Proposal& p) override {
    if (!p.accepted) return;
    int delta = st_.flip(p.site);
    field_.flip(p.site, delta, st_.sigma());
    refresh(p.site);
    for_each_within(p.site, field_.reach(), sites(), [&](int y, int) { refresh(y); });
  }

  int occupied() const override { return st_.occupied(); }
  const CoarseConfig& coarse() const override { return st_.eta(); }
  const MicroConfig* micro() const override { return &st_.sigma(); }

 private:
  void refresh(int x) {
    const auto& P = model_->potential();
    rates_[static_cast<std::size_t>(x)] = st_.sigma()[x] ? model_->desorption(field_(x) - P.h) : P.d0;
  }

  MicroState st_;
  SiteField field_;
  std::vector<double> rates_;
};

/// n-fold way: sites grouped in classes of equal rate.
class BklSampler final : public Sampler {
 public:
  static constexpr std::size_t max_classes = 1000000;

  BklSampler(const RateModel& model, const MicroConfig& init, bool allow_long_range = false)
      : Sampler(model), st_(init, model.coarse()),
        field_(model.pairs(), SiteField::Parts::total, st_.sigma()) {
    detail::require_variant(model, Variant::microscopic, "BKL");
    if (model.potential().J != 0.0 && !allow_long_range) {
      throw ConfigurationError(
          "BKL with a long-range potential needs allow_long_range (the number of rate classes grows like 2^L)");
    }
    rate_.assign(static_cast<std::size_t>(init.size()), 0.0);
    pos_.assign(static_cast<std::size_t>(init.size()), 0);
    for (int x = 0; x < init.size(); ++x) insert(x, compute(x));
  }
  SamplerType type() const override { return SamplerType::bkl; }

  std::size_t class_count() const { return classes_.size(); }
  /// (rate, population) for each class in ascending rate order.
  std::vector<std::pair<double, int>> classes() const {
    std::vector<std::pair<double, int>> out;
    for (const auto& [r, v] : classes_) out.emplace_back(r, static_cast<int>(v.size()));
    return out;
  }

  Proposal propose(Rng& rng) override {
    weights_.clear();
    double total = 0.0;
    for (const auto& [r, v] : classes_) {
      double w = r * static_cast<double>(v.size());
      weights_.push_back(w);
      total += w;
    }
    if (!(total > 0.0)) throw AbsorbingStateError("BKL: total rate is zero");
    int ci = cumulative_search(weights_, rng.uniform() * total);
    auto it = classes_.begin();
    std::advance(it, ci);
    const auto& members = it->second;
    Proposal p;
    p.site = members[static_cast<std::size_t>(rng.index(static_cast<int>(members.size())))];
    p.kind = st_.sigma()[p.site] ? EventKind::desorb : EventKind::adsorb;
    p.accepted = true;
    p.dt = sample_waiting_time(total, rng);
    return p;
  }

  void commit(const Proposal& p) override {
    if (!p.accepted) return;
    int delta = st_.flip(p.site);
    field_.flip(p.site, delta, st_.sigma());
    update(p.site);
    for_each_within(p.site, field_.reach(), sites(), [&](int y, int) { update(y); });
  }

  int occupied() const override { return st_.occupied(); }
  const CoarseConfig& coarse() const override { return st_.eta(); }
  const MicroConfig* micro() const override { return &st_.sigma(); }

 private:
  double compute(int x) const {
    const auto& P = model_->potential();
    return st_.sigma()[x] ? model_->desorption(field_(x) - P.h) : P.d0;
  }
  void insert(int x, double r) {
    auto& v = classes_[r];
    if (classes_.size() > max_classes) {
      throw SizeLimitError("BKL: more than 10^6 rate classes");
    }
    pos_[static_cast<std::size_t>(x)] = static_cast<int>(v.size());
    v.push_back(x);
    rate_[static_cast<std::size_t>(x)] = r;
  }
  void remove(int x) {
    auto it = classes_.find(rate_[static_cast<std::size_t>(x)]);
    auto& v = it->second;
    int i = pos_[static_cast<std::size_t>(x)];
    int last = v.back();
    v[static_cast<std::size_t>(i)] = last;
    pos_[static_cast<std::size_t>(last)] = i;
    v.pop_back();
    if (v.empty()) classes_.erase(it);
  }
  void update(int x) {
    double r = compute(x);
    if (r == rate_[static_cast<std::size_t>(x)]) return;
    remove(x);
    insert(x, r);
  }

  MicroState st_;
  SiteField field_;
  std::map<double, std::vector<int>> classes_;
  std::vector<double> rate_;
  std::vector<int> pos_;
  std::vector<double> weights_;
};

/// Uniformised microscopic sampler against the global bound lambda*loc.
class NullEventSampler final : public Sampler {
 public:
  NullEventSampler(const RateModel& model, const MicroConfig& init, NullEnergy energy = NullEnergy::cached)
      : Sampler(model), st_(init, model.coarse()), energy_(energy), bound_(model.lambda_star_loc()) {
    detail::require_variant(model, Variant::microscopic, "null-event");
    if (energy_ == NullEnergy::cached) field_ = SiteField(model.pairs(), SiteField::Parts::total, st_.sigma());
  }
  SamplerType type() const override { return SamplerType::null_event; }

  double bound() const { return bound_; }
  double rate(int x) const {
    const auto& P = model_->potential();
    if (!st_.sigma()[x]) return P.d0;
    if (energy_ == NullEnergy::direct) return model_->desorption(energy_diff(x, st_.sigma(), model_->pairs(), P.h).total);
    return model_->desorption(field_(x) - P.h);
  }
  NullEnergy energy_mode() const { return energy_; }

  Proposal propose(Rng& rng) override {
    Proposal p;
    p.site = rng.index(sites());
    double u = rng.uniform_open_closed();
    p.accepted = rate(p.site) >= bound_ * u;
    p.kind = !p.accepted ? EventKind::null : st_.sigma()[p.site] ? EventKind::desorb : EventKind::adsorb;
    p.dt = sample_waiting_time(sites() * bound_, rng);
    return p;
  }

  void commit(const Proposal& p) override {
    if (!p.accepted) return;
    int delta = st_.flip(p.site);
    if (energy_ == NullEnergy::cached) field_.flip(p.site, delta, st_.sigma());
  }

  int occupied() const override { return st_.occupied(); }
  const CoarseConfig& coarse() const override { return st_.eta(); }
  const MicroConfig* micro() const override { return &st_.sigma(); }

 private:
  MicroState st_;
  NullEnergy energy_;
  SiteField field_;
  double bound_;
};

/// Two-level sampler: a coarse event from cbar, then a microscopic
/// reconstruction accepted against lambda_rf. Time advances at rate
/// lambda_bar * lambda_rf whether or not the proposal is accepted.
///
/// Draw order per step: kind, cell, site, accept, waiting time.
class MlkmcSampler final : public Sampler {
 public:
  MlkmcSampler(const RateModel& model, const MicroConfig& init)
      : Sampler(model), st_(init, model.coarse()),
        field_(model.pairs(),
               model.variant() == Variant::two_level_split ? SiteField::Parts::short_only : SiteField::Parts::total,
               st_.sigma()),
        cfield_(model.coupling(), model.coarse_part(), st_.eta()) {
    if (model.variant() != Variant::two_level_exact && model.variant() != Variant::two_level_split) {
      throw ConfigurationError("ML-KMC requires the exact or split two-level rate model");
    }
    split_ = model.variant() == Variant::two_level_split;
    cd_.assign(static_cast<std::size_t>(model.cells()), 0.0);
    ca_.assign(static_cast<std::size_t>(model.cells()), 0.0);
    for (int k = 0; k < model.cells(); ++k) refresh_cell(k);
    buf_.resize(static_cast<std::size_t>(model.q()));
  }
  SamplerType type() const override { return SamplerType::mlkmc; }

  struct Totals {
    double adsorb = 0.0;
    double desorb = 0.0;
    double lambda_rf = 0.0;
    double total() const { return adsorb + desorb; }
    double lambda_tilde_star() const { return total() * lambda_rf; }
  };

  /// Coarse totals and the reconstruction bound at the current state.
  Totals totals() {
    Totals t;
    for (double c : ca_) t.adsorb += c;
    for (double c : cd_) t.desorb += c;
    if (model_->bound_mode() == BoundMode::crude) {
      t.lambda_rf = model_->crude_lambda_rf(st_.eta());
    } else {
      t.lambda_rf = exact_sums();
    }
    return t;
  }

  /// Reconstruction rate c_rf(x | k(x), kind) from the caches.
  double c_rf(int x, EventKind kind) const {
    const int q = model_->q();
    int k = x / q;
    int e = st_.eta()[static_cast<std::size_t>(k)];
    if (kind == EventKind::adsorb) return static_cast<double>(1 - st_.sigma()[x]) / (q - e);
    if (!st_.sigma()[x]) return 0.0;
    const auto& P = model_->potential();
    double ex = split_ ? field_(x) - 0.5 * P.h : (field_(x) - P.h) - cfield_.ubar(k);
    return std::exp(-P.beta * ex) / e;
  }

  Proposal propose(Rng& rng) override {
    Totals t = totals();
    const double lambda_bar = t.total();
    if (!(lambda_bar > 0.0)) throw AbsorbingStateError("ML-KMC: total coarse rate is zero");
    const int q = model_->q();

    double u1 = rng.uniform();
    double u2 = rng.uniform();
    int site_offset = rng.index(q);
    double u4 = rng.uniform_open_closed();

    Proposal p;
    p.kind = u1 * lambda_bar < t.adsorb ? EventKind::adsorb : EventKind::desorb;
    const auto& w = p.kind == EventKind::adsorb ? ca_ : cd_;
    int k = cumulative_search(w, u2 * (p.kind == EventKind::adsorb ? t.adsorb : t.desorb));
    const int first = k * q;

    if (model_->bound_mode() == BoundMode::crude) {
      p.site = first + site_offset;
      p.accepted = u4 * t.lambda_rf <= q * c_rf(p.site, p.kind);
    } else {
      double s = p.kind == EventKind::adsorb ? sum_a_[static_cast<std::size_t>(k)] : sum_d_[static_cast<std::size_t>(k)];
      double target = u4 * t.lambda_rf;
      if (target <= s) {
        for (int i = 0; i < q; ++i) buf_[static_cast<std::size_t>(i)] = c_rf(first + i, p.kind);
        p.site = first + cumulative_search(buf_, target);
        p.accepted = true;
      } else {
        p.site = first + site_offset;
        p.accepted = false;
      }
    }
    if (!p.accepted) p.kind = EventKind::null;
    p.dt = sample_waiting_time(t.lambda_tilde_star(), rng);
    return p;
  }

  void commit(const Proposal& p) override {
    if (!p.accepted) return;
    int k = p.site / model_->q();
    int delta = st_.flip(p.site);
    field_.flip(p.site, delta, st_.sigma());
    cfield_.change(k, delta, st_.eta());
    refresh_cell(k);
    const int m = model_->cells();
    for (int d : cfield_.offsets()) {
      if (d == 0) continue;
      int l = k - d;
      if (l < 0) l += m;
      refresh_cell(l);
    }
  }

  int occupied() const override { return st_.occupied(); }
  const CoarseConfig& coarse() const override { return st_.eta(); }
  const MicroConfig* micro() const override { return &st_.sigma(); }
  double cell_desorb_rate(int k) const { return cd_[static_cast<std::size_t>(k)]; }

 private:
  void refresh_cell(int k) {
    int e = st_.eta()[static_cast<std::size_t>(k)];
    ca_[static_cast<std::size_t>(k)] = model_->coarse_adsorb(e);
    cd_[static_cast<std::size_t>(k)] = model_->coarse_desorb(e, cfield_.ubar(k));
  }

  double exact_sums() {
    const int m = model_->cells(), q = model_->q();
    sum_a_.assign(static_cast<std::size_t>(m), -1.0);
    sum_d_.assign(static_cast<std::size_t>(m), -1.0);
    double mx = 0.0;
    for (int k = 0; k < m; ++k) {
      int e = st_.eta()[static_cast<std::size_t>(k)];
      if (e < q) {
        double a = 0.0;
        for (int x = k * q; x < (k + 1) * q; ++x) a += c_rf(x, EventKind::adsorb);
        sum_a_[static_cast<std::size_t>(k)] = a;
        mx = std::max(mx, a);
      }
      if (e > 0) {
        double d = 0.0;
        for (int x = k * q; x < (k + 1) * q; ++x) d += c_rf(x, EventKind::desorb);
        sum_d_[static_cast<std::size_t>(k)] = d;
        mx = std::max(mx, d);
      }
    }
    return mx;
  }

  MicroState st_;
  SiteField field_;
  CoarseField cfield_;
  bool split_ = true;
  std::vector<double> ca_, cd_;
  std::vector<double> sum_a_, sum_d_;
  std::vector<double> buf_;
};

/// Null-event dynamics on the block spins only, with K and J both coarse-grained.
class CgmcSampler final : public Sampler {
 public:
  CgmcSampler(const RateModel& model, const CoarseConfig& init)
      : Sampler(model), eta_(init), cfield_(model.coupling(), CoarsePart::full, eta_),
        bound_(model.cgmc_cell_bound()) {
    detail::require_variant(model, Variant::coarse_grained, "CGMC");
    if (static_cast<int>(init.size()) != model.cells()) throw ConfigurationError("initial block spins have wrong size");
    for (int e : eta_) {
      if (e < 0 || e > model.q()) throw ConfigurationError("block spin outside [0, q]");
      occ_ += e;
    }
  }
  CgmcSampler(const RateModel& model, const MicroConfig& init) : CgmcSampler(model, coarsen(init, model.coarse())) {}
  SamplerType type() const override { return SamplerType::cgmc; }

  double bound() const { return bound_; }

  Proposal propose(Rng& rng) override {
    const int m = model_->cells();
    Proposal p;
    p.site = rng.index(m);
    double v = rng.uniform_open_closed() * bound_;
    int e = eta_[static_cast<std::size_t>(p.site)];
    double ca = model_->coarse_adsorb(e);
    double cd = model_->coarse_desorb(e, cfield_.ubar(p.site));
    if (v <= ca) {
      p.kind = EventKind::adsorb;
      p.accepted = true;
    } else if (v <= ca + cd) {
      p.kind = EventKind::desorb;
      p.accepted = true;
    }
    p.dt = sample_waiting_time(m * bound_, rng);
    return p;
  }

  void commit(const Proposal& p) override {
    if (!p.accepted) return;
    int delta = p.kind == EventKind::adsorb ? 1 : -1;
    eta_[static_cast<std::size_t>(p.site)] += delta;
    occ_ += delta;
    cfield_.change(p.site, delta, eta_);
  }

  int occupied() const override { return occ_; }
  const CoarseConfig& coarse() const override { return eta_; }
  const MicroConfig* micro() const override { return nullptr; }

 private:
  CoarseConfig eta_;
  CoarseField cfield_;
  double bound_;
  int occ_ = 0;
};

struct SamplerOptions {
  SamplerType type = SamplerType::null_event;
  bool allow_long_range_bkl = false;
  NullEnergy null_energy = NullEnergy::cached;
};

/// Rate-model variant each sampler runs on.
inline Variant default_variant(SamplerType t, Variant mlkmc_variant = Variant::two_level_split) {
  switch (t) {
    case SamplerType::mlkmc: return mlkmc_variant;
    case SamplerType::cgmc: return Variant::coarse_grained;
    default: return Variant::microscopic;
  }
}

inline std::unique_ptr<Sampler> make_sampler(const SamplerOptions& opt, const RateModel& model,
                                             const MicroConfig& init) {
  switch (opt.type) {
    case SamplerType::ssa: return std::make_unique<SsaSampler>(model, init);
    case SamplerType::bkl: return std::make_unique<BklSampler>(model, init, opt.allow_long_range_bkl);
    case SamplerType::null_event: return std::make_unique<NullEventSampler>(model, init, opt.null_energy);
    case SamplerType::mlkmc: return std::make_unique<MlkmcSampler>(model, init);
    case SamplerType::cgmc: return std::make_unique<CgmcSampler>(model, init);
  }
  throw ConfigurationError("unknown sampler type");
}

/// Receives the piecewise-constant path: hold() for every interval the state
/// persists, event() after each proposal is resolved. Returning false from
/// event() stops the run.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void hold(double /*t0*/, double /*t1*/, const Sampler& /*s*/) {}
  virtual bool event(const EventRecord& /*ev*/, const Sampler& /*s*/) { return true; }
};

struct TrajectoryStats {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  std::uint64_t null_events = 0;
  double t_end = 0.0;
  double final_coverage = 0.0;
  double time_averaged_coverage = 0.0;  // over [0, t_end]
  bool absorbed = false;                // no feasible event before t_final
  bool stopped = false;                 // an observer ended the run

  friend bool operator==(const TrajectoryStats&, const TrajectoryStats&) = default;
};

/// Drives a sampler from t = 0 to t_final. A proposal whose time would pass
/// t_final is discarded, so the state at t_final is exact.
inline TrajectoryStats run_trajectory(Sampler& s, double t_final, Rng& rng, Observer* obs = nullptr) {
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw ConfigurationError("T_final must be finite and >= 0");
  TrajectoryStats st;
  double t = 0.0;
  double area = 0.0;
  auto hold = [&](double t1) {
    area += (t1 - t) * s.coverage();
    if (obs) obs->hold(t, t1, s);
  };
  while (t < t_final) {
    Proposal p;
    try {
      p = s.propose(rng);
    } catch (const AbsorbingStateError&) {
      hold(t_final);
      t = t_final;
      st.absorbed = true;
      break;
    }
    if (t + p.dt > t_final) {
      hold(t_final);
      t = t_final;
      break;
    }
    hold(t + p.dt);
    t += p.dt;
    ++st.proposals;
    if (p.accepted) {
      s.commit(p);
      ++st.accepted;
    } else {
      ++st.null_events;
    }
    EventRecord ev{st.proposals, t, p.site, p.accepted ? p.kind : EventKind::null, p.accepted, p.dt};
    if (obs && !obs->event(ev, s)) {
      st.stopped = true;
      break;
    }
  }
  st.t_end = t;
  st.final_coverage = s.coverage();
  st.time_averaged_coverage = t > 0.0 ? area / t : s.coverage();
  return st;
}

}  // namespace mlkmc
