#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "mlkmc/errors.hpp"
#include "mlkmc/potentials.hpp"
#include "mlkmc/rates.hpp"
#include "mlkmc/samplers.hpp"

namespace mlkmc {

inline Variant variant_from_string(const std::string& s) {
  if (s == "split" || s == "two-level-split") return Variant::two_level_split;
  if (s == "exact" || s == "two-level-exact") return Variant::two_level_exact;
  throw ConfigurationError("unknown ML-KMC variant '" + s + "' (expected split|exact)");
}

inline BoundMode bound_from_string(const std::string& s) {
  if (s == "crude") return BoundMode::crude;
  if (s == "exact-sum" || s == "exact_sum") return BoundMode::exact_sum;
  throw ConfigurationError("unknown bound mode '" + s + "' (expected crude|exact-sum)");
}

/// Flat experiment configuration; keys are "section.name".
struct ExperimentConfig {
  // lattice
  int n = 1024;
  // coarse: 0 means q = n
  int q = 1;
  // potential: L = 0 means L = n
  PotentialSpec potential{};
  int L = 0;
  // sampler
  SamplerType kind = SamplerType::null_event;
  Variant variant = Variant::two_level_split;
  BoundMode bound = BoundMode::crude;
  bool allow_long_range_bkl = false;
  NullEnergy null_energy = NullEnergy::cached;
  // run
  double t_final = 60.0;
  int n_replicas = 100;
  std::uint64_t seed = 1;
  double threshold = 0.99;
  double burn_in = 0.0;
  int stride = 0;  // 0 means N
  int grid_points = 500;
  int batches = 20;
  std::string initial = "empty";
  // hysteresis
  double h_min = 0.0;
  double h_max = 6.0;
  int n_points = 41;
  double t_equil = -1.0;  // mandatory for hysteresis
  double t_measure = -1.0;
  // bench
  std::vector<int> bench_sizes{512, 1024, 2048};
  std::vector<SamplerType> bench_samplers{SamplerType::null_event, SamplerType::mlkmc};
  int bench_repeats = 1;
  // output
  std::string directory;
  std::string formats = "csv,json";

  int effective_q() const { return q == 0 ? n : q; }
  int effective_L() const { return L == 0 ? n : L; }

  PotentialSpec effective_potential() const {
    PotentialSpec P = potential;
    P.L = effective_L();
    return P;
  }

  /// q used by the selected sampler (1 for the microscopic ones).
  int sampler_q() const {
    return kind == SamplerType::mlkmc || kind == SamplerType::cgmc ? effective_q() : 1;
  }

  Variant sampler_variant() const { return default_variant(kind, variant); }

  int effective_stride() const { return stride == 0 ? n : stride; }

  bool wants(const std::string& fmt) const {
    std::size_t pos = 0;
    while (pos <= formats.size()) {
      std::size_t end = formats.find(',', pos);
      if (end == std::string::npos) end = formats.size();
      if (formats.substr(pos, end - pos) == fmt) return true;
      pos = end + 1;
    }
    return false;
  }

  void set(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> echo() const;
  void validate() const;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigurationError(key + ": expected a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(d)) throw ConfigurationError(key + ": expected a finite number, got '" + v + "'");
  return d;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigurationError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigurationError(key + ": expected true|false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    std::size_t end = v.find(',', pos);
    if (end == std::string::npos) end = v.size();
    std::string item = v.substr(pos, end - pos);
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    while (!item.empty() && item.back() == ' ') item.pop_back();
    if (!item.empty()) out.push_back(item);
    pos = end + 1;
  }
  return out;
}

/// "n"/"N" selects the lattice size, stored as 0.
inline int parse_size_or_n(const std::string& key, const std::string& v) {
  if (v == "n" || v == "N") return 0;
  return parse_int<int>(key, v);
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "lattice.n") n = parse_int<int>(key, v);
  else if (key == "lattice.d") {
    if (parse_int<int>(key, v) != 1) throw ConfigurationError("lattice.d: only d = 1 is supported");
  } else if (key == "coarse.q") q = parse_size_or_n(key, v);
  else if (key == "potential.K") potential.K = parse_double(key, v);
  else if (key == "potential.J") potential.J = parse_double(key, v);
  else if (key == "potential.L") L = parse_size_or_n(key, v);
  else if (key == "potential.h") potential.h = parse_double(key, v);
  else if (key == "potential.beta") potential.beta = parse_double(key, v);
  else if (key == "potential.d0") potential.d0 = parse_double(key, v);
  else if (key == "potential.profile") potential.profile = profile_from_string(v);
  else if (key == "potential.bond") potential.bond = bond_from_string(v);
  else if (key == "sampler.kind") kind = sampler_from_string(v);
  else if (key == "sampler.variant") variant = variant_from_string(v);
  else if (key == "sampler.bound_mode") bound = bound_from_string(v);
  else if (key == "sampler.allow_long_range_bkl") allow_long_range_bkl = parse_bool(key, v);
  else if (key == "sampler.null_event_energy") null_energy = null_energy_from_string(v);
  else if (key == "run.T_final") t_final = parse_double(key, v);
  else if (key == "run.n_replicas") n_replicas = parse_int<int>(key, v);
  else if (key == "run.seed") seed = parse_int<std::uint64_t>(key, v);
  else if (key == "run.threshold") threshold = parse_double(key, v);
  else if (key == "run.burn_in") burn_in = parse_double(key, v);
  else if (key == "run.stride") stride = parse_int<int>(key, v);
  else if (key == "run.grid_points") grid_points = parse_int<int>(key, v);
  else if (key == "run.batches") batches = parse_int<int>(key, v);
  else if (key == "run.initial") {
    if (v != "empty" && v != "full") throw ConfigurationError("run.initial: expected empty|full, got '" + v + "'");
    initial = v;
  } else if (key == "hysteresis.h_min") h_min = parse_double(key, v);
  else if (key == "hysteresis.h_max") h_max = parse_double(key, v);
  else if (key == "hysteresis.n_points") n_points = parse_int<int>(key, v);
  else if (key == "hysteresis.t_equil") t_equil = parse_double(key, v);
  else if (key == "hysteresis.t_measure") t_measure = parse_double(key, v);
  else if (key == "bench.sizes") {
    bench_sizes.clear();
    for (const auto& s : split_list(v)) bench_sizes.push_back(parse_int<int>(key, s));
  } else if (key == "bench.samplers") {
    bench_samplers.clear();
    for (const auto& s : split_list(v)) bench_samplers.push_back(sampler_from_string(s));
  } else if (key == "bench.repeats") bench_repeats = parse_int<int>(key, v);
  else if (key == "output.directory") directory = v;
  else if (key == "output.formats") {
    for (const auto& f : split_list(v)) {
      if (f != "csv" && f != "json") throw ConfigurationError("output.formats: unknown format '" + f + "'");
    }
    formats = v;
  } else {
    throw ConfigurationError("unknown configuration key '" + key + "'");
  }
}

inline std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
  using detail::fmt_double;
  std::string sizes, samplers;
  for (std::size_t i = 0; i < bench_sizes.size(); ++i) sizes += (i ? "," : "") + std::to_string(bench_sizes[i]);
  for (std::size_t i = 0; i < bench_samplers.size(); ++i) {
    samplers += std::string(i ? "," : "") + to_string(bench_samplers[i]);
  }
  return {
      {"lattice.n", std::to_string(n)},
      {"lattice.d", "1"},
      {"coarse.q", std::to_string(effective_q())},
      {"potential.K", fmt_double(potential.K)},
      {"potential.bond", to_string(potential.bond)},
      {"potential.J", fmt_double(potential.J)},
      {"potential.L", std::to_string(effective_L())},
      {"potential.profile", to_string(potential.profile)},
      {"potential.h", fmt_double(potential.h)},
      {"potential.beta", fmt_double(potential.beta)},
      {"potential.d0", fmt_double(potential.d0)},
      {"sampler.kind", to_string(kind)},
      {"sampler.variant", variant == Variant::two_level_exact ? "exact" : "split"},
      {"sampler.bound_mode", to_string(bound)},
      {"sampler.allow_long_range_bkl", allow_long_range_bkl ? "true" : "false"},
      {"sampler.null_event_energy", to_string(null_energy)},
      {"run.T_final", fmt_double(t_final)},
      {"run.n_replicas", std::to_string(n_replicas)},
      {"run.seed", std::to_string(seed)},
      {"run.threshold", fmt_double(threshold)},
      {"run.burn_in", fmt_double(burn_in)},
      {"run.stride", std::to_string(effective_stride())},
      {"run.grid_points", std::to_string(grid_points)},
      {"run.batches", std::to_string(batches)},
      {"run.initial", initial},
      {"hysteresis.h_min", fmt_double(h_min)},
      {"hysteresis.h_max", fmt_double(h_max)},
      {"hysteresis.n_points", std::to_string(n_points)},
      {"hysteresis.t_equil", fmt_double(t_equil)},
      {"hysteresis.t_measure", fmt_double(t_measure)},
      {"bench.sizes", sizes},
      {"bench.samplers", samplers},
      {"bench.repeats", std::to_string(bench_repeats)},
      {"output.formats", formats},
  };
}

inline void ExperimentConfig::validate() const {
  if (n < 2) throw ConfigurationError("lattice.n must be >= 2");
  if (q < 0 || effective_q() > n || n % effective_q() != 0) {
    throw ConfigurationError("coarse.q = " + std::to_string(effective_q()) + " must divide lattice.n = " +
                             std::to_string(n));
  }
  effective_potential().validate();
  if (!(t_final >= 0.0)) throw ConfigurationError("run.T_final must be >= 0");
  if (n_replicas < 1) throw ConfigurationError("run.n_replicas must be >= 1");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigurationError("run.threshold must lie in (0, 1]");
  if (burn_in < 0.0) throw ConfigurationError("run.burn_in must be >= 0");
  if (stride < 0) throw ConfigurationError("run.stride must be >= 0");
  if (grid_points < 1) throw ConfigurationError("run.grid_points must be >= 1");
  if (batches < 2) throw ConfigurationError("run.batches must be >= 2");
  if (n_points < 1) throw ConfigurationError("hysteresis.n_points must be >= 1");
  if (bench_repeats < 1) throw ConfigurationError("bench.repeats must be >= 1");
  for (int s : bench_sizes) {
    if (s < 2) throw ConfigurationError("bench.sizes entries must be >= 2");
  }
  if (kind == SamplerType::bkl && potential.J != 0.0 && !allow_long_range_bkl) {
    throw ConfigurationError("sampler.kind = bkl with J != 0 needs sampler.allow_long_range_bkl = true");
  }
}

}  // namespace mlkmc
