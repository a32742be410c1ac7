#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlkmc/config.hpp"
#include "mlkmc/experiments.hpp"
#include "mlkmc/output.hpp"
#include "mlkmc/validate.hpp"

#ifndef MLKMC_GIT_DESCRIBE
#define MLKMC_GIT_DESCRIBE "unknown"
#endif

using namespace mlkmc;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

enum ExitCode { ok = 0, config_error = 1, runtime_error = 2, validation_failure = 3 };

struct Context {
  ExperimentConfig cfg;
  std::string command;
  fs::path dir;
  std::string prefix;
  unsigned threads = 1;
  Metadata meta;

  fs::path path(const char* ext) const { return dir / (prefix + ext); }
};

void load_ini(ExperimentConfig& cfg, const std::string& file) {
  if (!fs::exists(file)) throw ConfigurationError("config file not found: " + file);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(file);
  } catch (const CLI::Error& e) {
    throw ConfigurationError("cannot parse " + file + ": " + e.what());
  }
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;  // section markers
    std::vector<std::string> parents;
    for (const auto& p : it.parents) {
      if (p != "default") parents.push_back(p);
    }
    std::string key;
    for (const auto& p : parents) key += p + ".";
    key += it.name;
    std::string value;
    for (std::size_t i = 0; i < it.inputs.size(); ++i) value += (i ? "," : "") + it.inputs[i];
    cfg.set(key, value);
  }
}

void apply_override(ExperimentConfig& cfg, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigurationError("--set expects section.key=value, got '" + kv + "'");
  cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
}

RunSetup make_setup(const ExperimentConfig& cfg, int n) {
  RunSetup s;
  s.lattice = LatticeSpec(n);
  s.potential = cfg.potential;
  s.potential.L = cfg.L == 0 ? n : cfg.L;
  s.sampler = {cfg.kind, cfg.allow_long_range_bkl, cfg.null_energy};
  s.mlkmc_variant = cfg.variant;
  s.bound = cfg.bound;
  s.q = cfg.q == 0 ? n : cfg.q;
  s.initial = MicroConfig(n, cfg.initial == "full" ? 1 : 0);
  return s;
}

json events_json(const EventTotals& e) {
  json j;
  j["proposals"] = e.proposals;
  j["accepted"] = e.accepted;
  j["null_events"] = e.null_events;
  j["rejection_rate"] = e.rejection_rate();
  j["absorbed_replicas"] = e.absorbed;
  return j;
}

json stats_json(double mean, double se, std::uint64_t count) {
  json j;
  j["mean"] = mean;
  j["stderr"] = se;
  j["ci95"] = json::array({mean - 1.96 * se, mean + 1.96 * se});
  j["count"] = count;
  return j;
}

/// Thermodynamic-limit coverage branches; only defined for the all-to-all long-range part.
json closed_form_json(const ExperimentConfig& cfg, double h) {
  if (cfg.L != 0 && cfg.L < cfg.n) return nullptr;
  PotentialSpec P = cfg.potential;
  P.h = h;
  json arr = json::array();
  for (const auto& b : closed_form_coverage(P)) arr.push_back({{"coverage", b.coverage}, {"free_energy", b.free_energy}});
  return arr;
}

json base_summary(const Context& ctx) {
  json j;
  j["metadata"] = ctx.meta.to_json();
  j["status"] = "ok";
  return j;
}

bool want_csv(const Context& ctx) { return ctx.cfg.wants("csv"); }
bool want_json(const Context& ctx) { return ctx.cfg.wants("json"); }

int cmd_trajectory(Context& ctx) {
  const auto& c = ctx.cfg;
  RunSetup setup = make_setup(c, c.n);
  TrajectoryRun run = run_trajectories(setup, c.t_final, c.grid_points, c.n_replicas, c.seed, ctx.threads);
  const bool empty = c.t_final == 0.0;
  if (want_csv(ctx)) {
    CsvWriter w(ctx.path(".csv"), ctx.meta, {"replica", "t", "coverage"});
    if (!empty) {
      for (std::size_t r = 0; r < run.coverage.size(); ++r) {
        for (std::size_t i = 0; i < run.times.size(); ++i) w.cell(static_cast<std::uint64_t>(r)).cell(run.times[i]).cell(run.coverage[r][i]).end_row();
      }
    }
    w.close();
  }
  json j = base_summary(ctx);
  j["replicas"] = c.n_replicas;
  j["events"] = events_json(run.events);
  j["wall_seconds"] = run.wall_seconds;
  json mean = {{"t", json::array()}, {"mean", json::array()}, {"stderr", json::array()}};
  if (!empty) {
    auto pts = run.pointwise();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      mean["t"].push_back(run.times[i]);
      mean["mean"].push_back(pts[i].mean());
      mean["stderr"].push_back(pts[i].stderr_());
    }
  }
  j["mean_trajectory"] = mean;
  j["complete"] = run.events.absorbed == 0;
  if (want_json(ctx)) write_json(ctx.path(".json"), j);
  std::cout << "trajectory: " << c.n_replicas << " replicas, " << run.events.proposals << " proposals, final mean coverage "
            << (empty ? 0.0 : mean["mean"].back().get<double>()) << "\n";
  return ok;
}

int cmd_exit_time(Context& ctx) {
  const auto& c = ctx.cfg;
  RunSetup setup = make_setup(c, c.n);
  ExitTimeRun run = run_exit_times(setup, c.threshold, c.t_final, c.n_replicas, c.seed, ctx.threads);
  if (want_csv(ctx)) {
    CsvWriter w(ctx.path(".csv"), ctx.meta, {"replica", "tau", "censored"});
    for (std::size_t r = 0; r < run.samples.size(); ++r) {
      w.cell(static_cast<std::uint64_t>(r)).cell(run.samples[r].tau).cell(run.samples[r].censored ? 1 : 0).end_row();
    }
    w.close();
  }
  const auto& u = run.summary.uncensored;
  json j = base_summary(ctx);
  j["replicas"] = c.n_replicas;
  j["threshold"] = c.threshold;
  j["t_final"] = c.t_final;
  j["tau"] = stats_json(u.count() ? u.mean() : 0.0, u.stderr_(), u.count());
  j["censored"] = run.summary.censored;
  j["mean_with_censored_at_t_final"] = run.censored_lower_bound();
  j["events"] = events_json(run.events);
  j["wall_seconds"] = run.wall_seconds;
  if (want_json(ctx)) write_json(ctx.path(".json"), j);
  std::cout << "exit-time: tau = " << (u.count() ? u.mean() : 0.0) << " +/- " << u.ci95() << " (" << u.count()
            << " hits, " << run.summary.censored << " censored)\n";
  return ok;
}

int cmd_hysteresis(Context& ctx) {
  const auto& c = ctx.cfg;
  if (c.t_equil < 0.0) throw ConfigurationError("hysteresis.t_equil must be set (>= 0)");
  if (!(c.t_measure > 0.0)) throw ConfigurationError("hysteresis.t_measure must be set (> 0)");
  RunSetup setup = make_setup(c, c.n);
  auto h_up = linspace(c.h_min, c.h_max, c.n_points);
  HysteresisRun run = run_hysteresis(setup, h_up, c.t_equil, c.t_measure, c.batches, c.n_replicas, c.seed, ctx.threads);
  if (want_csv(ctx)) {
    CsvWriter w(ctx.path(".csv"), ctx.meta, {"index", "direction", "h", "mean_coverage", "stderr", "absorbed"});
    for (std::size_t i = 0; i < run.points.size(); ++i) {
      const auto& p = run.points[i];
      w.cell(static_cast<std::uint64_t>(i)).cell(p.direction == Direction::up ? "up" : "down").cell(p.h)
          .cell(p.mean_coverage).cell(p.stderr_).cell(p.absorbed ? 1 : 0).end_row();
    }
    w.close();
  }
  json j = base_summary(ctx);
  j["replicas"] = c.n_replicas;
  json pts = json::array();
  for (const auto& p : run.points) {
    pts.push_back({{"h", p.h},
                   {"direction", p.direction == Direction::up ? "up" : "down"},
                   {"mean_coverage", p.mean_coverage},
                   {"stderr", p.stderr_},
                   {"absorbed", p.absorbed},
                   {"closed_form", closed_form_json(c, p.h)}});
  }
  j["points"] = pts;
  LoopGap g = widest_gap(run.points);
  j["widest_gap"] = {{"h", g.h}, {"gap", g.gap}, {"z", g.z}};
  j["wall_seconds"] = run.wall_seconds;
  if (want_json(ctx)) write_json(ctx.path(".json"), j);
  std::cout << "hysteresis: " << run.points.size() << " points, widest up/down gap " << g.gap << " at h = " << g.h
            << "\n";
  return ok;
}

int cmd_equilibrium(Context& ctx) {
  const auto& c = ctx.cfg;
  RunSetup setup = make_setup(c, c.n);
  EquilibriumRun run = run_equilibrium(setup, c.burn_in, c.t_final, c.batches, c.n_replicas, c.seed, ctx.threads);
  if (want_csv(ctx)) {
    CsvWriter w(ctx.path(".csv"), ctx.meta, {"replica", "mean_coverage", "batch_stderr"});
    for (std::size_t r = 0; r < run.replicas.size(); ++r) {
      w.cell(static_cast<std::uint64_t>(r)).cell(run.replicas[r].mean).cell(run.replicas[r].stderr_).end_row();
    }
    w.close();
  }
  json j = base_summary(ctx);
  j["coverage"] = stats_json(run.mean, run.stderr_, run.replicas.size());
  json cf = closed_form_json(c, c.potential.h);
  j["closed_form"] = cf;
  if (cf.is_array() && !cf.empty()) {
    double best = cf[0]["coverage"].get<double>();
    for (const auto& b : cf) {
      if (std::abs(b["coverage"].get<double>() - run.mean) < std::abs(best - run.mean)) best = b["coverage"].get<double>();
    }
    j["nearest_branch_z"] = run.stderr_ > 0.0 ? std::abs(run.mean - best) / run.stderr_ : 0.0;
  }
  j["events"] = events_json(run.events);
  j["wall_seconds"] = run.wall_seconds;
  if (want_json(ctx)) write_json(ctx.path(".json"), j);
  std::cout << "equilibrium: coverage = " << run.mean << " +/- " << 1.96 * run.stderr_ << "\n";
  return ok;
}

int cmd_bench(Context& ctx) {
  const auto& c = ctx.cfg;
  std::vector<BenchCell> cells;
  for (int n : c.bench_sizes) {
    for (SamplerType t : c.bench_samplers) {
      ExperimentConfig cc = c;
      cc.n = n;
      cc.kind = t;
      RunSetup setup = make_setup(cc, n);
      cells.push_back(bench_cell(setup, c.t_final, c.bench_repeats, c.seed));
      std::cout << "bench: " << to_string(t) << " N=" << n << " " << cells.back().wall_seconds << " s\n";
    }
  }
  if (want_csv(ctx)) {
    CsvWriter w(ctx.path(".csv"), ctx.meta,
                {"sampler", "n", "q", "wall_seconds", "proposals", "accepted", "null_events", "rejection_rate"});
    for (const auto& b : cells) {
      w.cell(to_string(b.sampler)).cell(b.n).cell(b.q).cell(b.wall_seconds).cell(b.events.proposals)
          .cell(b.events.accepted).cell(b.events.null_events).cell(b.events.rejection_rate()).end_row();
    }
    w.close();
  }
  json j = base_summary(ctx);
  json arr = json::array();
  for (const auto& b : cells) {
    arr.push_back({{"sampler", to_string(b.sampler)},
                   {"n", b.n},
                   {"q", b.q},
                   {"wall_seconds", b.wall_seconds},
                   {"events", events_json(b.events)}});
  }
  j["cells"] = arr;
  // per N: wall-time ratio and acceptance ratio of ML-KMC against the null-event sampler
  json speed = json::array();
  for (int n : c.bench_sizes) {
    const BenchCell* ne = nullptr;
    const BenchCell* ml = nullptr;
    for (const auto& b : cells) {
      if (b.n != n) continue;
      if (b.sampler == SamplerType::null_event) ne = &b;
      if (b.sampler == SamplerType::mlkmc) ml = &b;
    }
    if (!ne || !ml) continue;
    auto succ = [](const BenchCell& b) {
      return b.events.proposals ? static_cast<double>(b.events.accepted) / static_cast<double>(b.events.proposals) : 0.0;
    };
    json row = {{"n", n}, {"r_wall", nullptr}, {"r_success", nullptr}};
    if (ml->wall_seconds > 0.0) row["r_wall"] = ne->wall_seconds / ml->wall_seconds;
    if (succ(*ne) > 0.0) row["r_success"] = succ(*ml) / succ(*ne);
    speed.push_back(row);
  }
  j["speedup"] = speed;
  if (want_json(ctx)) write_json(ctx.path(".json"), j);
  return ok;
}

int cmd_validate(Context& ctx, const std::string& level, const std::string& inject) {
  ValidationLevel lv = level == "full" ? ValidationLevel::full : ValidationLevel::fast;
  if (level != "fast" && level != "full") throw ConfigurationError("--level must be fast|full");
  ValidationReport r = run_validation(lv, fault_from_string(inject), ctx.cfg.seed);
  json j = base_summary(ctx);
  j["level"] = level;
  j["fault"] = inject;
  j["passed"] = r.passed();
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back(
        {{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance}, {"detail", c.detail}});
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << fmt17(c.value) << "\n";
  }
  j["checks"] = checks;
  j["failures"] = r.failures();
  j["seconds"] = r.seconds;
  if (!r.passed()) j["status"] = "failed";
  if (want_json(ctx)) write_json(ctx.path(".json"), j);
  std::cout << "validate (" << level << "): " << (r.passed() ? "all checks passed" : "FAILED") << " in " << r.seconds
            << " s\n";
  return r.passed() ? ok : validation_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic Monte Carlo for lattice-gas adsorption/desorption with multilevel coarse-graining"};
  app.set_version_flag("--version", std::string("mlkmc ") + MLKMC_GIT_DESCRIBE);
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  unsigned threads = default_threads();
  std::string out_dir, name;
  app.add_option("-c,--config", config_file, "INI configuration file");
  app.add_option("-s,--set", overrides, "Override a key: section.key=value (repeatable)");
  app.add_option("--seed", seed, "Master seed (overrides run.seed)");
  app.add_option("-j,--threads", threads, "Worker threads for replicas")->check(CLI::PositiveNumber);
  app.add_option("-o,--out", out_dir, "Output directory (default: $MLKMC_OUTPUT_DIR or .)");
  app.add_option("--name", name, "Output file stem (default: the subcommand name)");

  std::vector<CLI::App*> subs;
  subs.push_back(app.add_subcommand("trajectory", "Coverage trajectories on a uniform time grid"));
  subs.push_back(app.add_subcommand("exit-time", "First-passage times of the coverage to run.threshold"));
  subs.push_back(app.add_subcommand("hysteresis", "Field sweep up then down"));
  subs.push_back(app.add_subcommand("equilibrium", "Long-time average coverage against the closed form"));
  subs.push_back(app.add_subcommand("bench", "Wall-clock comparison over samplers and lattice sizes"));
  CLI::App* val = app.add_subcommand("validate", "Exact-enumeration and rate-identity checks");
  subs.push_back(val);
  std::string level = "fast", inject = "none";
  val->add_option("--level", level, "fast|full")->check(CLI::IsMember({"fast", "full"}));
  val->add_option("--inject", inject, "Deliberate defect: none|short-sign-flip")
      ->check(CLI::IsMember({"none", "short-sign-flip"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return config_error;
  }

  Context ctx;
  for (auto* s : subs) {
    if (s->parsed()) ctx.command = s->get_name();
  }
  try {
    if (!config_file.empty()) load_ini(ctx.cfg, config_file);
    for (const auto& kv : overrides) apply_override(ctx.cfg, kv);
    if (seed) ctx.cfg.seed = *seed;
    if (!out_dir.empty()) ctx.cfg.directory = out_dir;
    if (ctx.command != "validate") ctx.cfg.validate();
    ctx.threads = threads;
    if (!ctx.cfg.directory.empty()) {
      ctx.dir = ctx.cfg.directory;
    } else if (const char* e = std::getenv("MLKMC_OUTPUT_DIR")) {
      ctx.dir = e;
    } else {
      ctx.dir = ".";
    }
    ctx.prefix = name.empty() ? ctx.command : name;
    fs::create_directories(ctx.dir);
    ctx.meta.command = ctx.command;
    ctx.meta.git_describe = MLKMC_GIT_DESCRIBE;
    ctx.meta.timestamp = output_timestamp();
    ctx.meta.seed = ctx.cfg.seed;
    ctx.meta.config = ctx.cfg.echo();
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return runtime_error;
  }

  try {
    if (ctx.command == "trajectory") return cmd_trajectory(ctx);
    if (ctx.command == "exit-time") return cmd_exit_time(ctx);
    if (ctx.command == "hysteresis") return cmd_hysteresis(ctx);
    if (ctx.command == "equilibrium") return cmd_equilibrium(ctx);
    if (ctx.command == "bench") return cmd_bench(ctx);
    if (ctx.command == "validate") return cmd_validate(ctx, level, inject);
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return config_error;
  } catch (const SizeLimitError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    try {
      json j = base_summary(ctx);
      j["status"] = "failed";
      j["error"] = e.what();
      if (want_json(ctx)) write_json(ctx.path(".json"), j);
    } catch (...) {
    }
    return runtime_error;
  }
  return runtime_error;
}
