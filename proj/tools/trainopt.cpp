// Command-line front end: run, validate, report.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "trainopt/errors.hpp"
#include "trainopt/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

using namespace trainopt;

void print_checks(const std::vector<PointCheck>& checks) {
  for (const auto& pc : checks) {
    std::cout << (pc.report.valid ? "valid   " : "INVALID ") << pc.grid_id << '\n'
              << "  D_w=" << pc.bounds.radius << " D_G=" << pc.bounds.grad_bound
              << " D_A=" << pc.bounds.a_bound << " D_b=" << pc.bounds.b_bound
              << " S_alpha=" << pc.bounds.alpha_sum << " c=" << pc.bounds.strong_convexity
              << " L=" << pc.bounds.lipschitz << '\n';
    for (const auto& f : pc.report.failed_conditions) {
      std::cout << "  failed: " << f << '\n';
    }
    for (const auto& s : pc.report.skipped_conditions) {
      std::cout << "  not evaluable: " << s << '\n';
    }
  }
}

void print_summary(const Summary& summary) {
  for (const auto& b : summary.best_points) {
    std::cout << "best " << b.method << ": " << b.grid_id << " (mean min loss "
              << b.mean_min_loss << ")\n";
  }
  for (const auto& r : summary.reports) {
    std::cout << r.method << " vs adam: rho=" << r.rho << " s=" << r.s << " ("
              << to_string(r.verdict) << ", n=" << r.n_runs << ")\n";
  }
  for (const auto& f : summary.failed_points) {
    std::cerr << "failed: " << f << '\n';
  }
}

struct RunArgs {
  std::string config;
  std::string out_dir;
  std::string mode;
  bool track_variance = false;
  std::vector<std::uint64_t> seeds;
  int threads = -1;
};

ExperimentConfig resolve(const RunArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (!a.out_dir.empty()) {
    cfg.output_dir = a.out_dir;
  }
  if (!a.mode.empty()) {
    const auto mode = parse_run_mode(a.mode);
    if (!mode) {
      throw ConfigError("--mode: expected experimental or theorem1");
    }
    cfg.mode = *mode;
  }
  if (a.track_variance) {
    cfg.tracking.variance = true;
  }
  if (!a.seeds.empty()) {
    cfg.seeds = a.seeds;
  }
  if (a.threads >= 0) {
    cfg.threads = static_cast<unsigned>(a.threads);
  }
  validate_config(cfg);
  return cfg;
}

int cmd_run(const RunArgs& a) {
  const ExperimentConfig cfg = resolve(a);
  const auto result = run_experiment(cfg);
  if (!result.checks.empty()) {
    print_checks(result.checks);
  }
  const auto written = emit_results(result.records, result.summary, cfg.output_dir);
  print_summary(result.summary);
  for (const auto& p : written) {
    std::cout << "wrote " << p.string() << '\n';
  }
  return kOk;
}

int cmd_validate(const RunArgs& a) {
  const ExperimentConfig cfg = resolve(a);
  const auto problem = build_problem(cfg.problem);
  const auto grid = expand_grid(cfg);
  std::cout << "config ok: " << grid.size() << " grid points x " << cfg.seeds.size()
            << " seeds, mode " << to_string(cfg.mode) << ", d=" << problem->dim()
            << ", N=" << problem->num_samples() << '\n';
  if (cfg.mode != RunMode::Theorem1) {
    return kOk;
  }
  const auto checks = check_theorem1(cfg, *problem, grid);
  print_checks(checks);
  for (const auto& pc : checks) {
    if (!pc.report.valid) {
      return kUsage;
    }
  }
  return kOk;
}

int cmd_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read records " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto summary = summarize(records_from_json(buf.str()));
  std::cout << summary_to_json(summary);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trainable optimizer benchmark harness"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run an experiment and write results");
  run->add_option("--config", run_args.config, "JSON experiment config")->required();
  run->add_option("--out-dir", run_args.out_dir, "Output directory (overrides config)");
  run->add_option("--mode", run_args.mode, "experimental or theorem1")
      ->check(CLI::IsMember({"experimental", "theorem1"}));
  run->add_flag("--track-variance", run_args.track_variance, "Record ||ghat - grad F||^2 per step");
  run->add_option("--seeds", run_args.seeds, "Comma-separated seeds")->delimiter(',');
  run->add_option("--threads", run_args.threads, "Worker threads (0: all cores)")
      ->check(CLI::NonNegativeNumber);

  RunArgs val_args;
  auto* validate = app.add_subcommand("validate", "Check a config and the theorem hypotheses");
  validate->add_option("--config", val_args.config, "JSON experiment config")->required();
  validate->add_option("--mode", val_args.mode, "experimental or theorem1")
      ->check(CLI::IsMember({"experimental", "theorem1"}));

  std::string records_path;
  auto* report = app.add_subcommand("report", "Recompute reports from records.json");
  report->add_option("--records", records_path, "records.json from a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*validate) return cmd_validate(val_args);
    return cmd_report(records_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
