#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "trainopt/errors.hpp"
#include "trainopt/harness.hpp"
#include "trainopt/theory.hpp"

using namespace trainopt;
namespace fs = std::filesystem;

namespace {

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("trainopt_harness_" + name);
  fs::remove_all(p);
  return p;
}

const char* kSmall = R"({
  "problem": {"kind": "quadratic", "dim": 4, "condition_number": 5, "num_samples": 32, "seed": 2},
  "optimizers": [
    {"kind": "adam", "gamma": [0.01, 0.05]},
    {"kind": "diagonal_to", "gamma": [0.05], "alpha": [0.0, 0.01], "beta": [0.1]}
  ],
  "schedules": {"include_constant": true, "decay_rates": [0.8]},
  "epochs": 3,
  "batch_size": 8,
  "seeds": [0, 1, 2, 3, 4],
  "threads": 1
})";

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(kSmall);
  CHECK(cfg.problem.kind == ProblemKind::Quadratic);
  CHECK(cfg.problem.dim == 4);
  CHECK(cfg.optimizers.size() == 2);
  CHECK(cfg.optimizers[1].axes[1].first == "alpha");
  CHECK(cfg.decay_rates == std::vector<double>{0.8});
  CHECK(cfg.mode == RunMode::Experimental);
  CHECK_NOTHROW(validate_config(cfg));

  const auto defaults = parse_config(R"({"problem": {"kind": "quadratic"},
                                         "optimizers": [{"kind": "sgd"}]})");
  CHECK(defaults.seeds.size() == 5);
  CHECK(defaults.batch_size == 64);
  CHECK(defaults.decay_rates == std::vector<double>{0.6, 0.8, 0.95});

  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(
      parse_config(R"({"problem": {"kind": "quadratic"}, "optimizers": [], "epoch": 3})"),
      ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"kind": "cubic"}, "optimizers": []})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config(
          R"({"problem": {"kind": "quadratic"}, "optimizers": [{"kind": "adam", "alpha": 1}]})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config(R"({"problem": {"kind": "quadratic"}, "optimizers": [{"kind": "lbfgs"}]})"),
      ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"kind": "logistic"}, "optimizers": []})"),
                  ConfigError);

  auto bad = cfg;
  bad.optimizers.clear();
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = cfg;
  bad.optimizers[0].axes[0].second.clear();
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = cfg;
  bad.optimizers.push_back(bad.optimizers[0]);
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = cfg;
  bad.mode = RunMode::Theorem1;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = cfg;
  bad.seeds.clear();
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = cfg;
  bad.optimizers[0].axes[0].second = {-0.1};
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
}

TEST_CASE("grid expansion") {
  ExperimentConfig cfg;
  cfg.include_constant = true;
  cfg.decay_rates.clear();
  cfg.optimizers = {{OptimizerKind::SGD, {{"gamma", {0.1, 0.2, 0.3}}}}};
  CHECK(expand_grid(cfg).size() == 3);

  cfg.optimizers = {{OptimizerKind::FullTO,
                     {{"gamma", {0.1, 0.2}}, {"alpha", {0.0, 0.1}}, {"beta", {0.1, 0.5}}}}};
  const auto g8 = expand_grid(cfg);
  REQUIRE(g8.size() == 8);
  CHECK(g8[0].id == "full_to:gamma=0.1,alpha=0,beta=0.1;constant");
  CHECK(g8[1].id == "full_to:gamma=0.1,alpha=0,beta=0.5;constant");
  CHECK(g8[7].id == "full_to:gamma=0.2,alpha=0.1,beta=0.5;constant");
  CHECK(!g8[0].spec.alpha);
  CHECK(g8[7].spec.alpha->base == 0.1);

  cfg.decay_rates = {0.6, 0.8, 0.95};
  const auto g32 = expand_grid(cfg);
  CHECK(g32.size() == 32);
  CHECK(g32[1].schedule == "exp(0.6)");
  CHECK(g32[1].spec.gamma.kind == ScheduleKind::ExpDecay);
  CHECK(g32[1].spec.beta->kind == ScheduleKind::Constant);
  for (std::size_t i = 0; i < g32.size(); ++i) CHECK(g32[i].index == i);

  SUBCASE("defaults fill missing axes") {
    ExperimentConfig d;
    d.optimizers = {{OptimizerKind::Adam, {}}, {OptimizerKind::DiagonalTO, {}}};
    const auto g = expand_grid(d);
    CHECK(g.size() == 9 * 4 + 9 * 5 * 5 * 4);
    CHECK(g[0].spec.gamma.base == 1e-5);
    CHECK(g[0].spec.hyper.beta2 == 0.999);
  }
  SUBCASE("theorem mode wires the inverse schedules") {
    ExperimentConfig t;
    t.mode = RunMode::Theorem1;
    t.projection_radius = 1.0;
    t.optimizers = {{OptimizerKind::FullTO,
                     {{"gamma", {2.0}}, {"beta", {22.0}}, {"alpha", {0.1}}, {"mu", {30.0}}}}};
    const auto g = expand_grid(t);
    REQUIRE(g.size() == 1);
    CHECK(g[0].spec.gamma.value(1, 0) == doctest::Approx(2.0 / 31.0));
    CHECK(g[0].spec.beta->value(1, 0) == doctest::Approx(22.0 / 30.0));
    CHECK(g[0].spec.alpha->value(2, 0) == doctest::Approx(0.1 / (31.0 * 31.0)));
    const auto tc = theorem1_config(g[0]);
    CHECK(tc.mu == 30.0);
    CHECK(tc.beta == 22.0);
  }
}

TEST_CASE("minimal run") {
  auto cfg = parse_config(R"({
    "problem": {"kind": "logistic",
                "dataset": {"source": "synthetic", "num_samples": 10, "num_features": 3}},
    "optimizers": [{"kind": "adam", "gamma": 0.01}],
    "schedules": {"decay_rates": []},
    "epochs": 1, "seeds": [7]})");
  const auto res = run_experiment(cfg);
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].epoch_loss.size() == 1);
  CHECK(res.records[0].seed == 7);
  CHECK(res.summary.reports.empty());
  CHECK(res.summary.best_points.size() == 1);
}

TEST_CASE("runs are deterministic and thread-count independent") {
  auto cfg = parse_config(kSmall);
  cfg.tracking.gap = true;
  const auto a = run_experiment(cfg);
  cfg.threads = 4;
  const auto b = run_experiment(cfg);
  CHECK(a.records.size() == 8 * 5);
  CHECK(records_to_json(a.records) == records_to_json(b.records));
  CHECK(summary_to_json(a.summary) == summary_to_json(b.summary));
  REQUIRE(a.summary.reports.size() == 1);
  CHECK(a.summary.reports[0].method == "diagonal_to");
  CHECK(a.summary.reports[0].n_runs == 5);

  SUBCASE("reports can be recomputed from serialised records") {
    const auto again = summarize(records_from_json(records_to_json(a.records)));
    CHECK(summary_to_json(again) == summary_to_json(a.summary));
  }
  SUBCASE("emitted files") {
    const auto dir = scratch("emit");
    const auto files = emit_results(a.records, a.summary, dir);
    CHECK(fs::exists(dir / "records.csv"));
    CHECK(fs::exists(dir / "records.json"));
    CHECK(fs::exists(dir / "reports.json"));
    CHECK(files.size() == 3 + a.records.size());
    const std::string csv = read(dir / "records.csv");
    const auto rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
    CHECK(rows == metric_entry_count(a.records));
    std::string before;
    for (const auto& f : files) before += read(f);
    const auto again = emit_results(a.records, a.summary, dir);
    std::string after;
    for (const auto& f : again) after += read(f);
    CHECK(before == after);
    CHECK(read(files.back()).rfind("# ", 0) == 0);
    fs::remove_all(dir);
  }
}

TEST_CASE("empty records only write reports") {
  const auto dir = scratch("empty");
  const auto files = emit_results({}, Summary{}, dir);
  REQUIRE(files.size() == 1);
  CHECK(files[0].filename() == "reports.json");
  CHECK(read(files[0]).find("\"reports\": []") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("diverging points are excluded") {
  auto cfg = parse_config(R"({
    "problem": {"kind": "quadratic", "dim": 3, "condition_number": 10, "num_samples": 16},
    "optimizers": [{"kind": "sgd", "gamma": [0.05, 5.0]}],
    "schedules": {"decay_rates": []},
    "epochs": 200, "batch_size": 4, "seeds": [0, 1]})");
  const auto res = run_experiment(cfg);
  REQUIRE(res.summary.failed_points.size() == 1);
  CHECK(res.summary.failed_points[0] == "sgd:gamma=5;constant");
  CHECK(res.summary.best_points[0].grid_id == "sgd:gamma=0.05;constant");
  CHECK(res.records[2].failed);
  CHECK(!res.records[2].failure.empty());

  cfg.optimizers[0].axes[0].second = {5.0};
  CHECK_THROWS_AS(run_experiment(cfg), Error);
}

TEST_CASE("theorem checks") {
  auto cfg = parse_config(R"({
    "problem": {"kind": "quadratic", "dim": 3, "condition_number": 1, "num_samples": 16,
                "noise_scale": 0.0},
    "optimizers": [{"kind": "full_to", "gamma": 2, "beta": [22, 5], "alpha": 0, "mu": 30}],
    "mode": "theorem1", "projection_radius": 100, "batch_size": 4, "epochs": 2, "seeds": [0]})");
  const auto problem = build_problem(cfg.problem);
  const auto checks = check_theorem1(cfg, *problem, expand_grid(cfg));
  REQUIRE(checks.size() == 2);
  CHECK(checks[0].bounds.grad_bound == doctest::Approx(200.0).epsilon(1e-12));
  CHECK(checks[0].bounds.a_bound == 0.0);
  CHECK(checks[0].report.valid);
  CHECK(!checks[1].report.valid);
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);

  cfg.optimizers[0].axes[1].second = {22.0};
  const auto res = run_experiment(cfg);
  CHECK(res.checks.size() == 1);
  CHECK(res.records.size() == 1);

  auto logistic = parse_config(R"({
    "problem": {"kind": "logistic", "dataset": {"num_samples": 20}},
    "optimizers": [{"kind": "full_to", "gamma": 2, "beta": 22, "mu": 30}],
    "mode": "theorem1", "projection_radius": 1})");
  const auto lp = build_problem(logistic.problem);
  CHECK_THROWS_AS(check_theorem1(logistic, *lp, expand_grid(logistic)), ConfigError);
}

TEST_CASE("theorem-mode gap decays") {
  const auto cfg = parse_config(R"({
    "problem": {"kind": "quadratic", "dim": 5, "condition_number": 2, "num_samples": 64, "seed": 4},
    "optimizers": [{"kind": "full_to", "gamma": 2, "beta": 140, "alpha": 0.01, "mu": 150}],
    "mode": "theorem1", "projection_radius": 10, "batch_size": 16, "epochs": 2500,
    "seeds": [0], "tracking": {"gap": true}})");
  const auto res = run_experiment(cfg);
  REQUIRE(res.checks.size() == 1);
  CHECK(res.checks[0].report.valid);
  REQUIRE(res.records.size() == 1);
  const auto& gap = res.records[0].gap;
  REQUIRE(gap.size() == 10000);
  std::vector<std::pair<double, double>> series;
  for (std::size_t i = 0; i < gap.size(); ++i) series.emplace_back(i + 1.0, gap[i]);
  CHECK(rate_fit(series, 0.1).slope <= -0.7);
}

TEST_CASE("file datasets") {
  const auto dir = scratch("csv");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "d.csv");
    out << "a,b,label\n";
    for (int i = 0; i < 30; ++i)
      out << i * 0.1 << ',' << (i % 5) << ',' << (i % 2 ? "yes" : "no") << '\n';
  }
  ProblemConfig pc;
  pc.kind = ProblemKind::Ffn;
  pc.dataset.source = DataSource::Csv;
  pc.dataset.path = (dir / "d.csv").string();
  pc.dataset.label_column = 2;
  pc.hidden = 4;
  const auto p = build_problem(pc);
  CHECK(p->num_samples() == 30);
  CHECK(p->dim() == ffn_param_count(2, 4, 2));
  pc.dataset.path = (dir / "missing.csv").string();
  CHECK_THROWS_AS(build_problem(pc), ParseError);
  fs::remove_all(dir);
}
