#include "trainopt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "format.hpp"
#include "json.hpp"
#include "rng.hpp"
#include "trainopt/data.hpp"
#include "trainopt/errors.hpp"

namespace trainopt {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::uint32_t kInitStream = 3;

const std::vector<double> kAdamGammas{1e-5, 2e-5, 5e-5, 1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3};
const std::vector<double> kToGammas{1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
const std::vector<double> kToRates{0.0, 0.01, 0.1, 0.5, 1.0};

std::vector<std::string> allowed_axes(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::FullTO:
    case OptimizerKind::DiagonalTO:
    case OptimizerKind::RankOneTO:
      return {"gamma", "alpha", "beta", "mu"};
    case OptimizerKind::SGD:
      return {"gamma", "mu"};
    case OptimizerKind::Momentum:
      return {"gamma", "beta1", "mu"};
    case OptimizerKind::Adagrad:
      return {"gamma", "eps", "mu"};
    case OptimizerKind::RMSProp:
      return {"gamma", "beta2", "eps", "mu"};
    case OptimizerKind::Adam:
      return {"gamma", "beta1", "beta2", "eps", "mu"};
  }
  return {};
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

// JSON helpers --------------------------------------------------------------

void reject_unknown(const ojson& obj, const std::vector<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!contains(known, key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

const ojson& require_object(const ojson& j, const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  return j;
}

double get_number(const ojson& j, const std::string& where) {
  if (!j.is_number()) {
    throw ConfigError(where + ": expected a number");
  }
  return j.get<double>();
}

std::uint64_t get_count(const ojson& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError(where + ": expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

bool get_bool(const ojson& j, const std::string& where) {
  if (!j.is_boolean()) {
    throw ConfigError(where + ": expected true or false");
  }
  return j.get<bool>();
}

std::string get_string(const ojson& j, const std::string& where) {
  if (!j.is_string()) {
    throw ConfigError(where + ": expected a string");
  }
  return j.get<std::string>();
}

std::vector<double> get_numbers(const ojson& j, const std::string& where) {
  if (j.is_number()) {
    return {j.get<double>()};
  }
  if (!j.is_array()) {
    throw ConfigError(where + ": expected a number or an array of numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(get_number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

DatasetConfig parse_dataset(const ojson& j) {
  require_object(j, "problem.dataset");
  DatasetConfig d;
  const std::string source =
      get_string(j.value("source", ojson("synthetic")), "problem.dataset.source");
  if (source == "synthetic") {
    d.source = DataSource::Synthetic;
    reject_unknown(j,
                   {"source", "num_samples", "num_features", "num_classes", "separation", "seed"},
                   "problem.dataset");
    if (j.contains("num_samples"))
      d.num_samples = get_count(j["num_samples"], "problem.dataset.num_samples");
    if (j.contains("num_features"))
      d.num_features = get_count(j["num_features"], "problem.dataset.num_features");
    if (j.contains("num_classes"))
      d.num_classes = static_cast<int>(get_count(j["num_classes"], "problem.dataset.num_classes"));
    if (j.contains("separation"))
      d.separation = get_number(j["separation"], "problem.dataset.separation");
    if (j.contains("seed")) d.seed = get_count(j["seed"], "problem.dataset.seed");
  } else if (source == "libsvm" || source == "csv") {
    d.source = source == "csv" ? DataSource::Csv : DataSource::Libsvm;
    reject_unknown(j, {"source", "path", "label_column"}, "problem.dataset");
    if (!j.contains("path")) {
      throw ConfigError("problem.dataset.path: required for file datasets");
    }
    d.path = get_string(j["path"], "problem.dataset.path");
    if (j.contains("label_column")) {
      if (d.source != DataSource::Csv) {
        throw ConfigError("problem.dataset.label_column: only valid for csv");
      }
      d.label_column = get_count(j["label_column"], "problem.dataset.label_column");
    }
  } else {
    throw ConfigError("problem.dataset.source: expected synthetic, libsvm or csv, got '" + source +
                      "'");
  }
  return d;
}

ProblemConfig parse_problem(const ojson& j) {
  require_object(j, "problem");
  ProblemConfig p;
  const std::string kind = get_string(j.value("kind", ojson("")), "problem.kind");
  if (kind == "quadratic") {
    p.kind = ProblemKind::Quadratic;
    reject_unknown(j, {"kind", "dim", "condition_number", "num_samples", "noise_scale", "seed"},
                   "problem");
    if (j.contains("dim")) p.dim = get_count(j["dim"], "problem.dim");
    if (j.contains("condition_number"))
      p.condition_number = get_number(j["condition_number"], "problem.condition_number");
    if (j.contains("num_samples"))
      p.num_samples = get_count(j["num_samples"], "problem.num_samples");
    if (j.contains("noise_scale"))
      p.noise_scale = get_number(j["noise_scale"], "problem.noise_scale");
    if (j.contains("seed")) p.seed = get_count(j["seed"], "problem.seed");
    return p;
  }
  if (kind == "logistic") {
    p.kind = ProblemKind::Logistic;
    reject_unknown(j, {"kind", "dataset", "standardize", "l2"}, "problem");
  } else if (kind == "ffn") {
    p.kind = ProblemKind::Ffn;
    reject_unknown(j, {"kind", "dataset", "standardize", "hidden"}, "problem");
    if (j.contains("hidden")) p.hidden = get_count(j["hidden"], "problem.hidden");
  } else {
    throw ConfigError("problem.kind: expected quadratic, logistic or ffn, got '" + kind + "'");
  }
  if (!j.contains("dataset")) {
    throw ConfigError("problem.dataset: required for " + kind);
  }
  p.dataset = parse_dataset(j["dataset"]);
  if (j.contains("standardize")) p.standardize = get_bool(j["standardize"], "problem.standardize");
  if (j.contains("l2")) p.l2 = get_number(j["l2"], "problem.l2");
  return p;
}

OptimizerGrid parse_optimizer(const ojson& j, std::size_t pos) {
  const std::string where = "optimizers[" + std::to_string(pos) + "]";
  require_object(j, where);
  if (!j.contains("kind")) {
    throw ConfigError(where + ".kind: required");
  }
  const std::string name = get_string(j["kind"], where + ".kind");
  const auto kind = parse_optimizer_kind(name);
  if (!kind) {
    throw ConfigError(where + ".kind: unknown optimizer '" + name + "'");
  }
  OptimizerGrid g;
  g.kind = *kind;
  const auto axes = allowed_axes(*kind);
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") {
      continue;
    }
    if (!contains(axes, key)) {
      throw ConfigError(where + ": '" + key + "' is not a hyperparameter of " + name);
    }
    g.axes.emplace_back(key, get_numbers(value, where + "." + key));
  }
  return g;
}

// Grid ----------------------------------------------------------------------

double axis_value(const std::vector<std::pair<std::string, double>>& values, const char* name,
                  double fallback) {
  for (const auto& [k, v] : values) {
    if (k == name) {
      return v;
    }
  }
  return fallback;
}

std::string make_id(OptimizerKind kind, const std::vector<std::pair<std::string, double>>& values,
                    const std::string& schedule) {
  std::string id(to_string(kind));
  id += ':';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) {
      id += ',';
    }
    id += values[i].first + '=' + detail::format_double(values[i].second);
  }
  id += ';' + schedule;
  return id;
}

struct ScheduleChoice {
  std::string label;
  std::optional<double> decay;
};

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << content;
  out.close();
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

}  // namespace

std::string_view to_string(RunMode mode) {
  return mode == RunMode::Theorem1 ? "theorem1" : "experimental";
}

std::optional<RunMode> parse_run_mode(std::string_view name) {
  if (name == "experimental") {
    return RunMode::Experimental;
  }
  if (name == "theorem1") {
    return RunMode::Theorem1;
  }
  return std::nullopt;
}

std::vector<double> default_axis(OptimizerKind kind, const std::string& axis) {
  if (axis == "gamma") {
    switch (kind) {
      case OptimizerKind::Adam:
      case OptimizerKind::Adagrad:
      case OptimizerKind::RMSProp:
        return kAdamGammas;
      default:
        return kToGammas;
    }
  }
  if (axis == "alpha" || axis == "beta") {
    return kToRates;
  }
  if (axis == "beta1") {
    return {0.9};
  }
  if (axis == "beta2") {
    return {kind == OptimizerKind::RMSProp ? 0.9 : 0.999};
  }
  if (axis == "eps") {
    return {1e-8};
  }
  return {};
}

ExperimentConfig parse_config(const std::string& json_text) {
  ojson doc;
  try {
    doc = ojson::parse(json_text);
  } catch (const ojson::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_object(doc, "config");
  reject_unknown(doc,
                 {"problem", "optimizers", "schedules", "epochs", "batch_size", "seeds",
                  "projection_radius", "tracking", "mode", "output_dir", "threads", "full_dim_cap"},
                 "config");
  ExperimentConfig cfg;
  if (!doc.contains("problem")) {
    throw ConfigError("problem: required");
  }
  cfg.problem = parse_problem(doc["problem"]);

  if (!doc.contains("optimizers") || !doc["optimizers"].is_array()) {
    throw ConfigError("optimizers: required array");
  }
  for (std::size_t i = 0; i < doc["optimizers"].size(); ++i) {
    cfg.optimizers.push_back(parse_optimizer(doc["optimizers"][i], i));
  }

  if (doc.contains("schedules")) {
    const auto& s = require_object(doc["schedules"], "schedules");
    reject_unknown(s, {"include_constant", "decay_rates"}, "schedules");
    if (s.contains("include_constant")) {
      cfg.include_constant = get_bool(s["include_constant"], "schedules.include_constant");
    }
    if (s.contains("decay_rates")) {
      if (!s["decay_rates"].is_array()) {
        throw ConfigError("schedules.decay_rates: expected an array");
      }
      cfg.decay_rates = get_numbers(s["decay_rates"], "schedules.decay_rates");
    }
  }
  if (doc.contains("epochs")) {
    cfg.epochs = static_cast<long long>(get_count(doc["epochs"], "epochs"));
  }
  if (doc.contains("batch_size")) {
    cfg.batch_size = get_count(doc["batch_size"], "batch_size");
  }
  if (doc.contains("seeds")) {
    if (!doc["seeds"].is_array()) {
      throw ConfigError("seeds: expected an array");
    }
    cfg.seeds.clear();
    for (std::size_t i = 0; i < doc["seeds"].size(); ++i) {
      cfg.seeds.push_back(get_count(doc["seeds"][i], "seeds[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("projection_radius") && !doc["projection_radius"].is_null()) {
    cfg.projection_radius = get_number(doc["projection_radius"], "projection_radius");
  }
  if (doc.contains("tracking")) {
    const auto& t = require_object(doc["tracking"], "tracking");
    reject_unknown(t, {"gap", "variance"}, "tracking");
    if (t.contains("gap")) cfg.tracking.gap = get_bool(t["gap"], "tracking.gap");
    if (t.contains("variance"))
      cfg.tracking.variance = get_bool(t["variance"], "tracking.variance");
  }
  if (doc.contains("mode")) {
    const std::string m = get_string(doc["mode"], "mode");
    const auto mode = parse_run_mode(m);
    if (!mode) {
      throw ConfigError("mode: expected experimental or theorem1, got '" + m + "'");
    }
    cfg.mode = *mode;
  }
  if (doc.contains("output_dir")) {
    cfg.output_dir = get_string(doc["output_dir"], "output_dir");
  }
  if (doc.contains("threads")) {
    cfg.threads = static_cast<unsigned>(get_count(doc["threads"], "threads"));
  }
  if (doc.contains("full_dim_cap")) {
    cfg.full_dim_cap = get_count(doc["full_dim_cap"], "full_dim_cap");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read config " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate_config(const ExperimentConfig& cfg) {
  const auto& p = cfg.problem;
  if (p.kind == ProblemKind::Quadratic) {
    if (p.dim < 1) throw ConfigError("problem.dim: must be >= 1");
    if (!(p.condition_number >= 1.0)) throw ConfigError("problem.condition_number: must be >= 1");
    if (p.num_samples < 2) throw ConfigError("problem.num_samples: must be >= 2");
    if (!(p.noise_scale >= 0.0)) throw ConfigError("problem.noise_scale: must be >= 0");
  } else {
    if (!(p.l2 >= 0.0)) throw ConfigError("problem.l2: must be >= 0");
    if (p.kind == ProblemKind::Ffn && p.hidden < 1)
      throw ConfigError("problem.hidden: must be >= 1");
    const auto& d = p.dataset;
    if (d.source == DataSource::Synthetic) {
      if (d.num_classes < 2) throw ConfigError("problem.dataset.num_classes: must be >= 2");
      if (d.num_samples < static_cast<std::size_t>(d.num_classes)) {
        throw ConfigError("problem.dataset.num_samples: must be >= num_classes");
      }
      if (d.num_features < 1) throw ConfigError("problem.dataset.num_features: must be >= 1");
      if (!(d.separation >= 0.0)) throw ConfigError("problem.dataset.separation: must be >= 0");
    }
  }

  if (cfg.optimizers.empty()) {
    throw ConfigError("optimizers: at least one optimizer is required");
  }
  std::set<OptimizerKind> seen;
  for (const auto& opt : cfg.optimizers) {
    const std::string name(to_string(opt.kind));
    if (!seen.insert(opt.kind).second) {
      throw ConfigError("optimizers: '" + name + "' listed twice");
    }
    std::set<std::string> names;
    for (const auto& [axis, values] : opt.axes) {
      const std::string where = name + "." + axis;
      if (!names.insert(axis).second) {
        throw ConfigError(where + ": axis declared twice");
      }
      if (values.empty()) {
        throw ConfigError(where + ": empty grid axis");
      }
      for (double v : values) {
        bool ok = std::isfinite(v);
        if (axis == "gamma" || axis == "eps" || axis == "mu") {
          ok = ok && v > 0.0;
        } else if (axis == "alpha" || axis == "beta") {
          ok = ok && v >= 0.0;
        } else if (axis == "beta1" || axis == "beta2") {
          ok = ok && v >= 0.0 && v < 1.0;
        }
        if (!ok) {
          throw ConfigError(where + ": value " + detail::format_double(v) + " out of range");
        }
      }
    }
    if (cfg.mode == RunMode::Theorem1 && !names.count("mu")) {
      throw ConfigError(name + ".mu: required in theorem1 mode");
    }
  }

  for (double r : cfg.decay_rates) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw ConfigError("schedules.decay_rates: " + detail::format_double(r) +
                        " is outside (0, 1]");
    }
  }
  if (cfg.mode == RunMode::Experimental && !cfg.include_constant && cfg.decay_rates.empty()) {
    throw ConfigError("schedules: no schedule left to run");
  }
  if (cfg.epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (cfg.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size()) {
    throw ConfigError("seeds: duplicate seed");
  }
  if (cfg.projection_radius &&
      !(std::isfinite(*cfg.projection_radius) && *cfg.projection_radius > 0.0)) {
    throw ConfigError("projection_radius: must be positive and finite");
  }
  if (cfg.mode == RunMode::Theorem1 && !cfg.projection_radius) {
    throw ConfigError("projection_radius: required in theorem1 mode");
  }
  if (cfg.tracking.gap && p.kind != ProblemKind::Quadratic) {
    throw ConfigError("tracking.gap: needs a problem with a known optimum (quadratic)");
  }
}

std::unique_ptr<Problem> build_problem(const ProblemConfig& cfg) {
  if (cfg.kind == ProblemKind::Quadratic) {
    return std::make_unique<QuadraticProblem>(
        gen_quadratic(cfg.dim, cfg.condition_number, cfg.num_samples, cfg.seed, cfg.noise_scale));
  }
  Dataset ds;
  int classes = 0;
  switch (cfg.dataset.source) {
    case DataSource::Synthetic:
      ds = gen_logistic(cfg.dataset.num_samples, cfg.dataset.num_features, cfg.dataset.num_classes,
                        cfg.dataset.separation, cfg.dataset.seed);
      classes = cfg.dataset.num_classes;
      break;
    case DataSource::Libsvm:
      ds = load_libsvm(cfg.dataset.path);
      break;
    case DataSource::Csv:
      ds = load_csv(cfg.dataset.path, cfg.dataset.label_column);
      break;
  }
  if (classes == 0) {
    classes = std::max(2, ds.num_classes());
  }
  if (cfg.standardize) {
    ds = standardize(ds);
  }
  if (cfg.kind == ProblemKind::Logistic) {
    return std::make_unique<LogisticProblem>(
        LogisticSpec{std::move(ds.features), std::move(ds.labels), classes, cfg.l2});
  }
  return std::make_unique<FfnProblem>(
      FfnSpec{std::move(ds.features), std::move(ds.labels), cfg.hidden, classes});
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg) {
  const bool theorem = cfg.mode == RunMode::Theorem1;
  const FeasibleSet feasible = cfg.projection_radius ? FeasibleSet::l2_ball(*cfg.projection_radius)
                                                     : FeasibleSet::unconstrained();
  std::vector<ScheduleChoice> schedules;
  if (theorem) {
    schedules.push_back({"inverse_t", std::nullopt});
  } else {
    if (cfg.include_constant) {
      schedules.push_back({"constant", std::nullopt});
    }
    for (double r : cfg.decay_rates) {
      schedules.push_back({"exp(" + detail::format_double(r) + ")", r});
    }
  }
  if (schedules.empty()) {
    throw ConfigError("schedules: no schedule left to run");
  }

  std::vector<GridPoint> grid;
  for (const auto& opt : cfg.optimizers) {
    auto axes = opt.axes;
    if (!theorem) {
      std::erase_if(axes, [](const auto& a) { return a.first == "mu"; });
    }
    for (const auto& name : allowed_axes(opt.kind)) {
      const bool declared =
          std::any_of(axes.begin(), axes.end(), [&](const auto& a) { return a.first == name; });
      if (!declared && name != "mu") {
        axes.emplace_back(name, default_axis(opt.kind, name));
      }
    }
    for (const auto& [name, values] : axes) {
      if (values.empty()) {
        throw ConfigError(std::string(to_string(opt.kind)) + "." + name + ": empty grid axis");
      }
    }

    std::vector<std::size_t> pos(axes.size(), 0);
    bool done = false;
    while (!done) {
      std::vector<std::pair<std::string, double>> values;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        values.emplace_back(axes[a].first, axes[a].second[pos[a]]);
      }
      const double gamma = axis_value(values, "gamma", 1e-3);
      const double alpha = axis_value(values, "alpha", 0.0);
      const double beta = axis_value(values, "beta", 0.0);
      const double mu = axis_value(values, "mu", 0.0);
      for (const auto& sched : schedules) {
        GridPoint gp;
        gp.index = grid.size();
        gp.values = values;
        gp.schedule = sched.label;
        gp.id = make_id(opt.kind, values, sched.label);
        OptimizerSpec& spec = gp.spec;
        spec.kind = opt.kind;
        spec.feasible = feasible;
        spec.full_dim_cap = cfg.full_dim_cap;
        spec.hyper.beta1 = axis_value(values, "beta1", 0.9);
        spec.hyper.beta2 = axis_value(values, "beta2", 0.999);
        spec.hyper.eps = axis_value(values, "eps", 1e-8);
        if (theorem) {
          spec.gamma = Schedule::inverse_t(gamma, mu, 0);
          if (beta > 0.0) spec.beta = Schedule::inverse_t(beta, mu, 1);
          if (alpha > 0.0) spec.alpha = Schedule::inverse_t_squared(alpha, mu, 1);
        } else {
          spec.gamma =
              sched.decay ? Schedule::exp_decay(gamma, *sched.decay) : Schedule::constant(gamma);
          if (beta > 0.0) spec.beta = Schedule::constant(beta);
          if (alpha > 0.0) spec.alpha = Schedule::constant(alpha);
        }
        grid.push_back(std::move(gp));
      }
      // Odometer with the last axis fastest.
      done = true;
      for (std::size_t a = axes.size(); a-- > 0;) {
        if (++pos[a] < axes[a].second.size()) {
          done = false;
          break;
        }
        pos[a] = 0;
      }
    }
  }
  return grid;
}

Theorem1Config theorem1_config(const GridPoint& point) {
  Theorem1Config tc;
  tc.gamma = axis_value(point.values, "gamma", 0.0);
  tc.beta = axis_value(point.values, "beta", 0.0);
  tc.alpha = axis_value(point.values, "alpha", 0.0);
  tc.mu = axis_value(point.values, "mu", 0.0);
  return tc;
}

std::vector<PointCheck> check_theorem1(const ExperimentConfig& cfg, const Problem& problem,
                                       const std::vector<GridPoint>& grid) {
  if (!cfg.projection_radius) {
    throw ConfigError("projection_radius: required for the theorem checks");
  }
  const auto c = problem.strong_convexity();
  const auto lip = problem.lipschitz();
  if (!c || !lip || !(*c > 0.0)) {
    throw ConfigError("theorem checks need a strongly convex problem with known c and L");
  }
  const double radius = *cfg.projection_radius;
  const std::size_t batch = std::min(cfg.batch_size, problem.num_samples());
  const auto opt = problem.optimum();
  double grad_at_opt = 0.0;
  if (opt) {
    grad_at_opt = batch_grad_norm_bound(problem, *opt, batch);
  } else {
    grad_at_opt = batch_grad_norm_bound(
                      problem, Vector::Zero(static_cast<Eigen::Index>(problem.dim())), batch) +
                  *lip * radius;
  }
  const double grad_bound = compute_DG(*lip, radius, grad_at_opt);

  std::vector<PointCheck> out;
  for (const auto& point : grid) {
    if (!is_trainable(point.spec.kind)) {
      continue;
    }
    const Theorem1Config tc = theorem1_config(point);
    PointCheck pc;
    pc.grid_id = point.id;
    pc.bounds.radius = radius;
    pc.bounds.grad_bound = grad_bound;
    pc.bounds.lipschitz = *lip;
    pc.bounds.strong_convexity = *c;
    pc.bounds.alpha_sum = alpha_series_sum(tc.alpha, tc.mu);
    try {
      const auto [a_bound, b_bound] =
          compute_DA_Db(0.0, 0.0, pc.bounds.alpha_sum, radius, grad_bound);
      pc.bounds.a_bound = a_bound;
      pc.bounds.b_bound = b_bound;
    } catch (const InfeasibleConstants&) {
      pc.bounds.a_bound = std::numeric_limits<double>::infinity();
      pc.bounds.b_bound = std::numeric_limits<double>::infinity();
    }
    pc.report = validate_theorem1(tc, *c, *lip, pc.bounds.a_bound, radius);
    if (opt && opt->norm() > radius) {
      pc.report.failed_conditions.push_back("||w*|| <= D_w");
      pc.report.valid = false;
    }
    out.push_back(std::move(pc));
  }
  return out;
}

RunRecord run_single(const Problem& problem, const GridPoint& point, std::uint64_t seed,
                     long long epochs, std::size_t batch_size, const TrackingFlags& tracking) {
  RunRecord rec;
  rec.method = std::string(to_string(point.spec.kind));
  rec.grid_id = point.id;
  rec.seed = seed;
  rec.schedule = point.schedule;
  for (const auto& [k, v] : point.values) {
    rec.hyperparameters[k] = v;
  }
  if (point.spec.gamma.kind == ScheduleKind::ExpDecay) {
    rec.hyperparameters["decay_rate"] = point.spec.gamma.decay_rate;
  }

  const auto d = static_cast<Eigen::Index>(problem.dim());
  auto rng = detail::make_rng(seed, kInitStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector w(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    w[i] = normal(rng);
  }
  w = project(w, point.spec.feasible);

  Optimizer opt(point.spec, problem.dim());
  const BatchSampler sampler{problem.num_samples(), std::min(batch_size, problem.num_samples()),
                             seed};
  long long t = 1;
  try {
    for (long long epoch = 0; epoch < epochs; ++epoch) {
      for (const auto& batch : sampler.batches(static_cast<std::uint64_t>(epoch))) {
        const Vector g = problem.minibatch_grad(w, batch);
        if (tracking.any()) {
          const Vector w_t = w;
          const Vector& ghat = opt.step(w, g, t, epoch);
          record_step(rec, t, w_t, ghat, problem, tracking);
        } else {
          opt.step(w, g, t, epoch);
        }
        ++t;
      }
      const double loss = problem.full_loss(w);
      if (!std::isfinite(loss)) {
        rec.failed = true;
        rec.failure = "non-finite loss after epoch " + std::to_string(epoch + 1);
        break;
      }
      rec.epoch_loss.push_back(loss);
    }
  } catch (const NumericalError& e) {
    rec.failed = true;
    rec.failure = "step " + std::to_string(t) + ": " + e.what();
  }
  return rec;
}

Summary summarize(const std::vector<RunRecord>& records) {
  struct PointRuns {
    std::string method;
    std::string grid_id;
    std::vector<const RunRecord*> runs;
    bool failed = false;
  };
  std::vector<PointRuns> points;
  std::map<std::string, std::size_t> where;
  for (const auto& r : records) {
    auto [it, inserted] = where.emplace(r.grid_id, points.size());
    if (inserted) {
      points.push_back({r.method, r.grid_id, {}, false});
    }
    auto& p = points[it->second];
    p.runs.push_back(&r);
    p.failed = p.failed || r.failed || r.epoch_loss.empty();
  }

  Summary out;
  std::vector<std::string> methods;
  std::map<std::string, std::pair<const PointRuns*, double>> best;
  for (auto& p : points) {
    std::sort(p.runs.begin(), p.runs.end(),
              [](const RunRecord* a, const RunRecord* b) { return a->seed < b->seed; });
    if (std::find(methods.begin(), methods.end(), p.method) == methods.end()) {
      methods.push_back(p.method);
    }
    if (p.failed) {
      out.failed_points.push_back(p.grid_id);
      continue;
    }
    double sum = 0.0;
    for (const auto* r : p.runs) {
      sum += r->min_loss();
    }
    const double mean = sum / static_cast<double>(p.runs.size());
    auto it = best.find(p.method);
    if (it == best.end() || mean < it->second.second) {
      best[p.method] = {&p, mean};
    }
  }

  for (const auto& m : methods) {
    const auto it = best.find(m);
    if (it != best.end()) {
      out.best_points.push_back({m, it->second.first->grid_id, it->second.second});
    }
  }

  const std::string adam(to_string(OptimizerKind::Adam));
  const auto base = best.find(adam);
  if (base == best.end()) {
    return out;
  }
  for (const auto& m : methods) {
    const auto it = best.find(m);
    if (m == adam || it == best.end()) {
      continue;
    }
    std::vector<RunRecord> adam_runs;
    std::vector<RunRecord> method_runs;
    for (const auto* r : it->second.first->runs) {
      for (const auto* a : base->second.first->runs) {
        if (a->seed == r->seed) {
          adam_runs.push_back(*a);
          method_runs.push_back(*r);
          break;
        }
      }
    }
    if (!method_runs.empty()) {
      out.reports.push_back(compare_to_baseline(adam_runs, method_runs));
    }
  }
  return out;
}

std::string summary_to_json(const Summary& summary) {
  ojson doc;
  doc["schema_version"] = kSchemaVersion;
  ojson best = ojson::array();
  for (const auto& b : summary.best_points) {
    best.push_back(
        {{"method", b.method}, {"grid_id", b.grid_id}, {"mean_min_loss", b.mean_min_loss}});
  }
  doc["best_points"] = std::move(best);
  ojson reports = ojson::array();
  for (const auto& r : summary.reports) {
    ojson j;
    j["method"] = r.method;
    j["grid_id"] = r.grid_id;
    j["baseline_grid_id"] = r.baseline_grid_id;
    j["rho"] = r.rho;
    j["s"] = r.s;
    j["verdict"] = std::string(to_string(r.verdict));
    j["n_runs"] = r.n_runs;
    j["relative_differences"] = r.relative_differences;
    reports.push_back(std::move(j));
  }
  doc["reports"] = std::move(reports);
  doc["failed_points"] = summary.failed_points;
  return doc.dump(2) + "\n";
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto problem = build_problem(cfg.problem);
  return run_experiment(cfg, *problem);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Problem& problem) {
  validate_config(cfg);
  if (cfg.tracking.gap && !problem.optimum()) {
    throw ConfigError("tracking.gap: the problem has no known optimum");
  }
  const auto grid = expand_grid(cfg);
  ExperimentResult result;
  if (cfg.mode == RunMode::Theorem1) {
    result.checks = check_theorem1(cfg, problem, grid);
    std::string bad;
    for (const auto& pc : result.checks) {
      if (!pc.report.valid) {
        bad += "\n  " + pc.grid_id + ":";
        for (const auto& f : pc.report.failed_conditions) bad += " [" + f + "]";
        for (const auto& s : pc.report.skipped_conditions) bad += " [skipped: " + s + "]";
      }
    }
    if (!bad.empty()) {
      throw ConfigError("theorem1 mode: grid points violate the hypotheses:" + bad);
    }
  }

  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t jobs = grid.size() * n_seeds;
  std::vector<RunRecord> records(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        records[i] = run_single(problem, grid[i / n_seeds], cfg.seeds[i % n_seeds], cfg.epochs,
                                cfg.batch_size, cfg.tracking);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n_threads =
      cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, jobs));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n_threads; ++i) {
      pool.emplace_back(worker);
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }

  result.records = std::move(records);
  result.summary = summarize(result.records);
  if (result.summary.best_points.empty()) {
    throw Error("every grid point failed");
  }
  return result;
}

std::vector<std::filesystem::path> emit_results(const std::vector<RunRecord>& records,
                                                const Summary& summary,
                                                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  }
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::filesystem::path& p, const std::string& content) {
    write_file(p, content);
    written.push_back(p);
  };
  if (!records.empty()) {
    emit(out_dir / "records.csv", records_to_csv(records));
    emit(out_dir / "records.json", records_to_json(records));
  }
  emit(out_dir / "reports.json", summary_to_json(summary));

  std::map<std::string, std::size_t> point_index;
  const auto plots = out_dir / "plots";
  bool made_plots = false;
  for (const auto& r : records) {
    const auto idx = point_index.emplace(r.grid_id, point_index.size()).first->second;
    const std::pair<const char*, const std::vector<double>*> series[] = {{"gap", &r.gap},
                                                                         {"variance", &r.variance}};
    for (const auto& [metric, values] : series) {
      if (values->empty()) {
        continue;
      }
      if (!made_plots) {
        std::filesystem::create_directories(plots, ec);
        if (ec) {
          throw IoError("cannot create " + plots.string() + ": " + ec.message());
        }
        made_plots = true;
      }
      std::ostringstream text;
      text << "# " << r.grid_id << " seed=" << r.seed << ' ' << metric << '\n';
      for (std::size_t t = 0; t < values->size(); ++t) {
        text << (t + 1) << ' ' << detail::format_double((*values)[t]) << '\n';
      }
      emit(plots / (r.method + "_p" + std::to_string(idx) + "_seed" + std::to_string(r.seed) + "_" +
                    metric + ".dat"),
           text.str());
    }
  }
  return written;
}

}  // namespace trainopt
