#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trainopt/driver.hpp"
#include "trainopt/metrics.hpp"
#include "trainopt/problems.hpp"
#include "trainopt/theory.hpp"

namespace trainopt {

enum class RunMode { Experimental, Theorem1 };

std::string_view to_string(RunMode mode);
std::optional<RunMode> parse_run_mode(std::string_view name);

enum class ProblemKind { Quadratic, Logistic, Ffn };
enum class DataSource { Synthetic, Libsvm, Csv };

struct DatasetConfig {
  DataSource source = DataSource::Synthetic;
  // synthetic
  std::size_t num_samples = 1000;
  std::size_t num_features = 10;
  int num_classes = 2;
  double separation = 1.0;
  std::uint64_t seed = 0;
  // files
  std::string path;
  std::size_t label_column = 0;
};

struct ProblemConfig {
  ProblemKind kind = ProblemKind::Quadratic;
  // quadratic
  std::size_t dim = 10;
  double condition_number = 10.0;
  std::size_t num_samples = 256;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  // logistic and ffn
  DatasetConfig dataset;
  bool standardize = true;
  double l2 = 0.0;
  std::size_t hidden = 10;
};

/// One optimizer and its hyperparameter axes, in declared order. Axes not
/// named in the config are filled from the defaults and appended.
struct OptimizerGrid {
  OptimizerKind kind = OptimizerKind::Adam;
  std::vector<std::pair<std::string, std::vector<double>>> axes;
};

struct ExperimentConfig {
  ProblemConfig problem;
  std::vector<OptimizerGrid> optimizers;
  bool include_constant = true;
  std::vector<double> decay_rates{0.6, 0.8, 0.95};
  long long epochs = 10;
  std::size_t batch_size = 64;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::optional<double> projection_radius;
  TrackingFlags tracking;
  RunMode mode = RunMode::Experimental;
  std::string output_dir = "results";
  unsigned threads = 0;  // 0: hardware concurrency
  std::size_t full_dim_cap = kDefaultFullDimCap;
};

/// Default axis values used when a config leaves an axis out.
std::vector<double> default_axis(OptimizerKind kind, const std::string& axis);

/// Parses the JSON config document. Throws ConfigError with the offending key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Structural checks that do not need the data. Throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

std::unique_ptr<Problem> build_problem(const ProblemConfig& cfg);

struct GridPoint {
  std::string id;
  std::size_t index = 0;  // position in expand_grid order
  OptimizerSpec spec;
  std::vector<std::pair<std::string, double>> values;  // axis name -> value
  std::string schedule;  // "constant", "exp(0.8)", "inverse_t"
};

/// Cartesian product of each optimizer's axes (first axis varies slowest)
/// crossed with the schedule family of the run mode.
std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg);

/// Theorem-1 view of a grid point: numerators and the shared mu.
Theorem1Config theorem1_config(const GridPoint& point);

struct PointCheck {
  std::string grid_id;
  BoundConstants bounds;
  Theorem1Report report;
};

/// Bound constants and hypothesis checks for every trainable grid point.
/// Needs a projection radius and a problem exposing c and L.
std::vector<PointCheck> check_theorem1(const ExperimentConfig& cfg, const Problem& problem,
                                       const std::vector<GridPoint>& grid);

/// One seeded run. Failures (non-finite loss or step) are recorded in the
/// returned record rather than thrown.
RunRecord run_single(const Problem& problem, const GridPoint& point, std::uint64_t seed,
                     long long epochs, std::size_t batch_size, const TrackingFlags& tracking);

struct BestPoint {
  std::string method;
  std::string grid_id;
  double mean_min_loss = 0.0;
};

struct Summary {
  std::vector<BestPoint> best_points;
  std::vector<ComparisonReport> reports;
  std::vector<std::string> failed_points;
};

/// Best grid point per method (lowest across-seed mean of the per-run minimum
/// loss, failed points excluded) and each method's best against ADAM's best.
Summary summarize(const std::vector<RunRecord>& records);

std::string summary_to_json(const Summary& summary);

struct ExperimentResult {
  std::vector<RunRecord> records;
  Summary summary;
  std::vector<PointCheck> checks;
};

/// Runs every (grid point, seed) pair. Records come back in grid order then
/// seed order regardless of thread count. Throws ConfigError on an invalid
/// config (including a failed theorem check) and Error when every point fails.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Problem& problem);

/// Writes records.csv, records.json, reports.json and one two-column plot
/// file per tracked trajectory. Returns the written paths.
std::vector<std::filesystem::path> emit_results(const std::vector<RunRecord>& records,
                                                const Summary& summary,
                                                const std::filesystem::path& out_dir);

}  // namespace trainopt
