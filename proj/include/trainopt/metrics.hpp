#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trainopt/problems.hpp"

namespace trainopt {

inline constexpr int kSchemaVersion = 1;

/// Trajectory of one (grid point, seed) run.
struct RunRecord {
  std::string method;   // optimizer kind, e.g. "adam", "diagonal_to"
  std::string grid_id;  // stable identifier of the grid point
  std::uint64_t seed = 0;
  std::string schedule;  // schedule description
  std::map<std::string, double> hyperparameters;

  std::vector<double> epoch_loss;  // full training loss after each epoch
  std::vector<double> gap;         // ||w_t - w*||^2 per step, when tracked
  std::vector<double> variance;    // ||ghat_t - grad F(w_t)||^2 per step, when tracked

  bool failed = false;
  std::string failure;

  double min_loss() const;
};

struct TrackingFlags {
  bool gap = false;
  bool variance = false;

  bool any() const { return gap || variance; }
};

/// Appends the tracked observables for step t, where w is the iterate the
/// step started from and ghat the direction it used. No-op when nothing is
/// tracked. Throws InvalidArgument if gap tracking is requested on a problem
/// without a known optimum.
void record_step(RunRecord& rec, long long t, const Vector& w, const Vector& ghat,
                 const Problem& problem, const TrackingFlags& flags);

enum class Verdict { Better, Indistinguishable, Worse };

std::string_view to_string(Verdict v);
Verdict verdict_from_significance(double s);

struct ComparisonReport {
  std::string method;
  std::string grid_id;
  std::string baseline_grid_id;
  double rho = 0.0;
  double s = 0.5;
  Verdict verdict = Verdict::Indistinguishable;
  std::size_t n_runs = 0;
  std::vector<double> relative_differences;
};

/// Per pair: (min ADAM loss - min method loss) / min ADAM loss. Runs are
/// paired by position. Throws InvalidArgument on unequal or empty lists or a
/// non-positive ADAM minimum.
std::vector<double> relative_differences(const std::vector<RunRecord>& adam_runs,
                                         const std::vector<RunRecord>& method_runs);

/// Mean of relative_differences.
double rho(const std::vector<RunRecord>& adam_runs, const std::vector<RunRecord>& method_runs);

/// One-tailed normal probability s = Phi(-mean / se), se = sd/sqrt(n) + 1e-12
/// with the (n-1) sample standard deviation. Positive differences push s
/// towards 0. Needs n >= 2.
double wald_significance(const std::vector<double>& diffs);

ComparisonReport compare_to_baseline(const std::vector<RunRecord>& adam_runs,
                                     const std::vector<RunRecord>& method_runs);

// Serialisation -------------------------------------------------------------

/// Flat CSV: schema_version,method,grid_id,seed,index,metric,value. `index`
/// is the 1-based epoch for "loss" and the step t for "gap"/"variance".
std::string records_to_csv(const std::vector<RunRecord>& records);

std::string records_to_json(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_json(const std::string& text);

std::size_t metric_entry_count(const std::vector<RunRecord>& records);

}  // namespace trainopt
