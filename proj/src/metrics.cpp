#include "trainopt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "format.hpp"
#include "trainopt/errors.hpp"

namespace trainopt {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') {
      out += "\"\"";
    } else {
      out.push_back(ch);
    }
  }
  out += '"';
  return out;
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double RunRecord::min_loss() const {
  if (epoch_loss.empty()) {
    return std::numeric_limits<double>::infinity();
  }
  return *std::min_element(epoch_loss.begin(), epoch_loss.end());
}

void record_step(RunRecord& rec, long long t, const Vector& w, const Vector& ghat,
                 const Problem& problem, const TrackingFlags& flags) {
  if (!flags.any()) {
    return;
  }
  const auto expected = static_cast<long long>(std::max(rec.gap.size(), rec.variance.size())) + 1;
  if (t != expected) {
    throw InvalidArgument("record_step: expected step " + std::to_string(expected) + ", got " +
                          std::to_string(t));
  }
  if (flags.gap) {
    const auto opt = problem.optimum();
    if (!opt) {
      throw InvalidArgument("record_step: gap tracking needs a problem with a known optimum");
    }
    rec.gap.push_back((w - *opt).squaredNorm());
  }
  if (flags.variance) {
    rec.variance.push_back((ghat - problem.full_grad(w)).squaredNorm());
  }
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Better: return "better";
    case Verdict::Indistinguishable: return "indistinguishable";
    case Verdict::Worse: return "worse";
  }
  return "unknown";
}

Verdict verdict_from_significance(double s) {
  if (s < 0.05) {
    return Verdict::Better;
  }
  if (s > 0.95) {
    return Verdict::Worse;
  }
  return Verdict::Indistinguishable;
}

std::vector<double> relative_differences(const std::vector<RunRecord>& adam_runs,
                                         const std::vector<RunRecord>& method_runs) {
  if (adam_runs.empty() || adam_runs.size() != method_runs.size()) {
    throw InvalidArgument("rho: need equal, non-zero run counts");
  }
  std::vector<double> diffs;
  diffs.reserve(adam_runs.size());
  for (std::size_t i = 0; i < adam_runs.size(); ++i) {
    const double base = adam_runs[i].min_loss();
    if (!(base > 0.0) || !std::isfinite(base)) {
      throw InvalidArgument("rho: minimum ADAM loss must be positive and finite");
    }
    diffs.push_back((base - method_runs[i].min_loss()) / base);
  }
  return diffs;
}

double rho(const std::vector<RunRecord>& adam_runs, const std::vector<RunRecord>& method_runs) {
  const auto diffs = relative_differences(adam_runs, method_runs);
  double sum = 0.0;
  for (double d : diffs) {
    sum += d;
  }
  return sum / static_cast<double>(diffs.size());
}

double wald_significance(const std::vector<double>& diffs) {
  const std::size_t n = diffs.size();
  if (n < 2) {
    throw InvalidArgument("wald_significance: need at least two pairs");
  }
  double mean = 0.0;
  for (double d : diffs) {
    mean += d;
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double d : diffs) {
    ss += (d - mean) * (d - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double se = sd / std::sqrt(static_cast<double>(n)) + 1e-12;
  return standard_normal_cdf(-mean / se);
}

ComparisonReport compare_to_baseline(const std::vector<RunRecord>& adam_runs,
                                     const std::vector<RunRecord>& method_runs) {
  ComparisonReport rep;
  rep.relative_differences = relative_differences(adam_runs, method_runs);
  rep.n_runs = rep.relative_differences.size();
  double sum = 0.0;
  for (double d : rep.relative_differences) {
    sum += d;
  }
  rep.rho = sum / static_cast<double>(rep.n_runs);
  if (rep.n_runs >= 2) {
    rep.s = wald_significance(rep.relative_differences);
  }
  rep.verdict = verdict_from_significance(rep.s);
  rep.method = method_runs.front().method;
  rep.grid_id = method_runs.front().grid_id;
  rep.baseline_grid_id = adam_runs.front().grid_id;
  return rep;
}

std::size_t metric_entry_count(const std::vector<RunRecord>& records) {
  std::size_t n = 0;
  for (const auto& r : records) {
    n += r.epoch_loss.size() + r.gap.size() + r.variance.size();
  }
  return n;
}

std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "schema_version,method,grid_id,seed,index,metric,value\n";
  auto emit = [&out](const RunRecord& r, const std::vector<double>& values, const char* metric) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      out << kSchemaVersion << ',' << csv_field(r.method) << ',' << csv_field(r.grid_id) << ','
          << r.seed << ',' << (i + 1) << ',' << metric << ','
          << detail::format_double(values[i]) << '\n';
    }
  };
  for (const auto& r : records) {
    emit(r, r.epoch_loss, "loss");
    emit(r, r.gap, "gap");
    emit(r, r.variance, "variance");
  }
  return out.str();
}

std::string records_to_json(const std::vector<RunRecord>& records) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  json arr = json::array();
  for (const auto& r : records) {
    json j;
    j["method"] = r.method;
    j["grid_id"] = r.grid_id;
    j["seed"] = r.seed;
    j["schedule"] = r.schedule;
    j["hyperparameters"] = r.hyperparameters;
    j["epoch_loss"] = r.epoch_loss;
    j["gap"] = r.gap;
    j["variance"] = r.variance;
    j["failed"] = r.failed;
    j["failure"] = r.failure;
    arr.push_back(std::move(j));
  }
  doc["records"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::vector<RunRecord> records_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("records: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("schema_version", 0) != kSchemaVersion) {
    throw ConfigError("records: unsupported or missing schema_version");
  }
  std::vector<RunRecord> out;
  try {
    for (const auto& j : doc.at("records")) {
      RunRecord r;
      r.method = j.at("method").get<std::string>();
      r.grid_id = j.at("grid_id").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.schedule = j.value("schedule", "");
      r.hyperparameters = j.value("hyperparameters", std::map<std::string, double>{});
      r.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
      r.gap = j.value("gap", std::vector<double>{});
      r.variance = j.value("variance", std::vector<double>{});
      r.failed = j.value("failed", false);
      r.failure = j.value("failure", "");
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("records: malformed record: ") + e.what());
  }
  return out;
}

}  // namespace trainopt
