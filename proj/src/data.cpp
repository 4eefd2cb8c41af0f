#include "trainopt/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "format.hpp"
#include "rng.hpp"
#include "trainopt/errors.hpp"

namespace trainopt {

namespace {

using detail::make_rng;

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) {
    return false;
  }
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  out = std::strtod(begin, &end);
  if (end == begin || errno == ERANGE) {
    return false;
  }
  while (*end == ' ' || *end == '\t' || *end == '\r') {
    ++end;
  }
  return *end == '\0' && std::isfinite(out);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Splits one CSV record. Quoted fields may contain commas and doubled quotes;
// embedded newlines are not supported.
std::vector<std::string> split_csv(const std::string& line, const std::string& path,
                                   std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  if (quoted) {
    throw ParseError(path, lineno, "unterminated quoted field");
  }
  fields.push_back(was_quoted ? cur : trim(cur));
  return fields;
}

// Numeric labels map by sorted value, anything else by first appearance.
std::vector<int> remap_labels(const std::vector<std::string>& raw) {
  std::vector<double> numeric(raw.size());
  bool all_numeric = true;
  for (std::size_t i = 0; i < raw.size() && all_numeric; ++i) {
    all_numeric = parse_double(raw[i], numeric[i]);
  }
  std::vector<int> out(raw.size());
  if (all_numeric) {
    std::set<double> distinct(numeric.begin(), numeric.end());
    std::map<double, int> code;
    int next = 0;
    for (double v : distinct) {
      code[v] = next++;
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      out[i] = code[numeric[i]];
    }
  } else {
    std::unordered_map<std::string, int> code;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto [it, inserted] = code.try_emplace(raw[i], static_cast<int>(code.size()));
      out[i] = it->second;
    }
  }
  return out;
}

}  // namespace

int Dataset::num_classes() const {
  if (labels.empty()) {
    return 0;
  }
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

QuadraticSpec gen_quadratic(std::size_t d, double condition_number, std::size_t num_samples,
                            std::uint64_t seed, double noise_scale) {
  if (d < 1 || !(condition_number >= 1.0) || num_samples < 2) {
    throw InvalidArgument("gen_quadratic: need d >= 1, kappa >= 1, N >= 2");
  }
  auto rng = make_rng(seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(d);

  Vector eig(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double frac = d == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(d - 1);
    eig(i) = std::pow(condition_number, frac);
  }

  Matrix gauss(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      gauss(i, j) = normal(rng);
    }
  }
  const Matrix q = Eigen::HouseholderQR<Matrix>(gauss).householderQ();

  QuadraticSpec spec;
  spec.hessian = q * eig.asDiagonal() * q.transpose();
  spec.hessian = 0.5 * (spec.hessian + spec.hessian.transpose()).eval();
  if (condition_number == 1.0) {
    spec.hessian.setIdentity();
  }

  spec.optimum.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    spec.optimum(i) = normal(rng);
  }

  const auto rows = static_cast<Eigen::Index>(num_samples);
  spec.noise.resize(rows, n);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      spec.noise(r, c) = noise_scale * normal(rng);
    }
  }
  spec.noise.rowwise() -= spec.noise.colwise().mean();
  return spec;
}

Dataset gen_logistic(std::size_t num_samples, std::size_t num_features, int num_classes,
                     double separation, std::uint64_t seed) {
  if (num_classes < 2 || num_samples < static_cast<std::size_t>(num_classes) ||
      num_features < 1) {
    throw InvalidArgument("gen_logistic: need N >= K >= 2 and p >= 1");
  }
  auto rng = make_rng(seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto p = static_cast<Eigen::Index>(num_features);

  Matrix centres(num_classes, p);
  for (Eigen::Index k = 0; k < num_classes; ++k) {
    for (Eigen::Index j = 0; j < p; ++j) {
      centres(k, j) = normal(rng);
    }
  }
  centres *= separation;

  Dataset ds;
  ds.name = "synthetic_logistic";
  ds.provenance = "synthetic(seed=" + std::to_string(seed) + ")";
  ds.features.resize(static_cast<Eigen::Index>(num_samples), p);
  ds.labels.resize(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) {
    const int k = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    ds.labels[i] = k;
    for (Eigen::Index j = 0; j < p; ++j) {
      ds.features(static_cast<Eigen::Index>(i), j) = centres(k, j) + normal(rng);
    }
  }
  return ds;
}

Dataset load_libsvm(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path);
  if (!in) {
    throw ParseError(where, 0, "cannot open file");
  }

  std::vector<std::string> raw_labels;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::size_t max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream tokens(line);
    std::string label;
    if (!(tokens >> label)) {
      continue;
    }
    double label_value = 0.0;
    if (!parse_double(label, label_value)) {
      throw ParseError(where, lineno, "label '" + label + "' is not numeric");
    }
    std::vector<std::pair<std::size_t, double>> entries;
    std::set<std::size_t> seen;
    std::string tok;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
        throw ParseError(where, lineno, "expected idx:val, got '" + tok + "'");
      }
      const std::string idx_str = tok.substr(0, colon);
      if (idx_str.find_first_not_of("0123456789") != std::string::npos) {
        throw ParseError(where, lineno, "feature index '" + idx_str + "' is not an integer");
      }
      const std::size_t idx = std::stoull(idx_str);
      if (idx == 0) {
        throw ParseError(where, lineno, "feature indices are 1-based");
      }
      double val = 0.0;
      if (!parse_double(tok.substr(colon + 1), val)) {
        throw ParseError(where, lineno, "feature value in '" + tok + "' is not numeric");
      }
      if (!seen.insert(idx).second) {
        throw ParseError(where, lineno, "duplicate feature index " + idx_str);
      }
      entries.emplace_back(idx, val);
      max_index = std::max(max_index, idx);
    }
    raw_labels.push_back(label);
    rows.push_back(std::move(entries));
  }
  if (rows.empty()) {
    throw ParseError(where, 0, "file contains no samples");
  }

  Dataset ds;
  ds.name = path.stem().string();
  ds.provenance = "file(" + where + ")";
  ds.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(std::max<std::size_t>(max_index, 1)));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [idx, val] : rows[r]) {
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(idx - 1)) = val;
    }
  }
  ds.labels = remap_labels(raw_labels);
  return ds;
}

void write_libsvm(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("write_libsvm: cannot open " + path.string() + " for writing");
  }
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
    out << ds.labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
      const double v = ds.features(r, c);
      if (v != 0.0) {
        out << ' ' << (c + 1) << ':' << detail::format_double(v);
      }
    }
    out << '\n';
  }
  if (!out) {
    throw Error("write_libsvm: write failed for " + path.string());
  }
}

Dataset load_csv(const std::filesystem::path& path, std::size_t label_column) {
  const std::string where = path.string();
  std::ifstream in(path);
  if (!in) {
    throw ParseError(where, 0, "cannot open file");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(where, 0, "empty file (header row required)");
  }
  const std::size_t width = split_csv(line, where, 1).size();
  if (label_column >= width) {
    throw ParseError(where, 1,
                     "label column " + std::to_string(label_column) + " out of range (" +
                         std::to_string(width) + " columns)");
  }
  if (width < 2) {
    throw ParseError(where, 1, "need at least one feature column besides the label");
  }

  std::vector<std::string> raw_labels;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    const auto fields = split_csv(line, where, lineno);
    if (fields.size() != width) {
      throw ParseError(where, lineno,
                       "expected " + std::to_string(width) + " fields, got " +
                           std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(width - 1);
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_column) {
        raw_labels.push_back(fields[c]);
        continue;
      }
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        throw ParseError(where, lineno,
                         "column " + std::to_string(c + 1) + ": '" + fields[c] +
                             "' is not numeric");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ParseError(where, 0, "no data rows after header");
  }

  Dataset ds;
  ds.name = path.stem().string();
  ds.provenance = "file(" + where + ")";
  ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(width - 1));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c + 1 < width; ++c) {
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  ds.labels = remap_labels(raw_labels);
  return ds;
}

Dataset standardize(const Dataset& ds) {
  if (ds.features.rows() < 2) {
    throw InvalidArgument("standardize: need at least two samples");
  }
  Dataset out = ds;
  const double n = static_cast<double>(ds.features.rows());
  for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
    auto col = out.features.col(c);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      col.setZero();
    } else {
      col /= sd;
    }
  }
  return out;
}

}  // namespace trainopt
