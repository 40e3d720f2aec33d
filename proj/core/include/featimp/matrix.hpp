#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "featimp/errors.hpp"

namespace featimp {

enum class FeatureKind { Continuous, Binary, Categorical };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

/// Identity and typing of one predictor column.
struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  int level_count = 0;      // categorical only, >= 2
  std::string source_code;  // LOINC / ICD label, empty if none
  bool is_rare_lab = false;
};

/// Dense row-major matrix of doubles. Missing cells are quiet NaN.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  FeatureMatrix(std::size_t n_rows, std::size_t n_cols, double fill = 0.0)
      : rows_(n_rows), cols_(n_cols), values_(n_rows * n_cols, fill) {}

  static double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
  static bool is_missing(double v) { return std::isnan(v); }

  std::size_t n_rows() const { return rows_; }
  std::size_t n_cols() const { return cols_; }

  double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return values_; }
  std::span<double> data() { return values_; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
      out[r] = at(r, c);
    }
    return out;
  }

  void set_column(std::size_t c, std::span<const double> v) {
    for (std::size_t r = 0; r < rows_; ++r) {
      at(r, c) = v[r];
    }
  }

  std::size_t missing_count() const {
    std::size_t n = 0;
    for (double v : values_) {
      n += is_missing(v) ? 1 : 0;
    }
    return n;
  }

  bool has_missing() const {
    for (double v : values_) {
      if (is_missing(v)) {
        return true;
      }
    }
    return false;
  }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const {
    FeatureMatrix out(rows.size(), cols_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < cols_; ++c) {
        out.at(i, c) = at(rows[i], c);
      }
    }
    return out;
  }

  bool operator==(const FeatureMatrix& other) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Feature matrix with binary outcomes and per-column metadata.
/// Loading and generation may leave missing cells; every modeling operation
/// that requires completeness calls require_complete() up front.
struct LabeledDataset {
  FeatureMatrix x;
  std::vector<int> y;
  std::vector<FeatureMeta> meta;

  std::size_t n_rows() const { return x.n_rows(); }
  std::size_t n_cols() const { return x.n_cols(); }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> names;
    names.reserve(meta.size());
    for (const auto& m : meta) {
      names.push_back(m.name);
    }
    return names;
  }

  /// Checks shape agreement, label domain, metadata name uniqueness.
  void validate() const;

  /// Throws ValidationError if any cell is missing.
  void require_complete(const std::string& context) const;

  /// Throws ValidationError unless both classes are present.
  void require_both_classes(const std::string& context) const;

  LabeledDataset subset(std::span<const std::size_t> rows) const;

  std::size_t count_positive() const {
    std::size_t n = 0;
    for (int v : y) {
      n += v == 1 ? 1 : 0;
    }
    return n;
  }
};

/// Per-column training statistics used to center and scale.
struct StandardizationStats {
  std::vector<double> means;
  std::vector<double> stds;  // population std; 1.0 for constant columns
  std::vector<bool> constant_flags;

  std::size_t size() const { return means.size(); }
};

}  // namespace featimp
