#include "featimp/matrix.hpp"

#include <cstring>
#include <set>

namespace featimp {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Continuous:
      return "continuous";
    case FeatureKind::Binary:
      return "binary";
    case FeatureKind::Categorical:
      return "categorical";
  }
  return "continuous";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "continuous") {
    return FeatureKind::Continuous;
  }
  if (s == "binary") {
    return FeatureKind::Binary;
  }
  if (s == "categorical") {
    return FeatureKind::Categorical;
  }
  throw ValidationError("unknown feature kind: " + s);
}

bool FeatureMatrix::operator==(const FeatureMatrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    return false;
  }
  // Bitwise comparison so NaN (missing) cells compare equal to themselves.
  return values_.size() == other.values_.size() &&
         std::memcmp(values_.data(), other.values_.data(),
                     values_.size() * sizeof(double)) == 0;
}

void LabeledDataset::validate() const {
  if (x.n_rows() == 0 || x.n_cols() == 0) {
    throw ValidationError("dataset must have at least one row and one column");
  }
  if (y.size() != x.n_rows()) {
    throw ValidationError("label count " + std::to_string(y.size()) +
                          " does not match row count " + std::to_string(x.n_rows()));
  }
  if (meta.size() != x.n_cols()) {
    throw ValidationError("metadata count " + std::to_string(meta.size()) +
                          " does not match column count " + std::to_string(x.n_cols()));
  }
  for (int v : y) {
    if (v != 0 && v != 1) {
      throw ValidationError("labels must be 0 or 1, found " + std::to_string(v));
    }
  }
  std::set<std::string> names;
  for (const auto& m : meta) {
    if (m.name.empty() || m.name == "outcome" ||
        m.name.find_first_of(",\n\r") != std::string::npos) {
      // Names must survive the CSV header and not collide with the label column.
      throw ValidationError("invalid feature name: '" + m.name + "'");
    }
    if (!names.insert(m.name).second) {
      throw ValidationError("duplicate feature name: " + m.name);
    }
    if (m.kind == FeatureKind::Categorical && m.level_count < 2) {
      throw ValidationError("categorical feature " + m.name + " needs level_count >= 2");
    }
  }
}

void LabeledDataset::require_complete(const std::string& context) const {
  if (x.has_missing()) {
    throw ValidationError(context + ": input contains missing values (" +
                          std::to_string(x.missing_count()) + " cells); impute first");
  }
}

void LabeledDataset::require_both_classes(const std::string& context) const {
  const std::size_t pos = count_positive();
  if (pos == 0 || pos == y.size()) {
    throw ValidationError(context + ": both outcome classes must be present");
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.x = x.select_rows(rows);
  out.y.reserve(rows.size());
  for (std::size_t r : rows) {
    out.y.push_back(y[r]);
  }
  out.meta = meta;
  return out;
}

}  // namespace featimp
