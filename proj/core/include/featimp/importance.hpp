#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace featimp {

enum class ImportanceMethod { Coefficient, Univariate, Gini, Permutation };

std::string to_string(ImportanceMethod method);
ImportanceMethod importance_method_from_string(const std::string& s);

/// Per-feature scores produced by one importance measure on one model.
struct ImportanceReport {
  ImportanceMethod method = ImportanceMethod::Coefficient;
  std::vector<std::string> feature_names;
  std::vector<double> scores;
  std::string model_kind;  // "lr", "rf", "gbm", or empty for model-free measures
  std::uint64_t seed = 0;
  int repeats = 0;  // permutation only
};

}  // namespace featimp
