#pragma once

#include <optional>
#include <string>

#include "featimp/importance.hpp"
#include "featimp/interpret.hpp"
#include "featimp/linear.hpp"
#include "featimp/matrix.hpp"
#include "featimp/trees.hpp"

namespace featimp {

/// A trained model plus the standardization it expects (linear models only).
struct SavedModel {
  interpret::Predictor predictor;
  std::optional<StandardizationStats> standardization;
};

/// Model files are JSON: {"kind": "lr"|"rf"|"gbm", "model": {...},
/// "standardization": {...}?}. Linear models serialize as
/// {penalty, lambda, beta, converged}; ensembles as flat node arrays
/// {feature, threshold, gain, n, left, right, leaf_value}.
void save_model(const std::string& path, const SavedModel& model);
SavedModel load_model(const std::string& path);

/// Importance reports as CSV (feature,score,method,model,seed) and JSON.
void save_importance_csv(const std::string& path, const ImportanceReport& report);
void save_importance_json(const std::string& path, const ImportanceReport& report);

}  // namespace featimp
