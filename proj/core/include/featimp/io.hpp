#pragma once

#include <string>
#include <vector>

#include "featimp/matrix.hpp"

namespace featimp {

/// Loads a dataset from CSV: UTF-8, comma-delimited, header row, label column
/// named `outcome`, empty string or "NA" = missing. When a schema is given the
/// header's feature names must match it; otherwise kinds are inferred from the
/// parsed values (all observed values in {0,1} -> Binary, else Continuous).
LabeledDataset load_dataset(const std::string& path,
                            const std::vector<FeatureMeta>* schema = nullptr);

/// Writes the canonical CSV format; missing cells are emitted as "NA".
/// Values round-trip exactly through load_dataset.
void save_dataset(const std::string& path, const LabeledDataset& data);

/// Feature metadata sidecar: JSON array of
/// {name, kind, source_code, is_rare_lab[, level_count]}.
std::vector<FeatureMeta> load_feature_meta(const std::string& path);
void save_feature_meta(const std::string& path, const std::vector<FeatureMeta>& meta);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace featimp
