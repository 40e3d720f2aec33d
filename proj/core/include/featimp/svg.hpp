#pragma once

#include <string>
#include <vector>

#include "featimp/interpret.hpp"
#include "featimp/matrix.hpp"

namespace featimp {

/// Self-contained SVG heatmap with dendrogram margins. Rows and columns are
/// drawn in the clustered leaf order; every matrix cell becomes one
/// <rect class="cell">.
std::string render_heatmap_svg(const FeatureMatrix& values,
                               const std::vector<std::string>& row_labels,
                               const std::vector<std::string>& col_labels,
                               const interpret::BiclusterResult& clustering);

}  // namespace featimp
