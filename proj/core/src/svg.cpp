#include "featimp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "featimp/io.hpp"

namespace featimp {

namespace {

constexpr double kCell = 18.0;
constexpr double kDendroDepth = 60.0;
constexpr double kLabelSpace = 110.0;

std::string color_for(double v, double lo, double hi) {
  // White-to-crimson ramp; flat inputs render mid-scale.
  double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
  t = std::clamp(t, 0.0, 1.0);
  const int r = 255 - static_cast<int>(std::lround(35.0 * t));
  const int g = 255 - static_cast<int>(std::lround(215.0 * t));
  const int b = 255 - static_cast<int>(std::lround(195.0 * t));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

/// Positions (in leaf-grid units) for every cluster id, plus polyline output
/// for each merge. Orientation handled by the caller via coordinate mapping.
struct DendroLayout {
  std::map<int, double> position;  // cluster id -> center along the leaf axis
  std::map<int, double> height;    // cluster id -> merge height (leaves: 0)
};

DendroLayout layout_dendrogram(const interpret::Dendrogram& dendrogram) {
  DendroLayout layout;
  for (std::size_t slot = 0; slot < dendrogram.leaf_order.size(); ++slot) {
    layout.position[dendrogram.leaf_order[slot]] = static_cast<double>(slot) + 0.5;
    layout.height[dendrogram.leaf_order[slot]] = 0.0;
  }
  const int n = static_cast<int>(dendrogram.leaf_order.size());
  for (std::size_t k = 0; k < dendrogram.merges.size(); ++k) {
    const auto& m = dendrogram.merges[k];
    const int id = n + static_cast<int>(k);
    layout.position[id] = 0.5 * (layout.position.at(m.a) + layout.position.at(m.b));
    layout.height[id] = m.height;
  }
  return layout;
}

}  // namespace

std::string render_heatmap_svg(const FeatureMatrix& values,
                               const std::vector<std::string>& row_labels,
                               const std::vector<std::string>& col_labels,
                               const interpret::BiclusterResult& clustering) {
  const std::size_t n_rows = values.n_rows();
  const std::size_t n_cols = values.n_cols();
  if (row_labels.size() != n_rows || col_labels.size() != n_cols) {
    throw ValidationError("render_heatmap_svg: label counts do not match the matrix");
  }

  double lo = values.at(0, 0);
  double hi = lo;
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      lo = std::min(lo, values.at(r, c));
      hi = std::max(hi, values.at(r, c));
    }
  }

  const double grid_x = kDendroDepth + 8.0;
  const double grid_y = kDendroDepth + 8.0;
  const double grid_w = kCell * static_cast<double>(n_cols);
  const double grid_h = kCell * static_cast<double>(n_rows);
  const double width = grid_x + grid_w + kLabelSpace;
  const double height = grid_y + grid_h + kLabelSpace;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(width)
      << "\" height=\"" << format_double(height) << "\" viewBox=\"0 0 "
      << format_double(width) << ' ' << format_double(height) << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Heatmap cells in clustered order.
  for (std::size_t rs = 0; rs < n_rows; ++rs) {
    const auto r = static_cast<std::size_t>(clustering.rows.leaf_order[rs]);
    for (std::size_t cs = 0; cs < n_cols; ++cs) {
      const auto c = static_cast<std::size_t>(clustering.cols.leaf_order[cs]);
      const double v = values.at(r, c);
      svg << "<rect class=\"cell\" x=\"" << format_double(grid_x + kCell * static_cast<double>(cs))
          << "\" y=\"" << format_double(grid_y + kCell * static_cast<double>(rs))
          << "\" width=\"" << format_double(kCell) << "\" height=\"" << format_double(kCell)
          << "\" fill=\"" << color_for(v, lo, hi) << "\"><title>" << escape_xml(row_labels[r])
          << " / " << escape_xml(col_labels[c]) << ": " << format_double(v)
          << "</title></rect>\n";
    }
  }

  // Dendrograms: columns above the grid, rows to the left.
  const auto draw = [&](const interpret::Dendrogram& dendrogram, bool is_cols) {
    if (dendrogram.merges.empty()) {
      return;
    }
    const DendroLayout layout = layout_dendrogram(dendrogram);
    const double max_h = std::max(dendrogram.merges.back().height, 1e-12);
    const int n = static_cast<int>(dendrogram.leaf_order.size());
    for (std::size_t k = 0; k < dendrogram.merges.size(); ++k) {
      const auto& m = dendrogram.merges[k];
      const int id = n + static_cast<int>(k);
      const double pa = layout.position.at(m.a);
      const double pb = layout.position.at(m.b);
      const double ha = layout.height.at(m.a);
      const double hb = layout.height.at(m.b);
      const double hm = layout.height.at(id);
      const auto depth = [&](double h) { return kDendroDepth * (1.0 - h / max_h) + 4.0; };
      const auto emit = [&](double p1, double d1, double p2, double d2) {
        double x1 = 0.0;
        double y1 = 0.0;
        double x2 = 0.0;
        double y2 = 0.0;
        if (is_cols) {
          x1 = grid_x + kCell * p1;
          y1 = d1;
          x2 = grid_x + kCell * p2;
          y2 = d2;
        } else {
          x1 = d1;
          y1 = grid_y + kCell * p1;
          x2 = d2;
          y2 = grid_y + kCell * p2;
        }
        svg << "<line x1=\"" << format_double(x1) << "\" y1=\"" << format_double(y1)
            << "\" x2=\"" << format_double(x2) << "\" y2=\"" << format_double(y2)
            << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
      };
      emit(pa, depth(ha), pa, depth(hm));
      emit(pb, depth(hb), pb, depth(hm));
      emit(pa, depth(hm), pb, depth(hm));
    }
  };
  draw(clustering.cols, true);
  draw(clustering.rows, false);

  // Labels in clustered order.
  for (std::size_t rs = 0; rs < n_rows; ++rs) {
    const auto r = static_cast<std::size_t>(clustering.rows.leaf_order[rs]);
    svg << "<text x=\"" << format_double(grid_x + grid_w + 4.0) << "\" y=\""
        << format_double(grid_y + kCell * (static_cast<double>(rs) + 0.72))
        << "\" font-size=\"10\" font-family=\"sans-serif\">" << escape_xml(row_labels[r])
        << "</text>\n";
  }
  for (std::size_t cs = 0; cs < n_cols; ++cs) {
    const auto c = static_cast<std::size_t>(clustering.cols.leaf_order[cs]);
    const double x = grid_x + kCell * (static_cast<double>(cs) + 0.72);
    const double y = grid_y + grid_h + 4.0;
    svg << "<text x=\"" << format_double(x) << "\" y=\"" << format_double(y)
        << "\" font-size=\"10\" font-family=\"sans-serif\" transform=\"rotate(90 "
        << format_double(x) << ' ' << format_double(y) << ")\">" << escape_xml(col_labels[c])
        << "</text>\n";
  }

  svg << "</svg>\n";
  return svg.str();
}

}  // namespace featimp
