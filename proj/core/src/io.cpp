#include "featimp/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace featimp {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

bool is_missing_token(const std::string& s) { return s.empty() || s == "NA"; }

double parse_cell(const std::string& s, std::size_t line_no, const std::string& column) {
  double value = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("cannot parse value '" + s + "' in column " + column, line_no);
  }
  return value;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

LabeledDataset load_dataset(const std::string& path, const std::vector<FeatureMeta>* schema) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }

  std::string header;
  if (!std::getline(in, header)) {
    throw ParseError("empty file: " + path, 1);
  }
  const std::vector<std::string> columns = split_csv_line(header);

  std::size_t label_col = columns.size();
  std::vector<std::string> feature_names;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == "outcome") {
      if (label_col != columns.size()) {
        throw ParseError("duplicate outcome column", 1);
      }
      label_col = c;
    } else {
      feature_names.push_back(columns[c]);
      feature_cols.push_back(c);
    }
  }
  if (label_col == columns.size()) {
    throw ParseError("no 'outcome' column in " + path, 1);
  }
  if (feature_names.empty()) {
    throw ParseError("no feature columns in " + path, 1);
  }
  if (schema != nullptr) {
    if (schema->size() != feature_names.size()) {
      throw ValidationError("schema has " + std::to_string(schema->size()) +
                            " features but header has " +
                            std::to_string(feature_names.size()));
    }
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
      if ((*schema)[j].name != feature_names[j]) {
        throw ValidationError("schema feature '" + (*schema)[j].name +
                              "' does not match header column '" + feature_names[j] + "'");
      }
    }
  }

  std::vector<double> cells;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) {
      break;  // trailing newline
    }
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != columns.size()) {
      throw ParseError("expected " + std::to_string(columns.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const std::string& label_text = fields[label_col];
    if (is_missing_token(label_text)) {
      throw ValidationError("missing outcome value at line " + std::to_string(line_no));
    }
    if (label_text != "0" && label_text != "1") {
      throw ValidationError("outcome must be 0 or 1, found '" + label_text + "' at line " +
                            std::to_string(line_no));
    }
    labels.push_back(label_text == "1" ? 1 : 0);
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const std::string& cell = fields[feature_cols[j]];
      cells.push_back(is_missing_token(cell)
                          ? FeatureMatrix::missing_value()
                          : parse_cell(cell, line_no, feature_names[j]));
    }
  }
  if (labels.empty()) {
    throw ParseError("no data rows in " + path, line_no);
  }

  const std::size_t n = labels.size();
  const std::size_t d = feature_names.size();
  LabeledDataset data;
  data.x = FeatureMatrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      data.x.at(i, j) = cells[i * d + j];
    }
  }
  data.y = std::move(labels);

  if (schema != nullptr) {
    data.meta = *schema;
  } else {
    data.meta.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
      FeatureMeta m;
      m.name = feature_names[j];
      bool binary = true;
      for (std::size_t i = 0; i < n && binary; ++i) {
        const double v = data.x.at(i, j);
        if (!FeatureMatrix::is_missing(v) && v != 0.0 && v != 1.0) {
          binary = false;
        }
      }
      m.kind = binary ? FeatureKind::Binary : FeatureKind::Continuous;
      data.meta.push_back(std::move(m));
    }
  }
  data.validate();
  return data;
}

void save_dataset(const std::string& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  for (std::size_t j = 0; j < data.meta.size(); ++j) {
    out << data.meta[j].name << ',';
  }
  out << "outcome\n";
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    for (std::size_t j = 0; j < data.n_cols(); ++j) {
      const double v = data.x.at(i, j);
      if (FeatureMatrix::is_missing(v)) {
        out << "NA";
      } else {
        out << format_double(v);
      }
      out << ',';
    }
    out << data.y[i] << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

std::vector<FeatureMeta> load_feature_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid metadata JSON: ") + e.what());
  }
  if (!doc.is_array()) {
    throw ParseError("metadata JSON must be an array");
  }
  std::vector<FeatureMeta> meta;
  meta.reserve(doc.size());
  for (const auto& item : doc) {
    FeatureMeta m;
    m.name = item.at("name").get<std::string>();
    m.kind = feature_kind_from_string(item.at("kind").get<std::string>());
    if (item.contains("level_count")) {
      m.level_count = item["level_count"].get<int>();
    }
    if (item.contains("source_code")) {
      m.source_code = item["source_code"].get<std::string>();
    }
    if (item.contains("is_rare_lab")) {
      m.is_rare_lab = item["is_rare_lab"].get<bool>();
    }
    meta.push_back(std::move(m));
  }
  return meta;
}

void save_feature_meta(const std::string& path, const std::vector<FeatureMeta>& meta) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& m : meta) {
    nlohmann::ordered_json item;
    item["name"] = m.name;
    item["kind"] = to_string(m.kind);
    if (m.kind == FeatureKind::Categorical) {
      item["level_count"] = m.level_count;
    }
    item["source_code"] = m.source_code;
    item["is_rare_lab"] = m.is_rare_lab;
    doc.push_back(std::move(item));
  }
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

}  // namespace featimp
