#ifndef GLOM_FEATURES_HPP
#define GLOM_FEATURES_HPP

#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "glom/dataset.hpp"
#include "glom/error.hpp"
#include "glom/tensor.hpp"

namespace glom {

inline constexpr int kFeatureDim = 128;

// Feature rows with labels and provenance. Provenance (source index,
// augmented flag) only exists for in-memory matrices built by the harness;
// rows read from CSV are all originals.
struct FeatureMatrix {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<int> source_index;
  std::vector<char> augmented;
  std::vector<std::string> class_names;
  Tensor data{{1, kFeatureDim}};

  int rows() const { return data.dim(0); }
  int dim() const { return data.dim(1); }

  std::span<const double> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * dim(),
            static_cast<std::size_t>(dim())};
  }

  void validate() const {
    const auto n = static_cast<std::size_t>(rows());
    if (ids.size() != n || labels.size() != n || source_index.size() != n ||
        augmented.size() != n)
      throw DataError("feature matrix: column lengths disagree");
    for (int l : labels)
      if (l < 0 || l >= static_cast<int>(class_names.size()))
        throw DataError("feature matrix: label outside vocabulary");
  }

  static FeatureMatrix from_samples(const LabeledImageSet& set, Tensor features) {
    FeatureMatrix fm;
    fm.class_names = set.class_names;
    fm.data = std::move(features);
    for (const auto& s : set.samples) {
      fm.ids.push_back(s.id);
      fm.labels.push_back(s.label);
      fm.source_index.push_back(s.source_index);
      fm.augmented.push_back(s.augmented ? 1 : 0);
    }
    fm.validate();
    return fm;
  }
};

// CSV contract: header "id,label,f0..f127", one row per sample, features
// printed with 17 significant digits so values round-trip exactly.
inline void write_features_csv(const FeatureMatrix& fm, const std::string& path) {
  if (fm.dim() != kFeatureDim)
    throw DimensionError("features: CSV format carries exactly " +
                         std::to_string(kFeatureDim) + " features, matrix has " +
                         std::to_string(fm.dim()));
  std::ofstream out(path);
  if (!out) throw IoError("features: cannot write '" + path + "'");
  out << "id,label";
  for (int d = 0; d < kFeatureDim; ++d) out << ",f" << d;
  out << '\n';
  char buf[32];
  for (int i = 0; i < fm.rows(); ++i) {
    out << fm.ids[static_cast<std::size_t>(i)] << ','
        << fm.labels[static_cast<std::size_t>(i)];
    const auto r = fm.row(i);
    for (double v : r) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("features: short write to '" + path + "'");
}

inline FeatureMatrix read_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("features: cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("features: empty file '" + path + "'");

  std::string want_header = "id,label";
  for (int d = 0; d < kFeatureDim; ++d) want_header += ",f" + std::to_string(d);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != want_header)
    throw FormatError("features: line 1: bad header (want id,label,f0..f" +
                      std::to_string(kFeatureDim - 1) + ")");

  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> values;
  int line_no = 1;
  int max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (static_cast<int>(fields.size()) != 2 + kFeatureDim)
      throw FormatError("features: line " + std::to_string(line_no) + ": " +
                        std::to_string(fields.size()) + " columns, want " +
                        std::to_string(2 + kFeatureDim));
    ids.push_back(fields[0]);
    try {
      labels.push_back(std::stoi(fields[1]));
      for (int d = 0; d < kFeatureDim; ++d)
        values.push_back(std::stod(fields[static_cast<std::size_t>(2 + d)]));
    } catch (const std::exception&) {
      throw FormatError("features: line " + std::to_string(line_no) +
                        ": unparsable number");
    }
    if (labels.back() < 0)
      throw DataError("features: line " + std::to_string(line_no) +
                      ": negative label");
    max_label = std::max(max_label, labels.back());
  }
  if (ids.empty()) throw DataError("features: no rows in '" + path + "'");

  FeatureMatrix fm;
  fm.ids = std::move(ids);
  fm.labels = std::move(labels);
  fm.data = Tensor({static_cast<int>(fm.ids.size()), kFeatureDim}, std::move(values));
  for (std::size_t i = 0; i < fm.ids.size(); ++i) {
    fm.source_index.push_back(static_cast<int>(i));
    fm.augmented.push_back(0);
  }
  for (int c = 0; c <= max_label; ++c)
    fm.class_names.push_back("class" + std::to_string(c));
  fm.validate();
  return fm;
}

}  // namespace glom

#endif  // GLOM_FEATURES_HPP
