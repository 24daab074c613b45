#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "betaens/basis.hpp"
#include "betaens/common.hpp"
#include "betaens/detops.hpp"

namespace betaens {

using json = nlohmann::ordered_json;

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// CSV writer: a provenance comment line, a header, then rows with doubles at
/// 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& config_hash_hex,
            const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw missing_input_error("cannot open for writing: " + path.string());
    out_ << "# " << kToolVersion << " config_hash=" << config_hash_hex << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
  }

 private:
  std::ofstream out_;
};

struct CsvFile {
  std::string config_hash;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw missing_input_error("missing input file: " + path.string());
  CsvFile file;
  std::string line;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("config_hash=");
      if (pos != std::string::npos) file.config_hash = line.substr(pos + 12);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_done) {
      file.columns = std::move(cells);
      header_done = true;
    } else {
      file.rows.push_back(std::move(cells));
    }
  }
  return file;
}

inline void write_points_csv(const std::filesystem::path& path, const std::string& hash_hex,
                             const Matrix& points) {
  std::vector<std::string> cols;
  for (Index d = 0; d < points.cols(); ++d) cols.push_back("x" + std::to_string(d));
  CsvWriter w(path, hash_hex, cols);
  for (Index i = 0; i < points.rows(); ++i) {
    std::vector<std::string> cells;
    for (Index d = 0; d < points.cols(); ++d) cells.push_back(format_g17(points(i, d)));
    w.row(cells);
  }
}

/// Sample archive: one row per (sample, point).
inline void write_samples_csv(const std::filesystem::path& path, const std::string& hash_hex,
                              const std::vector<Configuration>& samples) {
  if (samples.empty()) {
    CsvWriter w(path, hash_hex, {"sample", "point"});
    return;
  }
  const Index dim = samples.front().points.cols();
  std::vector<std::string> cols = {"sample", "point"};
  for (Index d = 0; d < dim; ++d) cols.push_back("x" + std::to_string(d));
  CsvWriter w(path, hash_hex, cols);
  for (std::size_t s = 0; s < samples.size(); ++s)
    for (Index i = 0; i < samples[s].points.rows(); ++i) {
      std::vector<std::string> cells = {std::to_string(s), std::to_string(i)};
      for (Index d = 0; d < dim; ++d) cells.push_back(format_g17(samples[s].points(i, d)));
      w.row(cells);
    }
}

inline std::vector<Configuration> read_samples_csv(const std::filesystem::path& path, int p,
                                                   std::string* hash_out = nullptr) {
  const CsvFile file = read_csv(path);
  if (hash_out) *hash_out = file.config_hash;
  std::vector<Configuration> samples;
  const std::size_t dim = file.columns.size() - 2;
  for (const auto& cells : file.rows) {
    const std::size_t s = std::stoul(cells[0]);
    if (s >= samples.size()) {
      samples.resize(s + 1);
      samples[s].p = p;
    }
    Matrix& pts = samples[s].points;
    pts.conservativeResize(pts.rows() + 1, static_cast<Index>(dim));
    for (std::size_t d = 0; d < dim; ++d)
      pts(pts.rows() - 1, static_cast<Index>(d)) = std::stod(cells[2 + d]);
  }
  return samples;
}

inline void write_gram_csv(const std::filesystem::path& path, const std::string& hash_hex,
                           const GramMatrix& gm) {
  std::vector<std::string> cols;
  for (Index j = 0; j < gm.g.cols(); ++j) cols.push_back("c" + std::to_string(j));
  CsvWriter w(path, hash_hex, cols);
  for (Index i = 0; i < gm.g.rows(); ++i) {
    std::vector<std::string> cells;
    for (Index j = 0; j < gm.g.cols(); ++j) cells.push_back(format_g17(gm.g(i, j)));
    w.row(cells);
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw missing_input_error("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw missing_input_error("missing input file: " + path.string());
  json j;
  in >> j;
  return j;
}

}  // namespace betaens
