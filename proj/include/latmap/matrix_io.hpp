#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "latmap/count_matrix.hpp"

namespace latmap {

/// Dense real matrix with row and column ids (processed expression, latents).
struct LabeledMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  Matrix values;
};

/// Coordinate-format Matrix Market counts plus newline-delimited row/column id
/// files. With `transpose`, the file is read as genes x cells.
CountMatrix read_matrix_market(const std::filesystem::path& mtx, const std::filesystem::path& row_ids,
                               const std::filesystem::path& col_ids, bool transpose = false);
void write_matrix_market(const std::filesystem::path& mtx, const std::filesystem::path& row_ids,
                         const std::filesystem::path& col_ids, const CountMatrix& m);

/// Dense CSV: header = corner label then column ids; each row = id then integer counts.
CountMatrix read_count_csv(const std::filesystem::path& path);
void write_count_csv(const std::filesystem::path& path, const CountMatrix& m, const std::string& corner = "cell_id");

LabeledMatrix read_real_csv(const std::filesystem::path& path);
void write_real_csv(const std::filesystem::path& path, const LabeledMatrix& m, const std::string& corner = "id");

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

/// `spot_id,x,y`.
LabeledMatrix read_coords_csv(const std::filesystem::path& path);
void write_coords_csv(const std::filesystem::path& path, const std::vector<std::string>& ids, const Matrix& xy);

/// `id,label`.
struct LabelTable {
  std::vector<std::string> ids;
  std::vector<std::string> labels;
};
LabelTable read_label_csv(const std::filesystem::path& path);
void write_label_csv(const std::filesystem::path& path, const LabelTable& t);

/// Splits on commas; surrounding whitespace and a trailing '\r' are dropped.
std::vector<std::string> split_csv_line(const std::string& line);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace latmap
