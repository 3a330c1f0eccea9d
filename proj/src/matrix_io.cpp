#include "latmap/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "latmap/errors.hpp"

namespace latmap {

namespace {

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void fail(const std::filesystem::path& p, std::size_t line, const std::string& msg) {
  throw DataError(p.string() + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& s, const std::filesystem::path& p, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(p, line, "not a number: '" + s + "'");
  return v;
}

std::int64_t parse_count(const std::string& s, const std::filesystem::path& p, std::size_t line) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) {
    if (v < 0) fail(p, line, "negative count " + s);
    return v;
  }
  // Accept integral reals such as "3.0".
  const double d = parse_double(s, p, line);
  if (d < 0 || d != std::floor(d)) fail(p, line, "count is not a non-negative integer: '" + s + "'");
  return static_cast<std::int64_t>(d);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  auto out = open_out(path);
  for (const auto& l : lines) out << l << "\n";
}

CountMatrix read_matrix_market(const std::filesystem::path& mtx, const std::filesystem::path& row_ids,
                               const std::filesystem::path& col_ids, bool transpose) {
  auto in = open_in(mtx);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(mtx, 1, "empty file");
  ++lineno;
  {
    std::istringstream hs(line);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || object != "matrix" || format != "coordinate") {
      fail(mtx, lineno, "expected '%%MatrixMarket matrix coordinate ...' header");
    }
    if (field != "integer" && field != "real") fail(mtx, lineno, "unsupported field '" + field + "'");
    if (symmetry != "general") fail(mtx, lineno, "unsupported symmetry '" + symmetry + "'");
  }
  Index nr = -1, nc = -1, nnz = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    if (!(ss >> nr >> nc >> nnz) || nr < 0 || nc < 0 || nnz < 0) fail(mtx, lineno, "bad size line");
    break;
  }
  if (nr < 0) fail(mtx, lineno, "missing size line");
  if (transpose) std::swap(nr, nc);

  std::vector<Eigen::Triplet<std::int64_t>> trips;
  trips.reserve(static_cast<std::size_t>(nnz));
  Index seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    Index i = 0, j = 0;
    std::string val;
    if (!(ss >> i >> j >> val)) fail(mtx, lineno, "bad entry");
    if (transpose) std::swap(i, j);
    if (i < 1 || i > nr || j < 1 || j > nc) fail(mtx, lineno, "index out of range");
    trips.emplace_back(i - 1, j - 1, parse_count(val, mtx, lineno));
    ++seen;
  }
  if (seen != nnz) fail(mtx, lineno, "expected " + std::to_string(nnz) + " entries, found " + std::to_string(seen));
  CountStorage m(nr, nc);
  m.setFromTriplets(trips.begin(), trips.end());  // duplicates are summed
  auto rows = read_lines(row_ids);
  auto cols = read_lines(col_ids);
  if (static_cast<Index>(rows.size()) != nr) {
    throw DataError(row_ids.string() + ": " + std::to_string(rows.size()) + " ids for " + std::to_string(nr) + " rows");
  }
  if (static_cast<Index>(cols.size()) != nc) {
    throw DataError(col_ids.string() + ": " + std::to_string(cols.size()) + " ids for " + std::to_string(nc) +
                    " columns");
  }
  return CountMatrix(std::move(rows), std::move(cols), std::move(m));
}

void write_matrix_market(const std::filesystem::path& mtx, const std::filesystem::path& row_ids,
                         const std::filesystem::path& col_ids, const CountMatrix& m) {
  auto out = open_out(mtx);
  out << "%%MatrixMarket matrix coordinate integer general\n";
  out << m.rows() << " " << m.cols() << " " << m.counts().nonZeros() << "\n";
  for (Index r = 0; r < m.counts().outerSize(); ++r) {
    for (CountStorage::InnerIterator it(m.counts(), r); it; ++it) {
      out << (it.row() + 1) << " " << (it.col() + 1) << " " << it.value() << "\n";
    }
  }
  write_lines(row_ids, m.row_ids());
  write_lines(col_ids, m.col_ids());
}

CountMatrix read_count_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2) fail(path, 1, "header needs an id column and at least one gene");
  std::vector<std::string> cols(header.begin() + 1, header.end());
  std::vector<std::string> rows;
  std::vector<Eigen::Triplet<std::int64_t>> trips;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail(path, lineno, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    const auto r = static_cast<Index>(rows.size());
    rows.push_back(fields[0]);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      const auto v = parse_count(fields[j], path, lineno);
      if (v != 0) trips.emplace_back(r, static_cast<Index>(j - 1), v);
    }
  }
  CountStorage m(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  m.setFromTriplets(trips.begin(), trips.end());
  try {
    return CountMatrix(std::move(rows), std::move(cols), std::move(m));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_count_csv(const std::filesystem::path& path, const CountMatrix& m, const std::string& corner) {
  auto out = open_out(path);
  out << corner;
  for (const auto& c : m.col_ids()) out << "," << c;
  out << "\n";
  const auto dense = m.to_dense();
  for (Index r = 0; r < dense.rows(); ++r) {
    out << m.row_ids()[static_cast<std::size_t>(r)];
    for (Index c = 0; c < dense.cols(); ++c) out << "," << dense(r, c);
    out << "\n";
  }
}

LabeledMatrix read_real_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "empty file");
  auto header = split_csv_line(line);
  if (header.empty()) fail(path, 1, "empty header");
  LabeledMatrix out;
  out.col_ids.assign(header.begin() + 1, header.end());
  std::vector<double> flat;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail(path, lineno, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    out.row_ids.push_back(fields[0]);
    for (std::size_t j = 1; j < fields.size(); ++j) flat.push_back(parse_double(fields[j], path, lineno));
  }
  const auto n = static_cast<Index>(out.row_ids.size());
  const auto d = static_cast<Index>(out.col_ids.size());
  out.values = Matrix(n, d);
  if (!flat.empty()) std::copy(flat.begin(), flat.end(), out.values.data());
  return out;
}

void write_real_csv(const std::filesystem::path& path, const LabeledMatrix& m, const std::string& corner) {
  if (static_cast<Index>(m.row_ids.size()) != m.values.rows() ||
      static_cast<Index>(m.col_ids.size()) != m.values.cols()) {
    throw DimensionError("write_real_csv: ids do not match matrix shape");
  }
  auto out = open_out(path);
  out << corner;
  for (const auto& c : m.col_ids) out << "," << c;
  out << "\n";
  for (Index r = 0; r < m.values.rows(); ++r) {
    out << m.row_ids[static_cast<std::size_t>(r)];
    for (Index c = 0; c < m.values.cols(); ++c) out << "," << format_double(m.values(r, c));
    out << "\n";
  }
}

LabeledMatrix read_coords_csv(const std::filesystem::path& path) {
  auto m = read_real_csv(path);
  if (m.col_ids.size() != 2) throw DataError(path.string() + ": expected header spot_id,x,y");
  return m;
}

void write_coords_csv(const std::filesystem::path& path, const std::vector<std::string>& ids, const Matrix& xy) {
  write_real_csv(path, LabeledMatrix{ids, {"x", "y"}, xy}, "spot_id");
}

LabelTable read_label_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  LabelTable t;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 2) fail(path, lineno, "expected id,label");
    if (lineno == 1 && f[0] == "id") continue;
    t.ids.push_back(f[0]);
    t.labels.push_back(f[1]);
  }
  return t;
}

void write_label_csv(const std::filesystem::path& path, const LabelTable& t) {
  auto out = open_out(path);
  out << "id,label\n";
  for (std::size_t i = 0; i < t.ids.size(); ++i) out << t.ids[i] << "," << t.labels[i] << "\n";
}

}  // namespace latmap
