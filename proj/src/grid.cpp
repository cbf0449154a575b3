#include "expomap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace expomap {

namespace {

std::string cell_str(int r, int c) {
  return "(" + std::to_string(r) + ", " + std::to_string(c) + ")";
}

// 17 significant digits: shortest form that round-trips IEEE double exactly.
std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

GridDims::GridDims(int rows_, int cols_, double cell_size_m_)
    : rows(rows_), cols(cols_), cell_size_m(cell_size_m_) {
  if (rows < 8 || cols < 8) {
    throw ValidationError("grid dims must be at least 8x8, got " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  if (!(cell_size_m > 0.0) || !std::isfinite(cell_size_m)) {
    throw ValidationError("cell_size_m must be positive and finite");
  }
}

ExposureGrid::ExposureGrid(GridDims dims, std::vector<double> values)
    : dims_(dims), values_(std::move(values)) {
  if (values_.size() != dims_.cell_count()) {
    throw ValidationError("exposure grid has " + std::to_string(values_.size()) +
                          " values, expected " + std::to_string(dims_.cell_count()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
      throw ValidationError("exposure value at flat index " + std::to_string(i) +
                            " is not a finite non-negative number");
    }
  }
}

ExposureGrid ExposureGrid::zeros(const GridDims& dims) {
  return ExposureGrid(dims, std::vector<double>(dims.cell_count(), 0.0));
}

double ExposureGrid::max_value() const {
  return *std::max_element(values_.begin(), values_.end());
}

BinaryGrid::BinaryGrid(GridDims dims, std::vector<std::uint8_t> bits)
    : dims_(dims), bits_(std::move(bits)) {
  if (bits_.size() != dims_.cell_count()) {
    throw ValidationError("binary grid has " + std::to_string(bits_.size()) +
                          " entries, expected " + std::to_string(dims_.cell_count()));
  }
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] > 1) {
      throw ValidationError("binary grid entry at flat index " + std::to_string(i) +
                            " is not 0 or 1");
    }
  }
}

BinaryGrid BinaryGrid::zeros(const GridDims& dims) {
  return BinaryGrid(dims, std::vector<std::uint8_t>(dims.cell_count(), 0));
}

std::size_t BinaryGrid::popcount() const {
  std::size_t n = 0;
  for (std::uint8_t b : bits_) n += b;
  return n;
}

SensorSet::SensorSet(GridDims dims, std::vector<SensorReading> readings)
    : dims_(dims), readings_(std::move(readings)) {
  if (readings_.size() > dims_.cell_count()) {
    throw ValidationError("sensor count exceeds cell count");
  }
  std::unordered_set<std::size_t> seen;
  for (const SensorReading& s : readings_) {
    if (!dims_.in_bounds(s.row, s.col)) {
      throw ValidationError("sensor at " + cell_str(s.row, s.col) + " is out of bounds for " +
                            std::to_string(dims_.rows) + "x" + std::to_string(dims_.cols));
    }
    if (!std::isfinite(s.value_vm) || s.value_vm < 0.0) {
      throw ValidationError("sensor at " + cell_str(s.row, s.col) +
                            " has a non-finite or negative value");
    }
    if (!seen.insert(dims_.index(s.row, s.col)).second) {
      throw ValidationError("duplicate sensor cell at " + cell_str(s.row, s.col));
    }
  }
}

SparseObservation rasterize_sensors(const SensorSet& sensors) {
  const GridDims& dims = sensors.dims();
  std::vector<double> values(dims.cell_count(), 0.0);
  std::vector<std::uint8_t> bits(dims.cell_count(), 0);
  for (const SensorReading& s : sensors.readings()) {
    const std::size_t i = dims.index(s.row, s.col);
    values[i] = s.value_vm;
    bits[i] = 1;
  }
  return SparseObservation{ExposureGrid(dims, std::move(values)),
                           BinaryGrid(dims, std::move(bits))};
}

NormalizedGrid normalize(const ExposureGrid& grid) {
  const double scale = grid.max_value();
  if (!(scale > 0.0)) {
    throw ValidationError("cannot normalize zero field");
  }
  std::vector<double> values(grid.values());
  for (double& v : values) v /= scale;
  return NormalizedGrid{ExposureGrid(grid.dims(), std::move(values)), scale};
}

namespace {

struct TokenReader {
  std::istream& in;
  std::string path;
  long line = 0;
  std::istringstream cur;

  explicit TokenReader(std::istream& in_, std::string path_) : in(in_), path(std::move(path_)) {}

  bool next_token(std::string& tok) {
    while (true) {
      if (cur >> tok) return true;
      std::string raw;
      if (!std::getline(in, raw)) return false;
      ++line;
      cur.clear();
      cur.str(raw);
    }
  }
};

double parse_double_token(const std::string& tok, const std::string& what, long line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError("cannot parse " + what + " from '" + tok + "'", line);
  }
  if (pos != tok.size()) {
    throw ParseError("trailing characters after " + what + " in '" + tok + "'", line);
  }
  return v;
}

std::vector<double> read_grid_body(const std::filesystem::path& path, GridDims& dims_out) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open grid file: " + path.string());
  }
  TokenReader rd(in, path.string());
  std::string tok;
  if (!rd.next_token(tok) || tok != "EMGRID") {
    throw ParseError("expected 'EMGRID' magic in " + path.string(), rd.line);
  }
  if (!rd.next_token(tok) || tok != "1") {
    throw ParseError("unsupported EMGRID version in " + path.string(), rd.line);
  }
  std::string rows_tok, cols_tok, cell_tok;
  if (!rd.next_token(rows_tok) || !rd.next_token(cols_tok) || !rd.next_token(cell_tok)) {
    throw ParseError("truncated EMGRID header in " + path.string(), rd.line);
  }
  const int rows = static_cast<int>(parse_double_token(rows_tok, "row count", rd.line));
  const int cols = static_cast<int>(parse_double_token(cols_tok, "column count", rd.line));
  const double cell = parse_double_token(cell_tok, "cell size", rd.line);
  GridDims dims;
  try {
    dims = GridDims(rows, cols, cell);
  } catch (const ValidationError& e) {
    throw ParseError(std::string(e.what()) + " in " + path.string(), rd.line);
  }
  std::vector<double> values;
  values.reserve(dims.cell_count());
  for (std::size_t i = 0; i < dims.cell_count(); ++i) {
    if (!rd.next_token(tok)) {
      throw ParseError("grid truncated at value " + std::to_string(i + 1) + " of " +
                           std::to_string(dims.cell_count()) + " in " + path.string(),
                       rd.line);
    }
    const double v = parse_double_token(tok, "grid value " + std::to_string(i + 1), rd.line);
    if (!std::isfinite(v)) {
      throw ParseError("non-finite grid value " + std::to_string(i + 1) + " in " + path.string(),
                       rd.line);
    }
    values.push_back(v);
  }
  if (rd.next_token(tok)) {
    throw ParseError("extra data after " + std::to_string(dims.cell_count()) +
                         " grid values in " + path.string(),
                     rd.line);
  }
  dims_out = dims;
  return values;
}

void write_grid_body(const GridDims& dims, const std::vector<double>& values,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open grid file for writing: " + path.string());
  }
  out << "EMGRID 1\n";
  out << dims.rows << " " << dims.cols << " " << format_value(dims.cell_size_m) << "\n";
  for (int r = 0; r < dims.rows; ++r) {
    for (int c = 0; c < dims.cols; ++c) {
      if (c) out << " ";
      out << format_value(values[dims.index(r, c)]);
    }
    out << "\n";
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

}  // namespace

void write_grid(const ExposureGrid& grid, const std::filesystem::path& path) {
  write_grid_body(grid.dims(), grid.values(), path);
}

ExposureGrid read_grid(const std::filesystem::path& path) {
  GridDims dims;
  std::vector<double> values = read_grid_body(path, dims);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0) {
      throw ParseError("negative exposure value " + std::to_string(i + 1) + " in " +
                       path.string());
    }
  }
  return ExposureGrid(dims, std::move(values));
}

void write_binary_grid(const BinaryGrid& grid, const std::filesystem::path& path) {
  std::vector<double> values(grid.bits().begin(), grid.bits().end());
  write_grid_body(grid.dims(), values, path);
}

BinaryGrid read_binary_grid(const std::filesystem::path& path) {
  GridDims dims;
  std::vector<double> values = read_grid_body(path, dims);
  std::vector<std::uint8_t> bits(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 0.0) {
      bits[i] = 0;
    } else if (values[i] == 1.0) {
      bits[i] = 1;
    } else {
      throw ParseError("binary raster value " + std::to_string(i + 1) + " is not 0 or 1 in " +
                       path.string());
    }
  }
  return BinaryGrid(dims, std::move(bits));
}

void write_sensors(const SensorSet& sensors, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open sensor file for writing: " + path.string());
  }
  out << "row,col,value_vm\n";
  for (const SensorReading& s : sensors.readings()) {
    out << s.row << "," << s.col << "," << format_value(s.value_vm) << "\n";
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

SensorSet read_sensors(const std::filesystem::path& path, const GridDims& dims) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open sensor file: " + path.string());
  }
  std::string raw;
  long line = 0;
  if (!std::getline(in, raw)) {
    throw ParseError("empty sensor file: " + path.string(), 1);
  }
  ++line;
  if (raw.size() && raw.back() == '\r') raw.pop_back();
  if (raw != "row,col,value_vm") {
    throw ParseError("expected header 'row,col,value_vm' in " + path.string(), line);
  }
  std::vector<SensorReading> readings;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.size() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    std::istringstream ls(raw);
    std::string f0, f1, f2;
    if (!std::getline(ls, f0, ',') || !std::getline(ls, f1, ',') || !std::getline(ls, f2)) {
      throw ParseError("expected 'row,col,value' in " + path.string(), line);
    }
    SensorReading s;
    s.row = static_cast<int>(parse_double_token(f0, "row", line));
    s.col = static_cast<int>(parse_double_token(f1, "col", line));
    s.value_vm = parse_double_token(f2, "value", line);
    if (!dims.in_bounds(s.row, s.col)) {
      throw ParseError("sensor " + cell_str(s.row, s.col) + " is out of bounds for " +
                           std::to_string(dims.rows) + "x" + std::to_string(dims.cols) + " in " +
                           path.string(),
                       line);
    }
    readings.push_back(s);
  }
  try {
    return SensorSet(dims, std::move(readings));
  } catch (const ValidationError& e) {
    throw ParseError(std::string(e.what()) + " in " + path.string());
  }
}

}  // namespace expomap
