#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "expomap/errors.hpp"

namespace expomap {

// Grid geometry shared by every raster in the library. Row-major indexing,
// cell (r, c) with r in [0, rows) and c in [0, cols).
struct GridDims {
  int rows = 0;
  int cols = 0;
  double cell_size_m = 1.0;

  GridDims() = default;
  GridDims(int rows_, int cols_, double cell_size_m_);

  std::size_t cell_count() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
  bool in_bounds(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }

  bool operator==(const GridDims& o) const {
    return rows == o.rows && cols == o.cols && cell_size_m == o.cell_size_m;
  }
};

// Dense scalar field of exposure values in V/m. Values are finite and
// non-negative; immutable after construction.
class ExposureGrid {
 public:
  ExposureGrid(GridDims dims, std::vector<double> values);
  static ExposureGrid zeros(const GridDims& dims);

  const GridDims& dims() const { return dims_; }
  const std::vector<double>& values() const { return values_; }
  double at(int r, int c) const { return values_[dims_.index(r, c)]; }
  double max_value() const;

 private:
  GridDims dims_;
  std::vector<double> values_;
};

// Binary raster over the grid. Serves both as an observation mask (1 = cell
// has a sensor reading) and as a building raster (1 = building).
class BinaryGrid {
 public:
  BinaryGrid(GridDims dims, std::vector<std::uint8_t> bits);
  static BinaryGrid zeros(const GridDims& dims);

  const GridDims& dims() const { return dims_; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  bool at(int r, int c) const { return bits_[dims_.index(r, c)] != 0; }
  std::size_t popcount() const;

 private:
  GridDims dims_;
  std::vector<std::uint8_t> bits_;
};

using ObservationMask = BinaryGrid;
using BuildingRaster = BinaryGrid;

// One point measurement: grid cell plus the measured field strength.
struct SensorReading {
  int row = 0;
  int col = 0;
  double value_vm = 0.0;
};

// A set of sensor readings over one grid. No two readings may share a cell.
class SensorSet {
 public:
  SensorSet(GridDims dims, std::vector<SensorReading> readings);

  const GridDims& dims() const { return dims_; }
  const std::vector<SensorReading>& readings() const { return readings_; }
  std::size_t size() const { return readings_.size(); }
  bool empty() const { return readings_.empty(); }

 private:
  GridDims dims_;
  std::vector<SensorReading> readings_;
};

// Sparse observation image: sensor values rasterized onto the grid (zero at
// unobserved cells) plus the mask saying which cells were observed.
struct SparseObservation {
  ExposureGrid image;
  ObservationMask mask;
};

SparseObservation rasterize_sensors(const SensorSet& sensors);

// Scales a grid so its maximum becomes exactly 1. Throws on all-zero input.
struct NormalizedGrid {
  ExposureGrid grid;
  double scale;
};

NormalizedGrid normalize(const ExposureGrid& grid);

// EMGRID v1: "EMGRID 1" header, then "<rows> <cols> <cell_size_m>", then
// rows*cols whitespace-separated values, row-major. Round-trips exactly.
void write_grid(const ExposureGrid& grid, const std::filesystem::path& path);
ExposureGrid read_grid(const std::filesystem::path& path);

// Same container for binary rasters; values must all be 0 or 1 on read.
void write_binary_grid(const BinaryGrid& grid, const std::filesystem::path& path);
BinaryGrid read_binary_grid(const std::filesystem::path& path);

// Sensor CSV: header "row,col,value_vm", one reading per line. The file does
// not carry grid dimensions, so reading validates against the expected dims.
void write_sensors(const SensorSet& sensors, const std::filesystem::path& path);
SensorSet read_sensors(const std::filesystem::path& path, const GridDims& dims);

}  // namespace expomap
