#include "expomap/baselines.hpp"

#include <cmath>

namespace expomap {

namespace {

void check_inputs(const SensorSet& sensors, const GridDims& dims) {
  if (sensors.readings().empty()) {
    throw ValidationError("sensor set is empty");
  }
  if (!(sensors.dims() == dims)) {
    throw ValidationError("sensor set dimensions differ from the target grid");
  }
}

}  // namespace

ExposureGrid idw_interpolate(const SensorSet& sensors, const GridDims& dims, double power) {
  check_inputs(sensors, dims);
  if (!(power > 0.0)) {
    throw ValidationError("idw power must be positive");
  }
  if (sensors.readings().size() == 1) {
    // One site means a constant field; skip the w*v/w round trip so the
    // value survives exactly.
    return ExposureGrid(dims,
                        std::vector<double>(dims.cell_count(), sensors.readings()[0].value_vm));
  }
  std::vector<double> out(dims.cell_count());
  std::size_t o = 0;
  for (int r = 0; r < dims.rows; ++r) {
    for (int c = 0; c < dims.cols; ++c, ++o) {
      double wsum = 0.0;
      double vsum = 0.0;
      bool exact = false;
      for (const SensorReading& s : sensors.readings()) {
        const long dr = r - s.row;
        const long dc = c - s.col;
        const long d2 = dr * dr + dc * dc;
        if (d2 == 0) {
          out[o] = s.value_vm;
          exact = true;
          break;
        }
        const double w = std::pow(static_cast<double>(d2), -0.5 * power);
        wsum += w;
        vsum += w * s.value_vm;
      }
      if (!exact) out[o] = vsum / wsum;
    }
  }
  return ExposureGrid(dims, std::move(out));
}

ExposureGrid nearest_interpolate(const SensorSet& sensors, const GridDims& dims) {
  check_inputs(sensors, dims);
  std::vector<double> out(dims.cell_count());
  std::size_t o = 0;
  for (int r = 0; r < dims.rows; ++r) {
    for (int c = 0; c < dims.cols; ++c, ++o) {
      long best_d2 = -1;
      int best_r = 0;
      int best_c = 0;
      double best_v = 0.0;
      for (const SensorReading& s : sensors.readings()) {
        const long dr = r - s.row;
        const long dc = c - s.col;
        const long d2 = dr * dr + dc * dc;
        const bool closer =
            best_d2 < 0 || d2 < best_d2 ||
            (d2 == best_d2 && (s.row < best_r || (s.row == best_r && s.col < best_c)));
        if (closer) {
          best_d2 = d2;
          best_r = s.row;
          best_c = s.col;
          best_v = s.value_vm;
        }
      }
      out[o] = best_v;
    }
  }
  return ExposureGrid(dims, std::move(out));
}

}  // namespace expomap
