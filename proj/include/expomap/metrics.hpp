#pragma once

#include "expomap/grid.hpp"

namespace expomap {

struct ErrorReport {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t n_evaluated = 0;
  ExposureGrid error_map;  // cellwise |reference - predicted| over the full grid
};

// Mean squared / mean absolute error over the cells where eval_mask is 1.
double mse(const ExposureGrid& reference, const ExposureGrid& predicted,
           const BinaryGrid& eval_mask);
double mae(const ExposureGrid& reference, const ExposureGrid& predicted,
           const BinaryGrid& eval_mask);

ExposureGrid error_map(const ExposureGrid& reference, const ExposureGrid& predicted);

ErrorReport evaluate(const ExposureGrid& reference, const ExposureGrid& predicted,
                     const BinaryGrid& eval_mask);

// Held-out evaluation mask: every cell that is neither a sensor site nor a
// building. Sensor cells are fit by construction and building cells are
// suppressed to zero on both sides, so neither says anything about
// generalization.
BinaryGrid heldout_mask(const ObservationMask& sensor_mask, const BuildingRaster& buildings);

}  // namespace expomap
