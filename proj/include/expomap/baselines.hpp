#pragma once

#include "expomap/grid.hpp"

namespace expomap {

// Inverse-distance weighting: w_i = d_i^-power with Euclidean cell distance,
// and the exact reading at sensor cells themselves.
ExposureGrid idw_interpolate(const SensorSet& sensors, const GridDims& dims, double power = 2.0);

// Each cell takes the value of its nearest sensor; ties go to the lowest
// (row, col) in lexicographic order.
ExposureGrid nearest_interpolate(const SensorSet& sensors, const GridDims& dims);

}  // namespace expomap
