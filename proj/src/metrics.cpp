#include "expomap/metrics.hpp"

#include <cmath>

namespace expomap {

namespace {

void check_shapes(const ExposureGrid& reference, const ExposureGrid& predicted,
                  const BinaryGrid& eval_mask) {
  if (!(reference.dims() == predicted.dims())) {
    throw ValidationError("reference and predicted grid dimensions differ");
  }
  if (!(reference.dims() == eval_mask.dims())) {
    throw ValidationError("evaluation mask dimensions differ from the grids");
  }
  if (eval_mask.popcount() == 0) {
    throw ValidationError("evaluation mask selects no cells");
  }
}

}  // namespace

double mse(const ExposureGrid& reference, const ExposureGrid& predicted,
           const BinaryGrid& eval_mask) {
  check_shapes(reference, predicted, eval_mask);
  double acc = 0.0;
  for (std::size_t i = 0; i < reference.values().size(); ++i) {
    if (!eval_mask.bits()[i]) continue;
    const double d = reference.values()[i] - predicted.values()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(eval_mask.popcount());
}

double mae(const ExposureGrid& reference, const ExposureGrid& predicted,
           const BinaryGrid& eval_mask) {
  check_shapes(reference, predicted, eval_mask);
  double acc = 0.0;
  for (std::size_t i = 0; i < reference.values().size(); ++i) {
    if (!eval_mask.bits()[i]) continue;
    acc += std::abs(reference.values()[i] - predicted.values()[i]);
  }
  return acc / static_cast<double>(eval_mask.popcount());
}

ExposureGrid error_map(const ExposureGrid& reference, const ExposureGrid& predicted) {
  if (!(reference.dims() == predicted.dims())) {
    throw ValidationError("reference and predicted grid dimensions differ");
  }
  std::vector<double> v(reference.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::abs(reference.values()[i] - predicted.values()[i]);
  }
  return ExposureGrid(reference.dims(), std::move(v));
}

ErrorReport evaluate(const ExposureGrid& reference, const ExposureGrid& predicted,
                     const BinaryGrid& eval_mask) {
  check_shapes(reference, predicted, eval_mask);
  double sq = 0.0;
  double ab = 0.0;
  std::vector<double> emap(reference.values().size());
  for (std::size_t i = 0; i < emap.size(); ++i) {
    const double d = reference.values()[i] - predicted.values()[i];
    emap[i] = std::abs(d);
    if (eval_mask.bits()[i]) {
      sq += d * d;
      ab += std::abs(d);
    }
  }
  const double n = static_cast<double>(eval_mask.popcount());
  return ErrorReport{sq / n, ab / n, eval_mask.popcount(),
                     ExposureGrid(reference.dims(), std::move(emap))};
}

BinaryGrid heldout_mask(const ObservationMask& sensor_mask, const BuildingRaster& buildings) {
  if (!(sensor_mask.dims() == buildings.dims())) {
    throw ValidationError("sensor mask and building raster dimensions differ");
  }
  std::vector<std::uint8_t> bits(sensor_mask.bits().size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = (sensor_mask.bits()[i] == 0 && buildings.bits()[i] == 0) ? 1 : 0;
  }
  return BinaryGrid(sensor_mask.dims(), std::move(bits));
}

}  // namespace expomap
