#pragma once

#include <cstdint>
#include <vector>

#include "expomap/generator.hpp"
#include "expomap/grid.hpp"

namespace expomap {

struct ReconstructionConfig {
  PriorMode prior_mode = PriorMode::GLIP;
  int epochs = 150;
  double lr = 0.01;
  NetConfig net;
  std::uint64_t seed = 0;
  bool suppress_buildings = true;
  int log_every = 1;

  void validate() const;
};

struct LossSample {
  int iter = 0;
  double loss = 0.0;
};

struct ReconstructionResult {
  ExposureGrid predicted;  // de-normalized, V/m
  std::vector<LossSample> loss_curve;
  int epochs_run = 0;
  std::uint64_t seed = 0;
  double scale = 0.0;         // normalization scale: peak observed value in V/m
  double initial_loss = 0.0;  // first recorded masked loss, normalized units
  double final_loss = 0.0;    // masked loss of the emitted map, normalized units
};

// Sets building cells to exactly zero, leaves the rest untouched.
ExposureGrid suppress_buildings(const ExposureGrid& grid, const BuildingRaster& buildings);

// Fits a freshly initialized generator against the observed cells of
// `target` and returns the full predicted map. Sensors sitting inside
// buildings are dropped from the training mask. Only masked target cells are
// ever read, so unobserved values cannot influence the result. Throws
// DivergenceError when the loss turns non-finite, ValidationError when no
// usable observation remains or every observed value is zero.
ReconstructionResult fit_to_target(const ExposureGrid& target, const ObservationMask& mask,
                                   const BuildingRaster& buildings,
                                   const ReconstructionConfig& cfg);

// Convenience wrapper: rasterizes the sensor set and fits against it.
ReconstructionResult fit(const SensorSet& sensors, const BuildingRaster& buildings,
                         const ReconstructionConfig& cfg);

}  // namespace expomap
